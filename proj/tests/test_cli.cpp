#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

const fs::path& scratch() {
  static const fs::path p = [] {
    fs::path d = fs::temp_directory_path() / ("gcond_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args) {
  static int counter = 0;
  const fs::path o = scratch() / ("stdout" + std::to_string(counter));
  const fs::path e = scratch() / ("stderr" + std::to_string(counter++));
  const std::string cmd = std::string(GCOND_CLI_PATH) + " " + args + " >" + o.string() + " 2>" + e.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) out[fs::relative(entry.path(), dir).string()] = slurp(entry.path());
  return out;
}

int lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

fs::path dataset() {
  static const fs::path g = [] {
    const fs::path d = scratch() / "g";
    const auto r = run("gen --model sbm --blocks 20,20,20 --p-in 0.3 --p-out 0.02 --dims 8 --seed 7 --out " + d.string());
    EXPECT_EQ(r.code, 0) << r.err;
    return d;
  }();
  return g;
}

const std::string kQuickCondense = " --ratio 0.1 --epochs 2 --match-steps 3 --adj-hidden 8 ";

}  // namespace

TEST(Cli, GenThenSpectralProducesParsableReport) {
  const fs::path g = scratch() / "er";
  ASSERT_EQ(run("gen --model er --p 0.2 --nodes 200 --dims 64 --seed 7 --out " + g.string()).code, 0);
  const fs::path r = scratch() / "r";
  const auto res = run("spectral --data " + g.string() + " --out " + r.string());
  ASSERT_EQ(res.code, 0) << res.err;
  const auto j = nlohmann::json::parse(slurp(r / "spectral-report.json"));
  EXPECT_GE(j.at("high_freq_area_mean").get<double>(), 0.0);
  EXPECT_LE(j.at("high_freq_area_mean").get<double>(), 2.0);
  EXPECT_EQ(j.size(), 6u);
}

TEST(Cli, CondenseIsDeterministicAcrossRuns) {
  const fs::path a = scratch() / "c1", b = scratch() / "c2";
  const std::string common = "condense --data " + dataset().string() + kQuickCondense + "--beta 0.3 --metric ctrl --seed 1";
  ASSERT_EQ(run(common + " --out " + a.string()).code, 0);
  ASSERT_EQ(run(common + " --out " + b.string()).code, 0);
  const auto ta = tree(a), tb = tree(b);
  EXPECT_EQ(ta, tb);
  EXPECT_TRUE(ta.count("graph/features.csv"));
  EXPECT_EQ(ta.at("trajectory.csv").substr(0, 51), "epoch,step,class,cos_gap,mag_gap,l2_gap,match_loss\n");
  EXPECT_EQ(ta.at("trajectory.csv").find('\r'), std::string::npos);
}

TEST(Cli, EchoedConfigReproducesTheRun) {
  const fs::path a = scratch() / "e1", b = scratch() / "e2";
  ASSERT_EQ(run("condense --data " + dataset().string() + kQuickCondense + "--seed 3 --metric cos --out " + a.string()).code, 0);
  ASSERT_EQ(run("condense --config " + (a / "config.json").string() + " --out " + b.string()).code, 0);
  EXPECT_EQ(tree(a), tree(b));
}

TEST(Cli, FlagsOverrideConfigFile) {
  const fs::path cfg = scratch() / "override.json";
  std::ofstream(cfg) << R"({"model": "er", "p": 0.5, "nodes": 30, "dims": 2, "seed": 1})";
  const fs::path a = scratch() / "ov";
  ASSERT_EQ(run("gen --config " + cfg.string() + " --nodes 12 --out " + a.string()).code, 0);
  const auto meta = nlohmann::json::parse(slurp(a / "meta.json"));
  EXPECT_EQ(meta.at("num_nodes").get<int>(), 12);
  const auto echo = nlohmann::json::parse(slurp(a / "config.json"));
  EXPECT_EQ(echo.at("p").get<double>(), 0.5);
}

TEST(Cli, InputDirectoryIsNotModified) {
  const auto before = tree(dataset());
  ASSERT_EQ(run("condense --data " + dataset().string() + kQuickCondense + "--seed 1 --out " + (scratch() / "nm").string()).code, 0);
  EXPECT_EQ(tree(dataset()), before);
  EXPECT_EQ(run("spectral --data " + dataset().string() + " --out " + dataset().string()).code, 1);
  EXPECT_EQ(tree(dataset()), before);
}

TEST(Cli, GradcheckPassesAndReportsBothErrors) {
  const auto r = run("gradcheck");
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("first_order_max_rel_error="), std::string::npos);
  EXPECT_NE(r.out.find("second_order_max_rel_error="), std::string::npos);
}

TEST(Cli, GradcheckFailsWhenToleranceIsUnreachable) {
  const auto r = run("gradcheck --tolerance 1e-300");
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, UnknownConfigKeyIsASingleLineError) {
  const fs::path cfg = scratch() / "bad.json";
  std::ofstream(cfg) << R"({"nodes": 10, "colour": "blue"})";
  const auto r = run("gen --config " + cfg.string() + " --seed 1 --out " + (scratch() / "x").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(lines(r.err), 1);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST(Cli, MissingSeedIsRejected) {
  const auto r = run("gen --out " + (scratch() / "noseed").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--seed"), std::string::npos);
  EXPECT_EQ(lines(r.err), 1);
}

TEST(Cli, UnknownFlagAndBadValuesAreRejected) {
  EXPECT_EQ(run("gen --seed 1 --colour blue --out " + (scratch() / "y").string()).code, 1);
  const auto r = run("gen --seed 1 --nodes ten --out " + (scratch() / "y").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(lines(r.err), 1);
  EXPECT_EQ(run("gen --seed 1 --model ba --m-edges 500 --nodes 10 --out " + (scratch() / "y").string()).code, 1);
}

TEST(Cli, DivergenceExitsWithTwo) {
  const auto r = run("condense --data " + dataset().string() + kQuickCondense + "--lr-feat 1e308 --seed 1 --out " +
                     (scratch() / "div").string());
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_EQ(lines(r.err), 1);
}

TEST(Cli, EvaluateDiagnoseAndFreqgradWriteTheirArtifacts) {
  const fs::path c = scratch() / "for_eval";
  ASSERT_EQ(run("condense --data " + dataset().string() + kQuickCondense + "--seed 2 --out " + c.string()).code, 0);

  const fs::path ev = scratch() / "ev";
  auto r = run("evaluate --data " + dataset().string() + " --condensed " + (c / "graph").string() +
               " --archs gcn,mlp --seeds 2 --max-epochs 50 --seed 1 --jobs 2 --out " + ev.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = nlohmann::json::parse(slurp(ev / "eval-report.json"));
  EXPECT_EQ(rep.at("results").size(), 2u);
  EXPECT_EQ(rep.at("results")[0].at("accuracies").size(), 2u);

  const fs::path rnd = scratch() / "rnd";
  EXPECT_EQ(run("evaluate --data " + dataset().string() + " --random-ratio 0.2 --archs sgc --seeds 1 --seed 1 --out " +
                rnd.string()).code, 0);

  const fs::path dg = scratch() / "dg";
  r = run("diagnose --data " + dataset().string() + " --synthetic " + (c / "graph").string() + " --seed 1 --out " +
          dg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(dg / "error-decomposition.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "stage,eps,delta,init,residual");
  EXPECT_EQ(lines(csv), 16);

  const fs::path fg = scratch() / "fg";
  r = run("freqgrad --nodes 30 --dims 4 --trials 10 --epochs 3 --seed 1 --out " + fg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string t = slurp(fg / "freq_grad.csv");
  EXPECT_EQ(t.substr(0, t.find('\n')), "trial,bias,s_high_mean,grad_mag");
  EXPECT_EQ(lines(t), 11);
}
