// gcond command-line tool.
//
//   gcond <command> [--config file.json] [--key value ...] --out DIR
//
// Settings come from a flat JSON object whose keys are snake_case; every key can
// be overridden by the matching --kebab-case flag. The resolved settings, minus
// the output path, are written to DIR/config.json, which is itself a valid
// --config file.
//
// Exit codes: 0 success, 1 invalid input (one "error: ..." line on stderr),
// 2 numerical divergence.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gcond/gcond.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gcond;

namespace {

enum class Kind { Int, UInt, Double, String, Bool };

struct Key {
  std::string name;
  Kind kind;
  json fallback;  // null means "no default"
  std::string help;
};

std::string kebab(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

// ---- key tables -------------------------------------------------------------

std::vector<Key> model_keys(const std::string& arch = "gcn") {
  return {{"arch", Kind::String, arch, "sgc, gcn or mlp"},
          {"k_hops", Kind::Int, 2, "SGC propagation steps"},
          {"layers", Kind::Int, 2, "GCN/MLP layers (2 or 3)"},
          {"hidden", Kind::Int, 64, "GCN/MLP hidden units"},
          {"weight_decay", Kind::Double, 5e-4, "L2 penalty"}};
}

std::vector<Key> graph_keys() {
  return {{"model", Kind::String, "er", "er, ba, ws or sbm"},
          {"nodes", Kind::Int, 200, "node count (er/ba/ws)"},
          {"p", Kind::Double, 0.2, "edge probability (er)"},
          {"m_edges", Kind::Int, 2, "edges per arrival (ba)"},
          {"k_neighbors", Kind::Int, 4, "lattice degree (ws)"},
          {"p_rewire", Kind::Double, 0.2, "rewiring probability (ws)"},
          {"blocks", Kind::String, "100,100,100", "block sizes (sbm)"},
          {"p_in", Kind::Double, 0.3, "within-block probability (sbm)"},
          {"p_out", Kind::Double, 0.02, "between-block probability (sbm)"},
          {"classes", Kind::Int, 4, "label count (er/ba/ws)"},
          {"dims", Kind::Int, 128, "feature dimensions"}};
}

std::vector<Key> concat(std::vector<std::vector<Key>> parts) {
  std::vector<Key> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

const std::vector<Key>& keys_for(const std::string& cmd) {
  static const std::map<std::string, std::vector<Key>> table = {
      {"gen", concat({graph_keys(),
                      {{"bias", Kind::Double, 0.0, "feature mean"},
                       {"std", Kind::Double, 1.0, "feature standard deviation"},
                       {"train_fraction", Kind::Double, 0.5, "per-class train share"},
                       {"val_fraction", Kind::Double, 0.2, "per-class validation share"},
                       {"seed", Kind::UInt, nullptr, "random seed"},
                       {"out", Kind::String, nullptr, "output dataset directory"}}})},
      {"condense", concat({{{"data", Kind::String, nullptr, "input dataset directory"},
                            {"ratio", Kind::Double, 0.1, "synthetic nodes / training nodes"},
                            {"epochs", Kind::Int, 600, "outer epochs"},
                            {"reinit_every", Kind::Int, 20, "backbone re-initialization interval (epochs)"},
                            {"match_steps", Kind::Int, 10, "matching steps per epoch"},
                            {"inner_steps", Kind::Int, 3, "backbone steps on the synthetic graph per matching step"},
                            {"lr_model", Kind::Double, 0.01, "backbone learning rate"},
                            {"lr_feat", Kind::Double, 0.01, "synthetic feature learning rate"},
                            {"lr_adj", Kind::Double, 0.01, "adjacency generator learning rate"},
                            {"feat_steps", Kind::Int, 10, "feature steps per alternation cycle"},
                            {"adj_steps", Kind::Int, 10, "adjacency steps per alternation cycle"},
                            {"adj_hidden", Kind::Int, 128, "adjacency generator hidden units"},
                            {"init", Kind::String, "kmeans", "kmeans or random"},
                            {"class_weighting", Kind::Bool, false, "weight class terms by class share"},
                            {"beta", Kind::Double, 0.3, "magnitude weight"},
                            {"metric", Kind::String, "ctrl", "cos, norm, cos+norm or ctrl"},
                            {"grad_threshold", Kind::Double, nullptr, "direction-only above this column norm"},
                            {"threshold", Kind::Double, 0.5, "edge threshold when exporting the graph"},
                            {"seed", Kind::UInt, nullptr, "random seed"},
                            {"jobs", Kind::Int, 1, "worker threads"},
                            {"out", Kind::String, nullptr, "output directory"}},
                           model_keys("sgc")})},
      {"evaluate", concat({{{"data", Kind::String, nullptr, "original dataset directory"},
                            {"condensed", Kind::String, "", "graph to train on (default: the original)"},
                            {"random_ratio", Kind::Double, nullptr, "train on a random coreset of this ratio instead"},
                            {"archs", Kind::String, "gcn,sgc,mlp", "architectures"},
                            {"seeds", Kind::Int, 10, "seeds per architecture"},
                            {"max_epochs", Kind::Int, 600, "evaluator epochs"},
                            {"patience", Kind::Int, 50, "early-stopping patience"},
                            {"lr", Kind::Double, 0.01, "evaluator learning rate"},
                            {"seed", Kind::UInt, nullptr, "base seed"},
                            {"jobs", Kind::Int, 1, "worker threads"},
                            {"out", Kind::String, nullptr, "output directory"}},
                           model_keys()})},
      {"spectral", {{"data", Kind::String, nullptr, "dataset directory"},
                    {"compare", Kind::String, "", "second dataset for a fidelity score"},
                    {"cutoff", Kind::Double, kDefaultLowFrequencyCutoff, "low-frequency eigenvalue cutoff"},
                    {"out", Kind::String, nullptr, "output directory"}}},
      {"diagnose", concat({{{"data", Kind::String, nullptr, "original dataset directory"},
                            {"synthetic", Kind::String, nullptr, "condensed dataset directory"},
                            {"stages", Kind::Int, 15, "gradient-descent stages"},
                            {"step_size", Kind::Double, 0.1, "gradient-descent step"},
                            {"seed", Kind::UInt, nullptr, "shared initialization seed"},
                            {"out", Kind::String, nullptr, "output directory"}},
                           model_keys("sgc")})},
      {"gradcheck", {{"seed", Kind::UInt, 0, "instance seed"},
                     {"epsilon", Kind::Double, 1e-6, "finite-difference step"},
                     {"tolerance", Kind::Double, 1e-4, "maximum accepted relative error"},
                     {"out", Kind::String, "", "optional output directory"}}},
      {"freqgrad", concat({graph_keys(),
                           {{"biases", Kind::String, "1,2,3,4,5", "feature means, cycled over trials"},
                            {"std", Kind::Double, 1.0, "feature standard deviation"},
                            {"trials", Kind::Int, 100, "trials"},
                            {"epochs", Kind::Int, 50, "training epochs per trial"},
                            {"lr", Kind::Double, 0.01, "learning rate"},
                            {"seed", Kind::UInt, nullptr, "seed for the trial seed list"},
                            {"out", Kind::String, nullptr, "output directory"}},
                           model_keys("sgc")})},
  };
  auto it = table.find(cmd);
  require(it != table.end(), "unknown command '" + cmd + "'");
  return it->second;
}

// ---- value parsing ----------------------------------------------------------

json parse_flag(const Key& k, const std::string& raw) {
  const std::string where = "--" + kebab(k.name);
  try {
    std::size_t used = 0;
    switch (k.kind) {
      case Kind::Int: {
        const long long v = std::stoll(raw, &used);
        require(used == raw.size(), "");
        return v;
      }
      case Kind::UInt: {
        require(!raw.empty() && raw[0] != '-', "");
        const unsigned long long v = std::stoull(raw, &used);
        require(used == raw.size(), "");
        return v;
      }
      case Kind::Double: {
        const double v = std::stod(raw, &used);
        require(used == raw.size(), "");
        return v;
      }
      case Kind::Bool:
        if (raw == "true" || raw == "1") return true;
        if (raw == "false" || raw == "0") return false;
        require(false, "");
        break;
      case Kind::String: return raw;
    }
  } catch (const std::logic_error&) {
  }
  throw ValidationError("invalid value '" + raw + "' for " + where);
}

void check_type(const Key& k, const json& v) {
  bool ok = false;
  switch (k.kind) {
    case Kind::Int: ok = v.is_number_integer(); break;
    case Kind::UInt: ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); break;
    case Kind::Double: ok = v.is_number(); break;
    case Kind::String: ok = v.is_string(); break;
    case Kind::Bool: ok = v.is_boolean(); break;
  }
  require(ok || v.is_null(), "config key '" + k.name + "' has the wrong type");
}

class Settings {
 public:
  explicit Settings(json j) : j_(std::move(j)) {}

  bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }
  int i(const std::string& k) const { return j_.at(k).get<int>(); }
  std::uint64_t u(const std::string& k) const { return j_.at(k).get<std::uint64_t>(); }
  double d(const std::string& k) const { return j_.at(k).get<double>(); }
  std::string s(const std::string& k) const { return j_.at(k).get<std::string>(); }
  bool b(const std::string& k) const { return j_.at(k).get<bool>(); }
  const json& raw() const { return j_; }

 private:
  json j_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> split_doubles(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_flag(Key{key, Kind::Double, nullptr, ""}, item).get<double>());
  return out;
}

// ---- settings -> library configs ---------------------------------------------

ModelSpec model_spec(const Settings& s, const std::string& arch) {
  ModelSpec m;
  m.arch = parse_arch(arch);
  m.k_hops = s.i("k_hops");
  m.num_layers = s.i("layers");
  m.hidden_units = s.i("hidden");
  m.weight_decay = s.d("weight_decay");
  return m;
}

GeneratorSpec generator_spec(const Settings& s) {
  GeneratorSpec g;
  const std::string model = s.s("model");
  if (model == "er") {
    g.model = ErdosRenyi{s.d("p")};
  } else if (model == "ba") {
    g.model = BarabasiAlbert{s.i("m_edges")};
  } else if (model == "ws") {
    g.model = WattsStrogatz{s.i("k_neighbors"), s.d("p_rewire")};
  } else if (model == "sbm") {
    std::vector<int> blocks;
    for (double b : split_doubles(s.s("blocks"), "blocks")) {
      require(b == std::floor(b) && b >= 1, "blocks must be positive integers");
      blocks.push_back(static_cast<int>(b));
    }
    g.model = StochasticBlockModel{blocks, s.d("p_in"), s.d("p_out")};
  } else {
    throw ValidationError("unknown graph model '" + model + "' (expected er, ba, ws or sbm)");
  }
  g.num_nodes = s.i("nodes");
  g.num_features = s.i("dims");
  g.num_classes = s.i("classes");
  g.seed = s.u("seed");
  return g;
}

void ensure_distinct(const fs::path& out, const std::vector<std::string>& inputs) {
  const auto o = fs::weakly_canonical(out);
  for (const auto& in : inputs) {
    if (in.empty()) continue;
    require(fs::weakly_canonical(in) != o, "--out must differ from input directory " + in);
  }
}

fs::path prepare_out(const Settings& s) {
  const fs::path out = s.s("out");
  fs::create_directories(out);
  json echo = s.raw();
  echo.erase("out");  // two runs into different directories stay byte-identical
  write_json(echo, out / "config.json");
  return out;
}

// ---- commands ------------------------------------------------------------------

int cmd_gen(const Settings& s) {
  GeneratorSpec g = generator_spec(s);
  g.feature_bias = s.d("bias");
  g.feature_std = s.d("std");
  g.train_fraction = s.d("train_fraction");
  g.val_fraction = s.d("val_fraction");
  const GraphDataset d = generate_graph(g);
  const fs::path out = prepare_out(s);
  save_dataset(d, out);
  std::cout << "nodes=" << d.num_nodes << " edges=" << d.num_edges() << " classes=" << d.num_classes << '\n';
  return 0;
}

int cmd_condense(const Settings& s) {
  ensure_distinct(s.s("out"), {s.s("data")});
  const GraphDataset data = load_dataset(s.s("data"));
  CondenseConfig c;
  c.ratio = s.d("ratio");
  c.outer_epochs = s.i("epochs");
  c.model_reinit_every = s.i("reinit_every");
  c.match_steps_per_epoch = s.i("match_steps");
  c.inner_model_steps = s.i("inner_steps");
  c.lr_model = s.d("lr_model");
  c.lr_feat = s.d("lr_feat");
  c.lr_adj = s.d("lr_adj");
  c.feat_steps = s.i("feat_steps");
  c.adj_steps = s.i("adj_steps");
  c.adj_hidden = s.i("adj_hidden");
  c.init = parse_init(s.s("init"));
  c.class_weighting = s.b("class_weighting");
  c.match.beta = s.d("beta");
  c.match.metric = parse_metric(s.s("metric"));
  if (s.has("grad_threshold")) c.match.grad_threshold = s.d("grad_threshold");
  c.backbone = model_spec(s, s.s("arch"));
  c.seed = s.u("seed");
  c.jobs = s.i("jobs");

  const CondenseResult r = condense(data, c);
  const GraphDataset graph = finalize(r.synthetic, s.d("threshold"));
  const fs::path out = prepare_out(s);
  save_dataset(graph, out / "graph");
  write_trajectory_csv(r.log, out / "trajectory.csv");
  json summary = r.log.empty() ? json::object() : to_json(trajectory_report(r.log));
  summary["synthetic_nodes"] = graph.num_nodes;
  summary["synthetic_edges"] = graph.num_edges();
  write_json(summary, out / "summary.json");
  std::cout << "synthetic_nodes=" << graph.num_nodes << " edges=" << graph.num_edges();
  if (!r.log.empty()) std::cout << " final_match_loss=" << r.log.back().match_loss;
  std::cout << '\n';
  return 0;
}

int cmd_evaluate(const Settings& s) {
  ensure_distinct(s.s("out"), {s.s("data"), s.s("condensed")});
  const GraphDataset original = load_dataset(s.s("data"));
  GraphDataset train_graph;
  if (s.has("random_ratio")) {
    require(s.s("condensed").empty(), "--condensed and --random-ratio are mutually exclusive");
    train_graph = random_coreset_baseline(original, s.d("random_ratio"), Rng::derive(s.u("seed"), 7));
  } else if (!s.s("condensed").empty()) {
    train_graph = load_dataset(s.s("condensed"));
  } else {
    train_graph = original;
  }
  std::vector<ModelSpec> specs;
  for (const auto& a : split_list(s.s("archs"))) specs.push_back(model_spec(s, a));
  require(!specs.empty(), "--archs lists no architecture");
  EvalOptions opt;
  opt.max_epochs = s.i("max_epochs");
  opt.patience = s.i("patience");
  opt.lr = s.d("lr");
  require(opt.max_epochs >= 1 && opt.patience >= 1 && opt.lr > 0.0, "max_epochs, patience and lr must be positive");
  require(s.i("jobs") >= 1, "jobs must be >= 1");
  const EvalReport rep = evaluate(train_graph, original, specs, s.i("seeds"), s.u("seed"), s.i("jobs"), opt);
  const fs::path out = prepare_out(s);
  json j = to_json(rep);
  j["config"] = s.raw();
  write_json(j, out / "eval-report.json");
  for (const auto& r : rep.results) std::cout << r.arch << " mean=" << r.mean << " std=" << r.stddev << '\n';
  return 0;
}

int cmd_spectral(const Settings& s) {
  ensure_distinct(s.s("out"), {s.s("data"), s.s("compare")});
  const GraphDataset d = load_dataset(s.s("data"));
  require(d.num_nodes <= kMaxEigenDimension, "graph too large for dense eigendecomposition");
  const SpectralReport r = spectral_metrics(d, s.d("cutoff"));
  json j = to_json(r);
  if (!s.s("compare").empty()) {
    const SpectralReport other = spectral_metrics(load_dataset(s.s("compare")), s.d("cutoff"));
    j["compare"] = to_json(other);
    j["fidelity_pearson"] = fidelity_pearson(r, other);
  }
  const fs::path out = prepare_out(s);
  write_json(j, out / "spectral-report.json");
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_diagnose(const Settings& s) {
  ensure_distinct(s.s("out"), {s.s("data"), s.s("synthetic")});
  const GraphDataset original = load_dataset(s.s("data"));
  const GraphDataset synthetic = load_dataset(s.s("synthetic"));
  const auto d = error_decomposition(original, synthetic, model_spec(s, s.s("arch")), s.i("stages"), s.d("step_size"),
                                     s.u("seed"));
  const fs::path out = prepare_out(s);
  write_error_decomposition_csv(d, out / "error-decomposition.csv");
  double worst = 0.0;
  for (const auto& st : d.stages) worst = std::max(worst, st.identity_residual);
  std::cout << "final_eps=" << d.stages.back().eps_norm << " max_identity_residual=" << worst << '\n';
  return 0;
}

// Small fixed instance: 6 synthetic nodes condensing a 20-node graph.
int cmd_gradcheck(const Settings& s) {
  const std::uint64_t seed = s.u("seed");
  const double eps = s.d("epsilon");
  const double tol = s.d("tolerance");
  require(eps > 0.0 && tol > 0.0, "epsilon and tolerance must be positive");

  GeneratorSpec gs;
  gs.model = ErdosRenyi{0.3};
  gs.num_nodes = 20;
  gs.num_features = 4;
  gs.num_classes = 2;
  gs.seed = seed;
  const GraphDataset original = generate_graph(gs);
  ModelSpec spec;
  spec.arch = Arch::GCN;
  spec.hidden_units = 5;
  spec.num_features = 4;
  spec.num_classes = 2;
  const ModelParams theta = init_params(spec, Rng::derive(seed, 1));
  const Matrix x0 = gaussian_features(6, 4, 0.0, 1.0, Rng::derive(seed, 2));
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  const AdjacencyGenerator gen = AdjacencyGenerator::init(4, 6, Rng::derive(seed, 3));
  const StaticGraph sg = StaticGraph::prepare(spec, original);
  const auto train = GraphDataset::mask_of(original.splits.train, original.num_nodes);
  std::vector<GradientSet> targets;
  for (int c = 0; c < 2; ++c)
    targets.push_back(class_gradient_values(sg, theta, original.labels, mask_for_class(original.labels, c, train)));

  // first order: cross-entropy of the original graph w.r.t. the first weight
  ad::ScalarFunction loss_of_w = [&](ad::Arena& ar, ad::Var w0) {
    std::vector<ad::Var> w{w0, ar.constant(theta.weights[1])};
    return ad::masked_softmax_cross_entropy(forward(spec, w, sg.input(ar)), original.labels, train);
  };
  // second order: matching loss w.r.t. synthetic features, through differentiable gradients
  ad::ScalarFunction meta_of_x = [&](ad::Arena& ar, ad::Var x) {
    std::vector<ad::Var> phi;
    for (const auto& p : gen.params) phi.push_back(ar.constant(p));
    const GraphInput in{Propagator::dense(normalize_dense(build_adjacency(ar, phi, x))), x, 0};
    auto w = weight_leaves(ar, theta);
    std::optional<ad::Var> total;
    for (int c = 0; c < 2; ++c) {
      auto g = class_loss_grad(spec, w, in, y, mask_for_class(y, c), true);
      ad::Var l = match_loss(ar, g, targets[static_cast<std::size_t>(c)], MatchConfig{});
      total = total ? ad::add(*total, l) : l;
    }
    return *total;
  };
  const double first = ad::finite_diff_check(loss_of_w, theta.weights[0], eps);
  const double second = ad::finite_diff_check(meta_of_x, x0, eps);
  const bool ok = first <= tol && second <= tol;
  std::cout << "first_order_max_rel_error=" << first << " second_order_max_rel_error=" << second
            << (ok ? " ok" : " FAILED") << '\n';
  if (!s.s("out").empty()) {
    const fs::path out = prepare_out(s);
    write_json({{"first_order_max_rel_error", first}, {"second_order_max_rel_error", second}, {"ok", ok}},
               out / "gradcheck.json");
  }
  if (!ok) {
    std::cerr << "error: gradcheck: relative error above " << tol << '\n';
    return 1;
  }
  return 0;
}

int cmd_freqgrad(const Settings& s) {
  FreqGradConfig c;
  c.graph = generator_spec(s);
  c.graph.seed = 0;  // one fixed structure; the seed below drives the trials
  c.biases = split_doubles(s.s("biases"), "biases");
  c.feature_std = s.d("std");
  c.trials = s.i("trials");
  c.epochs = s.i("epochs");
  c.model = model_spec(s, s.s("arch"));
  c.lr = s.d("lr");
  c.seed = s.u("seed");
  const FreqGradResult r = freq_grad_experiment(c);
  const fs::path out = prepare_out(s);
  write_freq_grad_csv(r.trials, out / "freq_grad.csv");
  write_json({{"spearman", r.spearman}, {"trials", c.trials}}, out / "freq_grad.json");
  std::cout << "spearman=" << r.spearman << '\n';
  return 0;
}

int dispatch(const std::string& cmd, const Settings& s) {
  if (cmd == "gen") return cmd_gen(s);
  if (cmd == "condense") return cmd_condense(s);
  if (cmd == "evaluate") return cmd_evaluate(s);
  if (cmd == "spectral") return cmd_spectral(s);
  if (cmd == "diagnose") return cmd_diagnose(s);
  if (cmd == "gradcheck") return cmd_gradcheck(s);
  if (cmd == "freqgrad") return cmd_freqgrad(s);
  throw ValidationError("unknown command '" + cmd + "'");
}

// Defaults, then the config file, then flags.
Settings resolve(const std::vector<Key>& keys, const std::string& config_path,
                 const std::map<std::string, std::string>& flags) {
  json j = json::object();
  for (const auto& k : keys) j[k.name] = k.fallback;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    require(in.good(), "missing file: " + config_path);
    json file;
    try {
      in >> file;
    } catch (const json::exception&) {
      throw ValidationError("config file is not valid JSON: " + config_path);
    }
    require(file.is_object(), "config file must hold a flat JSON object");
    for (auto& [name, value] : file.items()) {
      auto it = std::find_if(keys.begin(), keys.end(), [&](const Key& k) { return k.name == name; });
      require(it != keys.end(), "unknown config key '" + name + "'");
      check_type(*it, value);
      j[name] = value;
    }
  }
  for (const auto& [name, raw] : flags) {
    auto it = std::find_if(keys.begin(), keys.end(), [&](const Key& k) { return k.name == name; });
    j[name] = parse_flag(*it, raw);
  }
  for (const auto& k : keys) {
    if (j[k.name].is_null() && (k.name == "seed" || k.name == "out" || k.name == "data" || k.name == "synthetic"))
      throw ValidationError("missing required setting --" + kebab(k.name));
  }
  return Settings(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph condensation by gradient matching"};
  app.require_subcommand(1);
  const std::vector<std::string> commands{"gen", "condense", "evaluate", "spectral", "diagnose", "gradcheck", "freqgrad"};
  const std::map<std::string, std::string> about{
      {"gen", "generate a synthetic dataset"},
      {"condense", "condense a dataset"},
      {"evaluate", "train evaluators on a (condensed) graph and test on the original"},
      {"spectral", "spectral report of a dataset"},
      {"diagnose", "matching/initialization error decomposition"},
      {"gradcheck", "finite-difference check of first- and second-order gradients"},
      {"freqgrad", "high-frequency area vs gradient magnitude experiment"}};

  std::map<std::string, std::string> config_paths;
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd, about.at(cmd));
    sub->add_option("--config", config_paths[cmd], "flat JSON settings file");
    for (const auto& k : keys_for(cmd)) {
      auto* opt = sub->add_option("--" + kebab(k.name), values[cmd][k.name], k.help);
      options[cmd].emplace_back(k.name, opt);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: usage: " << msg << '\n';
    return 1;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    std::map<std::string, std::string> flags;
    for (const auto& [name, opt] : options[cmd])
      if (opt->count() > 0) flags[name] = values[cmd][name];
    const Settings s = resolve(keys_for(cmd), config_paths[cmd], flags);
    return dispatch(cmd, s);
  } catch (const DivergenceError& e) {
    std::cerr << "error: divergence: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: validation: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
