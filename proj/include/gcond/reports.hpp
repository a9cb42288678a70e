#pragma once

// Artifact writers. CSVs: header row, '.' decimals, LF line endings.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "condense.hpp"
#include "dataset_io.hpp"
#include "diagnostics.hpp"
#include "eval.hpp"
#include "freq_grad.hpp"
#include "spectral.hpp"

namespace gcond {

namespace report_detail {

inline std::string num(double v) { return io_detail::format_double(v); }

}  // namespace report_detail

inline void write_trajectory_csv(const TrajectoryLog& log, const fs::path& file) {
  using report_detail::num;
  auto out = io_detail::open_out(file);
  out << "epoch,step,class,cos_gap,mag_gap,l2_gap,match_loss\n";
  for (const auto& r : log) {
    out << r.epoch << ',' << r.step << ',' << r.cls << ',' << num(r.cos_gap) << ',' << num(r.mag_gap) << ','
        << num(r.l2_gap) << ',' << num(r.match_loss) << '\n';
  }
}

inline void write_freq_grad_csv(const std::vector<FreqGradTrial>& trials, const fs::path& file) {
  using report_detail::num;
  auto out = io_detail::open_out(file);
  out << "trial,bias,s_high_mean,grad_mag\n";
  for (const auto& t : trials) out << t.trial << ',' << num(t.bias) << ',' << num(t.s_high_mean) << ',' << num(t.grad_mag) << '\n';
}

inline void write_error_decomposition_csv(const ErrorDecomposition& d, const fs::path& file) {
  using report_detail::num;
  auto out = io_detail::open_out(file);
  out << "stage,eps,delta,init,residual\n";
  for (const auto& s : d.stages) {
    out << s.stage << ',' << num(s.eps_norm) << ',' << num(s.delta_norm) << ',' << num(s.init_norm) << ','
        << num(s.identity_residual) << '\n';
  }
}

inline nlohmann::json to_json(const SpectralReport& r) {
  nlohmann::json j;
  const auto names = SpectralReport::names();
  const auto values = r.values();
  for (std::size_t k = 0; k < names.size(); ++k) j[names[k]] = values[k];
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["n_seeds"] = r.n_seeds;
  j["seed"] = r.base_seed;
  j["results"] = nlohmann::json::array();
  for (const auto& a : r.results) {
    j["results"].push_back({{"arch", a.arch}, {"mean", a.mean}, {"std", a.stddev}, {"accuracies", a.accuracies}});
  }
  return j;
}

inline nlohmann::json to_json(const GapSummary& s) {
  return {{"epochs", s.epochs},       {"cos_gap", s.cos_gap},     {"mag_gap", s.mag_gap},
          {"l2_gap", s.l2_gap},       {"cos_ratio", s.cos_ratio}, {"mag_ratio", s.mag_ratio},
          {"l2_ratio", s.l2_ratio}};
}

inline void write_json(const nlohmann::json& j, const fs::path& file) {
  auto out = io_detail::open_out(file);
  out << j.dump(2) << '\n';
}

}  // namespace gcond
