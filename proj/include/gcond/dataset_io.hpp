#pragma once

// Dataset directory layout:
//   meta.json      {"num_nodes": N, "num_features": d, "num_classes": C}
//   edges.csv      one "src,dst" pair per line, 0-indexed, each undirected edge once
//   features.csv   N lines of d comma-separated decimals
//   labels.csv     N lines, one integer each
//   splits.json    {"train": [...], "val": [...], "test": [...]}

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "graph.hpp"

namespace gcond {

namespace fs = std::filesystem;

namespace io_detail {

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  require(in.good(), "missing file: " + p.string());
  return in;
}

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  require(out.good(), "cannot write file: " + p.string());
  return out;
}

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(),
          "malformed number '" + std::string(s) + "' in " + where);
  return v;
}

inline long parse_int(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(),
          "malformed integer '" + std::string(s) + "' in " + where);
  return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r") == std::string::npos;
}

inline nlohmann::json read_json(const fs::path& p) {
  auto in = open_in(p);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

inline std::vector<int> json_indices(const nlohmann::json& j, const char* key) {
  require(j.contains(key) && j[key].is_array(), std::string("splits.json: missing array '") + key + "'");
  std::vector<int> out;
  for (const auto& v : j[key]) {
    require(v.is_number_integer(), std::string("splits.json: non-integer in '") + key + "'");
    out.push_back(v.get<int>());
  }
  return out;
}

}  // namespace io_detail

inline GraphDataset load_dataset(const fs::path& dir) {
  using namespace io_detail;
  require(fs::is_directory(dir), "missing dataset directory: " + dir.string());
  GraphDataset g;

  const auto meta = read_json(dir / "meta.json");
  for (const char* key : {"num_nodes", "num_features", "num_classes"}) {
    require(meta.contains(key) && meta[key].is_number_integer(),
            std::string("meta.json: missing integer '") + key + "'");
  }
  g.num_nodes = meta["num_nodes"].get<int>();
  g.num_features = meta["num_features"].get<int>();
  g.num_classes = meta["num_classes"].get<int>();
  require(g.num_nodes >= 0 && g.num_features >= 0 && g.num_classes >= 1, "meta.json: invalid counts");
  const int n = g.num_nodes;

  {
    auto in = open_in(dir / "edges.csv");
    std::vector<std::pair<int, int>> edges;
    std::set<std::pair<int, int>> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (blank(line)) continue;
      const auto parts = split_commas(line);
      const std::string where = "edges.csv:" + std::to_string(lineno);
      require(parts.size() == 2, "expected 'src,dst' at " + where);
      const long a = parse_int(parts[0], where);
      const long b = parse_int(parts[1], where);
      require(a >= 0 && a < n && b >= 0 && b < n, "edge endpoint out of range at " + where);
      require(a != b, "self-loop (" + std::to_string(a) + "," + std::to_string(b) + ") at " + where);
      const std::pair<int, int> key{static_cast<int>(std::min(a, b)), static_cast<int>(std::max(a, b))};
      require(seen.insert(key).second,
              "non-symmetric edge list: pair (" + std::to_string(a) + "," + std::to_string(b) +
                  ") duplicates an earlier entry at " + where);
      edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
    g.adjacency = adjacency_from_edges(n, edges);
  }

  {
    auto in = open_in(dir / "features.csv");
    g.features = Matrix::Zero(n, g.num_features);
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
      if (blank(line)) continue;
      require(row < n, "shape mismatch: features.csv has more than " + std::to_string(n) + " rows");
      const auto parts = split_commas(line);
      require(static_cast<int>(parts.size()) == g.num_features,
              "shape mismatch: features.csv row " + std::to_string(row) + " has " +
                  std::to_string(parts.size()) + " columns, expected " + std::to_string(g.num_features));
      for (int c = 0; c < g.num_features; ++c) {
        g.features(row, c) = parse_double(parts[static_cast<std::size_t>(c)], "features.csv");
      }
      ++row;
    }
    require(row == n, "shape mismatch: features.csv has " + std::to_string(row) + " rows, expected " +
                          std::to_string(n));
  }

  {
    auto in = open_in(dir / "labels.csv");
    std::string line;
    while (std::getline(in, line)) {
      if (blank(line)) continue;
      g.labels.push_back(static_cast<int>(parse_int(line, "labels.csv")));
    }
    require(static_cast<int>(g.labels.size()) == n,
            "shape mismatch: labels.csv has " + std::to_string(g.labels.size()) + " rows, expected " +
                std::to_string(n));
  }

  {
    const auto sj = read_json(dir / "splits.json");
    g.splits.train = json_indices(sj, "train");
    g.splits.val = json_indices(sj, "val");
    g.splits.test = json_indices(sj, "test");
  }

  validate(g);
  return g;
}

inline void save_dataset(const GraphDataset& g, const fs::path& dir) {
  using namespace io_detail;
  validate(g);
  fs::create_directories(dir);
  {
    nlohmann::ordered_json meta;
    meta["num_nodes"] = g.num_nodes;
    meta["num_features"] = g.num_features;
    meta["num_classes"] = g.num_classes;
    open_out(dir / "meta.json") << meta.dump(2) << '\n';
  }
  {
    auto out = open_out(dir / "edges.csv");
    for (auto [a, b] : edge_list(g.adjacency)) out << a << ',' << b << '\n';
  }
  {
    auto out = open_out(dir / "features.csv");
    std::string line;
    for (Index i = 0; i < g.features.rows(); ++i) {
      line.clear();
      for (Index j = 0; j < g.features.cols(); ++j) {
        if (j) line += ',';
        line += format_double(g.features(i, j));
      }
      out << line << '\n';
    }
  }
  {
    auto out = open_out(dir / "labels.csv");
    for (int y : g.labels) out << y << '\n';
  }
  {
    nlohmann::ordered_json sj;
    sj["train"] = g.splits.train;
    sj["val"] = g.splits.val;
    sj["test"] = g.splits.test;
    open_out(dir / "splits.json") << sj.dump() << '\n';
  }
}

}  // namespace gcond
