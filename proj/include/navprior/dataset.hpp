#pragma once

// Path datasets in R2R JSON layout, validation against graphs, hop-count
// length distributions and seen/unseen environment splits.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "navprior/envgraph.hpp"
#include "navprior/errors.hpp"
#include "navprior/random.hpp"

namespace navprior {

using Tokens = std::vector<std::string>;

struct PathSample {
  std::int64_t path_id = 0;
  std::string env_id;
  std::vector<NodeId> path;
  std::vector<Tokens> instructions;

  std::size_t hops() const noexcept { return path.empty() ? 0 : path.size() - 1; }
  const NodeId& start() const { return path.front(); }
  const NodeId& goal() const { return path.back(); }

  friend bool operator==(const PathSample&, const PathSample&) = default;
};

enum class Split { kTrain, kValSeen, kValUnseen, kSynthetic };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValSeen: return "val_seen";
    case Split::kValUnseen: return "val_unseen";
    case Split::kSynthetic: return "synthetic";
  }
  return "synthetic";
}

inline Split split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val_seen") return Split::kValSeen;
  if (s == "val_unseen") return Split::kValUnseen;
  if (s == "synthetic") return Split::kSynthetic;
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

// Opaque R2R fields carried through load/save untouched.
struct R2RProvenance {
  double heading = 0.0;
  double distance = 0.0;

  friend bool operator==(const R2RProvenance&, const R2RProvenance&) = default;
};

struct PathDataset {
  std::vector<PathSample> samples;
  Split split = Split::kSynthetic;
  std::map<std::int64_t, R2RProvenance> provenance;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }

  void sort_by_path_id() {
    std::sort(samples.begin(), samples.end(),
              [](const PathSample& a, const PathSample& b) { return a.path_id < b.path_id; });
  }

  const PathSample* find(std::int64_t path_id) const {
    for (const auto& s : samples) {
      if (s.path_id == path_id) return &s;
    }
    return nullptr;
  }

  // Samples restricted to one environment.
  PathDataset for_env(std::string_view env_id) const {
    PathDataset out;
    out.split = split;
    for (const auto& s : samples) {
      if (s.env_id == env_id) out.samples.push_back(s);
    }
    return out;
  }

  friend bool operator==(const PathDataset&, const PathDataset&) = default;
};

// Lowercase, drop ASCII punctuation, split on whitespace.
inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string detokenize(const Tokens& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

inline PathDataset load_r2r_json(std::string_view content, Split split = Split::kTrain) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("R2R dataset: malformed JSON: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("R2R dataset: top level must be an array");
  PathDataset ds;
  ds.split = split;
  std::set<std::int64_t> ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    auto fail = [&](const std::string& what) {
      return DataError("R2R dataset record " + std::to_string(i) + ": " + what);
    };
    try {
      PathSample s;
      s.path_id = rec.at("path_id").get<std::int64_t>();
      s.env_id = rec.at("scan").get<std::string>();
      s.path = rec.at("path").get<std::vector<std::string>>();
      if (s.path.size() < 2) throw fail("path must contain at least 2 viewpoints");
      for (const auto& text : rec.at("instructions")) s.instructions.push_back(tokenize(text.get<std::string>()));
      R2RProvenance prov;
      if (rec.contains("heading")) prov.heading = rec.at("heading").get<double>();
      if (rec.contains("distance")) prov.distance = rec.at("distance").get<double>();
      if (!ids.insert(s.path_id).second) throw fail("duplicate path_id " + std::to_string(s.path_id));
      ds.provenance.emplace(s.path_id, prov);
      ds.samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw fail(e.what());
    }
  }
  return ds;
}

inline std::string save_r2r_json(const PathDataset& ds) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& s : ds.samples) {
    R2RProvenance prov;
    if (auto it = ds.provenance.find(s.path_id); it != ds.provenance.end()) prov = it->second;
    nlohmann::json instr = nlohmann::json::array();
    for (const auto& toks : s.instructions) instr.push_back(detokenize(toks));
    doc.push_back({{"path_id", s.path_id},
                   {"scan", s.env_id},
                   {"path", s.path},
                   {"heading", prov.heading},
                   {"distance", prov.distance},
                   {"instructions", std::move(instr)}});
  }
  return doc.dump(2) + "\n";
}

// A file, or a directory holding `R2R_<split>.json` files (merged in name order).
inline PathDataset load_dataset_path(const std::filesystem::path& path) {
  if (!std::filesystem::is_directory(path)) {
    auto stem = path.stem().string();
    Split split = Split::kSynthetic;
    if (stem.starts_with("R2R_")) {
      try {
        split = split_from_string(stem.substr(4));
      } catch (const ConfigError&) {
      }
    }
    return load_r2r_json(read_file(path), split);
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(path)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("R2R_") && name.ends_with(".json")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no R2R_<split>.json files in '" + path.string() + "'");
  PathDataset merged;
  std::set<std::int64_t> ids;
  for (const auto& f : files) {
    auto part = load_dataset_path(f);
    if (files.size() == 1) return part;
    for (auto& s : part.samples) {
      if (!ids.insert(s.path_id).second) throw DataError("duplicate path_id " + std::to_string(s.path_id) + " across splits");
      merged.provenance[s.path_id] = part.provenance[s.path_id];
      merged.samples.push_back(std::move(s));
    }
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  enum class Kind { kMissingEnvironment, kUnknownNode, kNonEdge, kTooShort };
  Kind kind;
  std::int64_t path_id;
  std::string env_id;
  NodeId from;
  NodeId to;

  std::string describe() const {
    const std::string where = "path " + std::to_string(path_id) + " (env " + env_id + ")";
    switch (kind) {
      case Kind::kMissingEnvironment: return where + ": missing environment";
      case Kind::kUnknownNode: return where + ": unknown node '" + from + "'";
      case Kind::kNonEdge: return where + ": " + from + " -> " + to + " is not an edge";
      case Kind::kTooShort: return where + ": fewer than 2 viewpoints";
    }
    return where;
  }
};

// Every violation across every sample, in dataset order. Empty means valid.
inline std::vector<Violation> validate(const PathDataset& ds, const GraphMap& graphs) {
  std::vector<Violation> out;
  for (const auto& s : ds.samples) {
    auto it = graphs.find(s.env_id);
    if (it == graphs.end()) {
      out.push_back({Violation::Kind::kMissingEnvironment, s.path_id, s.env_id, {}, {}});
      continue;
    }
    const auto& g = it->second;
    if (s.path.size() < 2) out.push_back({Violation::Kind::kTooShort, s.path_id, s.env_id, {}, {}});
    for (const auto& id : s.path) {
      if (!g.contains(id)) out.push_back({Violation::Kind::kUnknownNode, s.path_id, s.env_id, id, {}});
    }
    for (std::size_t i = 1; i < s.path.size(); ++i) {
      const auto& a = s.path[i - 1];
      const auto& b = s.path[i];
      if (g.contains(a) && g.contains(b) && !g.has_edge(a, b)) {
        out.push_back({Violation::Kind::kNonEdge, s.path_id, s.env_id, a, b});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Length distributions (hop counts)

struct LengthDistribution {
  std::map<int, double> pmf;

  bool empty() const noexcept { return pmf.empty(); }

  void validate() const {
    if (pmf.empty()) throw ConfigError("length distribution is empty");
    double total = 0.0;
    for (const auto& [hops, p] : pmf) {
      if (hops < 1) throw ConfigError("length distribution: hop counts must be >= 1");
      if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("length distribution: probabilities must be finite and >= 0");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("length distribution: probabilities sum to " + std::to_string(total));
  }

  int sample(Rng& rng) const {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (const auto& [hops, p] : pmf) {
      acc += p;
      if (u < acc) return hops;
    }
    return pmf.rbegin()->first;
  }

  int mode() const {
    return std::max_element(pmf.begin(), pmf.end(), [](const auto& a, const auto& b) { return a.second < b.second; })->first;
  }

  nlohmann::json to_json() const {
    nlohmann::json pm = nlohmann::json::object();
    for (const auto& [h, p] : pmf) pm[std::to_string(h)] = p;
    return {{"pmf", pm}};
  }

  static LengthDistribution from_json(const nlohmann::json& doc) {
    LengthDistribution d;
    try {
      for (const auto& [k, v] : doc.at("pmf").items()) d.pmf[std::stoi(k)] = v.get<double>();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("length distribution JSON: ") + e.what());
    }
    d.validate();
    return d;
  }
};

inline LengthDistribution empirical_length_distribution(const PathDataset& ds) {
  if (ds.empty()) throw DataError("length distribution of an empty dataset");
  std::map<int, std::size_t> counts;
  for (const auto& s : ds.samples) ++counts[static_cast<int>(s.hops())];
  LengthDistribution d;
  for (const auto& [h, c] : counts) {
    if (h < 1) throw DataError("dataset contains a zero-hop path");
    d.pmf[h] = static_cast<double>(c) / static_cast<double>(ds.size());
  }
  return d;
}

// ---------------------------------------------------------------------------
// Environment splits

struct EnvSplit {
  std::set<std::string> seen;
  std::set<std::string> unseen;
};

inline EnvSplit split_environments(std::vector<std::string> env_ids, double fraction_seen, Rng& rng) {
  std::sort(env_ids.begin(), env_ids.end());
  env_ids.erase(std::unique(env_ids.begin(), env_ids.end()), env_ids.end());
  if (env_ids.size() < 2) throw ConfigError("split_environments needs at least 2 environments");
  if (!(fraction_seen > 0.0 && fraction_seen < 1.0)) throw ConfigError("fraction_seen must be in (0, 1)");
  const auto n = env_ids.size();
  for (std::size_t i = n - 1; i > 0; --i) std::swap(env_ids[i], env_ids[rng.uniform_index(i + 1)]);
  auto n_seen = static_cast<std::size_t>(std::llround(fraction_seen * static_cast<double>(n)));
  n_seen = std::clamp<std::size_t>(n_seen, 1, n - 1);
  EnvSplit out;
  out.seen.insert(env_ids.begin(), env_ids.begin() + static_cast<std::ptrdiff_t>(n_seen));
  out.unseen.insert(env_ids.begin() + static_cast<std::ptrdiff_t>(n_seen), env_ids.end());
  return out;
}

}  // namespace navprior
