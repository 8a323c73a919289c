// Copyright 2026 The cmfda Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dataset manifests: one JSON object per line,
//   {"id", "path", "class"?, "domain", "split"?, "provenance"?}
// `class` is 0 (authentic) or 1 (forged); absent means unlabeled. `split` is
// absent until the manifest has been split. Relative paths resolve against
// the manifest's directory.

#ifndef CMFDA_DATA_MANIFEST_HPP_
#define CMFDA_DATA_MANIFEST_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmfda/error.hpp"
#include "cmfda/rng.hpp"
#include "cmfda/synth/forgery.hpp"

namespace cmfda::data {

enum class ClassLabel : int { kAuthentic = 0, kForged = 1 };
enum class Domain { kSource, kTarget };
enum class Split { kTrain, kTest };

inline const char* domain_name(Domain d) { return d == Domain::kSource ? "source" : "target"; }
inline const char* split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

inline Domain parse_domain(const std::string& s) {
  if (s == "source") return Domain::kSource;
  if (s == "target") return Domain::kTarget;
  throw DataError("unknown domain '" + s + "'");
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split '" + s + "'");
}

struct ManifestRecord {
  std::string id;
  std::string path;
  std::optional<ClassLabel> class_label;
  Domain domain = Domain::kSource;
  std::optional<Split> split;
  std::optional<synth::ForgeryProvenance> provenance;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;  // directory relative paths resolve against

  std::filesystem::path resolve(const ManifestRecord& r) const {
    const std::filesystem::path p(r.path);
    return p.is_absolute() ? p : base_dir / p;
  }

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  /// Records of one split (all records when `split` is nullopt).
  Manifest filtered(std::optional<Split> split) const {
    Manifest m{{}, base_dir};
    for (const auto& r : records) {
      if (!split || r.split == split) m.records.push_back(r);
    }
    return m;
  }
};

inline nlohmann::json to_json(const ManifestRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["path"] = r.path;
  if (r.class_label) j["class"] = static_cast<int>(*r.class_label);
  j["domain"] = domain_name(r.domain);
  if (r.split) j["split"] = split_name(*r.split);
  if (r.provenance) j["provenance"] = synth::to_json(*r.provenance);
  return j;
}

inline ManifestRecord record_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"id", "path", "class", "domain", "split", "provenance"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw DataError("unknown manifest field '" + key + "'");
  }
  ManifestRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.path = j.at("path").get<std::string>();
    if (j.contains("class") && !j.at("class").is_null()) {
      const auto& c = j.at("class");
      int v = -1;
      if (c.is_number_integer()) {
        v = c.get<int>();
      } else if (c.is_string()) {
        const auto s = c.get<std::string>();
        v = s == "authentic" ? 0 : s == "forged" ? 1 : -1;
      }
      if (v != 0 && v != 1) throw DataError("class must be 0/1 or authentic/forged");
      r.class_label = static_cast<ClassLabel>(v);
    }
    r.domain = parse_domain(j.value("domain", std::string("source")));
    if (j.contains("split") && !j.at("split").is_null()) r.split = parse_split(j.at("split").get<std::string>());
    if (j.contains("provenance") && !j.at("provenance").is_null()) {
      r.provenance = synth::provenance_from_json(j.at("provenance"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest record: ") + e.what());
  }
  return r;
}

inline void validate_unique_ids(const Manifest& m) {
  std::set<std::string> seen;
  for (const auto& r : m.records) {
    if (!seen.insert(r.id).second) throw DataError("duplicate manifest id '" + r.id + "'");
  }
}

inline std::string manifest_to_string(const Manifest& m) {
  std::string out;
  for (const auto& r : m.records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << manifest_to_string(m);
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate_unique_ids(m);
  return m;
}

/// Stratified split: each class (and the unlabeled group) is shuffled with a
/// seed-derived stream and its first floor(fraction * n_class) records go to
/// train. Record order is preserved; only split tags change.
inline Manifest split_dataset(const Manifest& manifest, double train_fraction, std::uint64_t seed) {
  if (manifest.empty()) throw UsageError("split_dataset: empty manifest");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("split_dataset: train fraction must be in (0,1)");
  }
  std::map<int, std::vector<std::size_t>> strata;  // -1 = unlabeled
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& c = manifest.records[i].class_label;
    strata[c ? static_cast<int>(*c) : -1].push_back(i);
  }
  Manifest out = manifest;
  for (auto& [cls, members] : strata) {
    Rng rng(hash_combine(seed, static_cast<std::uint64_t>(cls + 2)));
    rng.shuffle(std::span<std::size_t>(members));
    // Guard against 0.8 * n landing a hair under an integer.
    const auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(members.size()) + 1e-9));
    for (std::size_t k = 0; k < members.size(); ++k) {
      out.records[members[k]].split = k < n_train ? Split::kTrain : Split::kTest;
    }
  }
  return out;
}

}  // namespace cmfda::data

#endif  // CMFDA_DATA_MANIFEST_HPP_
