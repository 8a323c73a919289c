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

// Run configuration: one YAML section per subcommand, strict key checking,
// and a canonical resolved form written next to every run's outputs.

#ifndef CMFDA_CLI_CONFIG_HPP_
#define CMFDA_CLI_CONFIG_HPP_

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "cmfda/data/manifest.hpp"
#include "cmfda/error.hpp"
#include "cmfda/image/raster.hpp"
#include "cmfda/models/network.hpp"
#include "cmfda/rng.hpp"
#include "cmfda/train/mmd.hpp"
#include "cmfda/train/train.hpp"

namespace cmfda::cli {

struct GenerateSection {
  std::string corpus = "data/toy_corpus";
  std::string annotations;  // empty: <corpus>/annotations.json
  std::size_t count = 400;
  double mix_copy_move = 3;
  double mix_inpaint = 1;
  std::string category;
  std::size_t side = 64;
  std::string domain = "source";
  std::uint64_t seed = 0;
  int inpaint_iterations = 400;
  double max_self_overlap = 0.0;
};

struct SplitSection {
  std::string manifest;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct Hyperparameters {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double adam_lr = 1e-3;
  double sgd_lr = 1e-4;
  double momentum = 0.9;
  std::string lambda_schedule = "annealed";
  double delta = 1.0;
  double mmd_alpha = 0.25;
  std::string kernel = "linear";
  double bandwidth = 1.0;
  std::string source_only_optimizer = "adam";
};

struct TrainSection {
  std::string method = "dann";
  std::string preset = "alexnet";
  std::string color_space = "rgb";
  std::string source_manifest;
  std::string target_manifest;  // required unless method is source_only
  std::string eval_manifest;    // optional labeled set for the tgt_acc column
  std::size_t input_side = 64;
  std::size_t feature_dim = 256;
  std::size_t domain_hidden = 64;
  std::uint64_t seed = 0;
  Hyperparameters hyper;
};

struct EvalSection {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";  // test | train | all
  std::string label;           // row name in reports; empty: checkpoint path
};

struct ReportSection {
  std::vector<std::string> inputs;  // metrics.json files, one row each
};

struct RunConfig {
  std::optional<GenerateSection> generate;
  std::optional<SplitSection> split;
  std::optional<TrainSection> train;
  std::optional<EvalSection> eval;
  std::optional<ReportSection> report;
};

namespace detail {

inline std::string where(const YAML::Node& n) {
  const auto m = n.Mark();
  return m.is_null() ? std::string("config") : "config line " + std::to_string(m.line + 1);
}

/// Reads the keys of one mapping, rejecting anything not registered.
class SectionReader {
 public:
  SectionReader(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name)) {
    if (!node_.IsMap()) throw ConfigError(where(node_) + ": section '" + name_ + "' must be a mapping");
  }

  template <typename V>
  void field(const std::string& key, V& out, std::function<void(const V&)> check = {}) {
    known_.push_back(key);
    const YAML::Node v = node_[key];
    if (!v) return;
    try {
      out = v.as<V>();
      if (check) check(out);
    } catch (const YAML::Exception&) {
      throw ConfigError(where(v) + ": key '" + name_ + "." + key + "' has the wrong type");
    } catch (const Error& e) {
      throw ConfigError(where(v) + ": " + name_ + "." + key + ": " + e.what());
    }
  }

  YAML::Node child(const std::string& key) {
    known_.push_back(key);
    return node_[key];
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      const auto key = it->first.as<std::string>();
      if (std::find(known_.begin(), known_.end(), key) == known_.end()) {
        throw ConfigError(where(it->first) + ": unknown key '" + key + "' in section '" + name_ + "'");
      }
    }
  }

 private:
  YAML::Node node_;
  std::string name_;
  std::vector<std::string> known_;
};

template <typename V>
std::function<void(const V&)> positive(const char* what) {
  return [what](const V& v) {
    if (!(v > 0)) throw ConfigError(std::string(what) + " must be > 0");
  };
}

inline std::function<void(const double&)> non_negative(const char* what) {
  return [what](const double& v) {
    if (!(v >= 0)) throw ConfigError(std::string(what) + " must be >= 0");
  };
}

inline std::function<void(const std::string&)> one_of(std::vector<std::string> allowed) {
  return [allowed](const std::string& v) {
    if (std::find(allowed.begin(), allowed.end(), v) != allowed.end()) return;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
    throw ConfigError("'" + v + "' is not one of " + list);
  };
}

inline GenerateSection read_generate(const YAML::Node& n) {
  GenerateSection s;
  SectionReader r(n, "generate");
  r.field("corpus", s.corpus);
  r.field("annotations", s.annotations);
  r.field<std::size_t>("count", s.count, [](const std::size_t& c) {
    if (c < 2 || c % 2) throw ConfigError("count must be a positive even number");
  });
  const YAML::Node mix = r.child("mix");
  if (mix) {
    try {
      const auto v = mix.as<std::vector<double>>();
      if (v.size() != 2 || v[0] < 0 || v[1] < 0 || v[0] + v[1] <= 0) throw YAML::Exception(mix.Mark(), "");
      s.mix_copy_move = v[0];
      s.mix_inpaint = v[1];
    } catch (const YAML::Exception&) {
      throw ConfigError(where(mix) + ": generate.mix must be [copy_move, inpaint] with non-negative weights");
    }
  }
  r.field("category", s.category);
  r.field<std::size_t>("side", s.side, [](const std::size_t& v) {
    if (v != 0 && v < 8) throw ConfigError("side must be 0 or >= 8");
  });
  r.field<std::string>("domain", s.domain, one_of({"source", "target"}));
  r.field("seed", s.seed);
  r.field<int>("inpaint_iterations", s.inpaint_iterations, positive<int>("inpaint_iterations"));
  r.field<double>("max_self_overlap", s.max_self_overlap, [](const double& v) {
    if (!(v >= 0 && v <= 1)) throw ConfigError("max_self_overlap must be in [0,1]");
  });
  r.finish();
  return s;
}

inline SplitSection read_split(const YAML::Node& n) {
  SplitSection s;
  SectionReader r(n, "split");
  r.field("manifest", s.manifest);
  r.field<double>("train_fraction", s.train_fraction, [](const double& v) {
    if (!(v > 0 && v < 1)) throw ConfigError("train_fraction must be in (0,1)");
  });
  r.field("seed", s.seed);
  r.finish();
  return s;
}

inline Hyperparameters read_hyper(const YAML::Node& n) {
  Hyperparameters h;
  SectionReader r(n, "train.hyperparameters");
  r.field("epochs", h.epochs);
  r.field<std::size_t>("batch_size", h.batch_size, positive<std::size_t>("batch_size"));
  r.field<double>("adam_lr", h.adam_lr, positive<double>("adam_lr"));
  r.field<double>("sgd_lr", h.sgd_lr, positive<double>("sgd_lr"));
  r.field<double>("momentum", h.momentum, [](const double& v) {
    if (!(v >= 0 && v < 1)) throw ConfigError("momentum must be in [0,1)");
  });
  r.field<std::string>("lambda_schedule", h.lambda_schedule, one_of({"annealed", "constant"}));
  r.field<double>("delta", h.delta, non_negative("delta"));
  r.field<double>("mmd_alpha", h.mmd_alpha, non_negative("mmd_alpha"));
  r.field<std::string>("kernel", h.kernel, one_of({"linear", "rbf"}));
  r.field<double>("bandwidth", h.bandwidth, positive<double>("bandwidth"));
  r.field<std::string>("source_only_optimizer", h.source_only_optimizer, one_of({"adam", "sgd_momentum"}));
  r.finish();
  return h;
}

inline TrainSection read_train(const YAML::Node& n) {
  TrainSection s;
  SectionReader r(n, "train");
  r.field<std::string>("method", s.method, one_of({"dann", "ddc", "source_only"}));
  r.field<std::string>("preset", s.preset, one_of({"alexnet", "vgg7"}));
  r.field<std::string>("color_space", s.color_space, one_of({"rgb", "ycrcb"}));
  r.field("source_manifest", s.source_manifest);
  r.field("target_manifest", s.target_manifest);
  r.field("eval_manifest", s.eval_manifest);
  r.field<std::size_t>("input_side", s.input_side, [](const std::size_t& v) {
    if (v < 16) throw ConfigError("input_side must be >= 16");
  });
  r.field<std::size_t>("feature_dim", s.feature_dim, positive<std::size_t>("feature_dim"));
  r.field<std::size_t>("domain_hidden", s.domain_hidden, positive<std::size_t>("domain_hidden"));
  r.field("seed", s.seed);
  if (const YAML::Node h = r.child("hyperparameters")) s.hyper = read_hyper(h);
  r.finish();
  return s;
}

inline EvalSection read_eval(const YAML::Node& n) {
  EvalSection s;
  SectionReader r(n, "eval");
  r.field("checkpoint", s.checkpoint);
  r.field("manifest", s.manifest);
  r.field<std::string>("split", s.split, one_of({"test", "train", "all"}));
  r.field("label", s.label);
  r.finish();
  return s;
}

inline ReportSection read_report(const YAML::Node& n) {
  ReportSection s;
  SectionReader r(n, "report");
  r.field("inputs", s.inputs);
  r.finish();
  return s;
}

inline std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("config line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  RunConfig cfg;
  if (!root || root.IsNull()) return cfg;
  if (!root.IsMap()) throw ConfigError(detail::where(root) + ": top level must be a mapping of sections");
  for (auto it = root.begin(); it != root.end(); ++it) {
    const auto key = it->first.as<std::string>();
    const YAML::Node& body = it->second;
    if (key == "generate") {
      cfg.generate = detail::read_generate(body);
    } else if (key == "split") {
      cfg.split = detail::read_split(body);
    } else if (key == "train") {
      cfg.train = detail::read_train(body);
    } else if (key == "eval") {
      cfg.eval = detail::read_eval(body);
    } else if (key == "report") {
      cfg.report = detail::read_report(body);
    } else {
      throw ConfigError(detail::where(it->first) + ": unknown section '" + key + "'");
    }
  }
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// Canonical YAML for one section, every field present. Doubles use the
// shortest round-trip form so re-reading reproduces the run exactly.

inline std::string to_yaml(const GenerateSection& s) {
  std::ostringstream os;
  os << "generate:\n"
     << "  corpus: " << YAML::Node(s.corpus) << "\n"
     << "  annotations: " << YAML::Node(s.annotations) << "\n"
     << "  count: " << s.count << "\n"
     << "  mix: [" << detail::number(s.mix_copy_move) << ", " << detail::number(s.mix_inpaint) << "]\n"
     << "  category: " << YAML::Node(s.category) << "\n"
     << "  side: " << s.side << "\n"
     << "  domain: " << s.domain << "\n"
     << "  seed: " << s.seed << "\n"
     << "  inpaint_iterations: " << s.inpaint_iterations << "\n"
     << "  max_self_overlap: " << detail::number(s.max_self_overlap) << "\n";
  return os.str();
}

inline std::string to_yaml(const SplitSection& s) {
  std::ostringstream os;
  os << "split:\n"
     << "  manifest: " << YAML::Node(s.manifest) << "\n"
     << "  train_fraction: " << detail::number(s.train_fraction) << "\n"
     << "  seed: " << s.seed << "\n";
  return os.str();
}

inline std::string to_yaml(const TrainSection& s) {
  const Hyperparameters& h = s.hyper;
  std::ostringstream os;
  os << "train:\n"
     << "  method: " << s.method << "\n"
     << "  preset: " << s.preset << "\n"
     << "  color_space: " << s.color_space << "\n"
     << "  source_manifest: " << YAML::Node(s.source_manifest) << "\n"
     << "  target_manifest: " << YAML::Node(s.target_manifest) << "\n"
     << "  eval_manifest: " << YAML::Node(s.eval_manifest) << "\n"
     << "  input_side: " << s.input_side << "\n"
     << "  feature_dim: " << s.feature_dim << "\n"
     << "  domain_hidden: " << s.domain_hidden << "\n"
     << "  seed: " << s.seed << "\n"
     << "  hyperparameters:\n"
     << "    epochs: " << h.epochs << "\n"
     << "    batch_size: " << h.batch_size << "\n"
     << "    adam_lr: " << detail::number(h.adam_lr) << "\n"
     << "    sgd_lr: " << detail::number(h.sgd_lr) << "\n"
     << "    momentum: " << detail::number(h.momentum) << "\n"
     << "    lambda_schedule: " << h.lambda_schedule << "\n"
     << "    delta: " << detail::number(h.delta) << "\n"
     << "    mmd_alpha: " << detail::number(h.mmd_alpha) << "\n"
     << "    kernel: " << h.kernel << "\n"
     << "    bandwidth: " << detail::number(h.bandwidth) << "\n"
     << "    source_only_optimizer: " << h.source_only_optimizer << "\n";
  return os.str();
}

inline std::string to_yaml(const EvalSection& s) {
  std::ostringstream os;
  os << "eval:\n"
     << "  checkpoint: " << YAML::Node(s.checkpoint) << "\n"
     << "  manifest: " << YAML::Node(s.manifest) << "\n"
     << "  split: " << s.split << "\n"
     << "  label: " << YAML::Node(s.label) << "\n";
  return os.str();
}

inline std::string to_yaml(const ReportSection& s) {
  std::ostringstream os;
  os << "report:\n  inputs:" << (s.inputs.empty() ? " []\n" : "\n");
  for (const auto& p : s.inputs) os << "    - " << YAML::Node(p) << "\n";
  return os.str();
}

inline models::NetworkSpec network_spec(const TrainSection& s) {
  models::NetworkSpec spec;
  spec.preset = models::parse_preset(s.preset);
  spec.input_side = s.input_side;
  spec.feature_dim = s.feature_dim;
  spec.domain_hidden = s.domain_hidden;
  spec.color_space = image::parse_color_space(s.color_space);
  return spec;
}

inline train::TrainConfig train_config(const TrainSection& s) {
  const Hyperparameters& h = s.hyper;
  train::TrainConfig cfg;
  cfg.method = train::parse_method(s.method);
  cfg.epochs = h.epochs;
  cfg.batch_size = h.batch_size;
  cfg.seed = s.seed;
  cfg.adam.lr = h.adam_lr;
  cfg.sgd = {h.sgd_lr, h.momentum};
  cfg.lambda_mode = train::parse_lambda_mode(h.lambda_schedule);
  cfg.delta = h.delta;
  cfg.mmd_alpha = h.mmd_alpha;
  cfg.kernel = {train::parse_kernel(h.kernel), h.bandwidth};
  cfg.source_only_optimizer = train::parse_optimizer(h.source_only_optimizer);
  return cfg;
}

/// Run metadata: no timestamps or host details, so identical runs write
/// identical files.
inline nlohmann::json run_metadata(const std::string& command, std::uint64_t seed,
                                   const std::string& resolved_yaml) {
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a(resolved_yaml)));
  return {{"command", command}, {"seed", seed}, {"version", CMFDA_VERSION}, {"config_hash", hash}};
}

inline void write_run_files(const std::filesystem::path& out_dir, const std::string& command, std::uint64_t seed,
                            const std::string& resolved_yaml) {
  std::filesystem::create_directories(out_dir);
  std::ofstream(out_dir / "config.yaml") << resolved_yaml;
  std::ofstream(out_dir / "metadata.json") << run_metadata(command, seed, resolved_yaml).dump(2) << '\n';
}

}  // namespace cmfda::cli

#endif  // CMFDA_CLI_CONFIG_HPP_
