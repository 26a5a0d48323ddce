#pragma once

#include <array>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "jtm/datagen.hpp"
#include "jtm/error.hpp"
#include "jtm/eval.hpp"
#include "jtm/io.hpp"
#include "jtm/model.hpp"
#include "jtm/poincare.hpp"

namespace jtm::cli {

using Json = nlohmann::ordered_json;

// The default document doubles as the schema: every accepted key appears
// here, and a user value must have the same JSON type as its default.
inline Json default_config() {
  return Json::parse(R"({
    "output_dir": "out",
    "data": {
      "taxonomy": "", "labels": "", "resumes": "", "pairs": "", "graph": "",
      "hyperbolic": "", "semantic": "", "model": "", "test_labels": "", "titles": ""
    },
    "dimensions": {"d_h": 128, "d_b": 128, "d_r": 64},
    "synth": {
      "groups": 200, "synonyms": 5, "min_edits": 1, "max_edits": 3,
      "persons": 2000, "jobs": 6, "concentration": 0.1, "seed": 0
    },
    "poincare": {
      "epochs": 100, "lr": 1.0, "negatives": 10, "burn_in_epochs": 10,
      "burn_in_factor": 0.1, "init_range": 0.001, "seed": 0, "export_2d": false
    },
    "semantic": {"provider": "hashed", "seed": 0, "hashed_fallback": false},
    "model": {
      "variant": "full", "reg_weight": 1.0, "clause_weight": 0.1, "reg_samples": 256,
      "fusion_bias": 1.0, "seed": 0
    },
    "training": {
      "lr": 0.001, "batch_size": 256, "max_epochs": 200, "patience": 20,
      "split": [0.64, 0.16, 0.20], "split_seed": 0, "shuffle_seed": 0
    },
    "map": {"k": 10},
    "linkpred": {"epochs": 100, "lr": 0.01, "seed": 0, "split_seed": 0}
  })");
}

// Default file name for each data path, relative to output_dir.
inline const std::map<std::string, std::string>& default_files() {
  static const std::map<std::string, std::string> f = {
      {"taxonomy", "taxonomy.tsv"},   {"labels", "labels.tsv"},       {"resumes", "resumes.jsonl"},
      {"pairs", "pairs.tsv"},         {"graph", "graph.json"},        {"hyperbolic", "hyperbolic.tsv"},
      {"semantic", "semantic.tsv"},   {"model", "model.jtm"},         {"test_labels", "test_labels.tsv"},
      {"titles", "titles.txt"}};
  return f;
}

namespace detail {

// Whether `user` may replace `slot`; integers may stand in for floats.
inline bool same_kind(const Json& user, const Json& slot) {
  if (slot.is_number_float()) return user.is_number();
  if (slot.is_number_integer()) return user.is_number_integer();
  return user.type() == slot.type();
}

inline void merge(Json& base, const Json& user, const std::string& path) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    Json& slot = base[it.key()];
    if (slot.is_object()) {
      if (!it->is_object()) throw ConfigError("config key '" + key + "' must be an object");
      merge(slot, *it, key);
      continue;
    }
    if (!same_kind(*it, slot)) {
      throw ConfigError("config key '" + key + "' must be of type " + std::string(slot.type_name()));
    }
    if (slot.is_number_unsigned() && it->is_number_integer() && it->get<long long>() < 0) {
      throw ConfigError("config key '" + key + "' must be non-negative");
    }
    if (slot.is_number_float()) {
      slot = it->get<double>();
    } else {
      slot = *it;
    }
  }
}

}  // namespace detail

// Defaults overlaid with `user`, data paths resolved against output_dir.
inline Json resolve_config(const Json& user) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  Json c = default_config();
  detail::merge(c, user, "");
  const std::filesystem::path out = c["output_dir"].get<std::string>();
  if (out.empty()) throw ConfigError("output_dir must not be empty");
  for (auto& [key, file] : default_files()) {
    auto& slot = c["data"][key];
    if (slot.get<std::string>().empty()) slot = (out / file).string();
  }
  if (c["training"]["split"].size() != 3) throw ConfigError("training.split needs three fractions");
  for (const auto& f : c["training"]["split"]) {
    if (!f.is_number()) throw ConfigError("training.split entries must be numbers");
  }
  return c;
}

inline Json load_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("config file " + path.string() + " not found");
  Json user;
  try {
    user = Json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return resolve_config(user);
}

inline std::filesystem::path output_dir(const Json& c) { return c["output_dir"].get<std::string>(); }

inline std::filesystem::path data_path(const Json& c, const std::string& key) {
  return c["data"][key].get<std::string>();
}

inline datagen::SynthConfig synth_config(const Json& c) {
  const auto& s = c["synth"];
  datagen::SynthConfig out;
  out.groups = s["groups"].get<std::size_t>();
  out.synonyms = s["synonyms"].get<std::size_t>();
  out.min_edits = s["min_edits"].get<std::size_t>();
  out.max_edits = s["max_edits"].get<std::size_t>();
  out.persons = s["persons"].get<std::size_t>();
  out.jobs = s["jobs"].get<std::size_t>();
  out.concentration = s["concentration"].get<double>();
  out.seed = s["seed"].get<std::uint64_t>();
  return out;
}

inline poincare::PoincareConfig poincare_config(const Json& c) {
  const auto& p = c["poincare"];
  poincare::PoincareConfig out;
  out.dim = c["dimensions"]["d_h"].get<std::size_t>();
  out.epochs = p["epochs"].get<std::size_t>();
  out.lr = p["lr"].get<double>();
  out.negatives = p["negatives"].get<std::size_t>();
  out.burn_in_epochs = p["burn_in_epochs"].get<std::size_t>();
  out.burn_in_factor = p["burn_in_factor"].get<double>();
  out.init_range = p["init_range"].get<double>();
  out.seed = p["seed"].get<std::uint64_t>();
  return out;
}

inline model::ModelConfig model_config(const Json& c) {
  const auto& m = c["model"];
  model::ModelConfig out;
  out.d_h = c["dimensions"]["d_h"].get<std::size_t>();
  out.d_b = c["dimensions"]["d_b"].get<std::size_t>();
  out.d_r = c["dimensions"]["d_r"].get<std::size_t>();
  out.variant = model::parse_variant(m["variant"].get<std::string>());
  out.reg_weight = m["reg_weight"].get<double>();
  out.clause_weight = m["clause_weight"].get<double>();
  out.reg_samples = m["reg_samples"].get<std::size_t>();
  out.fusion_bias = m["fusion_bias"].get<double>();
  out.seed = m["seed"].get<std::uint64_t>();
  return out;
}

inline model::TrainConfig train_config(const Json& c) {
  const auto& t = c["training"];
  model::TrainConfig out;
  out.lr = t["lr"].get<double>();
  out.batch_size = t["batch_size"].get<std::size_t>();
  out.max_epochs = t["max_epochs"].get<std::size_t>();
  out.patience = t["patience"].get<std::size_t>();
  for (std::size_t i = 0; i < 3; ++i) out.split[i] = t["split"][i].get<double>();
  out.split_seed = t["split_seed"].get<std::uint64_t>();
  out.shuffle_seed = t["shuffle_seed"].get<std::uint64_t>();
  model::validate(out);
  return out;
}

inline eval::LinkPredictionConfig linkpred_config(const Json& c) {
  const auto& l = c["linkpred"];
  return {l["epochs"].get<std::size_t>(), l["lr"].get<double>(), l["seed"].get<std::uint64_t>()};
}

}  // namespace jtm::cli
