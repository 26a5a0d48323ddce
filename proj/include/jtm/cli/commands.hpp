#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "jtm/cli/config.hpp"
#include "jtm/graph.hpp"
#include "jtm/semantic.hpp"
#include "jtm/syntactic.hpp"

namespace jtm::cli {

struct CommandResult {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
};

namespace detail {

inline void write(CommandResult& r, const std::filesystem::path& path, std::string_view content) {
  io::atomic_write(path, content);
  r.written.push_back(path);
}

inline void write_json(CommandResult& r, const std::filesystem::path& path, const Json& j) {
  write(r, path, j.dump(2) + "\n");
}

inline std::string report_number(double v) { return io::format_double(v); }

// Semantic provider named by semantic.provider: "hashed" or
// "precomputed:<path>", optionally backed by the hashed encoder.
struct Providers {
  std::unique_ptr<semantic::SemanticProvider> primary;
  std::unique_ptr<semantic::SemanticProvider> fallback;
};

inline Providers make_providers(const Json& c) {
  const std::string provider = c["semantic"]["provider"].get<std::string>();
  const std::size_t d_b = c["dimensions"]["d_b"].get<std::size_t>();
  const std::uint64_t seed = c["semantic"]["seed"].get<std::uint64_t>();
  Providers p;
  const std::string prefix = "precomputed:";
  if (provider == "hashed") {
    p.primary = std::make_unique<semantic::HashedNgramProvider>(d_b, seed);
  } else if (provider.rfind(prefix, 0) == 0 && provider.size() > prefix.size()) {
    p.primary = std::make_unique<semantic::PrecomputedProvider>(
        semantic::load_precomputed(provider.substr(prefix.size())));
    if (p.primary->dim() != d_b) {
      throw ConfigError("precomputed embeddings have dimension " + std::to_string(p.primary->dim()) +
                        " but dimensions.d_b is " + std::to_string(d_b));
    }
  } else {
    throw ConfigError("semantic.provider must be 'hashed' or 'precomputed:<path>', got '" + provider + "'");
  }
  if (c["semantic"]["hashed_fallback"].get<bool>() && provider != "hashed") {
    p.fallback = std::make_unique<semantic::HashedNgramProvider>(d_b, seed);
  }
  return p;
}

inline poincare::HyperbolicEmbeddingTable load_hyperbolic(const Json& c) {
  auto table = poincare::read_table_tsv(data_path(c, "hyperbolic"));
  const std::size_t d_h = c["dimensions"]["d_h"].get<std::size_t>();
  if (table.dim() != d_h) {
    throw ConfigError("hyperbolic table has dimension " + std::to_string(table.dim()) +
                      " but dimensions.d_h is " + std::to_string(d_h));
  }
  return table;
}

inline std::vector<std::string> read_titles(const std::filesystem::path& path) {
  std::vector<std::string> out;
  for (const auto& line : io::read_lines(path)) {
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  if (out.empty()) throw DataError(path.string() + ": no titles");
  return out;
}

// Model inference over raw titles with the configured feature sources.
class Mapper {
 public:
  explicit Mapper(const Json& c)
      : model_(model::load_model(data_path(c, "model"))),
        hyperbolic_(load_hyperbolic(c)),
        providers_(make_providers(c)),
        features_(model_.taxonomy(), hyperbolic_, *providers_.primary, providers_.fallback.get()) {
    if (model_.config().d_h != features_.d_h() || model_.config().d_b != features_.d_b()) {
      throw ConfigError("model dimensions do not match the configured feature sources");
    }
  }

  const model::MapperModel& model() const { return model_; }
  model::Features features(const std::vector<std::string>& titles) const { return features_.build(titles); }

 private:
  model::MapperModel model_;
  poincare::HyperbolicEmbeddingTable hyperbolic_;
  Providers providers_;
  model::FeatureBuilder features_;
};

}  // namespace detail

inline CommandResult gen_data(const Json& c) {
  CommandResult r;
  const auto cfg = synth_config(c);
  const auto taxonomy = datagen::gen_taxonomy(cfg);
  const auto resumes = datagen::gen_resumes(cfg, taxonomy);
  detail::write(r, data_path(c, "taxonomy"), syntactic::taxonomy_to_tsv(taxonomy.taxonomy));
  detail::write(r, data_path(c, "labels"), datagen::labels_to_tsv(taxonomy));
  detail::write(r, data_path(c, "resumes"), graph::resumes_to_jsonl(resumes.records));
  return r;
}

inline CommandResult build_graph(const Json& c) {
  CommandResult r;
  const auto records = graph::read_resumes_jsonl(data_path(c, "resumes"));
  const auto g = graph::build_transition_graph(records);
  detail::write_json(r, data_path(c, "graph"), graph::graph_to_json(g));
  detail::write(r, data_path(c, "pairs"), graph::pairs_to_tsv(graph::extract_parent_child_pairs(records)));
  return r;
}

inline CommandResult train_poincare(const Json& c) {
  CommandResult r;
  const auto pairs = graph::read_pairs_tsv(data_path(c, "pairs"));
  auto cfg = poincare_config(c);
  detail::write(r, data_path(c, "hyperbolic"), poincare::table_to_tsv(poincare::train_poincare(pairs, cfg)));
  if (c["poincare"]["export_2d"].get<bool>()) {
    // Separate two-dimensional run for plotting.
    cfg.dim = 2;
    detail::write(r, output_dir(c) / "hyperbolic_2d.tsv",
                  poincare::table_to_tsv(poincare::train_poincare(pairs, cfg)));
  }
  return r;
}

// Embeds the taxonomy, the labeled raw titles and, when present, the titles
// file.
inline CommandResult encode_semantic(const Json& c) {
  CommandResult r;
  const auto providers = detail::make_providers(c);
  const auto taxonomy = syntactic::read_taxonomy(data_path(c, "taxonomy"));
  std::vector<std::string> titles = taxonomy.titles();
  if (std::filesystem::exists(data_path(c, "labels"))) {
    for (const auto& lt : model::read_labels(data_path(c, "labels"), taxonomy)) titles.push_back(lt.title);
  }
  if (std::filesystem::exists(data_path(c, "titles"))) {
    for (auto& t : detail::read_titles(data_path(c, "titles"))) titles.push_back(std::move(t));
  }
  const auto cache = semantic::embed_titles(*providers.primary, titles, providers.fallback.get());
  detail::write(r, data_path(c, "semantic"), semantic::cache_to_tsv(cache));
  return r;
}

// Splits the labeled titles, trains, and writes the best checkpoint, the
// training curve and the held-out test labels.
inline CommandResult train(const Json& c) {
  CommandResult r;
  const auto taxonomy = syntactic::read_taxonomy(data_path(c, "taxonomy"));
  const auto labeled = model::read_labels(data_path(c, "labels"), taxonomy);
  const auto hyperbolic = detail::load_hyperbolic(c);
  const auto providers = detail::make_providers(c);
  const auto tcfg = train_config(c);
  const auto mcfg = model_config(c);

  model::FeatureBuilder fb(taxonomy, hyperbolic, *providers.primary, providers.fallback.get());
  std::vector<std::string> titles;
  std::vector<std::size_t> labels;
  for (const auto& lt : labeled) {
    titles.push_back(lt.title);
    labels.push_back(lt.label);
  }
  const auto features = fb.build(titles);
  const auto candidates = fb.candidates();
  const auto split = model::split_indices(titles.size(), tcfg.split, tcfg.split_seed);
  model::MapperModel m(taxonomy, mcfg, candidates.b, candidates.s);
  auto result = model::train(std::move(m), features, labels, split.train, split.val, tcfg);
  r.warnings = result.warnings;

  std::string test;
  for (std::size_t i : split.test) test += titles[i] + '\t' + taxonomy.title(labels[i]) + '\n';
  model::save_model(result.model, data_path(c, "model"));
  r.written.push_back(data_path(c, "model"));
  detail::write(r, output_dir(c) / "curve.csv", model::curve_to_csv(result.curve));
  detail::write(r, data_path(c, "test_labels"), test);
  return r;
}

// Ranked mappings TSV: title, rank, standard title, probability.
inline CommandResult map(const Json& c) {
  CommandResult r;
  const detail::Mapper mapper(c);
  const auto titles = detail::read_titles(data_path(c, "titles"));
  const auto k = c["map"]["k"].get<std::size_t>();
  if (k == 0) throw ConfigError("map.k must be at least 1");
  const auto ranked = model::map_topk(mapper.model(), mapper.features(titles), k);
  std::string out = "#title\trank\tstandard_title\tprobability\n";
  for (std::size_t i = 0; i < titles.size(); ++i) {
    const auto& m = ranked[i];
    for (std::size_t j = 0; j < m.entries.size(); ++j) {
      out += graph::canonicalize_title(titles[i]) + '\t' + std::to_string(j + 1) + '\t' +
             m.entries[j].first + '\t' + io::format_double(m.entries[j].second) + '\n';
    }
  }
  if (!ranked.empty() && ranked.front().clamped) {
    r.warnings.push_back("map.k=" + std::to_string(k) + " exceeds the taxonomy size; clamped to " +
                         std::to_string(mapper.model().classes()));
  }
  detail::write(r, output_dir(c) / "mappings.tsv", out);
  return r;
}

inline CommandResult evaluate(const Json& c) {
  CommandResult r;
  const detail::Mapper mapper(c);
  const auto labeled = model::read_labels(data_path(c, "test_labels"), mapper.model().taxonomy());
  std::vector<std::string> titles;
  std::vector<std::size_t> labels;
  for (const auto& lt : labeled) {
    titles.push_back(lt.title);
    labels.push_back(lt.label);
  }
  const auto q = model::ranked_queries(mapper.model(), mapper.features(titles), labels);
  Json report;
  report["queries"] = q.size();
  for (std::size_t n : {1, 5, 10}) report["precision@" + std::to_string(n)] = eval::precision_at_n(q, n);
  for (std::size_t n : {1, 5, 10}) report["hit_rate@" + std::to_string(n)] = eval::hit_rate_at_n(q, n);
  report["ndcg@10"] = eval::ndcg_at_n(q, 10);
  detail::write_json(r, output_dir(c) / "eval.json", report);
  return r;
}

// Link prediction on the transition graph with hyperbolic node vectors;
// nodes without a vector get the origin.
inline CommandResult linkpred(const Json& c) {
  CommandResult r;
  Json graph_json;
  try {
    graph_json = Json::parse(io::read_file(data_path(c, "graph")));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(data_path(c, "graph").string() + ": " + e.what());
  }
  const auto g = graph::graph_from_json(graph_json);
  const auto table = poincare::read_table_tsv(data_path(c, "hyperbolic"));
  const auto split = eval::make_link_split(g, c["linkpred"]["split_seed"].get<std::uint64_t>());
  const auto report = eval::link_prediction_auc(
      split, [&](const std::string& t) { return table.lookup_or_zero(t); }, linkpred_config(c));
  Json j;
  j["edges"] = g.edge_count();
  j["train_edges"] = split.train.edge_count();
  j["dev_edges"] = split.dev_positive.size();
  j["test_edges"] = split.test_positive.size();
  j["dev_auc"] = report.dev_auc;
  j["test_auc"] = report.test_auc;
  j["best_operator"] = eval::operator_name(report.best);
  j["best_test_auc"] = report.best_test_auc;
  detail::write_json(r, output_dir(c) / "linkpred.json", j);
  return r;
}

// Next-job MAP@10 on raw titles and on titles mapped to their top-1
// standard title.
inline CommandResult mobility(const Json& c) {
  CommandResult r;
  const detail::Mapper mapper(c);
  std::vector<std::vector<std::string>> trajectories;
  std::set<std::string> distinct;
  for (auto& [person, titles] : graph::person_trajectories(graph::read_resumes_jsonl(data_path(c, "resumes")))) {
    distinct.insert(titles.begin(), titles.end());
    trajectories.push_back(titles);
  }
  const std::vector<std::string> titles(distinct.begin(), distinct.end());
  const auto top = model::map_topk(mapper.model(), mapper.features(titles), 1);
  std::map<std::string, std::string> mapped;
  for (std::size_t i = 0; i < titles.size(); ++i) mapped[titles[i]] = top[i].entries.front().first;

  const auto raw = eval::map_at_10_mobility(trajectories);
  const auto with = eval::map_at_10_mobility(trajectories, [&](const std::string& t) { return mapped.at(t); });
  Json j;
  j["queries"] = raw.queries;
  j["map@10_raw"] = raw.map_at_10;
  j["map@10_mapped"] = with.map_at_10;
  detail::write_json(r, output_dir(c) / "mobility.json", j);
  return r;
}

using Command = std::function<CommandResult(const Json&)>;

inline const std::vector<std::pair<std::string, Command>>& commands() {
  static const std::vector<std::pair<std::string, Command>> all = {
      {"gen-data", gen_data},       {"build-graph", build_graph}, {"train-poincare", train_poincare},
      {"encode-semantic", encode_semantic}, {"train", train},     {"map", map},
      {"eval", evaluate},           {"linkpred", linkpred},       {"mobility", mobility}};
  return all;
}

// Runs one command and writes the resolved config it ran with to
// <output_dir>/<name>.config.json.
inline CommandResult run(const std::string& name, const Json& config) {
  for (const auto& [n, fn] : commands()) {
    if (n != name) continue;
    CommandResult r = fn(config);
    detail::write_json(r, output_dir(config) / (name + ".config.json"), config);
    return r;
  }
  throw ConfigError("unknown command '" + name + "'");
}

}  // namespace jtm::cli
