#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "jtm/graph.hpp"
#include "jtm/numerics/adam.hpp"
#include "jtm/numerics/ops.hpp"

namespace jtm::eval {

// One query's ranked candidate indices and its relevant set.
struct RankedQuery {
  std::vector<std::size_t> ranking;
  std::vector<std::size_t> relevant;
};

inline void validate(const RankedQuery& q) {
  std::set<std::size_t> seen;
  for (std::size_t c : q.ranking) {
    if (!seen.insert(c).second) {
      throw DataError("ranking lists candidate " + std::to_string(c) + " twice");
    }
  }
}

inline void require_cutoff(std::size_t n) {
  if (n == 0) throw ConfigError("ranking cutoff must be at least 1");
}

// Indices sorted by descending score; equal scores keep the lower index first.
inline std::vector<std::size_t> rank_descending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

inline double precision_at_n(const std::vector<RankedQuery>& queries, std::size_t n) {
  require_cutoff(n);
  if (queries.empty()) return 0.0;
  double total = 0.0;
  for (const auto& q : queries) {
    validate(q);
    const std::set<std::size_t> rel(q.relevant.begin(), q.relevant.end());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(n, q.ranking.size()); ++r) hits += rel.count(q.ranking[r]);
    total += static_cast<double>(hits) / static_cast<double>(n);
  }
  return total / static_cast<double>(queries.size());
}

// Fraction of queries with at least one relevant item in the top n. For a
// single relevant item per query this is n × precision_at_n.
inline double hit_rate_at_n(const std::vector<RankedQuery>& queries, std::size_t n) {
  require_cutoff(n);
  if (queries.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& q : queries) {
    validate(q);
    const std::set<std::size_t> rel(q.relevant.begin(), q.relevant.end());
    for (std::size_t r = 0; r < std::min(n, q.ranking.size()); ++r) {
      if (rel.count(q.ranking[r])) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

// DCG over hits in the top n, normalised by the DCG of min(|relevant|, n)
// hits at the top. Queries without relevant items score 0.
inline double ndcg_at_n(const std::vector<RankedQuery>& queries, std::size_t n) {
  require_cutoff(n);
  if (queries.empty()) return 0.0;
  double total = 0.0;
  for (const auto& q : queries) {
    validate(q);
    const std::set<std::size_t> rel(q.relevant.begin(), q.relevant.end());
    if (rel.empty()) continue;
    double dcg = 0.0, ideal = 0.0;
    for (std::size_t r = 0; r < std::min(n, q.ranking.size()); ++r) {
      if (rel.count(q.ranking[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
    for (std::size_t r = 0; r < std::min(n, rel.size()); ++r) {
      ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
    total += dcg / ideal;
  }
  return total / static_cast<double>(queries.size());
}

// Mann–Whitney AUC with mid-ranks for ties: P(s⁺ > s⁻) + ½ P(s⁺ = s⁻).
inline double auc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) {
    throw EvaluationError("AUC needs both classes, got " + std::to_string(positive.size()) +
                          " positive and " + std::to_string(negative.size()) + " negative");
  }
  std::vector<std::pair<double, bool>> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.emplace_back(s, true);
  for (double s : negative) all.emplace_back(s, false);
  for (const auto& [s, p] : all) {
    if (std::isnan(s)) throw NumericError("AUC score is NaN");
  }
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  // Ranks are doubled so mid-ranks stay integral and the sum is exact.
  std::uint64_t rank_sum2 = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const std::uint64_t mid2 = i + j + 1;  // 2 × mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second) rank_sum2 += mid2;
    }
    i = j;
  }
  const auto np = static_cast<std::uint64_t>(positive.size());
  const auto nn = static_cast<std::uint64_t>(negative.size());
  const std::uint64_t u2 = rank_sum2 - np * (np + 1);
  return static_cast<double>(u2) / (2.0 * static_cast<double>(np * nn));
}

// ---------------------------------------------------------------- link split

using graph::Edge;

struct LinkSplit {
  graph::TransitionGraph train;
  std::vector<Edge> dev_positive, dev_negative;
  std::vector<Edge> test_positive, test_negative;
};

// Samples `count` ordered non-edges (u ≠ v) of `graph` not in `taken`.
inline std::vector<Edge> sample_non_edges(const graph::TransitionGraph& graph,
                                          const std::vector<std::string>& nodes,
                                          std::size_t count, std::set<Edge>& taken,
                                          std::mt19937_64& rng) {
  const std::size_t n = nodes.size();
  const std::size_t capacity = n < 2 ? 0 : n * (n - 1) - graph.edge_count();
  std::size_t taken_non_edges = 0;
  for (const auto& e : taken) taken_non_edges += graph.has_edge(e.first, e.second) ? 0 : 1;
  if (capacity < taken_non_edges + count) {
    throw DataError("graph has too few non-edges to sample " + std::to_string(count) +
                    " negatives");
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<Edge> out;
  out.reserve(count);
  while (out.size() < count) {
    const std::size_t a = pick(rng), b = pick(rng);
    if (a == b) continue;
    Edge e{nodes[a], nodes[b]};
    if (graph.has_edge(e.first, e.second) || taken.count(e)) continue;
    taken.insert(e);
    out.push_back(std::move(e));
  }
  return out;
}

// Removes floor(20% of E) edges as test positives and floor(20%) of the
// remainder as dev positives, each paired with as many sampled non-edges.
inline LinkSplit make_link_split(const graph::TransitionGraph& g, std::uint64_t seed) {
  if (g.edge_count() < 10) {
    throw DataError("link split needs at least 10 edges, graph has " +
                    std::to_string(g.edge_count()));
  }
  std::mt19937_64 rng(seed);
  std::vector<Edge> edges = g.edges();
  std::shuffle(edges.begin(), edges.end(), rng);
  const std::size_t n_test = edges.size() * 20 / 100;
  const std::size_t n_dev = (edges.size() - n_test) * 20 / 100;

  LinkSplit split;
  split.test_positive.assign(edges.begin(), edges.begin() + n_test);
  split.dev_positive.assign(edges.begin() + n_test, edges.begin() + n_test + n_dev);
  for (const auto& n : g.nodes()) split.train.add_node(n);
  for (std::size_t i = n_test + n_dev; i < edges.size(); ++i) {
    split.train.add_transition(edges[i].first, edges[i].second,
                               g.count(edges[i].first, edges[i].second));
  }
  const std::vector<std::string> nodes(g.nodes().begin(), g.nodes().end());
  std::set<Edge> taken;
  split.test_negative = sample_non_edges(g, nodes, n_test, taken, rng);
  split.dev_negative = sample_non_edges(g, nodes, n_dev, taken, rng);
  return split;
}

// ------------------------------------------------------------ edge operators

enum class EdgeOperator { kAverage, kHadamard, kWeightedL1, kWeightedL2 };

inline constexpr std::array<EdgeOperator, 4> kEdgeOperators = {
    EdgeOperator::kAverage, EdgeOperator::kHadamard, EdgeOperator::kWeightedL1,
    EdgeOperator::kWeightedL2};

inline std::string operator_name(EdgeOperator op) {
  switch (op) {
    case EdgeOperator::kAverage: return "average";
    case EdgeOperator::kHadamard: return "hadamard";
    case EdgeOperator::kWeightedL1: return "weighted_l1";
    case EdgeOperator::kWeightedL2: return "weighted_l2";
  }
  return "unknown";
}

inline std::vector<double> edge_embed(std::span<const double> u, std::span<const double> v,
                                      EdgeOperator op) {
  if (u.size() != v.size()) {
    throw DimensionError("edge_embed: endpoint dimensions " + std::to_string(u.size()) +
                         " and " + std::to_string(v.size()));
  }
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    switch (op) {
      case EdgeOperator::kAverage: out[i] = (u[i] + v[i]) / 2.0; break;
      case EdgeOperator::kHadamard: out[i] = u[i] * v[i]; break;
      case EdgeOperator::kWeightedL1: out[i] = std::abs(u[i] - v[i]); break;
      case EdgeOperator::kWeightedL2: out[i] = (u[i] - v[i]) * (u[i] - v[i]); break;
    }
  }
  return out;
}

using NodeVectors = std::function<std::vector<double>(const std::string&)>;

struct LinkPredictionConfig {
  std::size_t epochs = 100;
  double lr = 0.01;
  std::uint64_t seed = 0;
};

struct LinkPredictionReport {
  std::map<std::string, double> dev_auc;
  std::map<std::string, double> test_auc;
  EdgeOperator best = EdgeOperator::kAverage;
  double best_test_auc = 0.0;
};

namespace detail {

inline numerics::Tensor edge_matrix(const std::vector<Edge>& edges, const NodeVectors& vectors,
                                    EdgeOperator op, std::size_t dim) {
  numerics::Tensor x({edges.size(), dim});
  for (std::size_t r = 0; r < edges.size(); ++r) {
    const auto row = edge_embed(vectors(edges[r].first), vectors(edges[r].second), op);
    if (row.size() != dim) throw DimensionError("node vectors have inconsistent dimensions");
    std::copy(row.begin(), row.end(), x.data() + r * dim);
  }
  return x;
}

inline std::vector<double> scores(const numerics::Tensor& x, const numerics::Parameter& w,
                                  const numerics::Parameter& b) {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = b.value[0];
    for (std::size_t j = 0; j < x.cols(); ++j) s += x.at(r, j) * w.value[j];
    out[r] = s;
  }
  return out;
}

}  // namespace detail

// Logistic regression per operator on training-graph edges plus fresh 1:1
// non-edge samples each epoch; the operator with the best dev AUC is reported.
inline LinkPredictionReport link_prediction_auc(const LinkSplit& split, const NodeVectors& vectors,
                                                const LinkPredictionConfig& config = {}) {
  const auto train_pos = split.train.edges();
  if (train_pos.empty()) throw DataError("training graph has no edges");
  if (split.dev_positive.empty() || split.dev_negative.empty()) {
    throw EvaluationError("dev split is single-class");
  }
  const std::size_t dim = vectors(train_pos.front().first).size();
  const std::vector<std::string> nodes(split.train.nodes().begin(), split.train.nodes().end());
  LinkPredictionReport report;
  double best_dev = -1.0;
  for (EdgeOperator op : kEdgeOperators) {
    std::mt19937_64 rng(config.seed);
    numerics::Parameter w("lr.w", numerics::Tensor({1, dim}, 0.0));
    numerics::Parameter b("lr.b", numerics::Tensor({1}, 0.0));
    std::vector<numerics::Parameter*> params = {&w, &b};
    numerics::AdamState adam(numerics::AdamConfig{config.lr});
    const numerics::Tensor pos = detail::edge_matrix(train_pos, vectors, op, dim);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      std::set<Edge> taken;
      const auto neg_edges = sample_non_edges(split.train, nodes, train_pos.size(), taken, rng);
      const numerics::Tensor neg = detail::edge_matrix(neg_edges, vectors, op, dim);
      numerics::Tape tape;
      numerics::Var x = numerics::concat({tape.constant(pos), tape.constant(neg)}, 0);
      numerics::Var logits = numerics::linear(x, tape.param(w), tape.param(b));
      std::vector<double> targets(pos.rows(), 1.0);
      targets.resize(pos.rows() + neg.rows(), 0.0);
      numerics::Var loss = numerics::bce_with_logits(logits, targets);
      numerics::zero_grads(params);
      tape.backward(loss);
      numerics::adam_step(adam, params);
    }
    auto evaluate = [&](const std::vector<Edge>& p, const std::vector<Edge>& n) {
      const auto sp = detail::scores(detail::edge_matrix(p, vectors, op, dim), w, b);
      const auto sn = detail::scores(detail::edge_matrix(n, vectors, op, dim), w, b);
      return auc(sp, sn);
    };
    const double dev = evaluate(split.dev_positive, split.dev_negative);
    const double test = evaluate(split.test_positive, split.test_negative);
    report.dev_auc[operator_name(op)] = dev;
    report.test_auc[operator_name(op)] = test;
    if (dev > best_dev) {
      best_dev = dev;
      report.best = op;
      report.best_test_auc = test;
    }
  }
  return report;
}

// ----------------------------------------------------------------- mobility

// AP@k with a single relevant item: 1/rank if it appears in the top k.
inline double average_precision_at_k(const std::vector<std::string>& ranking,
                                     const std::string& relevant, std::size_t k) {
  require_cutoff(k);
  for (std::size_t r = 0; r < std::min(k, ranking.size()); ++r) {
    if (ranking[r] == relevant) return 1.0 / static_cast<double>(r + 1);
  }
  return 0.0;
}

using TitleMapper = std::function<std::string(const std::string&)>;

struct MobilityReport {
  double map_at_10 = 0.0;
  std::size_t queries = 0;
};

// Next-job prediction: each trajectory's final transition is held out, a
// first-order transition-count model is fit on the rest (falling back to
// global target popularity) and scored by MAP@10. With a mapper, every title
// is replaced by mapper(title) first.
inline MobilityReport map_at_10_mobility(const std::vector<std::vector<std::string>>& trajectories,
                                         const TitleMapper& mapper = {}) {
  std::vector<std::vector<std::string>> mapped;
  for (const auto& t : trajectories) {
    if (t.size() < 2) continue;
    std::vector<std::string> m;
    m.reserve(t.size());
    for (const auto& title : t) m.push_back(mapper ? mapper(title) : title);
    mapped.push_back(std::move(m));
  }
  if (mapped.empty()) throw EvaluationError("no trajectory has two or more jobs");

  std::map<std::string, std::map<std::string, std::size_t>> counts;
  std::map<std::string, std::size_t> popularity;
  for (const auto& t : mapped) {
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
      ++counts[t[i - 1]][t[i]];
      ++popularity[t[i]];
    }
  }
  auto by_count = [](const std::map<std::string, std::size_t>& m) {
    std::vector<std::pair<std::string, std::size_t>> v(m.begin(), m.end());
    std::stable_sort(v.begin(), v.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return v;
  };
  const auto popular = by_count(popularity);

  double total = 0.0;
  for (const auto& t : mapped) {
    const auto& from = t[t.size() - 2];
    const auto& to = t.back();
    std::vector<std::string> ranking;
    std::set<std::string> listed;
    if (auto it = counts.find(from); it != counts.end()) {
      for (const auto& [title, c] : by_count(it->second)) {
        if (ranking.size() == 10) break;
        ranking.push_back(title);
        listed.insert(title);
      }
    }
    for (const auto& [title, c] : popular) {
      if (ranking.size() == 10) break;
      if (listed.insert(title).second) ranking.push_back(title);
    }
    total += average_precision_at_k(ranking, to, 10);
  }
  return {total / static_cast<double>(mapped.size()), mapped.size()};
}

}  // namespace jtm::eval
