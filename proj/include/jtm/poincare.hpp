#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "jtm/error.hpp"
#include "jtm/graph.hpp"
#include "jtm/io.hpp"

namespace jtm::poincare {

// Points are kept at norm ≤ 1 − kBoundaryEps.
inline constexpr double kBoundaryEps = 1e-5;

inline double squared_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

inline void require_inside(std::span<const double> x, const char* what) {
  if (!(squared_norm(x) < 1.0)) {
    throw DomainError(std::string(what) + ": point lies on or outside the unit ball");
  }
}

// arcosh(1 + t), t ≥ 0, evaluated without cancellation near t = 0.
inline double arcosh1p(double t) {
  t = std::max(t, 0.0);
  return std::log1p(t + std::sqrt(t * (t + 2.0)));
}

inline double poincare_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("poincare_distance: dimension mismatch");
  require_inside(a, "poincare_distance");
  require_inside(b, "poincare_distance");
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  const double alpha = 1.0 - squared_norm(a);
  const double beta = 1.0 - squared_norm(b);
  return arcosh1p(2.0 * diff / (alpha * beta));
}

// λ_x = 2 / (1 − ‖x‖²); the metric tensor is λ_x² times the Euclidean one.
inline double conformal_factor(std::span<const double> x) {
  require_inside(x, "conformal_factor");
  return 2.0 / (1.0 - squared_norm(x));
}

// Inverse metric applied to a Euclidean gradient: ((1 − ‖x‖²)² / 4) · g.
inline std::vector<double> riemannian_rescale(std::span<const double> x,
                                              std::span<const double> euclid_grad) {
  if (x.size() != euclid_grad.size()) throw DimensionError("riemannian_rescale: dimension mismatch");
  const double a = 1.0 - squared_norm(x);
  const double s = a * a / 4.0;
  std::vector<double> out(euclid_grad.begin(), euclid_grad.end());
  for (double& v : out) v *= s;
  return out;
}

inline std::vector<double> project_to_ball(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericError("project_to_ball: non-finite coordinate");
  }
  std::vector<double> out(x.begin(), x.end());
  const double limit = 1.0 - kBoundaryEps;
  // Rounding can leave the norm an ulp above the limit, and rescaling to the
  // same target can then repeat forever, so each retry aims slightly lower.
  double target = limit;
  for (double norm = std::sqrt(squared_norm(out)); norm > limit;
       norm = std::sqrt(squared_norm(out))) {
    for (double& v : out) v = v / norm * target;
    target = std::nextafter(target, 0.0);
  }
  return out;
}

// Euclidean gradients of d(u, v) scaled by `upstream`, accumulated into
// grad_u and grad_v.
inline void accumulate_distance_gradient(std::span<const double> u, std::span<const double> v,
                                         double upstream, std::span<double> grad_u,
                                         std::span<double> grad_v) {
  const double uu = squared_norm(u);
  const double vv = squared_norm(v);
  double uv = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    diff += (u[i] - v[i]) * (u[i] - v[i]);
  }
  const double alpha = 1.0 - uu;
  const double beta = 1.0 - vv;
  const double t = 2.0 * diff / (alpha * beta);
  // γ² − 1 = t (t + 2) with γ = 1 + t.
  const double root = std::sqrt(t * (t + 2.0));
  if (root <= 0.0) return;
  const double c = upstream * 4.0 / root;
  const double cu = c / beta;
  const double cv = c / alpha;
  for (std::size_t i = 0; i < u.size(); ++i) {
    grad_u[i] += cu * ((vv - 2.0 * uv + 1.0) / (alpha * alpha) * u[i] - v[i] / alpha);
    grad_v[i] += cv * ((uu - 2.0 * uv + 1.0) / (beta * beta) * v[i] - u[i] / beta);
  }
}

// Title → point in the m-dimensional Poincaré ball.
class HyperbolicEmbeddingTable {
 public:
  HyperbolicEmbeddingTable() = default;
  HyperbolicEmbeddingTable(std::size_t dim, std::vector<std::string> titles)
      : dim_(dim), titles_(std::move(titles)), coords_(titles_.size() * dim, 0.0) {
    for (std::size_t i = 0; i < titles_.size(); ++i) {
      if (!index_.emplace(titles_[i], i).second) {
        throw FormatError("duplicate title in hyperbolic table: " + titles_[i]);
      }
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return titles_.size(); }
  const std::vector<std::string>& titles() const noexcept { return titles_; }

  std::optional<std::size_t> index_of(const std::string& title) const {
    auto it = index_.find(title);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const std::string& title) const { return index_.count(title) != 0; }

  std::span<double> point(std::size_t i) { return {coords_.data() + i * dim_, dim_}; }
  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }

  // Coordinates of a title, or the origin for titles not in the table.
  std::vector<double> lookup_or_zero(const std::string& title) const {
    auto i = index_of(title);
    if (!i) return std::vector<double>(dim_, 0.0);
    auto p = point(*i);
    return {p.begin(), p.end()};
  }

  double distance(std::size_t a, std::size_t b) const {
    return poincare_distance(point(a), point(b));
  }

  bool all_inside_ball() const {
    for (std::size_t i = 0; i < size(); ++i) {
      if (std::sqrt(squared_norm(point(i))) > 1.0 - kBoundaryEps + 1e-15) return false;
    }
    return true;
  }

  std::uint64_t seed = 0;

  bool operator==(const HyperbolicEmbeddingTable& o) const {
    return dim_ == o.dim_ && titles_ == o.titles_ && coords_ == o.coords_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> titles_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> coords_;
};

struct PoincareConfig {
  std::size_t dim = 128;
  std::size_t epochs = 100;
  double lr = 1.0;
  std::size_t negatives = 10;
  std::size_t burn_in_epochs = 10;
  double burn_in_factor = 0.1;
  double init_range = 1e-3;
  std::uint64_t seed = 0;
};

// Per-epoch hook: (epoch index, mean loss, table).
using EpochCallback =
    std::function<void(std::size_t, double, const HyperbolicEmbeddingTable&)>;

// Riemannian SGD on the negative-sampling loss
//   −log( e^{−d(c,p)} / Σ_{n ∈ N ∪ {p}} e^{−d(c,n)} )
// with negatives drawn uniformly from titles that are not parents of c.
inline HyperbolicEmbeddingTable train_poincare(const std::vector<graph::ParentChildPair>& pairs,
                                               const PoincareConfig& config,
                                               const EpochCallback& on_epoch = {}) {
  if (config.dim < 2) throw ConfigError("poincare dimension must be at least 2");
  if (pairs.empty()) throw DegenerateInputError("train_poincare: empty pair list");

  std::set<std::string> title_set;
  for (const auto& p : pairs) {
    title_set.insert(p.parent);
    title_set.insert(p.child);
  }
  HyperbolicEmbeddingTable table(config.dim, {title_set.begin(), title_set.end()});
  table.seed = config.seed;
  const std::size_t n = table.size();
  const std::size_t m = config.dim;

  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (child, parent)
  std::vector<std::set<std::size_t>> parents_of(n);
  for (const auto& p : pairs) {
    const std::size_t c = *table.index_of(p.child);
    const std::size_t q = *table.index_of(p.parent);
    edges.emplace_back(c, q);
    parents_of[c].insert(q);
  }

  std::mt19937_64 rng(config.seed);
  {
    std::uniform_real_distribution<double> init(-config.init_range, config.init_range);
    for (std::size_t i = 0; i < n; ++i)
      for (double& v : table.point(i)) v = init(rng);
  }

  std::uniform_int_distribution<std::size_t> any_node(0, n - 1);
  std::vector<std::size_t> order(edges.size());
  std::vector<std::size_t> targets;
  std::vector<double> dist, weight;
  std::map<std::size_t, std::vector<double>> grads;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr =
        epoch < config.burn_in_epochs ? config.lr * config.burn_in_factor : config.lr;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;

    for (std::size_t e : order) {
      const auto [c, q] = edges[e];
      const auto& forbidden = parents_of[c];
      targets.assign(1, q);
      if (forbidden.size() < n) {
        while (targets.size() < config.negatives + 1) {
          const std::size_t cand = any_node(rng);
          if (!forbidden.count(cand)) targets.push_back(cand);
        }
      }

      dist.resize(targets.size());
      for (std::size_t i = 0; i < targets.size(); ++i) {
        dist[i] = poincare_distance(table.point(c), table.point(targets[i]));
      }
      // softmax over −d
      const double mn = *std::min_element(dist.begin(), dist.end());
      double z = 0.0;
      weight.resize(targets.size());
      for (std::size_t i = 0; i < targets.size(); ++i) {
        weight[i] = std::exp(mn - dist[i]);
        z += weight[i];
      }
      for (double& w : weight) w /= z;
      epoch_loss += dist[0] - mn + std::log(z);

      grads.clear();
      auto slot = [&](std::size_t node) -> std::span<double> {
        auto& g = grads[node];
        if (g.empty()) g.assign(m, 0.0);
        return g;
      };
      for (std::size_t i = 0; i < targets.size(); ++i) {
        // ∂L/∂d_p = 1 − σ_p, ∂L/∂d_n = −σ_n
        const double upstream = (i == 0 ? 1.0 : 0.0) - weight[i];
        if (upstream == 0.0) continue;
        std::vector<double> gc(m, 0.0), gt(m, 0.0);
        accumulate_distance_gradient(table.point(c), table.point(targets[i]), upstream, gc, gt);
        auto sc = slot(c);
        auto st = slot(targets[i]);
        for (std::size_t k = 0; k < m; ++k) {
          sc[k] += gc[k];
          st[k] += gt[k];
        }
      }
      for (auto& [node, g] : grads) {
        auto x = table.point(node);
        const auto step = riemannian_rescale(x, g);
        std::vector<double> moved(m);
        for (std::size_t k = 0; k < m; ++k) moved[k] = x[k] - lr * step[k];
        const auto projected = project_to_ball(moved);
        std::copy(projected.begin(), projected.end(), x.begin());
      }
    }
    if (on_epoch) on_epoch(epoch, epoch_loss / static_cast<double>(edges.size()), table);
  }
  return table;
}

// Mean over pairs of the rank of the true parent among all other titles,
// ordered by distance from the child (rank 1 = nearest).
inline double mean_parent_rank(const HyperbolicEmbeddingTable& table,
                               const std::vector<graph::ParentChildPair>& pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) {
    const std::size_t c = *table.index_of(p.child);
    const std::size_t q = *table.index_of(p.parent);
    const double dp = table.distance(c, q);
    std::size_t rank = 1;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (i == c || i == q) continue;
      if (table.distance(c, i) < dp) ++rank;
    }
    total += static_cast<double>(rank);
  }
  return total / static_cast<double>(pairs.size());
}

inline std::string table_to_tsv(const HyperbolicEmbeddingTable& table) {
  std::string out = "#poincare m=" + std::to_string(table.dim()) +
                    " seed=" + std::to_string(table.seed) + "\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += table.titles()[i];
    out.push_back('\t');
    out += io::join_numbers(table.point(i));
    out.push_back('\n');
  }
  return out;
}

inline HyperbolicEmbeddingTable table_from_tsv(const std::vector<std::string>& lines) {
  if (lines.empty() || lines[0].rfind("#poincare ", 0) != 0) {
    throw FormatError("poincare TSV: missing '#poincare m=<dim> seed=<seed>' header");
  }
  std::size_t dim = 0;
  unsigned long long seed = 0;
  if (std::sscanf(lines[0].c_str(), "#poincare m=%zu seed=%llu", &dim, &seed) != 2 || dim == 0) {
    throw FormatError("poincare TSV: malformed header '" + lines[0] + "'");
  }
  std::vector<std::string> titles;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) {
      throw FormatError("poincare TSV line " + std::to_string(i + 1) + ": missing TAB");
    }
    auto values = io::split_numbers(std::string_view(lines[i]).substr(tab + 1),
                                    "line " + std::to_string(i + 1));
    if (values.size() != dim) {
      throw FormatError("poincare TSV line " + std::to_string(i + 1) + ": expected " +
                        std::to_string(dim) + " values, got " + std::to_string(values.size()));
    }
    titles.push_back(lines[i].substr(0, tab));
    rows.push_back(std::move(values));
  }
  HyperbolicEmbeddingTable table(dim, titles);
  table.seed = seed;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!(squared_norm(rows[i]) < 1.0)) {
      throw FormatError("poincare TSV: '" + titles[i] + "' lies outside the unit ball");
    }
    std::copy(rows[i].begin(), rows[i].end(), table.point(i).begin());
  }
  return table;
}

inline HyperbolicEmbeddingTable read_table_tsv(const std::filesystem::path& path) {
  return table_from_tsv(io::read_lines(path));
}

}  // namespace jtm::poincare
