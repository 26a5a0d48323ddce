#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "jtm/graph.hpp"
#include "jtm/hash.hpp"
#include "jtm/syntactic.hpp"

namespace jtm::datagen {

struct SynthConfig {
  std::size_t groups = 200;
  std::size_t synonyms = 5;
  std::size_t min_edits = 1;
  std::size_t max_edits = 3;
  std::size_t persons = 2000;
  std::size_t jobs = 6;
  double concentration = 0.1;
  // Explicit group transition matrix; Dirichlet(concentration) rows when unset.
  std::optional<std::vector<std::vector<double>>> transition;
  std::uint64_t seed = 0;
};

inline void validate(const SynthConfig& c) {
  if (c.groups == 0 || c.synonyms == 0 || c.persons == 0 || c.jobs == 0) {
    throw ConfigError("groups, synonyms, persons and jobs must all be at least 1");
  }
  if (c.min_edits > c.max_edits) throw ConfigError("min_edits exceeds max_edits");
  if (!c.transition && !(c.concentration > 0.0)) {
    throw ConfigError("Dirichlet concentration must be positive");
  }
  if (c.transition) {
    const auto& m = *c.transition;
    if (m.size() != c.groups) {
      throw ConfigError("transition matrix has " + std::to_string(m.size()) + " rows for " +
                        std::to_string(c.groups) + " groups");
    }
    for (std::size_t r = 0; r < m.size(); ++r) {
      if (m[r].size() != c.groups) throw ConfigError("transition row " + std::to_string(r) + " has wrong length");
      double s = 0.0;
      for (double p : m[r]) {
        if (!(p >= 0.0)) throw ConfigError("transition probabilities must be non-negative");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9) {
        throw ConfigError("transition row " + std::to_string(r) + " sums to " + std::to_string(s));
      }
    }
  }
}

inline const std::vector<std::string>& seniority_words() {
  static const std::vector<std::string> w = {"", "junior", "senior", "lead", "principal", "chief"};
  return w;
}

inline const std::vector<std::string>& field_words() {
  static const std::vector<std::string> w = {
      "software",  "data",      "marketing", "sales",       "finance",    "network",
      "security",  "product",   "research",  "clinical",    "logistics",  "procurement",
      "payroll",   "frontend",  "backend",   "mobile",      "quality",    "operations",
      "brand",     "content",   "legal",     "compliance",  "mechanical", "electrical",
      "civil",     "chemical",  "retail",    "hospitality", "warehouse",  "customer"};
  return w;
}

inline const std::vector<std::string>& role_words() {
  static const std::vector<std::string> w = {
      "engineer",   "analyst",    "manager",    "developer", "consultant", "specialist",
      "designer",   "architect",  "coordinator", "scientist", "technician", "administrator",
      "accountant", "supervisor", "officer",    "associate", "strategist", "planner"};
  return w;
}

struct SynthTaxonomy {
  syntactic::Taxonomy taxonomy;
  // Variant title → group index; variants listed per group in creation order.
  std::vector<std::vector<std::string>> variants;
};

struct LabeledVariant {
  std::string title;
  std::size_t group;
};

namespace detail {

inline std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  for (auto t : io::split(s, ' ')) {
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& t) {
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) out += (i ? " " : "") + t[i];
  return out;
}

// One edit from {swap adjacent chars, drop a token, abbreviate the first
// token to its initial}; edits that do not apply leave the title unchanged.
inline std::string apply_edit(const std::string& title, std::mt19937_64& rng) {
  auto t = tokens(title);
  std::uniform_int_distribution<int> kind(0, 2);
  switch (kind(rng)) {
    case 0: {
      std::vector<std::size_t> eligible;
      for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i].size() >= 2) eligible.push_back(i);
      if (eligible.empty()) break;
      auto& tok = t[eligible[std::uniform_int_distribution<std::size_t>(0, eligible.size() - 1)(rng)]];
      const std::size_t p = std::uniform_int_distribution<std::size_t>(0, tok.size() - 2)(rng);
      std::swap(tok[p], tok[p + 1]);
      break;
    }
    case 1:
      if (t.size() >= 2) t.erase(t.begin() + static_cast<std::ptrdiff_t>(
                                     std::uniform_int_distribution<std::size_t>(0, t.size() - 1)(rng)));
      break;
    default:
      if (!t.empty()) t[0] = t[0].substr(0, 1);
      break;
  }
  return join(t);
}

inline std::size_t shared_grams(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t shared = 0;
  for (std::size_t i = 0, j = 0; i < a.size() && j < b.size();) {
    if (a[i] < b[j]) ++i;
    else if (b[j] < a[i]) ++j;
    else { ++shared; ++i; ++j; }
  }
  return shared;
}

}  // namespace detail

// Whether `variant` shares strictly more padded 3-grams with standard
// `group` than with every other standard title.
inline bool closest_to_own(const std::string& variant, std::size_t group,
                           const std::vector<std::vector<std::string>>& standard_grams) {
  const auto g = syntactic::char_ngrams(variant);
  const std::size_t own = detail::shared_grams(g, standard_grams[group]);
  for (std::size_t k = 0; k < standard_grams.size(); ++k) {
    if (k != group && detail::shared_grams(g, standard_grams[k]) >= own) return false;
  }
  return true;
}

inline SynthTaxonomy gen_taxonomy(const SynthConfig& config) {
  validate(config);
  const auto& sen = seniority_words();
  const auto& fields = field_words();
  const auto& roles = role_words();
  const std::size_t capacity = sen.size() * fields.size() * roles.size();
  if (config.groups > capacity) {
    throw ConfigError("word bank supports at most " + std::to_string(capacity) + " groups, " +
                      std::to_string(config.groups) + " requested");
  }
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> combos(capacity);
  std::iota(combos.begin(), combos.end(), std::size_t{0});
  std::shuffle(combos.begin(), combos.end(), rng);

  std::vector<std::string> titles, groups;
  for (std::size_t g = 0; g < config.groups; ++g) {
    const std::size_t c = combos[g];
    const auto& s = sen[c / (fields.size() * roles.size())];
    const auto& f = fields[(c / roles.size()) % fields.size()];
    const auto& r = roles[c % roles.size()];
    titles.push_back((s.empty() ? "" : s + " ") + f + " " + r);
    groups.push_back("g" + std::to_string(g));
  }
  SynthTaxonomy out{syntactic::Taxonomy(titles, groups), {}};

  std::vector<std::vector<std::string>> grams;
  for (const auto& t : titles) grams.push_back(syntactic::char_ngrams(t));
  std::set<std::string> used(titles.begin(), titles.end());
  std::uniform_int_distribution<std::size_t> edits(config.min_edits, config.max_edits);
  constexpr std::size_t kMaxAttempts = 1000;
  for (std::size_t g = 0; g < config.groups; ++g) {
    auto& vs = out.variants.emplace_back();
    for (std::size_t s = 0; s < config.synonyms; ++s) {
      std::size_t attempt = 0;
      for (;; ++attempt) {
        if (attempt == kMaxAttempts) {
          throw ConfigError("could not generate a distinct variant of '" + titles[g] + "' after " +
                            std::to_string(kMaxAttempts) + " attempts");
        }
        const std::size_t k = edits(rng);
        std::string v = titles[g];
        for (std::size_t e = 0; e < k; ++e) v = detail::apply_edit(v, rng);
        if (k == 0) {
          vs.push_back(v);
          break;
        }
        if (used.count(v) || !closest_to_own(v, g, grams)) continue;
        used.insert(v);
        vs.push_back(std::move(v));
        break;
      }
    }
  }
  return out;
}

inline std::vector<LabeledVariant> labeled_variants(const SynthTaxonomy& t) {
  std::vector<LabeledVariant> out;
  for (std::size_t g = 0; g < t.variants.size(); ++g)
    for (const auto& v : t.variants[g]) out.push_back({v, g});
  return out;
}

// "raw<TAB>standard" lines.
inline std::string labels_to_tsv(const SynthTaxonomy& t) {
  std::string out;
  for (const auto& lv : labeled_variants(t)) out += lv.title + '\t' + t.taxonomy.title(lv.group) + '\n';
  return out;
}

inline std::vector<std::vector<double>> transition_matrix(const SynthConfig& config) {
  validate(config);
  if (config.transition) return *config.transition;
  // Separate stream so the matrix does not depend on taxonomy generation.
  std::mt19937_64 rng(splitmix64(config.seed ^ 0x7472616e73ULL));
  std::gamma_distribution<double> gamma(config.concentration, 1.0);
  std::vector<std::vector<double>> m(config.groups, std::vector<double>(config.groups));
  for (auto& row : m) {
    double s = 0.0;
    for (double& p : row) s += (p = gamma(rng));
    if (s == 0.0) {
      // Every draw underflowed; fall back to a uniformly chosen successor.
      row[std::uniform_int_distribution<std::size_t>(0, row.size() - 1)(rng)] = 1.0;
      continue;
    }
    for (double& p : row) p /= s;
  }
  return m;
}

struct Resumes {
  std::vector<graph::JobRecord> records;
  std::vector<std::vector<std::size_t>> group_walks;  // per person
};

inline Resumes gen_resumes(const SynthConfig& config, const SynthTaxonomy& taxonomy) {
  validate(config);
  if (taxonomy.variants.size() != config.groups) {
    throw ConfigError("taxonomy has " + std::to_string(taxonomy.variants.size()) +
                      " groups, config expects " + std::to_string(config.groups));
  }
  const auto matrix = transition_matrix(config);
  std::mt19937_64 rng(splitmix64(config.seed ^ 0x726573756d6573ULL));
  std::uniform_int_distribution<std::size_t> start(0, config.groups - 1);
  std::uniform_int_distribution<int> months(6, 48);
  std::uniform_int_distribution<int> company(0, 999);
  std::uniform_int_distribution<int> first_year(1995, 2010);

  Resumes out;
  const int width = static_cast<int>(std::to_string(config.persons).size());
  for (std::size_t p = 0; p < config.persons; ++p) {
    std::string id = std::to_string(p);
    id = "p" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    auto& walk = out.group_walks.emplace_back();
    std::size_t g = start(rng);
    int month_index = first_year(rng) * 12;
    for (std::size_t j = 0; j < config.jobs; ++j) {
      if (j > 0) {
        std::discrete_distribution<std::size_t> next(matrix[g].begin(), matrix[g].end());
        g = next(rng);
      }
      walk.push_back(g);
      const auto& vs = taxonomy.variants[g];
      const auto& title = vs[std::uniform_int_distribution<std::size_t>(0, vs.size() - 1)(rng)];
      graph::JobRecord r;
      r.person_id = id;
      r.title = title;
      r.company_id = "c" + std::to_string(company(rng));
      r.start = {month_index / 12, month_index % 12 + 1, 1};
      month_index += months(rng);
      if (j + 1 < config.jobs) r.end = graph::Date{month_index / 12, month_index % 12 + 1, 1};
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace jtm::datagen
