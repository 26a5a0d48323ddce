#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "jtm/error.hpp"
#include "jtm/graph.hpp"
#include "jtm/hash.hpp"
#include "jtm/io.hpp"

namespace jtm::syntactic {

struct NgramConfig {
  std::size_t n = 3;
  bool pad = true;
};

// Sorted, de-duplicated character n-grams. With padding the string is
// wrapped in n−1 '^' and n−1 '$'; without it a string shorter than n is
// its own single gram.
inline std::vector<std::string> char_ngrams(std::string_view s, const NgramConfig& cfg = {}) {
  if (cfg.n == 0) throw ConfigError("n-gram size must be positive");
  if (s.empty()) throw DegenerateInputError("cannot tokenise an empty string");
  std::string text(s);
  if (cfg.pad) text = std::string(cfg.n - 1, '^') + text + std::string(cfg.n - 1, '$');
  std::vector<std::string> grams;
  if (text.size() < cfg.n) {
    grams.push_back(text);
  } else {
    for (std::size_t i = 0; i + cfg.n <= text.size(); ++i) grams.push_back(text.substr(i, cfg.n));
  }
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  return grams;
}

inline double set_cosine(std::size_t shared, std::size_t a, std::size_t b) {
  return static_cast<double>(shared) /
         std::sqrt(static_cast<double>(a) * static_cast<double>(b));
}

// |A∩B| / √(|A|·|B|) over n-gram sets of the canonical forms.
inline double string_cosine(std::string_view a, std::string_view b, const NgramConfig& cfg = {}) {
  const auto ga = char_ngrams(graph::canonicalize_title(a), cfg);
  const auto gb = char_ngrams(graph::canonicalize_title(b), cfg);
  std::size_t shared = 0;
  for (auto i = ga.begin(), j = gb.begin(); i != ga.end() && j != gb.end();) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++shared;
      ++i;
      ++j;
    }
  }
  return set_cosine(shared, ga.size(), gb.size());
}

// Ordered standard titles; row k of every downstream |Y|-sized object refers
// to title(k).
class Taxonomy {
 public:
  Taxonomy() = default;
  Taxonomy(std::vector<std::string> titles, std::vector<std::string> groups = {}) {
    if (!groups.empty() && groups.size() != titles.size()) {
      throw DimensionError("taxonomy has " + std::to_string(titles.size()) + " titles but " +
                           std::to_string(groups.size()) + " group labels");
    }
    for (std::size_t k = 0; k < titles.size(); ++k) {
      std::string t = graph::canonicalize_title(titles[k]);
      if (!index_.emplace(t, k).second) {
        throw DataError("duplicate standard title after canonicalisation: '" + t + "'");
      }
      titles_.push_back(std::move(t));
    }
    groups_ = groups.empty() ? std::vector<std::string>(titles_.size()) : std::move(groups);
  }

  std::size_t size() const noexcept { return titles_.size(); }
  bool empty() const noexcept { return titles_.empty(); }
  const std::string& title(std::size_t k) const { return titles_.at(k); }
  const std::string& group(std::size_t k) const { return groups_.at(k); }
  const std::vector<std::string>& titles() const noexcept { return titles_; }
  const std::vector<std::string>& groups() const noexcept { return groups_; }

  std::optional<std::size_t> index_of(const std::string& title) const {
    auto it = index_.find(title);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t require_index(const std::string& title) const {
    auto k = index_of(graph::canonicalize_title(title));
    if (!k) throw LookupError("'" + title + "' is not a standard title");
    return *k;
  }

  // Stable id derived from the ordered (title, group) rows.
  std::string version() const {
    std::uint64_t h = fnv1a64("taxonomy");
    for (std::size_t k = 0; k < size(); ++k) {
      h = fnv1a64(titles_[k], h);
      h = fnv1a64("\t", h);
      h = fnv1a64(groups_[k], h);
      h = fnv1a64("\n", h);
    }
    return hex64(h);
  }

  bool operator==(const Taxonomy& o) const {
    return titles_ == o.titles_ && groups_ == o.groups_;
  }

 private:
  std::vector<std::string> titles_;
  std::vector<std::string> groups_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline Taxonomy parse_taxonomy(const std::vector<std::string>& lines, const std::string& source) {
  std::vector<std::string> titles, groups;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    const auto cols = io::split(lines[i], '\t');
    if (cols.size() > 2) {
      throw FormatError(source + " line " + std::to_string(i + 1) +
                        ": expected standard_title<TAB>group");
    }
    titles.emplace_back(cols[0]);
    groups.emplace_back(cols.size() == 2 ? cols[1] : std::string_view{});
  }
  if (titles.empty()) throw DataError(source + ": taxonomy is empty");
  try {
    return Taxonomy(std::move(titles), std::move(groups));
  } catch (const DegenerateInputError& e) {
    throw DataError(source + ": " + e.what());
  }
}

inline Taxonomy read_taxonomy(const std::filesystem::path& path) {
  return parse_taxonomy(io::read_lines(path), path.string());
}

inline std::string taxonomy_to_tsv(const Taxonomy& t) {
  std::string out;
  for (std::size_t k = 0; k < t.size(); ++k) out += t.title(k) + '\t' + t.group(k) + '\n';
  return out;
}

struct SyntacticVector {
  std::vector<double> values;
  std::string taxonomy_version;
};

// Inverted index from n-gram to the standard titles containing it, so a
// title's full vector costs one pass over its own grams.
class SyntacticIndex {
 public:
  SyntacticIndex(const Taxonomy& taxonomy, NgramConfig cfg = {})
      : cfg_(cfg), version_(taxonomy.version()) {
    if (taxonomy.empty()) throw DegenerateInputError("taxonomy is empty");
    sizes_.reserve(taxonomy.size());
    for (std::size_t k = 0; k < taxonomy.size(); ++k) {
      const auto grams = char_ngrams(taxonomy.title(k), cfg_);
      sizes_.push_back(grams.size());
      for (const auto& g : grams) postings_[g].push_back(static_cast<std::uint32_t>(k));
    }
  }

  std::size_t size() const noexcept { return sizes_.size(); }
  const std::string& taxonomy_version() const noexcept { return version_; }

  // Writes the |Y| similarities of `title` into out.
  void fill(std::string_view title, std::span<double> out) const {
    if (out.size() != sizes_.size()) throw DimensionError("syntactic output has wrong length");
    const auto grams = char_ngrams(graph::canonicalize_title(title), cfg_);
    std::vector<std::size_t> shared(sizes_.size(), 0);
    for (const auto& g : grams) {
      auto it = postings_.find(g);
      if (it == postings_.end()) continue;
      for (std::uint32_t k : it->second) ++shared[k];
    }
    for (std::size_t k = 0; k < sizes_.size(); ++k) {
      out[k] = set_cosine(shared[k], grams.size(), sizes_[k]);
    }
  }

  SyntacticVector vector(std::string_view title) const {
    SyntacticVector v{std::vector<double>(sizes_.size()), version_};
    fill(title, v.values);
    return v;
  }

 private:
  NgramConfig cfg_;
  std::string version_;
  std::vector<std::size_t> sizes_;
  std::unordered_map<std::string, std::vector<std::uint32_t>> postings_;
};

inline SyntacticVector build_syntactic_vector(std::string_view title, const Taxonomy& taxonomy,
                                              const NgramConfig& cfg = {}) {
  return SyntacticIndex(taxonomy, cfg).vector(title);
}

}  // namespace jtm::syntactic
