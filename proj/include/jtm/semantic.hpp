#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "jtm/error.hpp"
#include "jtm/graph.hpp"
#include "jtm/hash.hpp"
#include "jtm/io.hpp"

namespace jtm::semantic {

inline constexpr std::size_t kMinDim = 8;

// Character 3-grams of the title padded with "^^" and "$$", followed by one
// "w:<word>" token per space-separated word.
inline std::vector<std::string> hashed_tokens(std::string_view title) {
  std::vector<std::string> tokens;
  const std::string padded = "^^" + std::string(title) + "$$";
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) tokens.push_back(padded.substr(i, 3));
  for (auto word : io::split(title, ' ')) {
    if (!word.empty()) tokens.push_back("w:" + std::string(word));
  }
  return tokens;
}

// Signed feature hashing of a token list, L2-normalised.
inline std::vector<double> embed_tokens(const std::vector<std::string>& tokens, std::size_t dim,
                                        std::uint64_t seed) {
  if (dim < kMinDim) {
    throw ConfigError("semantic dimension must be at least " + std::to_string(kMinDim) +
                      ", got " + std::to_string(dim));
  }
  std::vector<double> v(dim, 0.0);
  const std::uint64_t basis = fnv1a64({}) ^ splitmix64(seed);
  for (const auto& t : tokens) {
    const std::uint64_t h = splitmix64(fnv1a64(t, basis));
    v[h % dim] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm == 0.0) throw DegenerateInputError("hashed embedding cancelled to the zero vector");
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

inline std::vector<double> hashed_ngram_embed(std::string_view title, std::size_t dim,
                                              std::uint64_t seed) {
  if (title.empty()) throw DegenerateInputError("cannot embed an empty title");
  return embed_tokens(hashed_tokens(title), dim, seed);
}

class SemanticProvider {
 public:
  virtual ~SemanticProvider() = default;
  virtual std::vector<double> embed(const std::string& title) const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::string id() const = 0;
  // Whether embed() can produce a vector for this title.
  virtual bool covers(const std::string&) const { return true; }
};

class HashedNgramProvider final : public SemanticProvider {
 public:
  HashedNgramProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < kMinDim) {
      throw ConfigError("semantic dimension must be at least " + std::to_string(kMinDim));
    }
  }
  std::vector<double> embed(const std::string& title) const override {
    return hashed_ngram_embed(title, dim_, seed_);
  }
  std::size_t dim() const override { return dim_; }
  std::string id() const override {
    return "hashed-ngram:d=" + std::to_string(dim_) + ",seed=" + std::to_string(seed_);
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

class EmbeddingCache {
 public:
  struct Entry {
    std::vector<double> vector;
    std::string provenance;
  };

  EmbeddingCache() = default;
  explicit EmbeddingCache(std::size_t dim, std::string source = {})
      : dim_(dim), source_(std::move(source)) {}

  std::size_t dim() const noexcept { return dim_; }
  const std::string& source() const noexcept { return source_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool contains(const std::string& title) const { return entries_.count(title) != 0; }

  void insert(const std::string& title, std::vector<double> v, std::string provenance) {
    if (v.size() != dim_) {
      throw DimensionError("embedding for '" + title + "' has dimension " +
                           std::to_string(v.size()) + ", cache expects " + std::to_string(dim_));
    }
    entries_[title] = Entry{std::move(v), std::move(provenance)};
  }

  const std::vector<double>& at(const std::string& title) const {
    auto it = entries_.find(title);
    if (it == entries_.end()) throw LookupError("no embedding for title '" + title + "'");
    return it->second.vector;
  }

  const std::string& provenance(const std::string& title) const {
    auto it = entries_.find(title);
    if (it == entries_.end()) throw LookupError("no embedding for title '" + title + "'");
    return it->second.provenance;
  }

  const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

 private:
  std::size_t dim_ = 0;
  std::string source_;
  std::map<std::string, Entry> entries_;
};

// Serves vectors from a loaded cache; covers only the titles it holds.
class PrecomputedProvider final : public SemanticProvider {
 public:
  explicit PrecomputedProvider(EmbeddingCache cache) : cache_(std::move(cache)) {}
  std::vector<double> embed(const std::string& title) const override { return cache_.at(title); }
  std::size_t dim() const override { return cache_.dim(); }
  std::string id() const override { return "precomputed:" + cache_.source(); }
  bool covers(const std::string& title) const override { return cache_.contains(title); }

 private:
  EmbeddingCache cache_;
};

inline void normalize_in_place(std::vector<double>& v, const std::string& what) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm == 0.0) throw DegenerateInputError("cannot normalise zero vector for " + what);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
}

inline EmbeddingCache parse_embeddings(const std::vector<std::string>& lines,
                                       const std::string& source) {
  if (lines.empty() || lines[0].rfind("#embeddings ", 0) != 0) {
    throw FormatError(source + ": missing '#embeddings d=<dim> normalize=<bool>' header");
  }
  std::size_t dim = 0;
  char flag[8] = {};
  if (std::sscanf(lines[0].c_str(), "#embeddings d=%zu normalize=%7s", &dim, flag) != 2 ||
      dim == 0 || (std::string(flag) != "true" && std::string(flag) != "false")) {
    throw FormatError(source + ": malformed header '" + lines[0] + "'");
  }
  const bool normalize = std::string(flag) == "true";
  EmbeddingCache cache(dim, source);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = source + " line " + std::to_string(i + 1);
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) throw FormatError(where + ": expected title<TAB>values");
    std::string title;
    try {
      title = graph::canonicalize_title(lines[i].substr(0, tab));
    } catch (const DegenerateInputError&) {
      throw FormatError(where + ": empty title");
    }
    auto values = io::split_numbers(std::string_view(lines[i]).substr(tab + 1), where);
    if (values.size() != dim) {
      throw FormatError(where + ": expected " + std::to_string(dim) + " values, got " +
                        std::to_string(values.size()));
    }
    if (cache.contains(title)) throw FormatError(where + ": duplicate title '" + title + "'");
    if (normalize) normalize_in_place(values, where);
    cache.insert(title, std::move(values), source);
  }
  return cache;
}

inline EmbeddingCache load_precomputed(const std::filesystem::path& path) {
  return parse_embeddings(io::read_lines(path), path.string());
}

inline std::string cache_to_tsv(const EmbeddingCache& cache, bool normalize_flag = false) {
  std::string out = "#embeddings d=" + std::to_string(cache.dim()) +
                    " normalize=" + (normalize_flag ? "true" : "false") + "\n";
  for (const auto& [title, entry] : cache.entries()) {
    out += title;
    out.push_back('\t');
    out += io::join_numbers(entry.vector);
    out.push_back('\n');
  }
  return out;
}

// Embeds the canonical form of every title with `primary`, falling back to
// `fallback` for titles the primary does not cover. Each entry records the
// id of the provider that produced it.
inline EmbeddingCache embed_titles(const SemanticProvider& primary,
                                   const std::vector<std::string>& titles,
                                   const SemanticProvider* fallback = nullptr) {
  if (fallback && fallback->dim() != primary.dim()) {
    throw ConfigError("fallback encoder dimension " + std::to_string(fallback->dim()) +
                      " differs from provider dimension " + std::to_string(primary.dim()));
  }
  EmbeddingCache cache(primary.dim(), primary.id());
  std::vector<std::string> missing;
  for (const auto& raw : titles) {
    const std::string title = graph::canonicalize_title(raw);
    if (cache.contains(title)) continue;
    if (primary.covers(title)) {
      cache.insert(title, primary.embed(title), primary.id());
    } else if (fallback) {
      cache.insert(title, fallback->embed(title), fallback->id());
    } else {
      missing.push_back(title);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", '" : "'") + missing[i] + "'";
    throw LookupError(std::to_string(missing.size()) + " title(s) have no embedding: " + list);
  }
  return cache;
}

}  // namespace jtm::semantic
