#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <compare>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "jtm/error.hpp"
#include "jtm/io.hpp"

namespace jtm::graph {

// Lowercases ASCII, drops control characters, trims and collapses runs of
// whitespace to one space. Non-ASCII UTF-8 bytes pass through untouched.
inline std::string canonicalize_title(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
      pending_space = !out.empty();
      continue;
    }
    if (c < 0x20 || c == 0x7f) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  if (out.empty()) {
    throw DegenerateInputError("title is empty after normalization: '" +
                               std::string(raw) + "'");
  }
  return out;
}

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;

  auto operator<=>(const Date&) const = default;

  std::string iso() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
  }
};

// Accepts YYYY-MM-DD, YYYY-MM (day 1) or YYYY (January 1).
inline Date parse_iso_date(std::string_view s) {
  Date d{0, 1, 1};
  int fields = 0;
  auto bad = [&] { return DataError("invalid ISO-8601 date '" + std::string(s) + "'"); };
  const auto parts = io::split(s, '-');
  if (parts.empty() || parts.size() > 3) throw bad();
  int* slots[3] = {&d.year, &d.month, &d.day};
  for (auto part : parts) {
    if (part.empty()) throw bad();
    int v = 0;
    for (char c : part) {
      if (c < '0' || c > '9') throw bad();
      v = v * 10 + (c - '0');
    }
    *slots[fields++] = v;
  }
  if (parts[0].size() != 4) throw bad();
  const std::chrono::year_month_day ymd{std::chrono::year{d.year},
                                        std::chrono::month{static_cast<unsigned>(d.month)},
                                        std::chrono::day{static_cast<unsigned>(d.day)}};
  if (!ymd.ok()) throw bad();
  return d;
}

struct JobRecord {
  std::string person_id;
  std::string title;
  std::string company_id;
  Date start;
  std::optional<Date> end;
};

inline void validate(const JobRecord& r) {
  canonicalize_title(r.title);
  if (r.end && *r.end < r.start) {
    throw DataError("record for person '" + r.person_id + "' ends (" + r.end->iso() +
                    ") before it starts (" + r.start.iso() + ")");
  }
}

inline JobRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("resume line is not a JSON object");
  for (const char* key : {"person_id", "title", "company_id", "start", "end"}) {
    if (!j.contains(key)) throw DataError(std::string("resume record missing field '") + key + "'");
  }
  for (const auto& item : j.items()) {
    const std::string& k = item.key();
    if (k != "person_id" && k != "title" && k != "company_id" && k != "start" && k != "end") {
      throw DataError("resume record has unknown field '" + k + "'");
    }
  }
  JobRecord r;
  try {
    r.person_id = j.at("person_id").get<std::string>();
    r.title = j.at("title").get<std::string>();
    r.company_id = j.at("company_id").get<std::string>();
    r.start = parse_iso_date(j.at("start").get<std::string>());
    if (!j.at("end").is_null()) r.end = parse_iso_date(j.at("end").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("resume record field has wrong type: ") + e.what());
  }
  validate(r);
  return r;
}

inline nlohmann::json record_to_json(const JobRecord& r) {
  nlohmann::ordered_json j;
  j["person_id"] = r.person_id;
  j["title"] = r.title;
  j["company_id"] = r.company_id;
  j["start"] = r.start.iso();
  j["end"] = r.end ? nlohmann::json(r.end->iso()) : nlohmann::json(nullptr);
  return j;
}

inline std::vector<JobRecord> parse_resumes_jsonl(const std::vector<std::string>& lines) {
  std::vector<JobRecord> records;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(lines[i])));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("resume line " + std::to_string(i + 1) + ": " + e.what());
    } catch (const Error& e) {
      throw DataError("resume line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return records;
}

inline std::vector<JobRecord> read_resumes_jsonl(const std::filesystem::path& path) {
  return parse_resumes_jsonl(io::read_lines(path));
}

inline std::string resumes_to_jsonl(const std::vector<JobRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += nlohmann::ordered_json(record_to_json(r)).dump();
    out.push_back('\n');
  }
  return out;
}

// Canonical titles of each person's jobs in chronological order, keyed by
// person id. Ties on start date are broken by end date (open-ended last),
// then by input order.
inline std::map<std::string, std::vector<std::string>> person_trajectories(
    const std::vector<JobRecord>& records) {
  std::map<std::string, std::vector<std::size_t>> by_person;
  for (std::size_t i = 0; i < records.size(); ++i) by_person[records[i].person_id].push_back(i);
  std::map<std::string, std::vector<std::string>> out;
  for (auto& [person, idx] : by_person) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const auto& ra = records[a];
      const auto& rb = records[b];
      if (ra.start != rb.start) return ra.start < rb.start;
      if (ra.end.has_value() != rb.end.has_value()) return ra.end.has_value();
      if (ra.end && *ra.end != *rb.end) return *ra.end < *rb.end;
      return false;
    });
    auto& titles = out[person];
    for (std::size_t i : idx) titles.push_back(canonicalize_title(records[i].title));
  }
  return out;
}

using Edge = std::pair<std::string, std::string>;

class TransitionGraph {
 public:
  void add_transition(const std::string& source, const std::string& target,
                      std::uint64_t count = 1) {
    nodes_.insert(source);
    nodes_.insert(target);
    counts_[{source, target}] += count;
    total_ += count;
  }

  void add_node(const std::string& title) { nodes_.insert(title); }

  const std::set<std::string>& nodes() const noexcept { return nodes_; }
  const std::map<Edge, std::uint64_t>& counts() const noexcept { return counts_; }
  std::uint64_t total_transitions() const noexcept { return total_; }
  std::size_t edge_count() const noexcept { return counts_.size(); }

  bool has_edge(const std::string& s, const std::string& t) const {
    return counts_.count({s, t}) != 0;
  }

  std::uint64_t count(const std::string& s, const std::string& t) const {
    auto it = counts_.find({s, t});
    return it == counts_.end() ? 0 : it->second;
  }

  // W_ij = e_ij / Σ e.
  double weight(const std::string& s, const std::string& t) const {
    if (total_ == 0) return 0.0;
    return static_cast<double>(count(s, t)) / static_cast<double>(total_);
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(counts_.size());
    for (const auto& [e, c] : counts_) out.push_back(e);
    return out;
  }

 private:
  std::set<std::string> nodes_;
  std::map<Edge, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

inline TransitionGraph build_transition_graph(const std::vector<JobRecord>& records) {
  TransitionGraph g;
  for (const auto& [person, titles] : person_trajectories(records)) {
    for (const auto& t : titles) g.add_node(t);
    for (std::size_t i = 1; i < titles.size(); ++i) g.add_transition(titles[i - 1], titles[i]);
  }
  return g;
}

struct ParentChildPair {
  std::string parent;  // the later job
  std::string child;   // the earlier job

  bool operator==(const ParentChildPair&) const = default;
};

// One pair per consecutive transition, duplicates kept, self-transitions
// dropped.
inline std::vector<ParentChildPair> extract_parent_child_pairs(
    const std::vector<JobRecord>& records) {
  std::vector<ParentChildPair> pairs;
  for (const auto& [person, titles] : person_trajectories(records)) {
    for (std::size_t i = 1; i < titles.size(); ++i) {
      if (titles[i] == titles[i - 1]) continue;
      pairs.push_back({titles[i], titles[i - 1]});
    }
  }
  return pairs;
}

inline std::string pairs_to_tsv(const std::vector<ParentChildPair>& pairs) {
  std::string out = "#parent\tchild\n";
  for (const auto& p : pairs) out += p.parent + '\t' + p.child + '\n';
  return out;
}

inline std::vector<ParentChildPair> read_pairs_tsv(const std::filesystem::path& path) {
  std::vector<ParentChildPair> pairs;
  const auto lines = io::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    const auto cols = io::split(lines[i], '\t');
    if (cols.size() != 2) {
      throw FormatError("pairs line " + std::to_string(i + 1) + ": expected parent<TAB>child");
    }
    pairs.push_back({std::string(cols[0]), std::string(cols[1])});
  }
  return pairs;
}

inline nlohmann::ordered_json graph_to_json(const TransitionGraph& g) {
  nlohmann::ordered_json j;
  j["nodes"] = std::vector<std::string>(g.nodes().begin(), g.nodes().end());
  j["total_transitions"] = g.total_transitions();
  auto edges = nlohmann::ordered_json::array();
  for (const auto& [e, c] : g.counts()) {
    nlohmann::ordered_json je;
    je["source"] = e.first;
    je["target"] = e.second;
    je["count"] = c;
    je["weight"] = g.weight(e.first, e.second);
    edges.push_back(std::move(je));
  }
  j["edges"] = std::move(edges);
  return j;
}

inline TransitionGraph graph_from_json(const nlohmann::json& j) {
  TransitionGraph g;
  try {
    for (const auto& n : j.at("nodes")) g.add_node(n.get<std::string>());
    for (const auto& e : j.at("edges")) {
      g.add_transition(e.at("source").get<std::string>(), e.at("target").get<std::string>(),
                       e.at("count").get<std::uint64_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("graph JSON: ") + e.what());
  }
  return g;
}

}  // namespace jtm::graph
