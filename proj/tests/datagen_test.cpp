#include <gtest/gtest.h>

#include "jtm/datagen.hpp"

namespace jtm::datagen {
namespace {

TEST(GenTaxonomy, CountsAndLabels) {
  SynthConfig c;
  c.groups = 2;
  c.synonyms = 1;
  const auto t = gen_taxonomy(c);
  EXPECT_EQ(t.taxonomy.size(), 2u);
  const auto lv = labeled_variants(t);
  ASSERT_EQ(lv.size(), 2u);
  for (const auto& v : lv) EXPECT_LT(v.group, t.taxonomy.size());
}

TEST(GenTaxonomy, ZeroEditsGiveStandards) {
  SynthConfig c;
  c.groups = 5;
  c.synonyms = 3;
  c.min_edits = c.max_edits = 0;
  const auto t = gen_taxonomy(c);
  for (std::size_t g = 0; g < 5; ++g)
    for (const auto& v : t.variants[g]) EXPECT_EQ(v, t.taxonomy.title(g));
}

TEST(GenTaxonomy, PlantedSyntacticStructure) {
  SynthConfig c;
  c.groups = 200;
  c.synonyms = 5;
  const auto t = gen_taxonomy(c);
  std::vector<std::vector<std::string>> grams;
  for (const auto& title : t.taxonomy.titles()) grams.push_back(syntactic::char_ngrams(title));
  std::set<std::string> seen(t.taxonomy.titles().begin(), t.taxonomy.titles().end());
  for (const auto& lv : labeled_variants(t)) {
    EXPECT_TRUE(closest_to_own(lv.title, lv.group, grams)) << lv.title;
    EXPECT_TRUE(seen.insert(lv.title).second) << "duplicate " << lv.title;
    EXPECT_EQ(graph::canonicalize_title(lv.title), lv.title);
  }
}

TEST(GenTaxonomy, DeterministicAndExhaustion) {
  SynthConfig c;
  c.groups = 50;
  EXPECT_EQ(labels_to_tsv(gen_taxonomy(c)), labels_to_tsv(gen_taxonomy(c)));
  c.seed = 1;
  SynthConfig d = c;
  d.seed = 2;
  EXPECT_NE(labels_to_tsv(gen_taxonomy(c)), labels_to_tsv(gen_taxonomy(d)));
  c.groups = 100000;
  EXPECT_THROW(gen_taxonomy(c), ConfigError);
  c.groups = 0;
  EXPECT_THROW(gen_taxonomy(c), ConfigError);
}

TEST(GenResumes, SinglePerson) {
  SynthConfig c;
  c.groups = 4;
  c.persons = 1;
  c.jobs = 5;
  const auto t = gen_taxonomy(c);
  const auto r = gen_resumes(c, t);
  ASSERT_EQ(r.records.size(), 5u);
  const auto traj = graph::person_trajectories(r.records);
  ASSERT_EQ(traj.size(), 1u);
  EXPECT_EQ(traj.begin()->second.size(), 5u);
  EXPECT_FALSE(r.records.back().end.has_value());
  for (std::size_t i = 0; i + 1 < r.records.size(); ++i) {
    ASSERT_TRUE(r.records[i].end.has_value());
    EXPECT_LE(*r.records[i].end, r.records[i + 1].start);
    graph::validate(r.records[i]);
  }
}

TEST(GenResumes, IdentityMatrixKeepsGroup) {
  SynthConfig c;
  c.groups = 6;
  c.persons = 20;
  c.jobs = 4;
  std::vector<std::vector<double>> id(6, std::vector<double>(6, 0.0));
  for (std::size_t i = 0; i < 6; ++i) id[i][i] = 1.0;
  c.transition = id;
  const auto r = gen_resumes(c, gen_taxonomy(c));
  for (const auto& walk : r.group_walks)
    for (std::size_t g : walk) EXPECT_EQ(g, walk.front());
}

TEST(GenResumes, FrequenciesConvergeToMatrix) {
  SynthConfig c;
  c.groups = 5;
  c.persons = 2000;
  c.jobs = 6;
  c.concentration = 1.0;
  const auto m = transition_matrix(c);
  const auto r = gen_resumes(c, gen_taxonomy(c));
  std::vector<std::vector<double>> counts(5, std::vector<double>(5, 0.0));
  for (const auto& walk : r.group_walks)
    for (std::size_t i = 1; i < walk.size(); ++i) counts[walk[i - 1]][walk[i]] += 1.0;
  for (std::size_t a = 0; a < 5; ++a) {
    double row = 0.0;
    for (double v : counts[a]) row += v;
    ASSERT_GT(row, 0.0);
    for (std::size_t b = 0; b < 5; ++b) EXPECT_NEAR(counts[a][b] / row, m[a][b], 0.05) << a << "," << b;
  }
}

TEST(GenResumes, BadMatrixRejected) {
  SynthConfig c;
  c.groups = 2;
  c.transition = std::vector<std::vector<double>>{{0.5, 0.4}, {0.0, 1.0}};
  EXPECT_THROW(validate(c), ConfigError);
  c.transition = std::vector<std::vector<double>>{{1.0}};
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(GenResumes, Deterministic) {
  SynthConfig c;
  c.groups = 10;
  c.persons = 30;
  const auto t = gen_taxonomy(c);
  EXPECT_EQ(graph::resumes_to_jsonl(gen_resumes(c, t).records),
            graph::resumes_to_jsonl(gen_resumes(c, t).records));
}

}  // namespace
}  // namespace jtm::datagen
