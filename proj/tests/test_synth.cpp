#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "ctc/error.hpp"
#include "ctc/metrics.hpp"
#include "ctc/synth.hpp"
#include "support.hpp"

using namespace ctc;

namespace {

TokenSeq words(const std::string& s) {
  TokenSeq out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

GroundTruthPerturbation tshirt_v() {
  return GroundTruthPerturbation({{"color", {"blue", "black", "red"}}, {"size", {"small", "large"}}},
                                 0.3);
}

TEST(ApplyV, TShirtVariants) {
  auto v = tshirt_v();
  std::set<std::string> seen;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(s);
    std::string out = apply_v("blue t-shirt small size", v, rng);
    EXPECT_NE(out, "blue t-shirt small size");
    TokenSeq a = words("blue t-shirt small size"), b = words(out);
    ASSERT_EQ(a.size(), b.size());
    std::size_t changed = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == b[i]) continue;
      ++changed;
      EXPECT_TRUE(i == 0 || i == 2) << out;
    }
    EXPECT_GE(changed, 1u);
    EXPECT_LE(changed, 2u);
    seen.insert(out);
  }
  EXPECT_TRUE(seen.count("black t-shirt small size"));
  EXPECT_TRUE(seen.count("blue t-shirt large size"));
}

TEST(ApplyV, NoSlotThrows) {
  Rng rng(1);
  EXPECT_THROW(apply_v("plain title", tshirt_v(), rng), DataError);
}

TEST(SynthConfig, Validation) {
  auto c = SynthConfig::desk_default();
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.rho = 1.5;
  EXPECT_THROW(bad.validate(), RangeError);
  bad = c;
  bad.branching = {0};
  EXPECT_THROW(generate_world(bad), RangeError);
  bad = c;
  bad.templates.clear();
  EXPECT_ANY_THROW(generate_world(bad));
  bad = c;
  bad.attributes["size"].push_back("red");
  EXPECT_THROW(bad.validate(), RangeError);
}

TEST(SynthConfig, JsonRoundTrip) {
  auto c = fixture::small_world(12);
  auto back = SynthConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
}

TEST(GenerateWorld, DeskDefaultShape) {
  SynthWorld w = generate_world(SynthConfig::desk_default());
  EXPECT_EQ(w.labeled.size(), 5000u);
  EXPECT_EQ(w.test.size(), 2000u);
  EXPECT_EQ(w.unlabeled.groups.size(), 5000u);
  EXPECT_GT(w.unlabeled.total_titles(), 15000u);
  EXPECT_LT(w.unlabeled.total_titles(), 21000u);
  std::set<CategoryPath> leaves;
  for (const auto& ex : w.labeled) {
    EXPECT_EQ(ex.path.depth(), 4u);
    leaves.insert(ex.path);
  }
  EXPECT_EQ(leaves.size(), 24u);
  EXPECT_EQ(w.test_pairs.size(), 1000u);
}

TEST(GenerateWorld, GroupsSizedAndHomogeneous) {
  SynthWorld w = generate_world(fixture::small_world());
  ASSERT_EQ(w.unlabeled_gold.size(), w.unlabeled.groups.size());
  for (std::size_t i = 0; i < w.unlabeled.groups.size(); ++i) {
    const auto& g = w.unlabeled.groups[i];
    EXPECT_GE(g.titles.size(), 2u);
    EXPECT_LE(g.titles.size(), 6u);
    EXPECT_NO_THROW(validate_group(g));
    // Every member is a V-variant of the first title: same length, only slots differ.
    const TokenSeq base = words(g.titles[0]);
    const auto slots = w.v.slots(base);
    for (const auto& t : g.titles) {
      const TokenSeq other = words(t);
      ASSERT_EQ(other.size(), base.size());
      for (std::size_t k = 0; k < base.size(); ++k) {
        if (base[k] != other[k]) {
          EXPECT_NE(std::find(slots.begin(), slots.end(), k), slots.end());
        }
      }
    }
  }
  EXPECT_NO_THROW(w.unlabeled.validate());
}

TEST(GenerateWorld, TestDisjointFromLabeled) {
  SynthWorld w = generate_world(fixture::small_world());
  std::set<std::string> train;
  for (const auto& ex : w.labeled) train.insert(ex.title);
  for (const auto& ex : w.test) EXPECT_EQ(train.count(ex.title), 0u) << ex.title;
}

TEST(GenerateWorld, Deterministic) {
  SynthWorld a = generate_world(fixture::small_world(5));
  SynthWorld b = generate_world(fixture::small_world(5));
  EXPECT_EQ(a.labeled, b.labeled);
  EXPECT_EQ(a.unlabeled.groups, b.unlabeled.groups);
  EXPECT_EQ(a.test_pairs, b.test_pairs);
}

TEST(GenerateWorld, FullCorrelationPinsOneColorPerLeaf) {
  SynthConfig c;
  c.seed = 1;
  c.branching = {2};
  c.attributes = {{"color", {"red", "blue"}}};
  c.templates = {{"{color} {leaf}"}};
  c.preferred_per_kind = 1;
  c.rho = 1.0;
  c.labeled_size = 200;
  c.test_size = 20;
  c.groups = 20;
  c.consistency_groups = 5;
  c.unlabeled_l1_weights = {};
  SynthWorld w = generate_world(c);
  std::map<std::string, std::set<std::string>> colors;
  for (const auto& ex : w.labeled) colors[ex.path.render()].insert(words(ex.title)[0]);
  ASSERT_EQ(colors.size(), 2u);
  for (const auto& [leaf, set] : colors) EXPECT_EQ(set.size(), 1u) << leaf;
}

TEST(GenerateWorld, UnlabeledShiftFollowsWeights) {
  SynthWorld w = generate_world(fixture::small_world());
  std::map<std::string, double> share;
  for (const auto& p : w.unlabeled_gold) share[p.level(1)] += 1.0 / w.unlabeled_gold.size();
  EXPECT_NEAR(share["Department 1"], 0.6, 0.08);
  EXPECT_NEAR(share["Department 3"], 0.1, 0.05);
}

TEST(SaveWorld, WritesEveryFile) {
  fixture::TempDir dir("world");
  SynthWorld w = generate_world(fixture::small_world());
  save_world(w, dir.str());
  for (const char* f : {"labeled.jsonl", "unlabeled.jsonl", "test.jsonl", "test_pairs.jsonl",
                        "groups_gold.jsonl", "lexicon.txt", "world.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / f)) << f;
  }
  EXPECT_EQ(load_labeled(dir.str("labeled.jsonl")), w.labeled);
  EXPECT_EQ(load_clustered(dir.str("unlabeled.jsonl")).groups, w.unlabeled.groups);
}

TEST(OracleConsistency, ConstantModelIsOne) {
  SynthWorld w = generate_world(fixture::small_world());
  auto model = fixture::constant_model(w.labeled[0].path);
  std::vector<std::string> titles;
  for (const auto& ex : w.test) titles.push_back(ex.title);
  Rng rng(3);
  EXPECT_DOUBLE_EQ(oracle_consistency(model, titles, 2, w.v, rng), 1.0);
}

TEST(OracleConsistency, StableAcrossSeedsAndCloseToPairTest) {
  SynthWorld w = generate_world(SynthConfig::desk_default());
  auto model = train_hft(to_examples(w.labeled), Hyperparams{});
  std::vector<std::string> titles;
  for (const auto& g : w.consistency_groups.groups) titles.push_back(g.titles[0]);
  for (const auto& g : w.unlabeled.groups) {
    if (titles.size() >= 5000) break;
    titles.push_back(g.titles[0]);
  }
  Rng r1(1), r2(2);
  const double a = oracle_consistency(model, titles, 2, w.v, r1);
  const double b = oracle_consistency(model, titles, 2, w.v, r2);
  EXPECT_LT(std::abs(a - b), 0.01);
  const double pair_rate = consistency_rate(model, std::span<const TitlePair>(w.test_pairs));
  EXPECT_LT(std::abs(a - pair_rate), 0.03) << "oracle " << a << " pairs " << pair_rate;
}

}  // namespace
