#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "ctc/cst.hpp"
#include "ctc/error.hpp"
#include "support.hpp"

using namespace ctc;

namespace {

CategoryPath P(std::string s) { return parse_path(s); }

const GroupLabelRule kMax{GroupLabelRule::Variant::kMaxConfidence};
const GroupLabelRule kMajority{GroupLabelRule::Variant::kMajorityVote};

TEST(SelectGroupLabel, MaxConfidence) {
  std::vector<Prediction> p{{P("A > B"), 0.9, 2}, {P("A > C"), 0.4, 2}};
  EXPECT_EQ(select_group_label(p, kMax).path, P("A > B"));
  EXPECT_DOUBLE_EQ(select_group_label(p, kMax).confidence, 0.9);
}

TEST(SelectGroupLabel, MajorityVote) {
  std::vector<Prediction> p{{P("A > B"), 0.5, 2}, {P("A > C"), 0.6, 2}, {P("A > B"), 0.55, 2}};
  auto r = select_group_label(p, kMajority);
  EXPECT_EQ(r.path, P("A > B"));
  EXPECT_NEAR(r.confidence, 0.525, 1e-12);
}

TEST(SelectGroupLabel, Unanimity) {
  std::vector<Prediction> p(3, Prediction{P("X > Y"), 0.3, 2});
  EXPECT_EQ(select_group_label(p, kMax).path, P("X > Y"));
  EXPECT_EQ(select_group_label(p, kMajority).path, P("X > Y"));
}

TEST(SelectGroupLabel, TieBreaks) {
  // Equal confidence: smallest rendered path wins.
  std::vector<Prediction> p{{P("B"), 0.7, 1}, {P("A > Z"), 0.7, 2}};
  EXPECT_EQ(select_group_label(p, kMax).path, P("A > Z"));
  // Equal votes: higher mean confidence, then lexicographic.
  std::vector<Prediction> q{{P("B"), 0.8, 1}, {P("A"), 0.6, 1}};
  EXPECT_EQ(select_group_label(q, kMajority).path, P("B"));
  std::vector<Prediction> r{{P("B"), 0.6, 1}, {P("A"), 0.6, 1}};
  EXPECT_EQ(select_group_label(r, kMajority).path, P("A"));
}

TEST(SelectGroupLabel, ComparesAcrossDecidedLevels) {
  std::vector<Prediction> p{{P("A"), 0.95, 1}, {P("A > B > C"), 0.9, 3}};
  EXPECT_EQ(select_group_label(p, kMax).path, P("A"));
}

TEST(SelectGroupLabel, EmptyThrows) {
  std::vector<Prediction> none;
  EXPECT_THROW(select_group_label(none, kMax), DataError);
}

TEST(SelectGroupLabel, PermutationInvariantWithDistinctConfidences) {
  std::vector<Prediction> p{{P("A"), 0.3, 1}, {P("B"), 0.8, 1}, {P("A"), 0.5, 1}, {P("C"), 0.45, 1}};
  std::sort(p.begin(), p.end(), [](auto& a, auto& b) { return a.confidence < b.confidence; });
  const auto want_max = select_group_label(p, kMax).path;
  const auto want_maj = select_group_label(p, kMajority).path;
  do {
    EXPECT_EQ(select_group_label(p, kMax).path, want_max);
    EXPECT_EQ(select_group_label(p, kMajority).path, want_maj);
  } while (std::next_permutation(p.begin(), p.end(),
                                 [](auto& a, auto& b) { return a.confidence < b.confidence; }));
}

class CstRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    world_ = new SynthWorld(generate_world(fixture::small_world()));
  }
  static void TearDownTestSuite() {
    delete world_;
    world_ = nullptr;
  }
  static CstConfig config() {
    CstConfig c;
    c.hp = fixture::small_hp();
    c.seed = 4;
    return c;
  }
  static SynthWorld* world_;
};
SynthWorld* CstRun::world_ = nullptr;

TEST_F(CstRun, AugmentationCoversEveryTitleWithOneLabelPerGroup) {
  auto r = run_cst(world_->labeled, world_->unlabeled, config());
  EXPECT_EQ(r.d_aug.size(), world_->unlabeled.total_titles());
  ASSERT_EQ(r.d_aug_groups.size(), r.d_aug.size());
  std::map<std::string, CategoryPath> label_of;
  for (std::size_t i = 0; i < r.d_aug.size(); ++i) {
    auto [it, fresh] = label_of.emplace(r.d_aug_groups[i], r.d_aug[i].path);
    if (!fresh) EXPECT_EQ(it->second, r.d_aug[i].path) << r.d_aug_groups[i];
  }
  EXPECT_EQ(label_of.size(), world_->unlabeled.groups.size());
  EXPECT_EQ(r.manifest["counts"]["d_aug"], r.d_aug.size());
  EXPECT_EQ(r.manifest["config"]["rule"], "max_confidence");
}

TEST_F(CstRun, EmptyUnlabeledEqualsBaseline) {
  auto cfg = config();
  auto r = run_cst(world_->labeled, ClusteredUnlabeled{}, cfg);
  EXPECT_TRUE(r.d_aug.empty());
  EXPECT_FALSE(r.manifest["warnings"].empty());
  Hyperparams hp = cfg.hp;
  hp.seed = cfg.seed;
  auto baseline = train_hft(to_examples(world_->labeled), hp);
  for (const auto& ex : world_->test) {
    auto a = r.model.predict(ex.title);
    auto b = baseline.predict(ex.title);
    EXPECT_EQ(a.path, b.path);
    EXPECT_EQ(a.confidence, b.confidence);
  }
}

TEST_F(CstRun, DeterministicEndToEnd) {
  auto a = run_cst(world_->labeled, world_->unlabeled, config());
  auto b = run_cst(world_->labeled, world_->unlabeled, config());
  EXPECT_EQ(a.d_aug, b.d_aug);
  std::ostringstream ma, mb;
  save_model(a.model, ma);
  save_model(b.model, mb);
  EXPECT_TRUE(ma.str() == mb.str());
}

TEST_F(CstRun, SubSampledUsesFewerGroups) {
  auto cfg = config();
  cfg.du_mode = CstConfig::Mode::kSubSampled;
  auto r = run_cst(world_->labeled, world_->unlabeled, cfg);
  EXPECT_LT(r.d_aug.size(), world_->unlabeled.total_titles());
  EXPECT_LE(r.manifest["subsample"]["achieved_tv"].get<double>(), cfg.subsample_tolerance);
}

TEST_F(CstRun, ConfidenceFloorDropsGroups) {
  auto cfg = config();
  cfg.confidence_floor = 1.1;
  auto r = run_cst(world_->labeled, world_->unlabeled, cfg);
  EXPECT_TRUE(r.d_aug.empty());
  EXPECT_EQ(r.manifest["counts"]["groups_below_floor"], world_->unlabeled.groups.size());
}

}  // namespace
