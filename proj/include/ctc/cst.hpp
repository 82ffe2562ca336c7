#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctc/data.hpp"
#include "ctc/model.hpp"

namespace ctc {

// Selection rule h: collapses a group's per-title predictions into one label.
struct GroupLabelRule {
  enum class Variant { kMaxConfidence, kMajorityVote };
  Variant variant = Variant::kMaxConfidence;
  // Ties always fall back to the lexicographically smallest rendered path.
};

struct PseudoLabel {
  CategoryPath path;
  double confidence = 0.0;
};

/// Applies the rule to precomputed predictions (one per title, in title order).
///  - max confidence: highest confidence; ties by smallest rendered path, then
///    first title.
///  - majority vote: most frequent path; ties by higher mean confidence, then
///    smallest rendered path. The returned confidence is the mean over the
///    winning path's votes.
PseudoLabel select_group_label(std::span<const Prediction> predictions, const GroupLabelRule& rule);

PseudoLabel assign_group_pseudo_label(const ItemGroup& group, const HierarchicalModel& fbase,
                                      const GroupLabelRule& rule);

struct CstConfig {
  enum class Mode { kComplete, kSubSampled };
  GroupLabelRule rule;
  Mode du_mode = Mode::kComplete;
  double subsample_tolerance = 0.05;
  Hyperparams hp;
  std::uint64_t seed = 1;
  // Groups whose pseudo-label confidence falls below the floor are dropped.
  // Unset by default.
  std::optional<double> confidence_floor;
};

struct CstResult {
  HierarchicalModel model;
  HierarchicalModel base;
  LabeledDataset d_aug;
  // Group id of every D_aug row, parallel to d_aug.
  std::vector<std::string> d_aug_groups;
  nlohmann::ordered_json manifest;
};

/// Train f_base on dl, optionally sub-sample du to dl's L1 histogram,
/// pseudo-label every group with one label, and retrain on dl + D_aug.
/// `base` skips step one when a model trained on dl with the same
/// hyperparameters is already at hand.
CstResult run_cst(const LabeledDataset& dl, const ClusteredUnlabeled& du, const CstConfig& config,
                  const HierarchicalModel* base = nullptr);

std::string to_string(CstConfig::Mode mode);
std::string to_string(GroupLabelRule::Variant variant);

}  // namespace ctc
