#include "ctc/cst.hpp"

#include <chrono>
#include <map>

#include "ctc/error.hpp"
#include "ctc/rng.hpp"

namespace ctc {

using nlohmann::ordered_json;

namespace {

// Stream ids for derive_seed; kept stable so manifests stay comparable.
constexpr std::uint64_t kSubsampleStream = 0x5353;

}  // namespace

std::string to_string(CstConfig::Mode mode) {
  return mode == CstConfig::Mode::kComplete ? "complete" : "sub_sampled";
}

std::string to_string(GroupLabelRule::Variant variant) {
  return variant == GroupLabelRule::Variant::kMaxConfidence ? "max_confidence" : "majority_vote";
}

PseudoLabel select_group_label(std::span<const Prediction> predictions,
                               const GroupLabelRule& rule) {
  if (predictions.empty()) throw DataError("cannot pseudo-label an empty group");

  if (rule.variant == GroupLabelRule::Variant::kMaxConfidence) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < predictions.size(); ++i) {
      const auto& p = predictions[i];
      const auto& b = predictions[best];
      if (p.confidence > b.confidence ||
          (p.confidence == b.confidence && p.path.render() < b.path.render())) {
        best = i;
      }
    }
    return PseudoLabel{predictions[best].path, predictions[best].confidence};
  }

  struct Tally {
    CategoryPath path;
    std::size_t votes = 0;
    double sum = 0.0;
  };
  std::map<std::string, Tally> tallies;  // keyed by rendered path
  for (const auto& p : predictions) {
    auto& t = tallies[p.path.render()];
    t.path = p.path;
    ++t.votes;
    t.sum += p.confidence;
  }
  // Map order is lexicographic, so strict comparisons keep the smallest path.
  const Tally* best = nullptr;
  for (const auto& [key, t] : tallies) {
    if (!best) {
      best = &t;
      continue;
    }
    const double mean = t.sum / static_cast<double>(t.votes);
    const double best_mean = best->sum / static_cast<double>(best->votes);
    if (t.votes > best->votes || (t.votes == best->votes && mean > best_mean)) best = &t;
  }
  return PseudoLabel{best->path, best->sum / static_cast<double>(best->votes)};
}

PseudoLabel assign_group_pseudo_label(const ItemGroup& group, const HierarchicalModel& fbase,
                                      const GroupLabelRule& rule) {
  std::vector<Prediction> preds;
  preds.reserve(group.titles.size());
  for (const auto& title : group.titles) preds.push_back(fbase.predict(title));
  return select_group_label(preds, rule);
}

CstResult run_cst(const LabeledDataset& dl, const ClusteredUnlabeled& du, const CstConfig& config,
                  const HierarchicalModel* base) {
  using clock = std::chrono::steady_clock;
  config.hp.validate();
  if (config.subsample_tolerance < 0.0) throw RangeError("sub-sample tolerance must be >= 0");

  Hyperparams hp = config.hp;
  hp.seed = config.seed;

  ordered_json manifest;
  manifest["stage"] = "cst";
  manifest["config"] = {
      {"rule", to_string(config.rule.variant)},
      {"du_mode", to_string(config.du_mode)},
      {"subsample_tolerance", config.subsample_tolerance},
      {"confidence_floor",
       config.confidence_floor ? ordered_json(*config.confidence_floor) : ordered_json(nullptr)},
      {"confidence_comparison", "raw confidence regardless of decided level"},
  };
  ordered_json warnings = ordered_json::array();
  ordered_json timing;

  CstResult result;
  const std::vector<Example> labeled = to_examples(dl);

  auto t0 = clock::now();
  result.base = base ? *base : train_hft(labeled, hp);
  timing["base_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();

  ClusteredUnlabeled pool = du;
  const std::uint64_t subsample_seed = derive_seed(config.seed, kSubsampleStream);
  if (config.du_mode == CstConfig::Mode::kSubSampled && !du.groups.empty()) {
    t0 = clock::now();
    SubsampleResult ss = subsample_by_l1(du, l1_histogram(dl), result.base,
                                         config.subsample_tolerance, subsample_seed);
    for (const auto& w : ss.warnings) warnings.push_back(w);
    manifest["subsample"] = {{"groups_in", du.groups.size()},
                             {"groups_kept", ss.selected.groups.size()},
                             {"achieved_tv", ss.achieved_tv}};
    pool = std::move(ss.selected);
    timing["subsample_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();
  }

  t0 = clock::now();
  std::size_t dropped = 0;
  for (const auto& group : pool.groups) {
    const PseudoLabel label = assign_group_pseudo_label(group, result.base, config.rule);
    if (config.confidence_floor && label.confidence < *config.confidence_floor) {
      ++dropped;
      continue;
    }
    for (const auto& title : group.titles) {
      result.d_aug.push_back(LabeledExample{title, label.path});
      result.d_aug_groups.push_back(group.group_id);
    }
  }
  timing["pseudo_label_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();

  if (result.d_aug.empty()) {
    warnings.push_back("no pseudo-labeled titles; final model equals the baseline");
  }

  // Same seed as the baseline so an empty D_aug reproduces it exactly.
  std::vector<Example> train = labeled;
  const std::vector<Example> aug = to_examples(result.d_aug);
  train.insert(train.end(), aug.begin(), aug.end());
  t0 = clock::now();
  result.model = result.d_aug.empty() ? result.base : train_hft(train, hp);
  timing["final_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();

  manifest["seeds"] = {{"run", config.seed},
                       {"subsample", subsample_seed},
                       {"model_levels", ordered_json::array()}};
  for (std::size_t i = 1; i <= result.model.depth(); ++i) {
    manifest["seeds"]["model_levels"].push_back(derive_seed(config.seed, i));
  }
  manifest["counts"] = {{"labeled", dl.size()},
                        {"groups_in", du.groups.size()},
                        {"titles_in", du.total_titles()},
                        {"groups_used", pool.groups.size() - dropped},
                        {"groups_below_floor", dropped},
                        {"d_aug", result.d_aug.size()},
                        {"final_train", train.size()}};
  manifest["warnings"] = std::move(warnings);
  manifest["timing"] = std::move(timing);
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace ctc
