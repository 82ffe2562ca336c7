#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ctc/data.hpp"
#include "ctc/model.hpp"
#include "ctc/rng.hpp"
#include "ctc/text.hpp"

namespace ctc {

// A template is a whitespace-separated pattern. Slots:
//   {brand}        brand name
//   {l1} {l2} {l3} descriptor word of the ancestor at that level
//   {leaf}         leaf noun
//   {<kind>}       attribute value of that kind
// A trailing '?' inside the braces ({l2?}) makes the slot optional
// (kept with probability `optional_slot_prob`). Attribute slots cannot be
// optional. Anything else is a literal word.
struct SynthConfig {
  std::uint64_t seed = 7;
  std::vector<std::size_t> branching{3, 2, 2, 2};

  // kind -> values; lists must be disjoint and single-token.
  std::map<std::string, std::vector<std::string>> attributes;
  // templates[i] applies to top-level category i; a single list is shared.
  std::vector<std::vector<std::string>> templates;

  double rho = 0.9;              // preferred-value probability in D_L and test
  double rho_unlabeled = 0.5;    // same, for unlabeled base items
  std::size_t preferred_per_kind = 5;

  std::size_t labeled_size = 5000;
  std::size_t test_size = 2000;
  std::size_t groups = 5000;
  std::size_t consistency_groups = 1000;
  // Weight of group size min_group_size + i.
  std::size_t min_group_size = 2;
  std::vector<double> group_size_weights{0.3, 0.25, 0.2, 0.15, 0.1};
  // Per-top-level sampling weights for unlabeled base items. Empty means the
  // labeled distribution (no shift).
  std::vector<double> unlabeled_l1_weights{0.6, 0.3, 0.1};

  std::size_t brands = 60;
  std::size_t nouns_per_leaf = 150;
  double noun_zipf = 0.9;
  std::size_t descriptors_per_node = 3;
  double optional_slot_prob = 0.5;
  // Probability that V touches two slots rather than one.
  double two_slot_prob = 0.3;

  void validate() const;

  static SynthConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
  static SynthConfig load(const std::string& path);
  // The default desk world: colors, sizes, flavors and pack counts.
  static SynthConfig desk_default();
};

// The ground-truth V: resample one or two attribute slots of a title to
// different values of the same kind.
class GroundTruthPerturbation {
 public:
  GroundTruthPerturbation() = default;
  explicit GroundTruthPerturbation(const std::map<std::string, std::vector<std::string>>& kinds,
                                   double two_slot_prob = 0.3);

  // Throws DataError when the title has no attribute slot.
  std::string apply(std::string_view title, Rng& rng) const;

  // Positions of attribute tokens in a whitespace-tokenized title.
  std::vector<std::size_t> slots(const TokenSeq& tokens) const;

  // Lexicon of every attribute kind, suitable for masking.
  AttributeLexicon lexicon() const;

 private:
  std::map<std::string, std::vector<std::string>> kinds_;
  std::map<std::string, std::string> kind_of_;
  double two_slot_prob_ = 0.3;
};

std::string apply_v(std::string_view title, const GroundTruthPerturbation& v, Rng& rng);

struct SynthWorld {
  SynthConfig config;
  LabeledDataset labeled;
  ClusteredUnlabeled unlabeled;
  std::vector<CategoryPath> unlabeled_gold;  // parallel to unlabeled.groups
  LabeledDataset test;
  ClusteredUnlabeled consistency_groups;     // held out, same distribution as D_U
  std::vector<CategoryPath> consistency_gold;
  std::vector<TitlePair> test_pairs;         // one pair per consistency group
  GroundTruthPerturbation v;
  nlohmann::ordered_json manifest;
};

// Throws RangeError/DataError on an invalid config.
SynthWorld generate_world(const SynthConfig& config);

// Writes labeled.jsonl, unlabeled.jsonl, test.jsonl, test_pairs.jsonl,
// groups_gold.jsonl, lexicon.txt and world.json into `dir`.
void save_world(const SynthWorld& world, const std::string& dir);

/// Monte-Carlo consistency under the true V: for each base title draw
/// `variants_per_title` variants and count full-path agreement with the base
/// title's prediction.
double oracle_consistency(const HierarchicalModel& model, const std::vector<std::string>& base_titles,
                          std::size_t variants_per_title, const GroundTruthPerturbation& v,
                          Rng& rng);

}  // namespace ctc
