#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ctc/data.hpp"
#include "ctc/model.hpp"
#include "ctc/text.hpp"

namespace ctc {

// Learns how titles of one item differ and proposes new versions of a title.
class PerturbationModel {
 public:
  virtual ~PerturbationModel() = default;
  virtual void train(std::span<const TitlePair> pairs) = 0;
  // At most n distinct non-empty titles, none equal to the input.
  virtual std::vector<std::string> generate(std::string_view title, std::size_t n,
                                            std::uint64_t seed) const = 0;
};

inline constexpr std::size_t kMaxSpanTokens = 3;
inline constexpr std::string_view kStartToken = "<s>";
inline constexpr std::string_view kEndToken = "</s>";

// One replaced region of an LCS alignment. `left`/`right` are the aligned
// tokens around it, or the start/end sentinels.
struct DiffRegion {
  TokenSeq source;
  TokenSeq target;
  std::string left;
  std::string right;
};

// Maximal regions where source and target differ, in source order. Pure
// insertions and deletions show up with one side empty.
std::vector<DiffRegion> diff_regions(std::span<const std::string> source,
                                     std::span<const std::string> target);

using SpanCounts = std::map<std::string, std::size_t>;  // joined span -> count

struct SubstitutionStats {
  std::size_t pairs_seen = 0;
  std::size_t pairs_used = 0;
  std::size_t skipped_no_common = 0;
  std::size_t skipped_identical = 0;
  std::size_t regions_recorded = 0;
  std::size_t regions_discarded = 0;  // a side empty or longer than the cap
};

// Span-swap model learned from token-level diffs of title pairs.
class SubstitutionModel final : public PerturbationModel {
 public:
  void train(std::span<const TitlePair> pairs) override;
  std::vector<std::string> generate(std::string_view title, std::size_t n,
                                    std::uint64_t seed) const override;

  // Source span -> spans it was exchanged with.
  const std::map<std::string, SpanCounts>& swaps() const noexcept { return swaps_; }
  // (left, right) context -> replacement spans seen there.
  const std::map<std::pair<std::string, std::string>, SpanCounts>& contexts() const noexcept {
    return contexts_;
  }
  const SubstitutionStats& stats() const noexcept { return stats_; }
  bool empty() const noexcept { return swaps_.empty(); }

 private:
  std::map<std::string, SpanCounts> swaps_;
  std::map<std::pair<std::string, std::string>, SpanCounts> contexts_;
  SubstitutionStats stats_;
};

SubstitutionModel train_substitution_model(std::span<const TitlePair> pairs);

/// Sentence BLEU with clipped n-gram precisions, add-one smoothing for
/// n >= 2 and the usual brevity penalty. Throws RangeError on an empty
/// reference or max_n == 0.
double bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
            std::size_t max_n = 2);

// Cosine of mean input embeddings, clamped to [0, 1]; 0 for a zero vector.
double cosine_score(const FlatModel& embedder, std::span<const std::string> t1,
                    std::span<const std::string> t2);
double cosine_score(const FlatModel& embedder, std::string_view t1, std::string_view t2);

struct AugmentedRow {
  std::size_t source_index = 0;  // row in D_L
  std::string source;
  std::string generated;
  CategoryPath label;
  double score = 0.0;
};

std::vector<AugmentedRow> filter_augmented(std::span<const AugmentedRow> rows, double threshold);

// Ten equal-width bins over [0, 1]; a score of exactly 1 falls in the last.
std::array<std::size_t, 10> score_histogram(std::span<const AugmentedRow> rows);

enum class ScoreKind { kBleu, kEmbedCosine };
std::string to_string(ScoreKind kind);

struct CgaConfig {
  std::size_t n_per_sample = 8;
  ScoreKind score = ScoreKind::kBleu;
  std::size_t bleu_max_n = 2;
  double threshold = 0.7;
  std::optional<std::size_t> target_size;
  std::size_t pair_cap = 12;
  Hyperparams hp;
  std::uint64_t seed = 1;

  void validate() const;
};

// Output of an outside generator: versions proposed for one source title.
struct ExternalGeneration {
  std::string source;
  std::vector<std::string> generated;
};

std::vector<ExternalGeneration> read_external_generations(std::istream& in);
std::vector<ExternalGeneration> load_external_generations(const std::string& path);

struct CgaResult {
  HierarchicalModel model;
  LabeledDataset d_aug;
  std::vector<AugmentedRow> kept;
  nlohmann::ordered_json manifest;
};

/// Learn substitutions from du's pairs, generate gold-labeled variants of dl,
/// keep those scoring >= threshold against their source (optionally
/// sub-sampled to target_size), and retrain on dl + D_aug.
/// `external` replaces pair building, training and generation. `base` is the
/// embedder for cosine scoring and the fallback when nothing survives; it is
/// trained on dl when needed and not supplied.
CgaResult run_cga(const LabeledDataset& dl, const ClusteredUnlabeled& du, const CgaConfig& config,
                  const HierarchicalModel* base = nullptr,
                  const std::vector<ExternalGeneration>* external = nullptr);

// Scored candidate rows before filtering; exposed for threshold sweeps.
std::vector<AugmentedRow> generate_candidates(const LabeledDataset& dl,
                                              const PerturbationModel& model,
                                              const CgaConfig& config,
                                              const HierarchicalModel* embedder);

}  // namespace ctc
