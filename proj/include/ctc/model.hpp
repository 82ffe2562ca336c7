#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctc/taxonomy.hpp"
#include "ctc/text.hpp"

namespace ctc {

struct Hyperparams {
  std::size_t dim = 64;
  std::size_t epochs = 8;
  double lr = 0.5;
  std::size_t max_n = 2;
  std::size_t buckets = 100000;
  std::uint64_t seed = 1;
  // 1 = deterministic single-threaded SGD. >1 = lock-free shared updates,
  // not reproducible.
  std::size_t threads = 1;

  void validate() const;
};

struct Example {
  TokenSeq tokens;
  CategoryPath path;
};

struct FlatPrediction {
  std::size_t label = 0;
  std::vector<double> probs;
};

// Averaged n-gram embeddings followed by a plain softmax over the level-i
// truncated labels.
class FlatModel {
 public:
  FlatModel() = default;

  std::size_t level() const noexcept { return level_; }
  std::size_t dim() const noexcept { return hp_.dim; }
  std::size_t num_classes() const noexcept { return labels_.size(); }
  const Hyperparams& hyperparams() const noexcept { return hp_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  const std::vector<CategoryPath>& labels() const noexcept { return labels_; }
  const CategoryPath& label(std::size_t id) const { return labels_.at(id); }

  // (vocab + buckets) x dim, row-major.
  std::span<const float> input() const noexcept { return input_; }
  // classes x dim, row-major.
  std::span<const float> output() const noexcept { return output_; }

  // Mean cross-entropy per epoch, monitored during training.
  const std::vector<double>& epoch_loss() const noexcept { return epoch_loss_; }

  std::vector<std::size_t> features(std::span<const std::string> tokens) const;

  friend FlatModel train_flat(std::span<const Example>, std::size_t, const Hyperparams&);

  // Assembles a model from explicit parameters. Used by tests and the loader.
  static FlatModel from_parts(std::size_t level, Hyperparams hp, Vocabulary vocab,
                              std::vector<CategoryPath> labels, std::vector<float> input,
                              std::vector<float> output);

 private:
  std::size_t level_ = 0;
  Hyperparams hp_;
  Vocabulary vocab_;
  std::vector<CategoryPath> labels_;
  std::vector<float> input_;
  std::vector<float> output_;
  std::vector<double> epoch_loss_;
};

/// Trains on the level-`level` truncation of each example's path.
/// Throws TrainingError on empty data or fewer than two classes, RangeError
/// if an example is shallower than `level`.
FlatModel train_flat(std::span<const Example> examples, std::size_t level, const Hyperparams& hp);

FlatPrediction predict_flat(const FlatModel& model, std::span<const std::string> tokens);

// Mean input embedding over all extracted features; zero vector when empty.
std::vector<float> embed_title(const FlatModel& model, std::span<const std::string> tokens);

struct Prediction {
  CategoryPath path;
  double confidence = 0.0;
  std::size_t decided_level = 0;
};

struct LevelPrediction {
  CategoryPath path;
  double confidence = 0.0;
};

/// Prefix-agreement walk over per-level argmax paths: accept level 1, keep
/// going while level i agrees with level i-1 on the first i-1 levels, and
/// return the last agreeing level's path. `level_pred(i)` is only invoked
/// for the levels actually visited.
template <typename LevelFn>
Prediction resolve_agreement(std::size_t levels, LevelFn&& level_pred) {
  LevelPrediction prev = level_pred(std::size_t{1});
  for (std::size_t i = 2; i <= levels; ++i) {
    LevelPrediction cur = level_pred(i);
    if (!agrees_to_level(cur.path, prev.path, i - 1)) {
      return Prediction{std::move(prev.path), prev.confidence, i - 1};
    }
    prev = std::move(cur);
  }
  return Prediction{std::move(prev.path), prev.confidence, levels};
}

// One flat model per taxonomy level, plus an optional attribute mask applied
// to tokens before training and before every prediction.
class HierarchicalModel {
 public:
  HierarchicalModel() = default;
  HierarchicalModel(std::vector<FlatModel> levels, std::optional<AttributeLexicon> mask);

  std::size_t depth() const noexcept { return levels_.size(); }
  const FlatModel& level(std::size_t i) const { return levels_.at(i - 1); }
  const std::vector<FlatModel>& levels() const noexcept { return levels_; }
  const std::optional<AttributeLexicon>& mask() const noexcept { return mask_; }

  // Tokenize + mask.
  TokenSeq prepare(std::string_view title) const;

  Prediction predict(std::string_view title) const;

 private:
  std::vector<FlatModel> levels_;
  std::optional<AttributeLexicon> mask_;
};

HierarchicalModel train_hft(std::span<const Example> examples, const Hyperparams& hp,
                            const AttributeLexicon* mask = nullptr);

// Tokens are masked first when the model carries a lexicon.
Prediction predict_hft(const HierarchicalModel& model, std::span<const std::string> tokens);

std::vector<Example> to_examples(std::span<const std::string> titles,
                                 std::span<const CategoryPath> paths);

// Versioned container: text header (magic, hyperparameters, per-level label
// and vocabulary tables, optional mask lexicon) then little-endian float32
// matrices, input then output, one pair per level.
void save_model(const HierarchicalModel& model, std::ostream& out);
void save_model(const HierarchicalModel& model, const std::string& path);
HierarchicalModel load_model(std::istream& in);
HierarchicalModel load_model(const std::string& path);

}  // namespace ctc
