#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ctc/model.hpp"
#include "ctc/taxonomy.hpp"

namespace ctc {

struct LabeledExample {
  std::string title;
  CategoryPath path;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

using LabeledDataset = std::vector<LabeledExample>;

// Versions of one item. At least two titles, pairwise distinct after
// normalization.
struct ItemGroup {
  std::string group_id;
  std::vector<std::string> titles;

  friend bool operator==(const ItemGroup&, const ItemGroup&) = default;
};

struct ClusteredUnlabeled {
  std::vector<ItemGroup> groups;

  std::size_t total_titles() const;
  // Throws DataError on duplicate ids or invalid groups.
  void validate() const;
};

struct TitlePair {
  std::string source;
  std::string target;
  std::string group_id;

  friend bool operator==(const TitlePair&, const TitlePair&) = default;
};

// Tokenized training examples in dataset order.
std::vector<Example> to_examples(const LabeledDataset& data);

// Throws DataError naming the group when it has < 2 distinct titles.
void validate_group(const ItemGroup& group);

// JSONL readers report the 1-based line of the first bad record.
LabeledDataset read_labeled(std::istream& in);
LabeledDataset load_labeled(const std::string& path);
void write_labeled(const LabeledDataset& data, std::ostream& out);
void save_labeled(const LabeledDataset& data, const std::string& path);

ClusteredUnlabeled read_clustered(std::istream& in);
ClusteredUnlabeled load_clustered(const std::string& path);
void write_clustered(const ClusteredUnlabeled& data, std::ostream& out);
void save_clustered(const ClusteredUnlabeled& data, const std::string& path);

std::vector<TitlePair> read_pairs(std::istream& in);
std::vector<TitlePair> load_pairs(const std::string& path);
void write_pairs(std::span<const TitlePair> pairs, std::ostream& out);
void save_pairs(std::span<const TitlePair> pairs, const std::string& path);

/// Every ordered pair (j, j'), j != j', within each group. Groups yielding
/// more than `cap_per_group` pairs are sampled down uniformly without
/// replacement.
std::vector<TitlePair> build_pairs(const ClusteredUnlabeled& du, std::size_t cap_per_group,
                                   std::uint64_t seed);

struct ConsistencySplit {
  std::vector<TitlePair> test_pairs;
  ClusteredUnlabeled train;
};

// One random pair from each of `n_groups` random groups; those groups are
// removed from the training remainder.
ConsistencySplit split_consistency_test(const ClusteredUnlabeled& du, std::size_t n_groups,
                                        std::uint64_t seed);

using Histogram = std::map<std::string, double>;

// Normalized L1 label histogram of a labeled set.
Histogram l1_histogram(const LabeledDataset& data);

// 0.5 * sum |p - q| over the union of keys.
double total_variation(const Histogram& p, const Histogram& q);

struct SubsampleResult {
  ClusteredUnlabeled selected;
  std::vector<std::size_t> selected_indices;
  double achieved_tv = 0.0;
  Histogram achieved;
  std::vector<std::string> warnings;
};

/// Chooses groups so their L1 histogram is within `tolerance` total
/// variation of `target`, maximizing the number kept. `estimated_l1[i]` is
/// the L1 label assigned to group i.
SubsampleResult subsample_by_labels(const ClusteredUnlabeled& du,
                                    std::span<const std::string> estimated_l1,
                                    const Histogram& target, double tolerance,
                                    std::uint64_t seed);

// Labels each group with the L1 truncation of its max-confidence pseudo-label
// under `fbase`, then calls subsample_by_labels.
SubsampleResult subsample_by_l1(const ClusteredUnlabeled& du, const Histogram& target,
                                const HierarchicalModel& fbase, double tolerance,
                                std::uint64_t seed);

}  // namespace ctc
