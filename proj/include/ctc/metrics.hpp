#pragma once

#include <concepts>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ctc/data.hpp"
#include "ctc/error.hpp"
#include "ctc/model.hpp"
#include "ctc/taxonomy.hpp"

namespace ctc {

template <typename C>
concept TitleClassifier = requires(const C& c, std::string_view title) {
  { c.predict(title) } -> std::convertible_to<Prediction>;
};

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct F1Breakdown {
  double weighted_f1 = 0.0;
  std::map<std::string, ClassStats> per_class;  // keyed by rendered path
};

// Classes are full paths. Throws MetricError on length mismatch or empty input.
F1Breakdown f1_breakdown(std::span<const CategoryPath> predictions,
                         std::span<const CategoryPath> golds);
double weighted_f1(std::span<const CategoryPath> predictions, std::span<const CategoryPath> golds);
double accuracy(std::span<const CategoryPath> predictions, std::span<const CategoryPath> golds);

// agreeing / total. Throws MetricError when total is zero.
double consistency_rate(std::size_t agreeing, std::size_t total);

// True when both paths carry the same first `level` labels (or are equal
// when either is shallower).
bool paths_agree_through(const CategoryPath& a, const CategoryPath& b, std::size_t level);

struct ConsistencyCounts {
  std::size_t pairs = 0;
  std::size_t agreeing = 0;
  // Index i counts pairs agreeing through level i + 1.
  std::vector<std::size_t> agreeing_by_level;

  double rate() const { return consistency_rate(agreeing, pairs); }
  std::vector<double> rates_by_level() const;
};

ConsistencyCounts count_consistency(std::span<const Prediction> sources,
                                    std::span<const Prediction> targets);

template <TitleClassifier C>
ConsistencyCounts count_consistency(const C& f, std::span<const TitlePair> pairs) {
  std::vector<Prediction> src;
  std::vector<Prediction> tgt;
  src.reserve(pairs.size());
  tgt.reserve(pairs.size());
  for (const auto& p : pairs) {
    src.push_back(f.predict(p.source));
    tgt.push_back(f.predict(p.target));
  }
  return count_consistency(src, tgt);
}

// Fraction of pairs whose full predicted paths match.
template <TitleClassifier C>
double consistency_rate(const C& f, std::span<const TitlePair> pairs) {
  if (pairs.empty()) throw MetricError("consistency rate of an empty pair list is undefined");
  return count_consistency(f, pairs).rate();
}

// (1 - acc) + lambda * (1 - cons).
double dual_objective(double acc, double cons, double lambda);

// (candidate - baseline) / baseline.
double lift(double candidate, double baseline);
inline double consistency_lift(double candidate, double baseline) {
  return lift(candidate, baseline);
}
inline double f1_lift(double candidate, double baseline) { return lift(candidate, baseline); }

struct EvalReport {
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::map<std::string, ClassStats> per_class;
  double consistency_rate = 0.0;
  std::vector<double> consistency_by_level;
  std::size_t n_accuracy_examples = 0;
  std::size_t n_consistency_pairs = 0;
  double lambda = 1.0;
  double dual_objective_value = 0.0;

  nlohmann::ordered_json to_json() const;
};

EvalReport make_report(std::span<const CategoryPath> predictions,
                       std::span<const CategoryPath> golds, const ConsistencyCounts& consistency,
                       double lambda = 1.0);

template <TitleClassifier C>
EvalReport evaluate(const C& f, const LabeledDataset& test, std::span<const TitlePair> pairs,
                    double lambda = 1.0) {
  std::vector<CategoryPath> preds;
  std::vector<CategoryPath> golds;
  preds.reserve(test.size());
  golds.reserve(test.size());
  for (const auto& ex : test) {
    preds.push_back(f.predict(ex.title).path);
    golds.push_back(ex.path);
  }
  if (pairs.empty()) throw MetricError("consistency rate of an empty pair list is undefined");
  return make_report(preds, golds, count_consistency(f, pairs), lambda);
}

struct TableRow {
  std::string name;
  double f1 = 0.0;
  double consistency = 0.0;
  double f1_std = 0.0;
  double consistency_std = 0.0;
};

// Columns: method, F1, F1 lift, consistency, consistency lift. Lifts are
// relative to the first row.
std::string render_table(std::span<const TableRow> rows);

}  // namespace ctc
