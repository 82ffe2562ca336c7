#include "ctc/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace ctc {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw MetricError("predictions and golds differ in length");
  if (a == 0) throw MetricError("metric over an empty set is undefined");
}

std::string percent(double x, bool sign) {
  char buf[32];
  std::snprintf(buf, sizeof buf, sign ? "%+.2f%%" : "%.2f%%", 100.0 * x);
  return buf;
}

}  // namespace

F1Breakdown f1_breakdown(std::span<const CategoryPath> predictions,
                         std::span<const CategoryPath> golds) {
  check_lengths(predictions.size(), golds.size());
  struct Counts {
    std::size_t tp = 0, predicted = 0, gold = 0;
  };
  std::map<std::string, Counts> counts;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const std::string g = golds[i].render();
    const std::string p = predictions[i].render();
    ++counts[g].gold;
    ++counts[p].predicted;
    if (g == p) ++counts[g].tp;
  }
  F1Breakdown out;
  const double n = static_cast<double>(golds.size());
  for (const auto& [label, c] : counts) {
    ClassStats s;
    s.support = c.gold;
    s.precision = c.predicted ? static_cast<double>(c.tp) / static_cast<double>(c.predicted) : 0.0;
    s.recall = c.gold ? static_cast<double>(c.tp) / static_cast<double>(c.gold) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    out.weighted_f1 += s.f1 * static_cast<double>(c.gold) / n;
    out.per_class.emplace(label, s);
  }
  out.weighted_f1 = std::clamp(out.weighted_f1, 0.0, 1.0);
  return out;
}

double weighted_f1(std::span<const CategoryPath> predictions,
                   std::span<const CategoryPath> golds) {
  return f1_breakdown(predictions, golds).weighted_f1;
}

double accuracy(std::span<const CategoryPath> predictions, std::span<const CategoryPath> golds) {
  check_lengths(predictions.size(), golds.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) hits += predictions[i] == golds[i];
  return static_cast<double>(hits) / static_cast<double>(golds.size());
}

double consistency_rate(std::size_t agreeing, std::size_t total) {
  if (total == 0) throw MetricError("consistency rate of an empty pair list is undefined");
  if (agreeing > total) throw MetricError("more agreeing pairs than pairs");
  return static_cast<double>(agreeing) / static_cast<double>(total);
}

bool paths_agree_through(const CategoryPath& a, const CategoryPath& b, std::size_t level) {
  const std::size_t na = std::min(level, a.depth());
  const std::size_t nb = std::min(level, b.depth());
  if (na != nb) return false;
  for (std::size_t i = 1; i <= na; ++i) {
    if (a.level(i) != b.level(i)) return false;
  }
  return true;
}

std::vector<double> ConsistencyCounts::rates_by_level() const {
  std::vector<double> out;
  for (std::size_t c : agreeing_by_level) out.push_back(consistency_rate(c, pairs));
  return out;
}

ConsistencyCounts count_consistency(std::span<const Prediction> sources,
                                    std::span<const Prediction> targets) {
  if (sources.size() != targets.size()) throw MetricError("sources and targets differ in length");
  ConsistencyCounts out;
  out.pairs = sources.size();
  out.agreeing_by_level.assign(kMaxDepth, 0);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& a = sources[i].path;
    const auto& b = targets[i].path;
    out.agreeing += a == b;
    for (std::size_t l = 1; l <= kMaxDepth; ++l) {
      out.agreeing_by_level[l - 1] += paths_agree_through(a, b, l);
    }
  }
  return out;
}

double dual_objective(double acc, double cons, double lambda) {
  if (lambda < 0.0) throw RangeError("lambda must be >= 0");
  if (acc < 0.0 || acc > 1.0 || cons < 0.0 || cons > 1.0) {
    throw RangeError("accuracy and consistency must lie in [0, 1]");
  }
  return (1.0 - acc) + lambda * (1.0 - cons);
}

double lift(double candidate, double baseline) {
  if (baseline == 0.0) throw MetricError("lift against a zero baseline is undefined");
  return (candidate - baseline) / baseline;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["weighted_f1"] = weighted_f1;
  j["accuracy"] = accuracy;
  j["consistency_rate"] = consistency_rate;
  j["consistency_by_level"] = consistency_by_level;
  j["lambda"] = lambda;
  j["dual_objective"] = dual_objective_value;
  j["n_accuracy_examples"] = n_accuracy_examples;
  j["n_consistency_pairs"] = n_consistency_pairs;
  j["granularity"] = "full path";
  auto& pc = j["per_class"];
  pc = nlohmann::ordered_json::object();
  for (const auto& [label, s] : per_class) {
    pc[label] = {{"precision", s.precision},
                 {"recall", s.recall},
                 {"f1", s.f1},
                 {"support", s.support}};
  }
  return j;
}

EvalReport make_report(std::span<const CategoryPath> predictions,
                       std::span<const CategoryPath> golds, const ConsistencyCounts& consistency,
                       double lambda) {
  EvalReport r;
  F1Breakdown f1 = f1_breakdown(predictions, golds);
  r.weighted_f1 = f1.weighted_f1;
  r.per_class = std::move(f1.per_class);
  r.accuracy = accuracy(predictions, golds);
  r.consistency_rate = consistency.rate();
  r.consistency_by_level = consistency.rates_by_level();
  r.n_accuracy_examples = golds.size();
  r.n_consistency_pairs = consistency.pairs;
  r.lambda = lambda;
  r.dual_objective_value = dual_objective(r.accuracy, r.consistency_rate, lambda);
  return r;
}

std::string render_table(std::span<const TableRow> rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-22s %16s %10s %16s %10s\n", "method", "F1", "F1 lift",
                "consistency", "cons lift");
  out << buf;
  for (const auto& r : rows) {
    const auto& base = rows.front();
    auto cell = [](double mean, double sd) {
      char c[40];
      if (sd > 0.0) {
        std::snprintf(c, sizeof c, "%.4f+-%.4f", mean, sd);
      } else {
        std::snprintf(c, sizeof c, "%.4f", mean);
      }
      return std::string(c);
    };
    const std::string f1l = &r == &base ? "-" : percent(lift(r.f1, base.f1), true);
    const std::string cl =
        &r == &base ? "-" : percent(lift(r.consistency, base.consistency), true);
    std::snprintf(buf, sizeof buf, "%-22s %16s %10s %16s %10s\n", r.name.c_str(),
                  cell(r.f1, r.f1_std).c_str(), f1l.c_str(),
                  cell(r.consistency, r.consistency_std).c_str(), cl.c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace ctc
