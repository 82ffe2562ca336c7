#pragma once
// Independent reference computations. These deliberately share no code with
// the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ctc/detail/softmax_linear.hpp"
#include "ctc/taxonomy.hpp"

namespace ctc::oracle {

// Per-class precision/recall by direct scanning, then the support-weighted
// mean of 2PR/(P+R).
inline double weighted_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  std::vector<std::string> classes = gold;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  long double total = 0;
  for (const auto& c : classes) {
    long double tp = 0, predicted = 0, support = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (pred[i] == c) predicted += 1;
      if (gold[i] == c) support += 1;
      if (pred[i] == c && gold[i] == c) tp += 1;
    }
    long double p = predicted > 0 ? tp / predicted : 0;
    long double r = tp / support;
    long double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0;
    total += f1 * support;
  }
  return static_cast<double>(total / gold.size());
}

// Labels drawn from a small alphabet of paths so classes collide often.
struct F1Instance {
  std::vector<CategoryPath> pred;
  std::vector<CategoryPath> gold;
  std::vector<std::string> pred_s;
  std::vector<std::string> gold_s;
};

inline F1Instance random_f1_instance(std::mt19937_64& gen, std::size_t n) {
  static const std::vector<std::vector<std::string>> kPaths{
      {"A"}, {"A", "B"}, {"A", "C"}, {"D"}, {"D", "E", "F"}, {"D", "E", "G"}, {"H", "I"}};
  std::uniform_int_distribution<std::size_t> pick(0, kPaths.size() - 1);
  std::uniform_int_distribution<int> coin(0, 2);
  F1Instance inst;
  for (std::size_t i = 0; i < n; ++i) {
    CategoryPath g(kPaths[pick(gen)]);
    // Correct about a third of the time.
    CategoryPath p = coin(gen) == 0 ? g : CategoryPath(kPaths[pick(gen)]);
    inst.gold_s.push_back(g.render());
    inst.pred_s.push_back(p.render());
    inst.gold.push_back(std::move(g));
    inst.pred.push_back(std::move(p));
  }
  return inst;
}

// Sentence BLEU written out longhand: clipped counts, add-one for n >= 2,
// brevity penalty.
inline double bleu(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                   std::size_t max_n) {
  if (cand.empty()) return 0.0;
  auto grams = [](const std::vector<std::string>& t, std::size_t n) {
    std::map<std::vector<std::string>, int> m;
    for (std::size_t i = 0; i + n <= t.size(); ++i) {
      m[std::vector<std::string>(t.begin() + i, t.begin() + i + n)]++;
    }
    return m;
  };
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    auto c = grams(cand, n);
    auto r = grams(ref, n);
    double match = 0, total = 0;
    for (const auto& [g, k] : c) {
      total += k;
      auto it = r.find(g);
      if (it != r.end()) match += std::min(k, it->second);
    }
    if (n >= 2) {
      match += 1;
      total += 1;
    }
    if (match == 0 || total == 0) return 0.0;
    log_sum += std::log(match / total);
  }
  double bp = cand.size() < ref.size()
                  ? std::exp(1.0 - static_cast<double>(ref.size()) / cand.size())
                  : 1.0;
  return bp * std::exp(log_sum / max_n);
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Compares the analytic SGD step against central differences of the
// cross-entropy for every parameter of a small random model.
inline GradCheck gradient_check(std::size_t classes, std::size_t dim, std::uint64_t seed,
                                double step = 1e-4) {
  const std::size_t rows = 6;
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> input(rows * dim), output(classes * dim);
  for (auto& x : input) x = u(gen);
  for (auto& x : output) x = u(gen);
  // A repeated id exercises accumulation into one row.
  const std::vector<std::size_t> ids{0, 2, 2, 5};
  const std::size_t label = 1;

  auto loss_at = [&](const std::vector<double>& in, const std::vector<double>& out) {
    detail::Scratch<double> s;
    detail::forward<double>(std::span<const double>(in), std::span<const double>(out), dim,
                            classes, ids, s);
    return detail::cross_entropy(s, label);
  };

  std::vector<double> in_after = input, out_after = output;
  detail::Scratch<double> s;
  detail::sgd_step<double>(std::span<double>(in_after), std::span<double>(out_after), dim,
                           classes, ids, label, 1.0, s);

  GradCheck r;
  auto check = [&](std::vector<double>& params, const std::vector<double>& after, bool is_input) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double analytic = params[i] - after[i];
      const double keep = params[i];
      params[i] = keep + step;
      const double up = is_input ? loss_at(params, output) : loss_at(input, params);
      params[i] = keep - step;
      const double down = is_input ? loss_at(params, output) : loss_at(input, params);
      params[i] = keep;
      const double numeric = (up - down) / (2 * step);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / denom);
      ++r.checked;
    }
  };
  check(output, out_after, false);
  check(input, in_after, true);
  return r;
}

}  // namespace ctc::oracle
