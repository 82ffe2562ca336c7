#include "ctc/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_set>

#include "json.hpp"

#include "ctc/cst.hpp"
#include "ctc/error.hpp"
#include "ctc/rng.hpp"
#include "ctc/text.hpp"

namespace ctc {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!obj.is_object()) throw DataError("record is not a JSON object", lineno);
    try {
      fn(obj, lineno);
    } catch (const DataError& e) {
      if (e.line() != 0) throw;
      throw DataError(e.what(), lineno);
    } catch (const json::exception& e) {
      throw DataError(e.what(), lineno);
    }
  }
}

std::string string_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing \"") + key + "\" field");
  if (!it->is_string()) throw DataError(std::string("\"") + key + "\" must be a string");
  return it->get<std::string>();
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  return out;
}

void emit(std::ostream& out, const ordered_json& obj) {
  out << obj.dump(-1, ' ', false, json::error_handler_t::strict) << '\n';
}

}  // namespace

std::size_t ClusteredUnlabeled::total_titles() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.titles.size();
  return n;
}

std::vector<Example> to_examples(const LabeledDataset& data) {
  std::vector<Example> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(Example{normalize_tokenize(ex.title), ex.path});
  return out;
}

void validate_group(const ItemGroup& group) {
  if (group.titles.size() < 2) {
    throw DataError("group " + group.group_id + " has fewer than 2 titles");
  }
  std::unordered_set<std::string> seen;
  for (const auto& t : group.titles) {
    if (!seen.insert(join_tokens(normalize_tokenize(t))).second) {
      throw DataError("group " + group.group_id + " has titles that normalize equal");
    }
  }
}

void ClusteredUnlabeled::validate() const {
  std::unordered_set<std::string> ids;
  for (const auto& g : groups) {
    if (!ids.insert(g.group_id).second) throw DataError("duplicate group_id " + g.group_id);
    validate_group(g);
  }
}

LabeledDataset read_labeled(std::istream& in) {
  LabeledDataset out;
  for_each_record(in, [&](const json& obj, std::size_t) {
    std::string title = string_field(obj, "title");
    if (blank(title)) throw DataError("empty title");
    CategoryPath path = parse_path(string_field(obj, "category"));
    out.push_back(LabeledExample{std::move(title), std::move(path)});
  });
  return out;
}

LabeledDataset load_labeled(const std::string& path) {
  auto in = open_in(path);
  return read_labeled(in);
}

void write_labeled(const LabeledDataset& data, std::ostream& out) {
  for (const auto& ex : data) {
    ordered_json obj;
    obj["title"] = ex.title;
    obj["category"] = ex.path.render();
    emit(out, obj);
  }
}

void save_labeled(const LabeledDataset& data, const std::string& path) {
  auto out = open_out(path);
  write_labeled(data, out);
}

ClusteredUnlabeled read_clustered(std::istream& in) {
  ClusteredUnlabeled out;
  std::unordered_set<std::string> ids;
  for_each_record(in, [&](const json& obj, std::size_t) {
    ItemGroup g;
    g.group_id = string_field(obj, "group_id");
    auto it = obj.find("titles");
    if (it == obj.end() || !it->is_array()) throw DataError("missing \"titles\" array");
    for (const auto& t : *it) {
      if (!t.is_string()) throw DataError("titles must be strings");
      g.titles.push_back(t.get<std::string>());
    }
    if (!ids.insert(g.group_id).second) throw DataError("duplicate group_id " + g.group_id);
    validate_group(g);
    out.groups.push_back(std::move(g));
  });
  return out;
}

ClusteredUnlabeled load_clustered(const std::string& path) {
  auto in = open_in(path);
  return read_clustered(in);
}

void write_clustered(const ClusteredUnlabeled& data, std::ostream& out) {
  for (const auto& g : data.groups) {
    ordered_json obj;
    obj["group_id"] = g.group_id;
    obj["titles"] = g.titles;
    emit(out, obj);
  }
}

void save_clustered(const ClusteredUnlabeled& data, const std::string& path) {
  auto out = open_out(path);
  write_clustered(data, out);
}

std::vector<TitlePair> read_pairs(std::istream& in) {
  std::vector<TitlePair> out;
  for_each_record(in, [&](const json& obj, std::size_t) {
    TitlePair p{string_field(obj, "source"), string_field(obj, "target"),
                string_field(obj, "group_id")};
    if (p.source == p.target) throw DataError("pair source equals target");
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<TitlePair> load_pairs(const std::string& path) {
  auto in = open_in(path);
  return read_pairs(in);
}

void write_pairs(std::span<const TitlePair> pairs, std::ostream& out) {
  for (const auto& p : pairs) {
    ordered_json obj;
    obj["source"] = p.source;
    obj["target"] = p.target;
    obj["group_id"] = p.group_id;
    emit(out, obj);
  }
}

void save_pairs(std::span<const TitlePair> pairs, const std::string& path) {
  auto out = open_out(path);
  write_pairs(pairs, out);
}

std::vector<TitlePair> build_pairs(const ClusteredUnlabeled& du, std::size_t cap_per_group,
                                   std::uint64_t seed) {
  if (cap_per_group < 1) throw RangeError("cap_per_group must be >= 1");
  std::vector<TitlePair> out;
  for (std::size_t gi = 0; gi < du.groups.size(); ++gi) {
    const ItemGroup& g = du.groups[gi];
    const std::size_t k = g.titles.size();
    if (k < 2) continue;
    std::vector<std::pair<std::size_t, std::size_t>> all;
    all.reserve(k * (k - 1));
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t jj = 0; jj < k; ++jj) {
        if (j != jj) all.emplace_back(j, jj);
      }
    }
    if (all.size() > cap_per_group) {
      Rng rng(derive_seed(seed, gi));
      std::vector<std::size_t> pick = rng.sample_indices(all.size(), cap_per_group);
      std::sort(pick.begin(), pick.end());
      std::vector<std::pair<std::size_t, std::size_t>> kept;
      kept.reserve(pick.size());
      for (std::size_t i : pick) kept.push_back(all[i]);
      all = std::move(kept);
    }
    for (auto [j, jj] : all) out.push_back(TitlePair{g.titles[j], g.titles[jj], g.group_id});
  }
  return out;
}

ConsistencySplit split_consistency_test(const ClusteredUnlabeled& du, std::size_t n_groups,
                                        std::uint64_t seed) {
  if (n_groups > du.groups.size()) {
    throw RangeError("requested " + std::to_string(n_groups) + " test groups but only " +
                     std::to_string(du.groups.size()) + " available");
  }
  Rng rng(seed);
  std::vector<std::size_t> chosen = rng.sample_indices(du.groups.size(), n_groups);
  std::sort(chosen.begin(), chosen.end());
  ConsistencySplit split;
  std::vector<bool> taken(du.groups.size(), false);
  for (std::size_t gi : chosen) {
    taken[gi] = true;
    const ItemGroup& g = du.groups[gi];
    std::vector<std::size_t> two = rng.sample_indices(g.titles.size(), 2);
    std::sort(two.begin(), two.end());
    split.test_pairs.push_back(TitlePair{g.titles[two[0]], g.titles[two[1]], g.group_id});
  }
  for (std::size_t gi = 0; gi < du.groups.size(); ++gi) {
    if (!taken[gi]) split.train.groups.push_back(du.groups[gi]);
  }
  return split;
}

Histogram l1_histogram(const LabeledDataset& data) {
  Histogram h;
  for (const auto& ex : data) h[ex.path.level(1)] += 1.0;
  for (auto& [k, v] : h) v /= static_cast<double>(data.size());
  return h;
}

double total_variation(const Histogram& p, const Histogram& q) {
  double tv = 0.0;
  for (const auto& [k, v] : p) {
    auto it = q.find(k);
    tv += std::abs(v - (it == q.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : q) {
    if (!p.contains(k)) tv += std::abs(v);
  }
  return 0.5 * tv;
}

namespace {

struct Allocation {
  std::vector<std::size_t> take;
  double tv = 1.0;
  std::size_t total = 0;
};

double allocation_tv(std::span<const std::size_t> take, std::span<const double> target) {
  std::size_t total = 0;
  for (std::size_t t : take) total += t;
  if (total == 0) return 1.0;
  double tv = 0.0;
  for (std::size_t b = 0; b < take.size(); ++b) {
    tv += std::abs(static_cast<double>(take[b]) / static_cast<double>(total) - target[b]);
  }
  return 0.5 * tv;
}

}  // namespace

SubsampleResult subsample_by_labels(const ClusteredUnlabeled& du,
                                    std::span<const std::string> estimated_l1,
                                    const Histogram& target, double tolerance,
                                    std::uint64_t seed) {
  if (estimated_l1.size() != du.groups.size()) {
    throw RangeError("one estimated label per group required");
  }
  double mass = 0.0;
  for (const auto& [k, v] : target) {
    if (v < 0.0) throw RangeError("target histogram has negative mass");
    mass += v;
  }
  if (std::abs(mass - 1.0) > 1e-6) throw RangeError("target histogram must sum to 1");

  // Bins: every target key plus every estimated label.
  std::vector<std::string> bins;
  for (const auto& [k, v] : target) bins.push_back(k);
  for (const auto& l : estimated_l1) {
    if (!target.contains(l)) bins.push_back(l);
  }
  std::sort(bins.begin(), bins.end());
  bins.erase(std::unique(bins.begin(), bins.end()), bins.end());
  const std::size_t nb = bins.size();
  std::vector<double> want(nb, 0.0);
  std::vector<std::vector<std::size_t>> members(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    auto it = target.find(bins[b]);
    if (it != target.end()) want[b] = it->second;
  }
  for (std::size_t gi = 0; gi < estimated_l1.size(); ++gi) {
    auto b = static_cast<std::size_t>(
        std::lower_bound(bins.begin(), bins.end(), estimated_l1[gi]) - bins.begin());
    members[b].push_back(gi);
  }

  SubsampleResult result;
  if (du.groups.empty()) {
    result.achieved_tv = total_variation(result.achieved, target);
    result.warnings.push_back("no groups to sub-sample");
    return result;
  }
  for (std::size_t b = 0; b < nb; ++b) {
    if (want[b] > 0.0 && members[b].empty()) {
      result.warnings.push_back("target bin '" + bins[b] + "' has mass " +
                                std::to_string(want[b]) + " but no available groups");
    }
  }

  // Proportional allocation for every candidate total; keep the largest
  // selection within tolerance, else the smallest distance seen.
  Allocation best_ok;
  Allocation best_any;
  bool found = false;
  std::vector<std::size_t> take(nb);
  for (std::size_t s = du.groups.size(); s >= 1; --s) {
    std::size_t total = 0;
    for (std::size_t b = 0; b < nb; ++b) {
      auto ideal = static_cast<std::size_t>(std::llround(want[b] * static_cast<double>(s)));
      take[b] = std::min(members[b].size(), ideal);
      total += take[b];
    }
    if (total == 0) continue;
    double tv = allocation_tv(take, want);
    if (tv <= tolerance && (!found || total > best_ok.total)) {
      best_ok = Allocation{take, tv, total};
      found = true;
    }
    if (tv < best_any.tv || (tv == best_any.tv && total > best_any.total)) {
      best_any = Allocation{take, tv, total};
    }
  }
  Allocation alloc = found ? best_ok : best_any;

  // Greedy top-up: add single groups while the bound still holds.
  if (found) {
    while (true) {
      std::size_t pick = nb;
      double pick_tv = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        if (alloc.take[b] >= members[b].size()) continue;
        ++alloc.take[b];
        double tv = allocation_tv(alloc.take, want);
        --alloc.take[b];
        if (tv <= tolerance && (pick == nb || tv < pick_tv)) {
          pick = b;
          pick_tv = tv;
        }
      }
      if (pick == nb) break;
      ++alloc.take[pick];
      ++alloc.total;
      alloc.tv = pick_tv;
    }
  } else {
    result.warnings.push_back("tolerance " + std::to_string(tolerance) +
                              " not reachable; best total variation " +
                              std::to_string(alloc.tv));
  }

  Rng rng(seed);
  std::vector<bool> keep(du.groups.size(), false);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t i : rng.sample_indices(members[b].size(), alloc.take[b])) {
      keep[members[b][i]] = true;
    }
  }
  for (std::size_t gi = 0; gi < du.groups.size(); ++gi) {
    if (!keep[gi]) continue;
    result.selected.groups.push_back(du.groups[gi]);
    result.selected_indices.push_back(gi);
  }
  for (std::size_t b = 0; b < nb; ++b) {
    if (alloc.take[b] > 0) {
      result.achieved[bins[b]] =
          static_cast<double>(alloc.take[b]) / static_cast<double>(alloc.total);
    }
  }
  result.achieved_tv = allocation_tv(alloc.take, want);
  return result;
}

SubsampleResult subsample_by_l1(const ClusteredUnlabeled& du, const Histogram& target,
                                const HierarchicalModel& fbase, double tolerance,
                                std::uint64_t seed) {
  std::vector<std::string> labels;
  labels.reserve(du.groups.size());
  GroupLabelRule rule;  // max confidence
  for (const auto& g : du.groups) {
    labels.push_back(assign_group_pseudo_label(g, fbase, rule).path.level(1));
  }
  return subsample_by_labels(du, labels, target, tolerance, seed);
}

}  // namespace ctc
