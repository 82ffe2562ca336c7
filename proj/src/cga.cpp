#include "ctc/cga.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <unordered_map>

#include "ctc/error.hpp"
#include "ctc/rng.hpp"

namespace ctc {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kPairStream = 0xC6A1;
constexpr std::uint64_t kGenerateStream = 0xC6A2;
constexpr std::uint64_t kTargetStream = 0xC6A3;

std::string join(std::span<const std::string> tokens) { return join_tokens(tokens); }

// n-gram -> count, keys joined with a unit separator.
std::unordered_map<std::string, std::size_t> ngram_counts(std::span<const std::string> tokens,
                                                          std::size_t n) {
  std::unordered_map<std::string, std::size_t> out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      key += '\x1f';
      key += tokens[i + k];
    }
    ++out[key];
  }
  return out;
}

template <typename Map>
std::size_t weighted_pick(const Map& counts, Rng& rng, std::vector<const std::string*>& keys) {
  keys.clear();
  std::vector<double> w;
  for (const auto& [k, c] : counts) {
    keys.push_back(&k);
    w.push_back(static_cast<double>(c));
  }
  return rng.weighted(std::span<const double>(w));
}

}  // namespace

std::vector<DiffRegion> diff_regions(std::span<const std::string> s,
                                     std::span<const std::string> t) {
  const std::size_t n = s.size();
  const std::size_t m = t.size();
  // dp[i][j] = LCS length of s[i..] and t[j..].
  std::vector<std::size_t> dp((n + 1) * (m + 1), 0);
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dp[i * (m + 1) + j]; };
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      at(i, j) = s[i] == t[j] ? at(i + 1, j + 1) + 1 : std::max(at(i + 1, j), at(i, j + 1));
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (s[i] == t[j] && at(i, j) == at(i + 1, j + 1) + 1) {
      matches.emplace_back(i++, j++);
    } else if (at(i + 1, j) >= at(i, j + 1)) {
      ++i;
    } else {
      ++j;
    }
  }
  matches.emplace_back(n, m);  // end anchor

  std::vector<DiffRegion> out;
  std::size_t ps = 0, pt = 0;
  std::string left(kStartToken);
  for (const auto& [ms, mt] : matches) {
    if (ms > ps || mt > pt) {
      DiffRegion r;
      r.source.assign(s.begin() + ps, s.begin() + ms);
      r.target.assign(t.begin() + pt, t.begin() + mt);
      r.left = left;
      r.right = ms < n ? s[ms] : std::string(kEndToken);
      out.push_back(std::move(r));
    }
    if (ms < n) left = s[ms];
    ps = ms + 1;
    pt = mt + 1;
  }
  return out;
}

void SubstitutionModel::train(std::span<const TitlePair> pairs) {
  for (const auto& p : pairs) {
    ++stats_.pairs_seen;
    const TokenSeq s = normalize_tokenize(p.source);
    const TokenSeq t = normalize_tokenize(p.target);
    if (s == t) {
      ++stats_.skipped_identical;
      continue;
    }
    const std::set<std::string> st(s.begin(), s.end());
    if (std::none_of(t.begin(), t.end(), [&](const std::string& w) { return st.count(w) > 0; })) {
      ++stats_.skipped_no_common;
      continue;
    }
    ++stats_.pairs_used;
    for (const auto& r : diff_regions(s, t)) {
      if (r.source.empty() || r.target.empty() || r.source.size() > kMaxSpanTokens ||
          r.target.size() > kMaxSpanTokens) {
        ++stats_.regions_discarded;
        continue;
      }
      const std::string from = join(r.source);
      const std::string to = join(r.target);
      ++swaps_[from][to];
      ++contexts_[{r.left, r.right}][to];
      ++stats_.regions_recorded;
    }
  }
}

SubstitutionModel train_substitution_model(std::span<const TitlePair> pairs) {
  SubstitutionModel m;
  m.train(pairs);
  return m;
}

std::vector<std::string> SubstitutionModel::generate(std::string_view title, std::size_t n,
                                                     std::uint64_t seed) const {
  if (n == 0) throw RangeError("n must be >= 1");
  const TokenSeq tokens = normalize_tokenize(title);
  const std::string input = join(tokens);

  struct Candidate {
    std::size_t pos;
    std::size_t len;
    const SpanCounts* global;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (std::size_t len = 1; len <= kMaxSpanTokens && i + len <= tokens.size(); ++len) {
      auto it = swaps_.find(join(std::span(tokens).subspan(i, len)));
      if (it != swaps_.end()) candidates.push_back({i, len, &it->second});
    }
  }
  std::vector<std::string> out;
  if (candidates.empty()) return out;

  Rng rng(seed);
  std::set<std::string> seen{input};
  std::vector<const std::string*> keys;
  for (std::size_t attempt = 0; attempt < n; ++attempt) {
    const Candidate& c = candidates[rng.below(candidates.size())];
    const std::string span = join(std::span(tokens).subspan(c.pos, c.len));
    const std::string left = c.pos > 0 ? tokens[c.pos - 1] : std::string(kStartToken);
    const std::string right =
        c.pos + c.len < tokens.size() ? tokens[c.pos + c.len] : std::string(kEndToken);

    std::string replacement;
    if (auto ctx = contexts_.find({left, right}); ctx != contexts_.end()) {
      SpanCounts usable;
      for (const auto& [to, count] : ctx->second) {
        if (to != span) usable.emplace(to, count);
      }
      if (const std::size_t k = weighted_pick(usable, rng, keys); k < keys.size()) {
        replacement = *keys[k];
      }
    }
    if (replacement.empty()) {
      const std::size_t k = weighted_pick(*c.global, rng, keys);
      if (k >= keys.size()) continue;
      replacement = *keys[k];
    }
    if (replacement == span) continue;

    TokenSeq edited(tokens.begin(), tokens.begin() + c.pos);
    edited.push_back(replacement);
    edited.insert(edited.end(), tokens.begin() + c.pos + c.len, tokens.end());
    std::string text = join(edited);
    if (text.empty()) continue;
    if (seen.insert(text).second) out.push_back(std::move(text));
  }
  return out;
}

double bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
            std::size_t max_n) {
  if (reference.empty()) throw RangeError("BLEU reference must be non-empty");
  if (max_n == 0) throw RangeError("BLEU max_n must be >= 1");
  if (candidate.empty()) return 0.0;

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    std::size_t clipped = 0;
    std::size_t total = 0;
    for (const auto& [g, c] : cand) {
      total += c;
      if (auto it = ref.find(g); it != ref.end()) clipped += std::min(c, it->second);
    }
    double p;
    if (n == 1) {
      if (clipped == 0) return 0.0;
      p = static_cast<double>(clipped) / static_cast<double>(total);
    } else {
      p = static_cast<double>(clipped + 1) / static_cast<double>(total + 1);
    }
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return std::clamp(bp * std::exp(log_sum / static_cast<double>(max_n)), 0.0, 1.0);
}

double cosine_score(const FlatModel& embedder, std::span<const std::string> t1,
                    std::span<const std::string> t2) {
  const std::vector<float> a = embed_title(embedder, t1);
  const std::vector<float> b = embed_title(embedder, t2);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += static_cast<double>(a[k]) * b[k];
    na += static_cast<double>(a[k]) * a[k];
    nb += static_cast<double>(b[k]) * b[k];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

double cosine_score(const FlatModel& embedder, std::string_view t1, std::string_view t2) {
  return cosine_score(embedder, normalize_tokenize(t1), normalize_tokenize(t2));
}

std::vector<AugmentedRow> filter_augmented(std::span<const AugmentedRow> rows, double threshold) {
  std::vector<AugmentedRow> kept;
  for (const auto& r : rows) {
    if (r.score >= threshold) kept.push_back(r);
  }
  return kept;
}

std::array<std::size_t, 10> score_histogram(std::span<const AugmentedRow> rows) {
  std::array<std::size_t, 10> bins{};
  for (const auto& r : rows) {
    auto b = static_cast<std::size_t>(std::floor(std::clamp(r.score, 0.0, 1.0) * 10.0));
    ++bins[std::min<std::size_t>(b, 9)];
  }
  return bins;
}

std::string to_string(ScoreKind kind) {
  return kind == ScoreKind::kBleu ? "bleu" : "embed_cosine";
}

void CgaConfig::validate() const {
  hp.validate();
  if (n_per_sample == 0) throw RangeError("n_per_sample must be >= 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw RangeError("threshold must lie in [0, 1]");
  if (bleu_max_n == 0) throw RangeError("bleu_max_n must be >= 1");
  if (pair_cap == 0) throw RangeError("pair_cap must be >= 1");
}

std::vector<ExternalGeneration> read_external_generations(std::istream& in) {
  std::vector<ExternalGeneration> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!j.is_object() || !j.contains("source") || !j["source"].is_string() ||
        !j.contains("generated") || !j["generated"].is_array()) {
      throw DataError("expected {\"source\": string, \"generated\": [string, ...]}", lineno);
    }
    ExternalGeneration g;
    g.source = j["source"].get<std::string>();
    for (const auto& v : j["generated"]) {
      if (!v.is_string()) throw DataError("generated entries must be strings", lineno);
      g.generated.push_back(v.get<std::string>());
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<ExternalGeneration> load_external_generations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_external_generations(in);
}

namespace {

struct Scorer {
  const CgaConfig& config;
  const HierarchicalModel* embedder;

  double operator()(std::string_view generated, std::string_view source) const {
    if (config.score == ScoreKind::kBleu) {
      const TokenSeq cand = normalize_tokenize(generated);
      const TokenSeq ref = normalize_tokenize(source);
      if (ref.empty()) return 0.0;
      return bleu(cand, ref, config.bleu_max_n);
    }
    const FlatModel& deepest = embedder->level(embedder->depth());
    return cosine_score(deepest, embedder->prepare(generated), embedder->prepare(source));
  }
};

}  // namespace

std::vector<AugmentedRow> generate_candidates(const LabeledDataset& dl,
                                              const PerturbationModel& model,
                                              const CgaConfig& config,
                                              const HierarchicalModel* embedder) {
  if (config.score == ScoreKind::kEmbedCosine && !embedder) {
    throw RangeError("cosine scoring needs an embedder");
  }
  const Scorer score{config, embedder};
  const std::uint64_t gen_seed = derive_seed(config.seed, kGenerateStream);
  std::vector<AugmentedRow> rows;
  for (std::size_t i = 0; i < dl.size(); ++i) {
    for (auto& text : model.generate(dl[i].title, config.n_per_sample, derive_seed(gen_seed, i))) {
      AugmentedRow r{i, dl[i].title, std::move(text), dl[i].path, 0.0};
      r.score = score(r.generated, r.source);
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

CgaResult run_cga(const LabeledDataset& dl, const ClusteredUnlabeled& du, const CgaConfig& config,
                  const HierarchicalModel* base,
                  const std::vector<ExternalGeneration>* external) {
  using clock = std::chrono::steady_clock;
  config.validate();
  Hyperparams hp = config.hp;
  hp.seed = config.seed;

  ordered_json manifest;
  manifest["stage"] = "cga";
  manifest["config"] = {{"n_per_sample", config.n_per_sample},
                        {"score", to_string(config.score)},
                        {"bleu_max_n", config.bleu_max_n},
                        {"threshold", config.threshold},
                        {"target_size", config.target_size ? ordered_json(*config.target_size)
                                                           : ordered_json(nullptr)},
                        {"pair_cap", config.pair_cap},
                        {"generator", external ? "external" : "substitution"}};
  ordered_json warnings = ordered_json::array();
  ordered_json timing;
  ordered_json counts;
  counts["labeled"] = dl.size();

  const std::vector<Example> labeled = to_examples(dl);
  std::optional<HierarchicalModel> own_base;
  auto need_base = [&]() -> const HierarchicalModel& {
    if (base) return *base;
    if (!own_base) {
      auto t0 = clock::now();
      own_base = train_hft(labeled, hp);
      timing["base_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();
    }
    return *own_base;
  };
  const HierarchicalModel* embedder =
      config.score == ScoreKind::kEmbedCosine ? &need_base() : nullptr;

  auto t0 = clock::now();
  std::vector<AugmentedRow> rows;
  if (external) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < dl.size(); ++i) index.emplace(dl[i].title, i);
    const Scorer score{config, embedder};
    std::size_t unmatched = 0;
    for (const auto& g : *external) {
      auto it = index.find(g.source);
      if (it == index.end()) {
        ++unmatched;
        continue;
      }
      const std::string input = join_tokens(normalize_tokenize(g.source));
      std::set<std::string> seen;
      for (const auto& text : g.generated) {
        if (text.empty() || join_tokens(normalize_tokenize(text)) == input) continue;
        if (!seen.insert(text).second) continue;
        AugmentedRow r{it->second, g.source, text, dl[it->second].path, 0.0};
        r.score = score(r.generated, r.source);
        rows.push_back(std::move(r));
      }
    }
    counts["external_records"] = external->size();
    counts["external_unmatched_sources"] = unmatched;
    if (unmatched > 0) {
      warnings.push_back(std::to_string(unmatched) +
                         " external records name a source absent from the labeled set");
    }
  } else {
    const std::uint64_t pair_seed = derive_seed(config.seed, kPairStream);
    const std::vector<TitlePair> pairs = build_pairs(du, config.pair_cap, pair_seed);
    const SubstitutionModel m = train_substitution_model(pairs);
    const auto& st = m.stats();
    counts["pairs"] = pairs.size();
    counts["pairs_used"] = st.pairs_used;
    counts["pairs_skipped_no_common"] = st.skipped_no_common;
    counts["pairs_skipped_identical"] = st.skipped_identical;
    counts["regions_recorded"] = st.regions_recorded;
    counts["regions_discarded"] = st.regions_discarded;
    counts["swap_entries"] = m.swaps().size();
    rows = generate_candidates(dl, m, config, embedder);
  }
  timing["generate_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();

  std::vector<AugmentedRow> kept = filter_augmented(rows, config.threshold);
  counts["generated"] = rows.size();
  counts["filtered"] = kept.size();
  if (config.target_size && kept.size() > *config.target_size) {
    Rng rng(derive_seed(config.seed, kTargetStream));
    std::vector<std::size_t> pick = rng.sample_indices(kept.size(), *config.target_size);
    std::sort(pick.begin(), pick.end());
    std::vector<AugmentedRow> sub;
    sub.reserve(pick.size());
    for (std::size_t i : pick) sub.push_back(std::move(kept[i]));
    kept = std::move(sub);
  } else if (config.target_size && kept.size() < *config.target_size) {
    warnings.push_back("fewer filtered rows than target_size; keeping all " +
                       std::to_string(kept.size()));
  }
  counts["kept"] = kept.size();

  ordered_json hist = ordered_json::array();
  for (std::size_t c : score_histogram(rows)) hist.push_back(c);

  CgaResult result;
  for (const auto& r : kept) result.d_aug.push_back(LabeledExample{r.generated, r.label});
  result.kept = std::move(kept);

  t0 = clock::now();
  if (result.d_aug.empty()) {
    warnings.push_back("no augmented rows survived; final model equals the baseline");
    result.model = need_base();
  } else {
    std::vector<Example> train = labeled;
    const std::vector<Example> aug = to_examples(result.d_aug);
    train.insert(train.end(), aug.begin(), aug.end());
    result.model = train_hft(train, hp);
  }
  timing["final_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();
  counts["final_train"] = dl.size() + result.d_aug.size();

  manifest["seeds"] = {{"run", config.seed},
                       {"pairs", derive_seed(config.seed, kPairStream)},
                       {"generate", derive_seed(config.seed, kGenerateStream)},
                       {"target_sample", derive_seed(config.seed, kTargetStream)}};
  manifest["counts"] = std::move(counts);
  manifest["score_histogram"] = {{"bins", "[0.0,0.1) ... [0.9,1.0]"}, {"counts", std::move(hist)}};
  manifest["warnings"] = std::move(warnings);
  manifest["timing"] = std::move(timing);
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace ctc
