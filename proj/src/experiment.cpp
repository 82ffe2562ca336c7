#include "ctc/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "ctc/cga.hpp"
#include "ctc/cst.hpp"
#include "ctc/error.hpp"

namespace ctc {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 with fewer than two runs.
double stdev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

template <typename T>
T param(const json& params, const char* key, T fallback) {
  if (!params.contains(key) || params[key].is_null()) return fallback;
  try {
    return params[key].get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "baseline") return Method::kBaseline;
  if (name == "cs-blind") return Method::kCsBlind;
  if (name == "cst-complete" || name == "cst") return Method::kCstComplete;
  if (name == "cst-ss") return Method::kCstSubsampled;
  if (name == "cga") return Method::kCga;
  throw RangeError("unknown method '" + name + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kBaseline:
      return "baseline";
    case Method::kCsBlind:
      return "cs-blind";
    case Method::kCstComplete:
      return "cst-complete";
    case Method::kCstSubsampled:
      return "cst-ss";
    case Method::kCga:
      return "cga";
  }
  return "?";
}

ExperimentData data_from_world(const SynthWorld& world, std::optional<AttributeLexicon> lexicon) {
  ExperimentData d;
  d.labeled = world.labeled;
  d.unlabeled = world.unlabeled;
  d.test = world.test;
  d.pairs = world.test_pairs;
  d.lexicon = std::move(lexicon);
  return d;
}

Hyperparams apply_overrides(Hyperparams hp, const json& params) {
  hp.dim = param(params, "dim", hp.dim);
  hp.epochs = param(params, "epochs", hp.epochs);
  hp.lr = param(params, "lr", hp.lr);
  hp.max_n = param(params, "max_n", hp.max_n);
  hp.buckets = param(params, "buckets", hp.buckets);
  hp.threads = param(params, "threads", hp.threads);
  hp.validate();
  return hp;
}

CellRun run_cell(const CellSpec& cell, const ExperimentData& data, const Hyperparams& hp_in,
                 std::uint64_t seed, const HierarchicalModel* base, double lambda) {
  Hyperparams hp = apply_overrides(hp_in, cell.params);
  hp.seed = seed;
  const json& p = cell.params;
  CellRun run;
  switch (cell.method) {
    case Method::kBaseline:
      run.model = train_hft(to_examples(data.labeled), hp);
      break;
    case Method::kCsBlind:
      if (!data.lexicon) throw DataError("cs-blind needs an attribute lexicon");
      run.model = train_hft(to_examples(data.labeled), hp, &*data.lexicon);
      break;
    case Method::kCstComplete:
    case Method::kCstSubsampled: {
      CstConfig cfg;
      cfg.hp = hp;
      cfg.seed = seed;
      cfg.du_mode = cell.method == Method::kCstComplete ? CstConfig::Mode::kComplete
                                                        : CstConfig::Mode::kSubSampled;
      const std::string rule = param<std::string>(p, "rule", "maxconf");
      if (rule == "majority") {
        cfg.rule.variant = GroupLabelRule::Variant::kMajorityVote;
      } else if (rule != "maxconf") {
        throw RangeError("rule must be maxconf or majority");
      }
      cfg.subsample_tolerance = param(p, "tolerance", cfg.subsample_tolerance);
      if (p.contains("confidence_floor") && !p["confidence_floor"].is_null()) {
        cfg.confidence_floor = p["confidence_floor"].get<double>();
      }
      CstResult r = run_cst(data.labeled, data.unlabeled, cfg, base);
      run.model = std::move(r.model);
      run.stage = std::move(r.manifest);
      break;
    }
    case Method::kCga: {
      CgaConfig cfg;
      cfg.hp = hp;
      cfg.seed = seed;
      cfg.n_per_sample = param(p, "n", cfg.n_per_sample);
      cfg.threshold = param(p, "threshold", cfg.threshold);
      cfg.bleu_max_n = param(p, "bleu_max_n", cfg.bleu_max_n);
      cfg.pair_cap = param(p, "pair_cap", cfg.pair_cap);
      if (p.contains("target_size") && !p["target_size"].is_null()) {
        cfg.target_size = p["target_size"].get<std::size_t>();
      }
      const std::string score = param<std::string>(p, "score", "bleu");
      if (score == "cosine" || score == "embed_cosine") {
        cfg.score = ScoreKind::kEmbedCosine;
      } else if (score != "bleu") {
        throw RangeError("score must be bleu or cosine");
      }
      CgaResult r = run_cga(data.labeled, data.unlabeled, cfg, base);
      run.model = std::move(r.model);
      run.stage = std::move(r.manifest);
      break;
    }
  }
  run.report = evaluate(run.model, data.test, data.pairs, lambda);
  return run;
}

double CellSummary::f1_mean() const { return mean(f1); }
double CellSummary::f1_std() const { return stdev(f1); }
double CellSummary::consistency_mean() const { return mean(consistency); }
double CellSummary::consistency_std() const { return stdev(consistency); }

SweepSpec parse_sweep(const json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw DataError("sweep grid must be a JSON object");
  SweepSpec spec;
  if (doc.contains("world")) {
    SynthConfig base = SynthConfig::desk_default();
    json merged = base.to_json();
    merged.merge_patch(doc["world"]);
    spec.world = SynthConfig::from_json(merged);
  } else if (doc.contains("world_config")) {
    spec.world = SynthConfig::load(resolve(base_dir, doc["world_config"].get<std::string>()));
  } else if (doc.contains("data")) {
    const json& d = doc["data"];
    for (const char* key : {"labeled", "clustered", "test", "pairs"}) {
      if (!d.contains(key)) throw DataError(std::string("sweep data needs '") + key + "'");
    }
    ExperimentData data;
    data.labeled = load_labeled(resolve(base_dir, d["labeled"].get<std::string>()));
    data.unlabeled = load_clustered(resolve(base_dir, d["clustered"].get<std::string>()));
    data.test = load_labeled(resolve(base_dir, d["test"].get<std::string>()));
    data.pairs = load_pairs(resolve(base_dir, d["pairs"].get<std::string>()));
    spec.data = std::move(data);
  } else {
    throw DataError("sweep grid needs 'world', 'world_config' or 'data'");
  }
  if (doc.contains("lexicon")) {
    spec.lexicon = AttributeLexicon::load(resolve(base_dir, doc["lexicon"].get<std::string>()));
  }
  if (doc.contains("hyperparams")) spec.hp = apply_overrides(spec.hp, doc["hyperparams"]);
  if (doc.contains("lambda")) spec.lambda = doc["lambda"].get<double>();
  if (spec.lambda < 0.0) throw RangeError("lambda must be >= 0");

  auto cell_from = [](const json& obj, std::string fallback_name) {
    CellSpec c;
    if (!obj.contains("method")) throw DataError("every cell needs a 'method'");
    c.method = parse_method(obj["method"].get<std::string>());
    c.name = obj.contains("name") ? obj["name"].get<std::string>() : std::move(fallback_name);
    for (const auto& [k, v] : obj.items()) {
      if (k != "name" && k != "method") c.params[k] = v;
    }
    return c;
  };
  if (doc.contains("cells")) {
    for (const auto& obj : doc["cells"]) {
      spec.cells.push_back(cell_from(obj, obj.value("method", std::string("cell"))));
    }
  }
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    // Cartesian product over every list-valued key; scalars are shared.
    std::vector<json> combos{json::object()};
    for (const auto& [k, v] : g.items()) {
      std::vector<json> next;
      const json values = v.is_array() ? v : json::array({v});
      for (const auto& combo : combos) {
        for (const auto& val : values) {
          json c = combo;
          c[k] = val;
          next.push_back(std::move(c));
        }
      }
      combos = std::move(next);
    }
    for (const auto& combo : combos) {
      std::string name = combo.value("method", std::string("cell"));
      for (const auto& [k, v] : combo.items()) {
        if (k != "method" && g[k].is_array()) name += " " + k + "=" + scalar_text(v);
      }
      spec.cells.push_back(cell_from(combo, name));
    }
  }
  if (spec.cells.empty()) throw DataError("sweep grid has no cells");
  return spec;
}

std::vector<CellSummary> run_sweep(const SweepSpec& spec, std::span<const std::uint64_t> seeds,
                                   std::ostream* log) {
  if (seeds.empty()) throw RangeError("sweep needs at least one seed");
  std::vector<CellSummary> out;
  for (const auto& c : spec.cells) out.push_back(CellSummary{c, {}, {}, {}, {}});

  for (std::uint64_t seed : seeds) {
    ExperimentData data;
    if (spec.world) {
      SynthConfig cfg = *spec.world;
      cfg.seed = seed;
      data = data_from_world(generate_world(cfg), spec.lexicon);
    } else {
      data = *spec.data;
      data.lexicon = spec.lexicon;
    }
    // One baseline per (seed, hyperparameters), shared by cst and cga cells.
    std::map<std::string, HierarchicalModel> bases;
    for (auto& summary : out) {
      const CellSpec& cell = summary.spec;
      try {
        const Hyperparams hp = apply_overrides(spec.hp, cell.params);
        std::string key = json{hp.dim, hp.epochs, hp.lr, hp.max_n, hp.buckets}.dump();
        const HierarchicalModel* base = nullptr;
        if (cell.method == Method::kCstComplete || cell.method == Method::kCstSubsampled ||
            cell.method == Method::kCga) {
          auto it = bases.find(key);
          if (it == bases.end()) {
            Hyperparams bhp = hp;
            bhp.seed = seed;
            it = bases.emplace(key, train_hft(to_examples(data.labeled), bhp)).first;
          }
          base = &it->second;
        }
        CellRun run = run_cell(cell, data, spec.hp, seed, base, spec.lambda);
        summary.seeds.push_back(seed);
        summary.f1.push_back(run.report.weighted_f1);
        summary.consistency.push_back(run.report.consistency_rate);
        if (log) {
          *log << "seed " << seed << "  " << cell.name << "  f1=" << run.report.weighted_f1
               << "  consistency=" << run.report.consistency_rate << '\n';
        }
      } catch (const std::exception& e) {
        summary.errors.push_back("seed " + std::to_string(seed) + ": " + e.what());
        if (log) *log << "seed " << seed << "  " << cell.name << "  FAILED: " << e.what() << '\n';
      }
    }
  }
  return out;
}

void write_sweep_csv(std::span<const CellSummary> cells, std::ostream& out) {
  std::set<std::string> keys;
  for (const auto& c : cells) {
    for (const auto& [k, v] : c.spec.params.items()) keys.insert(k);
  }
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };
  out << "name,method";
  for (const auto& k : keys) out << ',' << k;
  out << ",f1_mean,f1_std,consistency_mean,consistency_std,runs,failed\n";
  char buf[64];
  for (const auto& c : cells) {
    out << quote(c.spec.name) << ',' << to_string(c.spec.method);
    for (const auto& k : keys) {
      out << ',';
      if (c.spec.params.contains(k)) out << quote(scalar_text(c.spec.params[k]));
    }
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f", c.f1_mean(), c.f1_std(),
                  c.consistency_mean(), c.consistency_std());
    out << buf << ',' << c.f1.size() << ',' << c.errors.size() << '\n';
  }
}

std::string render_sweep_table(std::span<const CellSummary> cells) {
  std::vector<TableRow> rows;
  for (const auto& c : cells) {
    if (c.f1.empty()) continue;
    rows.push_back(TableRow{c.spec.name, c.f1_mean(), c.consistency_mean(), c.f1_std(),
                            c.consistency_std()});
  }
  if (rows.empty()) return "no successful runs\n";
  return render_table(rows);
}

}  // namespace ctc
