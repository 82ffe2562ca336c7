#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctc/data.hpp"
#include "ctc/metrics.hpp"
#include "ctc/model.hpp"
#include "ctc/synth.hpp"
#include "ctc/text.hpp"

namespace ctc {

enum class Method { kBaseline, kCsBlind, kCstComplete, kCstSubsampled, kCga };

// Accepts baseline, cs-blind, cst-complete, cst-ss, cga.
Method parse_method(const std::string& name);
std::string to_string(Method method);

struct ExperimentData {
  LabeledDataset labeled;
  ClusteredUnlabeled unlabeled;
  LabeledDataset test;
  std::vector<TitlePair> pairs;
  std::optional<AttributeLexicon> lexicon;  // needed by cs-blind
};

ExperimentData data_from_world(const SynthWorld& world,
                               std::optional<AttributeLexicon> lexicon = std::nullopt);

// One configuration of one method. `params` holds method options
// (threshold, target_size, n, score, bleu_max_n, pair_cap, rule,
// tolerance, confidence_floor) and hyperparameter overrides (dim, epochs,
// lr, max_n, buckets, threads).
struct CellSpec {
  std::string name;
  Method method = Method::kBaseline;
  nlohmann::json params = nlohmann::json::object();
};

Hyperparams apply_overrides(Hyperparams hp, const nlohmann::json& params);

struct CellRun {
  HierarchicalModel model;
  EvalReport report;
  nlohmann::ordered_json stage;  // method manifest, empty for baselines
};

/// Trains one cell with `seed` and evaluates it on data.test / data.pairs.
/// `base` (a baseline trained with the same seed and hyperparameters) is
/// reused by cst and cga when given.
CellRun run_cell(const CellSpec& cell, const ExperimentData& data, const Hyperparams& hp,
                 std::uint64_t seed, const HierarchicalModel* base = nullptr,
                 double lambda = 1.0);

struct CellSummary {
  CellSpec spec;
  std::vector<std::uint64_t> seeds;
  std::vector<double> f1;
  std::vector<double> consistency;
  std::vector<std::string> errors;  // one per failed seed

  double f1_mean() const;
  double f1_std() const;
  double consistency_mean() const;
  double consistency_std() const;
};

struct SweepSpec {
  // Either a synthetic world (regenerated per seed with seed = run seed)...
  std::optional<SynthConfig> world;
  // ...or fixed files.
  std::optional<ExperimentData> data;
  std::optional<AttributeLexicon> lexicon;
  std::vector<CellSpec> cells;
  Hyperparams hp;
  double lambda = 1.0;
};

/// Grid document:
///   {"world": <config object> | "world_config": "path",
///    or "data": {"labeled", "clustered", "test", "pairs"},
///    "lexicon": "path", "hyperparams": {...}, "lambda": 1.0,
///    "cells": [{"name", "method", ...params}],
///    "grid": {"method": "cga", "threshold": [..], "target_size": [..]}}
/// Relative paths resolve against `base_dir`. Throws DataError/RangeError.
SweepSpec parse_sweep(const nlohmann::json& doc, const std::string& base_dir);

// Runs every cell for every seed. A failing cell/seed is recorded and the
// sweep continues. Progress lines go to `log` when non-null.
std::vector<CellSummary> run_sweep(const SweepSpec& spec, std::span<const std::uint64_t> seeds,
                                   std::ostream* log = nullptr);

// One row per cell: name, method, parameters, means, stds, run counts.
void write_sweep_csv(std::span<const CellSummary> cells, std::ostream& out);
// Table with lifts against the first cell.
std::string render_sweep_table(std::span<const CellSummary> cells);

}  // namespace ctc
