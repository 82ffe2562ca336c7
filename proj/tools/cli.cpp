#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ctc/cga.hpp"
#include "ctc/cst.hpp"
#include "ctc/data.hpp"
#include "ctc/error.hpp"
#include "ctc/experiment.hpp"
#include "ctc/manifest.hpp"
#include "ctc/metrics.hpp"
#include "ctc/model.hpp"
#include "ctc/synth.hpp"

namespace ctc::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out = "out";
  bool seed_given = false;
};

struct HpFlags {
  Hyperparams hp;

  void attach(CLI::App* app) {
    app->add_option("--dim", hp.dim, "embedding dimension")->capture_default_str();
    app->add_option("--epochs", hp.epochs, "training epochs")->capture_default_str();
    app->add_option("--lr", hp.lr, "initial learning rate")->capture_default_str();
    app->add_option("--word-ngrams", hp.max_n, "longest token n-gram")->capture_default_str();
    app->add_option("--buckets", hp.buckets, "hash buckets for n-grams")->capture_default_str();
  }

  Hyperparams resolve(const Globals& g) const {
    Hyperparams h = hp;
    h.seed = g.seed;
    h.threads = g.threads;
    h.validate();
    return h;
  }
};

ordered_json hp_json(const Hyperparams& hp) {
  return {{"dim", hp.dim},         {"epochs", hp.epochs},   {"lr", hp.lr},
          {"max_n", hp.max_n},     {"buckets", hp.buckets}, {"seed", hp.seed},
          {"threads", hp.threads}};
}

std::string in_out(const Globals& g, const std::string& name) {
  return (fs::path(g.out) / name).string();
}

void prepare_out(const Globals& g) { fs::create_directories(g.out); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << text;
}

void save_augmented(const std::vector<AugmentedRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  for (const auto& r : rows) {
    ordered_json j;
    j["source"] = r.source;
    j["generated"] = r.generated;
    j["category"] = r.label.render();
    j["score"] = r.score;
    f << j.dump() << '\n';
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw RangeError("bad seed '" + item + "'");
    }
  }
  if (seeds.empty()) throw RangeError("no seeds given");
  return seeds;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Consistent product-title categorization toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "run seed")->capture_default_str()->each([&](const std::string&) {
    g.seed_given = true;
  });
  app.add_option("--threads", g.threads, "training threads (1 = deterministic)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory")->capture_default_str();

  std::vector<std::string> argv_copy = args;
  std::function<void()> action;

  // synth -------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic catalog world");
  std::string synth_config;
  synth->add_option("--config", synth_config, "world config JSON (default: built-in desk world)")
      ->check(CLI::ExistingFile);
  synth->callback([&] {
    action = [&] {
      SynthConfig cfg = synth_config.empty() ? SynthConfig::desk_default()
                                             : SynthConfig::load(synth_config);
      if (g.seed_given) cfg.seed = g.seed;
      RunManifest m("synth");
      m.set_argv(argv_copy);
      if (!synth_config.empty()) m.add_input("config", synth_config);
      m.set_config(cfg.to_json());
      m.set_seed("world", cfg.seed);
      SynthWorld world = generate_world(cfg);
      save_world(world, g.out);
      for (const char* f : {"labeled.jsonl", "unlabeled.jsonl", "test.jsonl", "test_pairs.jsonl",
                            "groups_gold.jsonl", "lexicon.txt", "world.json"}) {
        m.add_output(f, in_out(g, f));
      }
      m.add_stage("synth", world.manifest["counts"]);
      m.save(in_out(g, "manifest.json"));
      out << world.manifest["counts"].dump() << '\n';
    };
  });

  // train-baseline / train-cs-blind -----------------------------------------
  std::string labeled_path, lexicon_path;
  HpFlags base_hp;
  auto* tb = app.add_subcommand("train-baseline", "train the hierarchical classifier on D_L");
  tb->add_option("--labeled", labeled_path, "labeled JSONL")->required()->check(CLI::ExistingFile);
  base_hp.attach(tb);
  auto* tcs = app.add_subcommand("train-cs-blind", "train with color/size words masked");
  tcs->add_option("--labeled", labeled_path, "labeled JSONL")->required()->check(CLI::ExistingFile);
  tcs->add_option("--lexicon", lexicon_path, "attribute lexicon")->required()->check(
      CLI::ExistingFile);
  base_hp.attach(tcs);
  auto train_action = [&](bool blind) {
    return [&, blind] {
      const Hyperparams hp = base_hp.resolve(g);
      RunManifest m(blind ? "train-cs-blind" : "train-baseline");
      m.set_argv(argv_copy);
      m.add_input("labeled", labeled_path);
      std::optional<AttributeLexicon> lex;
      if (blind) {
        m.add_input("lexicon", lexicon_path);
        lex = AttributeLexicon::load(lexicon_path);
      }
      m.set_config({{"hyperparams", hp_json(hp)}});
      m.set_seed("run", hp.seed);
      const LabeledDataset dl = load_labeled(labeled_path);
      prepare_out(g);
      HierarchicalModel model = train_hft(to_examples(dl), hp, lex ? &*lex : nullptr);
      save_model(model, in_out(g, "model.bin"));
      m.add_output("model", in_out(g, "model.bin"));
      ordered_json stage = {{"labeled", dl.size()}, {"levels", model.depth()}};
      ordered_json losses = ordered_json::array();
      for (const auto& lvl : model.levels()) losses.push_back(lvl.epoch_loss());
      stage["epoch_loss"] = std::move(losses);
      m.add_stage("train", std::move(stage));
      m.save(in_out(g, "manifest.json"));
      out << "wrote " << in_out(g, "model.bin") << '\n';
    };
  };
  tb->callback([&] { action = train_action(false); });
  tcs->callback([&] { action = train_action(true); });

  // cst -----------------------------------------------------------------------
  auto* cst = app.add_subcommand("cst", "consistent self-training");
  std::string clustered_path, base_model_path, cst_mode = "complete", cst_rule = "maxconf";
  double tolerance = 0.05;
  std::optional<double> floor;
  HpFlags cst_hp;
  cst->add_option("--labeled", labeled_path, "labeled JSONL")->required()->check(CLI::ExistingFile);
  cst->add_option("--clustered", clustered_path, "clustered unlabeled JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  cst->add_option("--mode", cst_mode, "complete or ss")
      ->check(CLI::IsMember({"complete", "ss"}))
      ->capture_default_str();
  cst->add_option("--rule", cst_rule, "maxconf or majority")
      ->check(CLI::IsMember({"maxconf", "majority"}))
      ->capture_default_str();
  cst->add_option("--tolerance", tolerance, "sub-sample TV tolerance")->capture_default_str();
  cst->add_option("--confidence-floor", floor, "drop groups below this pseudo-label confidence");
  cst->add_option("--base-model", base_model_path, "reuse a baseline model file")
      ->check(CLI::ExistingFile);
  cst_hp.attach(cst);
  cst->callback([&] {
    action = [&] {
      CstConfig cfg;
      cfg.hp = cst_hp.resolve(g);
      cfg.seed = g.seed;
      cfg.du_mode = cst_mode == "ss" ? CstConfig::Mode::kSubSampled : CstConfig::Mode::kComplete;
      cfg.rule.variant = cst_rule == "majority" ? GroupLabelRule::Variant::kMajorityVote
                                                : GroupLabelRule::Variant::kMaxConfidence;
      cfg.subsample_tolerance = tolerance;
      cfg.confidence_floor = floor;
      RunManifest m("cst");
      m.set_argv(argv_copy);
      m.add_input("labeled", labeled_path);
      m.add_input("clustered", clustered_path);
      std::optional<HierarchicalModel> base;
      if (!base_model_path.empty()) {
        m.add_input("base_model", base_model_path);
        base = load_model(base_model_path);
      }
      m.set_config({{"hyperparams", hp_json(cfg.hp)}});
      m.set_seed("run", cfg.seed);
      const LabeledDataset dl = load_labeled(labeled_path);
      const ClusteredUnlabeled du = load_clustered(clustered_path);
      prepare_out(g);
      CstResult r = run_cst(dl, du, cfg, base ? &*base : nullptr);
      save_model(r.model, in_out(g, "model.bin"));
      save_labeled(r.d_aug, in_out(g, "d_aug.jsonl"));
      m.add_output("model", in_out(g, "model.bin"));
      m.add_output("d_aug", in_out(g, "d_aug.jsonl"));
      out << r.manifest["counts"].dump() << '\n';
      m.add_stage("cst", std::move(r.manifest));
      m.save(in_out(g, "manifest.json"));
    };
  });

  // cga -----------------------------------------------------------------------
  auto* cga = app.add_subcommand("cga", "consistent generative augmentation");
  CgaConfig cga_cfg;
  std::string score = "bleu", external_path;
  std::optional<std::size_t> target_size;
  HpFlags cga_hp;
  cga->add_option("--labeled", labeled_path, "labeled JSONL")->required()->check(CLI::ExistingFile);
  cga->add_option("--clustered", clustered_path, "clustered unlabeled JSONL")
      ->check(CLI::ExistingFile);
  cga->add_option("--n", cga_cfg.n_per_sample, "variants per labeled title")
      ->capture_default_str();
  cga->add_option("--score", score, "bleu or cosine")
      ->check(CLI::IsMember({"bleu", "cosine"}))
      ->capture_default_str();
  cga->add_option("--threshold", cga_cfg.threshold, "keep variants scoring >= T")
      ->capture_default_str();
  cga->add_option("--target-size", target_size, "sub-sample kept variants to N");
  cga->add_option("--bleu-max-n", cga_cfg.bleu_max_n, "longest BLEU n-gram")
      ->capture_default_str();
  cga->add_option("--pair-cap", cga_cfg.pair_cap, "max pairs per group")->capture_default_str();
  cga->add_option("--external-gen", external_path, "JSONL of outside generations")
      ->check(CLI::ExistingFile);
  cga->add_option("--base-model", base_model_path, "reuse a baseline model file")
      ->check(CLI::ExistingFile);
  cga_hp.attach(cga);
  cga->callback([&] {
    action = [&] {
      if (clustered_path.empty() && external_path.empty()) {
        throw CLI::ValidationError("cga needs --clustered or --external-gen");
      }
      CgaConfig cfg = cga_cfg;
      cfg.hp = cga_hp.resolve(g);
      cfg.seed = g.seed;
      cfg.score = score == "cosine" ? ScoreKind::kEmbedCosine : ScoreKind::kBleu;
      cfg.target_size = target_size;
      RunManifest m("cga");
      m.set_argv(argv_copy);
      m.add_input("labeled", labeled_path);
      ClusteredUnlabeled du;
      if (!clustered_path.empty()) {
        m.add_input("clustered", clustered_path);
        du = load_clustered(clustered_path);
      }
      std::optional<std::vector<ExternalGeneration>> ext;
      if (!external_path.empty()) {
        m.add_input("external_gen", external_path);
        ext = load_external_generations(external_path);
      }
      std::optional<HierarchicalModel> base;
      if (!base_model_path.empty()) {
        m.add_input("base_model", base_model_path);
        base = load_model(base_model_path);
      }
      m.set_config({{"hyperparams", hp_json(cfg.hp)}});
      m.set_seed("run", cfg.seed);
      const LabeledDataset dl = load_labeled(labeled_path);
      prepare_out(g);
      CgaResult r = run_cga(dl, du, cfg, base ? &*base : nullptr, ext ? &*ext : nullptr);
      save_model(r.model, in_out(g, "model.bin"));
      save_labeled(r.d_aug, in_out(g, "d_aug.jsonl"));
      save_augmented(r.kept, in_out(g, "augmented.jsonl"));
      m.add_output("model", in_out(g, "model.bin"));
      m.add_output("d_aug", in_out(g, "d_aug.jsonl"));
      m.add_output("augmented", in_out(g, "augmented.jsonl"));
      out << r.manifest["counts"].dump() << '\n';
      m.add_stage("cga", std::move(r.manifest));
      m.save(in_out(g, "manifest.json"));
    };
  });

  // build-pairs ---------------------------------------------------------------
  auto* bp = app.add_subcommand("build-pairs", "expand groups into title pairs");
  std::size_t cap = 12;
  std::size_t test_groups = 0;
  bp->add_option("--clustered", clustered_path, "clustered unlabeled JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  bp->add_option("--cap", cap, "max pairs per group")->capture_default_str();
  bp->add_option("--test-groups", test_groups,
                 "hold out this many groups, one pair each, for consistency testing")
      ->capture_default_str();
  bp->callback([&] {
    action = [&] {
      if (cap == 0) throw RangeError("--cap must be >= 1");
      RunManifest m("build-pairs");
      m.set_argv(argv_copy);
      m.add_input("clustered", clustered_path);
      m.set_config({{"cap", cap}, {"test_groups", test_groups}});
      m.set_seed("run", g.seed);
      ClusteredUnlabeled du = load_clustered(clustered_path);
      prepare_out(g);
      ordered_json counts;
      if (test_groups > 0) {
        ConsistencySplit split = split_consistency_test(du, test_groups, derive_seed(g.seed, 1));
        save_pairs(split.test_pairs, in_out(g, "test_pairs.jsonl"));
        save_clustered(split.train, in_out(g, "train_clustered.jsonl"));
        m.add_output("test_pairs", in_out(g, "test_pairs.jsonl"));
        m.add_output("train_clustered", in_out(g, "train_clustered.jsonl"));
        counts["test_pairs"] = split.test_pairs.size();
        du = std::move(split.train);
      }
      const auto pairs = build_pairs(du, cap, derive_seed(g.seed, 2));
      save_pairs(pairs, in_out(g, "pairs.jsonl"));
      m.add_output("pairs", in_out(g, "pairs.jsonl"));
      counts["groups"] = du.groups.size();
      counts["pairs"] = pairs.size();
      out << counts.dump() << '\n';
      m.add_stage("build-pairs", std::move(counts));
      m.save(in_out(g, "manifest.json"));
    };
  });

  // evaluate ------------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "weighted F1, consistency and dual objective");
  std::string model_path, test_path, pairs_path, baseline_report, name = "model";
  double lambda = 1.0;
  ev->add_option("--model", model_path, "model file")->required()->check(CLI::ExistingFile);
  ev->add_option("--test", test_path, "labeled test JSONL")->required()->check(CLI::ExistingFile);
  ev->add_option("--pairs", pairs_path, "consistency pairs JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--lambda", lambda, "consistency weight in the dual objective")
      ->capture_default_str();
  ev->add_option("--baseline-report", baseline_report, "report.json of the baseline, for lifts")
      ->check(CLI::ExistingFile);
  ev->add_option("--name", name, "row label")->capture_default_str();
  ev->callback([&] {
    action = [&] {
      RunManifest m("evaluate");
      m.set_argv(argv_copy);
      m.add_input("model", model_path);
      m.add_input("test", test_path);
      m.add_input("pairs", pairs_path);
      m.set_config({{"lambda", lambda}, {"name", name}});
      const HierarchicalModel model = load_model(model_path);
      const LabeledDataset test = load_labeled(test_path);
      const std::vector<TitlePair> pairs = load_pairs(pairs_path);
      if (test.empty()) throw DataError("test file is empty");
      if (pairs.empty()) throw DataError("pairs file is empty");
      const EvalReport r = evaluate(model, test, pairs, lambda);
      ordered_json doc = r.to_json();
      std::vector<TableRow> rows;
      if (!baseline_report.empty()) {
        m.add_input("baseline_report", baseline_report);
        std::ifstream bf(baseline_report);
        json b;
        try {
          b = json::parse(bf);
        } catch (const json::parse_error& e) {
          throw DataError(baseline_report + ": " + e.what());
        }
        const double bf1 = b.at("weighted_f1").get<double>();
        const double bcons = b.at("consistency_rate").get<double>();
        doc["f1_lift"] = f1_lift(r.weighted_f1, bf1);
        doc["consistency_lift"] = consistency_lift(r.consistency_rate, bcons);
        rows.push_back(TableRow{"baseline", bf1, bcons, 0.0, 0.0});
      }
      rows.push_back(TableRow{name, r.weighted_f1, r.consistency_rate, 0.0, 0.0});
      const std::string table = render_table(rows);
      prepare_out(g);
      write_text(in_out(g, "report.json"), doc.dump(2) + "\n");
      write_text(in_out(g, "table.txt"), table);
      m.add_output("report", in_out(g, "report.json"));
      m.add_output("table", in_out(g, "table.txt"));
      m.save(in_out(g, "manifest.json"));
      out << table;
    };
  });

  // sweep ---------------------------------------------------------------------
  auto* sw = app.add_subcommand("sweep", "multi-seed grid of methods and settings");
  std::string grid_path, seeds_text = "1,2,3,4,5";
  bool quiet = false;
  sw->add_option("--grid", grid_path, "grid JSON")->required()->check(CLI::ExistingFile);
  sw->add_option("--seeds", seeds_text, "comma-separated seeds")->capture_default_str();
  sw->add_flag("--quiet", quiet, "no per-run progress lines");
  sw->callback([&] {
    action = [&] {
      const std::vector<std::uint64_t> seeds = parse_seeds(seeds_text);
      RunManifest m("sweep");
      m.set_argv(argv_copy);
      m.add_input("grid", grid_path);
      std::ifstream gf(grid_path);
      json doc;
      try {
        doc = json::parse(gf);
      } catch (const json::parse_error& e) {
        throw DataError(grid_path + ": " + e.what());
      }
      SweepSpec spec = parse_sweep(doc, fs::path(grid_path).parent_path().string());
      if (g.threads != 1) spec.hp.threads = g.threads;
      m.set_config(ordered_json::parse(doc.dump()));
      for (std::uint64_t s : seeds) m.set_seed("seed_" + std::to_string(s), s);
      prepare_out(g);
      const auto cells = run_sweep(spec, seeds, quiet ? nullptr : &out);
      {
        std::ofstream csv(in_out(g, "sweep.csv"));
        write_sweep_csv(cells, csv);
      }
      const std::string table = render_sweep_table(cells);
      write_text(in_out(g, "table.txt"), table);
      ordered_json summary = ordered_json::array();
      std::size_t failed = 0;
      for (const auto& c : cells) {
        failed += c.errors.size();
        summary.push_back({{"name", c.spec.name},
                           {"method", to_string(c.spec.method)},
                           {"params", ordered_json::parse(c.spec.params.dump())},
                           {"seeds", c.seeds},
                           {"f1", c.f1},
                           {"consistency", c.consistency},
                           {"f1_mean", c.f1_mean()},
                           {"f1_std", c.f1_std()},
                           {"consistency_mean", c.consistency_mean()},
                           {"consistency_std", c.consistency_std()},
                           {"errors", c.errors}});
        for (const auto& e : c.errors) m.add_warning(c.spec.name + ": " + e);
      }
      write_text(in_out(g, "summary.json"), summary.dump(2) + "\n");
      for (const char* f : {"sweep.csv", "table.txt", "summary.json"}) {
        m.add_output(f, in_out(g, f));
      }
      m.add_stage("sweep", {{"cells", cells.size()}, {"failed_runs", failed}});
      m.save(in_out(g, "manifest.json"));
      out << table;
    };
  });

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RangeError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TrainingError& e) {
    err << "training error: " << e.what() << '\n';
    return kExitTraining;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const MetricError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitTraining;
  }
}

}  // namespace ctc::cli
