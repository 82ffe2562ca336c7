#include "ctc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ctc/error.hpp"

namespace ctc {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// RNG streams, one per generation step.
enum Stream : std::uint64_t {
  kNames = 1,
  kPreferences,
  kLabeled,
  kTest,
  kUnlabeled,
  kConsistency,
  kPairs,
};

struct Slot {
  enum class Kind { kLiteral, kBrand, kDescriptor, kLeaf, kAttribute };
  Kind kind = Kind::kLiteral;
  std::string text;        // literal word or attribute kind
  std::size_t level = 0;   // for descriptors
  bool optional = false;
};

using Template = std::vector<Slot>;

Template parse_template(const std::string& pattern, const SynthConfig& config) {
  Template out;
  std::istringstream in(pattern);
  std::string word;
  bool has_attribute = false;
  bool has_leaf = false;
  while (in >> word) {
    Slot s;
    if (word.size() >= 2 && word.front() == '{' && word.back() == '}') {
      std::string name = word.substr(1, word.size() - 2);
      if (!name.empty() && name.back() == '?') {
        s.optional = true;
        name.pop_back();
      }
      if (name == "brand") {
        s.kind = Slot::Kind::kBrand;
      } else if (name == "leaf") {
        s.kind = Slot::Kind::kLeaf;
        has_leaf = true;
      } else if (name.size() == 2 && name[0] == 'l' && name[1] >= '1' && name[1] <= '3') {
        s.kind = Slot::Kind::kDescriptor;
        s.level = static_cast<std::size_t>(name[1] - '0');
        if (s.level >= config.branching.size()) {
          throw RangeError("template slot {" + name + "} needs a deeper taxonomy: " + pattern);
        }
      } else if (config.attributes.count(name)) {
        s.kind = Slot::Kind::kAttribute;
        s.text = name;
        has_attribute = true;
        if (s.optional) throw RangeError("attribute slots cannot be optional: " + pattern);
      } else {
        throw RangeError("unknown template slot {" + name + "} in: " + pattern);
      }
    } else {
      s.text = word;
    }
    out.push_back(std::move(s));
  }
  if (!has_attribute) throw RangeError("template without an attribute slot: " + pattern);
  if (!has_leaf) throw RangeError("template without a {leaf} slot: " + pattern);
  return out;
}

// Pronounceable lowercase pseudo-words, unique across the whole world.
class WordMaker {
 public:
  WordMaker(std::uint64_t seed, std::set<std::string> reserved)
      : rng_(seed), used_(std::move(reserved)) {}

  std::string make() {
    static constexpr std::string_view kOnset = "bdfgklmnprstvz";
    static constexpr std::string_view kVowel = "aeiou";
    static constexpr std::string_view kCoda = "lmnrsx";
    for (;;) {
      const std::size_t syllables = 2 + rng_.below(2);
      std::string w;
      for (std::size_t i = 0; i < syllables; ++i) {
        w += kOnset[rng_.below(kOnset.size())];
        w += kVowel[rng_.below(kVowel.size())];
        if (rng_.uniform() < 0.3) w += kCoda[rng_.below(kCoda.size())];
      }
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng rng_;
  std::set<std::string> used_;
};

struct Leaf {
  CategoryPath path;
  std::size_t top = 0;                       // index of the top-level ancestor
  std::vector<std::size_t> ancestors;        // node ids at levels 1..depth-1
  std::vector<std::string> nouns;
  std::map<std::string, std::vector<std::string>> preferred;
};

struct Layout {
  std::vector<Leaf> leaves;
  // descriptor words per internal node, indexed by node id
  std::vector<std::vector<std::string>> descriptors;
  std::vector<std::string> brands;
  std::vector<std::vector<Template>> templates;  // per top-level category
  std::vector<double> noun_weights;
};

Layout build_layout(const SynthConfig& config) {
  Layout lay;
  std::set<std::string> reserved;
  for (const auto& [kind, values] : config.attributes) reserved.insert(values.begin(), values.end());
  for (const auto& list : config.templates) {
    for (const auto& t : list) {
      for (const auto& s : parse_template(t, config)) {
        if (s.kind == Slot::Kind::kLiteral) reserved.insert(s.text);
      }
    }
  }
  WordMaker words(derive_seed(config.seed, kNames), reserved);
  Rng pref_rng(derive_seed(config.seed, kPreferences));

  const std::size_t depth = config.branching.size();
  const std::size_t top = config.branching[0];
  for (std::size_t i = 0; i < top; ++i) {
    const auto& list = config.templates.size() == 1 ? config.templates[0] : config.templates[i];
    std::vector<Template> parsed;
    for (const auto& t : list) parsed.push_back(parse_template(t, config));
    lay.templates.push_back(std::move(parsed));
  }

  for (std::size_t b = 0; b < config.brands; ++b) lay.brands.push_back(words.make());

  // Depth-first enumeration: every internal node gets descriptors, every
  // leaf gets nouns and preferred attribute sub-lists.
  static constexpr const char* kLevelNames[] = {"Department", "Aisle", "Shelf", "Type"};
  struct Frame {
    std::vector<std::string> names;
    std::vector<std::size_t> nodes;
    std::string code;
  };
  std::vector<Frame> stack{Frame{}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    const std::size_t level = f.names.size();
    if (level == depth) {
      Leaf leaf;
      leaf.path = CategoryPath(f.names);
      leaf.ancestors = f.nodes;
      for (std::size_t n = 0; n < config.nouns_per_leaf; ++n) leaf.nouns.push_back(words.make());
      for (const auto& [kind, values] : config.attributes) {
        const std::size_t k = std::min(config.preferred_per_kind, values.size());
        for (std::size_t idx : pref_rng.sample_indices(values.size(), k)) {
          leaf.preferred[kind].push_back(values[idx]);
        }
      }
      lay.leaves.push_back(std::move(leaf));
      continue;
    }
    // Push children in reverse so leaves come out in lexical order.
    for (std::size_t c = config.branching[level]; c-- > 0;) {
      Frame child = f;
      child.code += (level == 0 ? "" : ".") + std::to_string(c + 1);
      child.names.push_back(std::string(kLevelNames[level]) + " " + child.code);
      stack.push_back(std::move(child));
    }
    if (level > 0) {
      // `f` is an internal node below the root: register its descriptors.
      std::vector<std::string> desc;
      for (std::size_t d = 0; d < config.descriptors_per_node; ++d) desc.push_back(words.make());
      const std::size_t id = lay.descriptors.size();
      lay.descriptors.push_back(std::move(desc));
      for (std::size_t s = stack.size() - config.branching[level]; s < stack.size(); ++s) {
        stack[s].nodes = f.nodes;
        stack[s].nodes.push_back(id);
      }
    }
  }
  for (auto& leaf : lay.leaves) {
    const std::string& first = leaf.path.level(1);
    leaf.top = static_cast<std::size_t>(std::stoul(first.substr(first.find(' ') + 1))) - 1;
  }
  for (std::size_t r = 0; r < config.nouns_per_leaf; ++r) {
    lay.noun_weights.push_back(1.0 / std::pow(static_cast<double>(r + 1), config.noun_zipf));
  }
  return lay;
}

std::string sample_title(const Layout& lay, const Leaf& leaf, const SynthConfig& config, double rho,
                         Rng& rng) {
  const auto& options = lay.templates[leaf.top];
  const Template& t = options[rng.below(options.size())];
  std::string out;
  auto emit = [&](const std::string& w) {
    if (!out.empty()) out += ' ';
    out += w;
  };
  for (const Slot& s : t) {
    if (s.optional && rng.uniform() >= config.optional_slot_prob) continue;
    switch (s.kind) {
      case Slot::Kind::kLiteral:
        emit(s.text);
        break;
      case Slot::Kind::kBrand:
        emit(lay.brands[rng.below(lay.brands.size())]);
        break;
      case Slot::Kind::kDescriptor: {
        const auto& d = lay.descriptors[leaf.ancestors[s.level - 1]];
        emit(d[rng.below(d.size())]);
        break;
      }
      case Slot::Kind::kLeaf:
        emit(leaf.nouns[rng.weighted(std::span<const double>(lay.noun_weights))]);
        break;
      case Slot::Kind::kAttribute: {
        const auto& pref = leaf.preferred.at(s.text);
        const auto& all = config.attributes.at(s.text);
        if (!pref.empty() && rng.uniform() < rho) {
          emit(pref[rng.below(pref.size())]);
        } else {
          emit(all[rng.below(all.size())]);
        }
        break;
      }
    }
  }
  return out;
}

std::size_t sample_leaf(const Layout& lay, const std::vector<double>& top_weights, Rng& rng) {
  if (top_weights.empty()) return rng.below(lay.leaves.size());
  const std::size_t top = rng.weighted(std::span<const double>(top_weights));
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < lay.leaves.size(); ++i) {
    if (lay.leaves[i].top == top) members.push_back(i);
  }
  return members[rng.below(members.size())];
}

// A base item plus distinct V-variants of it.
ItemGroup sample_group(const Layout& lay, const Leaf& leaf, const SynthConfig& config,
                       const GroundTruthPerturbation& v, std::string id, Rng& rng) {
  const std::vector<double>& w = config.group_size_weights;
  const std::size_t k = config.min_group_size + rng.weighted(std::span<const double>(w));
  ItemGroup g;
  g.group_id = std::move(id);
  g.titles.push_back(sample_title(lay, leaf, config, config.rho_unlabeled, rng));
  std::set<std::string> seen{join_tokens(normalize_tokenize(g.titles[0]))};
  for (std::size_t attempt = 0; g.titles.size() < k && attempt < 50 * k; ++attempt) {
    std::string t = v.apply(g.titles[0], rng);
    if (seen.insert(join_tokens(normalize_tokenize(t))).second) g.titles.push_back(std::move(t));
  }
  return g;
}

}  // namespace

void SynthConfig::validate() const {
  if (branching.empty() || branching.size() > kMaxDepth) {
    throw RangeError("taxonomy depth must be 1.." + std::to_string(kMaxDepth));
  }
  for (std::size_t b : branching) {
    if (b == 0) throw RangeError("taxonomy has zero categories at some level");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) throw RangeError("rho must lie in [0, 1]");
  if (!(rho_unlabeled >= 0.0 && rho_unlabeled <= 1.0)) {
    throw RangeError("rho_unlabeled must lie in [0, 1]");
  }
  if (attributes.empty()) throw RangeError("at least one attribute kind is required");
  std::set<std::string> all;
  for (const auto& [kind, values] : attributes) {
    if (values.size() < 2) throw RangeError("attribute kind '" + kind + "' needs >= 2 values");
    for (const auto& val : values) {
      if (val.empty() || val.find_first_of(" \t") != std::string::npos) {
        throw RangeError("attribute values must be single tokens: '" + val + "'");
      }
      if (normalize_tokenize(val) != TokenSeq{val}) {
        throw RangeError("attribute value changes under normalization: '" + val + "'");
      }
      if (!all.insert(val).second) throw RangeError("attribute value in two kinds: " + val);
    }
  }
  if (templates.empty()) throw RangeError("no title templates");
  if (templates.size() != 1 && templates.size() != branching[0]) {
    throw RangeError("templates must be one shared list or one list per top-level category");
  }
  for (const auto& list : templates) {
    if (list.empty()) throw RangeError("a category has no templates");
    for (const auto& t : list) parse_template(t, *this);
  }
  if (min_group_size < 2) throw RangeError("groups need at least two titles");
  double wsum = 0.0;
  for (double w : group_size_weights) {
    if (!(w >= 0.0)) throw RangeError("group size weights must be >= 0");
    wsum += w;
  }
  if (wsum <= 0.0) throw RangeError("group size distribution is empty");
  if (!unlabeled_l1_weights.empty() && unlabeled_l1_weights.size() != branching[0]) {
    throw RangeError("unlabeled_l1_weights must have one weight per top-level category");
  }
  if (labeled_size == 0) throw RangeError("labeled_size must be > 0");
  if (nouns_per_leaf == 0 || descriptors_per_node == 0 || brands == 0) {
    throw RangeError("word pools must be non-empty");
  }
  if (!(two_slot_prob >= 0.0 && two_slot_prob <= 1.0)) {
    throw RangeError("two_slot_prob must lie in [0, 1]");
  }
}

SynthConfig SynthConfig::from_json(const json& j) {
  SynthConfig c;
  c.attributes.clear();
  c.templates.clear();
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  try {
    get("seed", c.seed);
    get("branching", c.branching);
    get("attributes", c.attributes);
    if (j.contains("templates")) {
      const auto& t = j.at("templates");
      if (!t.empty() && t[0].is_string()) {
        c.templates.push_back(t.get<std::vector<std::string>>());
      } else {
        t.get_to(c.templates);
      }
    }
    get("rho", c.rho);
    get("rho_unlabeled", c.rho_unlabeled);
    get("preferred_per_kind", c.preferred_per_kind);
    get("labeled_size", c.labeled_size);
    get("test_size", c.test_size);
    get("groups", c.groups);
    get("consistency_groups", c.consistency_groups);
    get("min_group_size", c.min_group_size);
    get("group_size_weights", c.group_size_weights);
    get("unlabeled_l1_weights", c.unlabeled_l1_weights);
    get("brands", c.brands);
    get("nouns_per_leaf", c.nouns_per_leaf);
    get("noun_zipf", c.noun_zipf);
    get("descriptors_per_node", c.descriptors_per_node);
    get("optional_slot_prob", c.optional_slot_prob);
    get("two_slot_prob", c.two_slot_prob);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad world config: ") + e.what());
  }
  c.validate();
  return c;
}

ordered_json SynthConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["branching"] = branching;
  j["attributes"] = attributes;
  j["templates"] = templates;
  j["rho"] = rho;
  j["rho_unlabeled"] = rho_unlabeled;
  j["preferred_per_kind"] = preferred_per_kind;
  j["labeled_size"] = labeled_size;
  j["test_size"] = test_size;
  j["groups"] = groups;
  j["consistency_groups"] = consistency_groups;
  j["min_group_size"] = min_group_size;
  j["group_size_weights"] = group_size_weights;
  j["unlabeled_l1_weights"] = unlabeled_l1_weights;
  j["brands"] = brands;
  j["nouns_per_leaf"] = nouns_per_leaf;
  j["noun_zipf"] = noun_zipf;
  j["descriptors_per_node"] = descriptors_per_node;
  j["optional_slot_prob"] = optional_slot_prob;
  j["two_slot_prob"] = two_slot_prob;
  return j;
}

SynthConfig SynthConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
  return from_json(j);
}

SynthConfig SynthConfig::desk_default() {
  SynthConfig c;
  c.attributes = {
      {"color", {"red", "blue", "black", "white", "green", "yellow", "orange", "purple", "pink",
                 "brown", "gray", "grey", "navy", "beige", "ivory", "teal", "maroon", "olive",
                 "silver", "gold", "tan", "coral", "turquoise", "lavender", "burgundy",
                 "charcoal", "khaki", "mint", "cream", "peach"}},
      {"size", {"small", "medium", "large", "xl", "xxl", "xs", "petite", "tall", "plus", "mini",
                "jumbo", "compact", "slim", "regular", "oversized"}},
      {"flavor", {"vanilla", "chocolate", "strawberry", "mango", "lemon", "cherry", "caramel",
                  "hazelnut", "cinnamon", "coconut", "blueberry", "raspberry"}},
      {"pack", {"1-pack", "2-pack", "3-pack", "4-pack", "6-pack", "8-pack", "12-pack",
                "24-pack"}},
  };
  c.templates = {
      {"{brand} {color} {l2} {l3} {leaf} {size}", "{color} {l3} {leaf} {brand} size {size}",
       "{brand} {leaf} {color} {size}"},
      {"{brand} {flavor} {l3} {leaf} {pack}", "{brand} {l2} {leaf} {flavor} flavor {pack}",
       "{flavor} {leaf} {pack} {brand}"},
      {"{brand} {color} {l3} {leaf} {pack}", "{brand} {size} {color} {leaf}",
       "{color} {l2} {leaf} {size} {brand}"},
  };
  return c;
}

GroundTruthPerturbation::GroundTruthPerturbation(
    const std::map<std::string, std::vector<std::string>>& kinds, double two_slot_prob)
    : kinds_(kinds), two_slot_prob_(two_slot_prob) {
  for (const auto& [kind, values] : kinds_) {
    for (const auto& val : values) kind_of_.emplace(val, kind);
  }
}

std::vector<std::size_t> GroundTruthPerturbation::slots(const TokenSeq& tokens) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (kind_of_.count(tokens[i])) out.push_back(i);
  }
  return out;
}

std::string GroundTruthPerturbation::apply(std::string_view title, Rng& rng) const {
  TokenSeq tokens;
  std::istringstream in{std::string(title)};
  for (std::string w; in >> w;) tokens.push_back(std::move(w));
  const std::vector<std::size_t> pos = slots(tokens);
  if (pos.empty()) throw DataError("title has no attribute slot: " + std::string(title));

  const std::size_t edits = pos.size() >= 2 && rng.uniform() < two_slot_prob_ ? 2 : 1;
  for (std::size_t idx : rng.sample_indices(pos.size(), edits)) {
    std::string& tok = tokens[pos[idx]];
    const auto& values = kinds_.at(kind_of_.at(tok));
    // Uniform over the other values of the kind.
    std::size_t pick = rng.below(values.size() - 1);
    const auto self = std::find(values.begin(), values.end(), tok) - values.begin();
    if (pick >= static_cast<std::size_t>(self)) ++pick;
    tok = values[pick];
  }
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

AttributeLexicon GroundTruthPerturbation::lexicon() const {
  AttributeLexicon lex;
  for (const auto& [kind, values] : kinds_) lex.add_kind(kind, values);
  return lex;
}

std::string apply_v(std::string_view title, const GroundTruthPerturbation& v, Rng& rng) {
  return v.apply(title, rng);
}

SynthWorld generate_world(const SynthConfig& config) {
  config.validate();
  SynthWorld w;
  w.config = config;
  w.v = GroundTruthPerturbation(config.attributes, config.two_slot_prob);
  const Layout lay = build_layout(config);

  // Labeled training set and a disjoint test set, both from p.
  Rng lrng(derive_seed(config.seed, kLabeled));
  std::set<std::string> labeled_titles;
  for (std::size_t i = 0; i < config.labeled_size; ++i) {
    const Leaf& leaf = lay.leaves[lrng.below(lay.leaves.size())];
    w.labeled.push_back({sample_title(lay, leaf, config, config.rho, lrng), leaf.path});
    labeled_titles.insert(w.labeled.back().title);
  }
  Rng trng(derive_seed(config.seed, kTest));
  std::size_t rejected = 0;
  while (w.test.size() < config.test_size) {
    const Leaf& leaf = lay.leaves[trng.below(lay.leaves.size())];
    std::string title = sample_title(lay, leaf, config, config.rho, trng);
    if (labeled_titles.count(title)) {
      if (++rejected > 100 * (config.test_size + 1)) {
        throw RangeError("cannot draw a test set disjoint from the labeled set");
      }
      continue;
    }
    w.test.push_back({std::move(title), leaf.path});
  }

  // Unlabeled groups from q, and held-out groups for the pair test.
  Rng urng(derive_seed(config.seed, kUnlabeled));
  for (std::size_t g = 0; g < config.groups; ++g) {
    const Leaf& leaf = lay.leaves[sample_leaf(lay, config.unlabeled_l1_weights, urng)];
    w.unlabeled.groups.push_back(
        sample_group(lay, leaf, config, w.v, "g" + std::to_string(g), urng));
    w.unlabeled_gold.push_back(leaf.path);
  }
  Rng crng(derive_seed(config.seed, kConsistency));
  for (std::size_t g = 0; g < config.consistency_groups; ++g) {
    const Leaf& leaf = lay.leaves[sample_leaf(lay, config.unlabeled_l1_weights, crng)];
    w.consistency_groups.groups.push_back(
        sample_group(lay, leaf, config, w.v, "c" + std::to_string(g), crng));
    w.consistency_gold.push_back(leaf.path);
  }
  Rng prng(derive_seed(config.seed, kPairs));
  for (const auto& g : w.consistency_groups.groups) {
    const auto two = prng.sample_indices(g.titles.size(), 2);
    w.test_pairs.push_back({g.titles[two[0]], g.titles[two[1]], g.group_id});
  }

  w.manifest["stage"] = "synth";
  w.manifest["config"] = config.to_json();
  w.manifest["counts"] = {{"leaves", lay.leaves.size()},
                          {"labeled", w.labeled.size()},
                          {"test", w.test.size()},
                          {"groups", w.unlabeled.groups.size()},
                          {"unlabeled_titles", w.unlabeled.total_titles()},
                          {"consistency_groups", w.consistency_groups.groups.size()},
                          {"test_pairs", w.test_pairs.size()}};
  return w;
}

void save_world(const SynthWorld& world, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  save_labeled(world.labeled, (root / "labeled.jsonl").string());
  save_labeled(world.test, (root / "test.jsonl").string());
  save_clustered(world.unlabeled, (root / "unlabeled.jsonl").string());
  save_pairs(world.test_pairs, (root / "test_pairs.jsonl").string());
  {
    std::ofstream out(root / "groups_gold.jsonl");
    for (std::size_t i = 0; i < world.unlabeled.groups.size(); ++i) {
      ordered_json j;
      j["group_id"] = world.unlabeled.groups[i].group_id;
      j["category"] = world.unlabeled_gold[i].render();
      out << j.dump() << '\n';
    }
    for (std::size_t i = 0; i < world.consistency_groups.groups.size(); ++i) {
      ordered_json j;
      j["group_id"] = world.consistency_groups.groups[i].group_id;
      j["category"] = world.consistency_gold[i].render();
      out << j.dump() << '\n';
    }
    if (!out) throw DataError("cannot write groups_gold.jsonl");
  }
  {
    std::ofstream out(root / "lexicon.txt");
    out << world.v.lexicon().serialize();
  }
  {
    std::ofstream out(root / "world.json");
    out << world.manifest.dump(2) << '\n';
  }
}

double oracle_consistency(const HierarchicalModel& model, const std::vector<std::string>& base_titles,
                          std::size_t variants_per_title, const GroundTruthPerturbation& v,
                          Rng& rng) {
  std::size_t agree = 0;
  std::size_t total = 0;
  for (const auto& title : base_titles) {
    const CategoryPath base = model.predict(title).path;
    for (std::size_t k = 0; k < variants_per_title; ++k) {
      agree += model.predict(v.apply(title, rng)).path == base;
      ++total;
    }
  }
  return total ? static_cast<double>(agree) / static_cast<double>(total) : 1.0;
}

}  // namespace ctc
