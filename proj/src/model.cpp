#include "ctc/model.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "ctc/detail/softmax_linear.hpp"
#include "ctc/error.hpp"
#include "ctc/rng.hpp"

namespace ctc {

void Hyperparams::validate() const {
  if (dim < 1) throw RangeError("dim must be >= 1");
  if (epochs < 1) throw RangeError("epochs must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw RangeError("lr must be finite and > 0");
  if (max_n < 1) throw RangeError("max_n must be >= 1");
  if (buckets < 1) throw RangeError("buckets must be >= 1");
  if (threads < 1) throw RangeError("threads must be >= 1");
}

std::vector<std::size_t> FlatModel::features(std::span<const std::string> tokens) const {
  return feature_ids(tokens, vocab_, hp_.max_n, hp_.buckets);
}

FlatModel FlatModel::from_parts(std::size_t level, Hyperparams hp, Vocabulary vocab,
                                std::vector<CategoryPath> labels, std::vector<float> input,
                                std::vector<float> output) {
  FlatModel m;
  m.level_ = level;
  m.hp_ = hp;
  m.vocab_ = std::move(vocab);
  m.labels_ = std::move(labels);
  if (input.size() != (m.vocab_.size() + hp.buckets) * hp.dim) {
    throw DataError("input matrix has wrong size");
  }
  if (output.size() != m.labels_.size() * hp.dim) throw DataError("output matrix has wrong size");
  m.input_ = std::move(input);
  m.output_ = std::move(output);
  return m;
}

namespace {

struct Prepared {
  std::vector<std::vector<std::size_t>> features;
  std::vector<std::size_t> labels;
};

}  // namespace

FlatModel train_flat(std::span<const Example> examples, std::size_t level, const Hyperparams& hp) {
  hp.validate();
  if (examples.empty()) {
    throw TrainingError(TrainingError::Kind::kEmptyData, "no training examples");
  }
  std::map<std::string, CategoryPath> distinct;
  std::vector<TokenSeq> corpus;
  corpus.reserve(examples.size());
  for (const auto& ex : examples) {
    if (ex.path.depth() < level) {
      throw RangeError("example path " + ex.path.render() + " is shallower than level " +
                       std::to_string(level));
    }
    CategoryPath t = truncate(ex.path, level);
    distinct.emplace(t.render(), std::move(t));
    corpus.push_back(ex.tokens);
  }
  if (distinct.size() < 2) {
    throw TrainingError(TrainingError::Kind::kDegenerate,
                        "level " + std::to_string(level) + " has fewer than 2 classes");
  }

  FlatModel m;
  m.level_ = level;
  m.hp_ = hp;
  m.vocab_ = Vocabulary::from_corpus(corpus);
  std::map<std::string, std::size_t> label_id;
  for (auto& [rendered, path] : distinct) {
    label_id.emplace(rendered, m.labels_.size());
    m.labels_.push_back(path);
  }

  Prepared data;
  data.features.reserve(examples.size());
  for (const auto& ex : examples) {
    data.features.push_back(m.features(ex.tokens));
    data.labels.push_back(label_id.at(truncate(ex.path, level).render()));
  }

  const std::size_t dim = hp.dim;
  const std::size_t classes = m.labels_.size();
  const std::size_t rows = m.vocab_.size() + hp.buckets;
  Rng rng(hp.seed);
  m.input_.resize(rows * dim);
  const double bound = 1.0 / static_cast<double>(dim);
  for (auto& w : m.input_) w = static_cast<float>(rng.uniform(-bound, bound));
  m.output_.assign(classes * dim, 0.0f);

  const std::size_t n = examples.size();
  const double total_updates = static_cast<double>(hp.epochs * n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::span<float> input(m.input_);
  std::span<float> output(m.output_);

  if (hp.threads <= 1) {
    detail::Scratch<float> scratch;
    std::size_t t = 0;
    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
      rng.shuffle(order);
      double loss = 0.0;
      for (std::size_t idx : order) {
        const float lr = static_cast<float>(hp.lr * (1.0 - static_cast<double>(t) / total_updates));
        loss += detail::sgd_step<float, false>(input, output, dim, classes, data.features[idx],
                                               data.labels[idx], lr, scratch);
        ++t;
      }
      m.epoch_loss_.push_back(loss / static_cast<double>(n));
    }
  } else {
    std::atomic<std::size_t> progress{0};
    const std::size_t workers = std::min(hp.threads, n);
    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
      rng.shuffle(order);
      std::vector<double> losses(workers, 0.0);
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          detail::Scratch<float> scratch;
          const std::size_t begin = n * w / workers;
          const std::size_t end = n * (w + 1) / workers;
          for (std::size_t i = begin; i < end; ++i) {
            const std::size_t idx = order[i];
            const double t = static_cast<double>(progress.fetch_add(1, std::memory_order_relaxed));
            const float lr = static_cast<float>(hp.lr * std::max(0.0, 1.0 - t / total_updates));
            losses[w] += detail::sgd_step<float, true>(input, output, dim, classes,
                                                       data.features[idx], data.labels[idx], lr,
                                                       scratch);
          }
        });
      }
      for (auto& th : pool) th.join();
      double loss = 0.0;
      for (double l : losses) loss += l;
      m.epoch_loss_.push_back(loss / static_cast<double>(n));
    }
  }

  auto finite = [](float x) { return std::isfinite(x); };
  if (!std::all_of(m.input_.begin(), m.input_.end(), finite) ||
      !std::all_of(m.output_.begin(), m.output_.end(), finite)) {
    throw TrainingError(TrainingError::Kind::kNonFinite,
                        "non-finite parameters after training level " + std::to_string(level));
  }
  return m;
}

FlatPrediction predict_flat(const FlatModel& model, std::span<const std::string> tokens) {
  const std::size_t dim = model.dim();
  const std::size_t classes = model.num_classes();
  std::vector<std::size_t> ids = model.features(tokens);
  std::vector<double> hidden(dim, 0.0);
  auto input = model.input();
  for (std::size_t id : ids) {
    const float* row = input.data() + id * dim;
    for (std::size_t k = 0; k < dim; ++k) hidden[k] += row[k];
  }
  if (!ids.empty()) {
    for (auto& h : hidden) h /= static_cast<double>(ids.size());
  }
  FlatPrediction out;
  out.probs.resize(classes);
  auto output = model.output();
  double max_logit = -INFINITY;
  for (std::size_t c = 0; c < classes; ++c) {
    const float* w = output.data() + c * dim;
    double z = 0.0;
    for (std::size_t k = 0; k < dim; ++k) z += static_cast<double>(w[k]) * hidden[k];
    out.probs[c] = z;
    max_logit = std::max(max_logit, z);
  }
  double total = 0.0;
  for (auto& p : out.probs) {
    p = std::exp(p - max_logit);
    total += p;
  }
  for (auto& p : out.probs) p /= total;
  out.label = static_cast<std::size_t>(
      std::max_element(out.probs.begin(), out.probs.end()) - out.probs.begin());
  return out;
}

std::vector<float> embed_title(const FlatModel& model, std::span<const std::string> tokens) {
  const std::size_t dim = model.dim();
  std::vector<std::size_t> ids = model.features(tokens);
  std::vector<double> acc(dim, 0.0);
  auto input = model.input();
  for (std::size_t id : ids) {
    const float* row = input.data() + id * dim;
    for (std::size_t k = 0; k < dim; ++k) acc[k] += row[k];
  }
  std::vector<float> out(dim, 0.0f);
  if (ids.empty()) return out;
  for (std::size_t k = 0; k < dim; ++k) {
    out[k] = static_cast<float>(acc[k] / static_cast<double>(ids.size()));
  }
  return out;
}

HierarchicalModel::HierarchicalModel(std::vector<FlatModel> levels,
                                     std::optional<AttributeLexicon> mask)
    : levels_(std::move(levels)), mask_(std::move(mask)) {
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (levels_[i].level() != i + 1) throw DataError("flat models out of level order");
  }
}

TokenSeq HierarchicalModel::prepare(std::string_view title) const {
  TokenSeq tokens = normalize_tokenize(title);
  if (mask_) tokens = mask_attributes(tokens, *mask_);
  return tokens;
}

Prediction HierarchicalModel::predict(std::string_view title) const {
  return predict_hft(*this, normalize_tokenize(title));
}

HierarchicalModel train_hft(std::span<const Example> examples, const Hyperparams& hp,
                            const AttributeLexicon* mask) {
  if (examples.empty()) {
    throw TrainingError(TrainingError::Kind::kEmptyData, "no training examples");
  }
  std::vector<Example> prepared(examples.begin(), examples.end());
  if (mask) {
    for (auto& ex : prepared) ex.tokens = mask_attributes(ex.tokens, *mask);
  }
  std::size_t depth = 0;
  for (const auto& ex : prepared) depth = std::max(depth, ex.path.depth());

  std::vector<FlatModel> levels;
  for (std::size_t level = 1; level <= depth; ++level) {
    std::vector<Example> subset;
    for (const auto& ex : prepared) {
      if (ex.path.depth() >= level) subset.push_back(ex);
    }
    Hyperparams level_hp = hp;
    level_hp.seed = derive_seed(hp.seed, level);
    levels.push_back(train_flat(subset, level, level_hp));
  }
  return HierarchicalModel(std::move(levels),
                           mask ? std::optional<AttributeLexicon>(*mask) : std::nullopt);
}

Prediction predict_hft(const HierarchicalModel& model, std::span<const std::string> tokens) {
  TokenSeq masked;
  std::span<const std::string> input = tokens;
  if (model.mask()) {
    masked = mask_attributes(tokens, *model.mask());
    input = masked;
  }
  return resolve_agreement(model.depth(), [&](std::size_t i) {
    const FlatModel& f = model.level(i);
    FlatPrediction fp = predict_flat(f, input);
    return LevelPrediction{f.label(fp.label), fp.probs[fp.label]};
  });
}

std::vector<Example> to_examples(std::span<const std::string> titles,
                                 std::span<const CategoryPath> paths) {
  if (titles.size() != paths.size()) throw RangeError("titles/paths length mismatch");
  std::vector<Example> out;
  out.reserve(titles.size());
  for (std::size_t i = 0; i < titles.size(); ++i) {
    out.push_back(Example{normalize_tokenize(titles[i]), paths[i]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file

namespace {

constexpr std::string_view kMagic = "HFTM1";

void write_floats(std::ostream& out, std::span<const float> values) {
  std::string buf;
  buf.resize(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<float> read_floats(std::istream& in, std::size_t count) {
  std::string buf(count * 4, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw DataError("model file truncated");
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i * 4 + b])) << (8 * b);
    }
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_line_safe(const std::string& s) {
  if (s.find('\n') != std::string::npos || s.find('\r') != std::string::npos) {
    throw DataError("cannot store a value containing a newline in a model file");
  }
}

class HeaderReader {
 public:
  explicit HeaderReader(std::istream& in) : in_(in) {}

  std::string line() {
    std::string l;
    if (!std::getline(in_, l)) throw DataError("model header truncated");
    return l;
  }

  // "key value" line; returns value.
  std::string field(std::string_view key) {
    std::string l = line();
    if (l.size() <= key.size() || l.compare(0, key.size(), key) != 0 || l[key.size()] != ' ') {
      throw DataError("model header: expected '" + std::string(key) + "', got '" + l + "'");
    }
    return l.substr(key.size() + 1);
  }

  std::size_t count(std::string_view key) {
    std::string v = field(key);
    try {
      return static_cast<std::size_t>(std::stoull(v));
    } catch (const std::exception&) {
      throw DataError("model header: bad number for " + std::string(key));
    }
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_model(const HierarchicalModel& model, std::ostream& out) {
  if (model.depth() == 0) throw DataError("cannot save an empty model");
  const Hyperparams& hp = model.level(1).hyperparams();
  out << kMagic << '\n';
  out << "dim " << hp.dim << '\n';
  out << "epochs " << hp.epochs << '\n';
  out << "lr " << format_double(hp.lr) << '\n';
  out << "max_n " << hp.max_n << '\n';
  out << "buckets " << hp.buckets << '\n';
  out << "levels " << model.depth() << '\n';
  for (const auto& f : model.levels()) {
    out << "level " << f.level() << '\n';
    out << "seed " << f.hyperparams().seed << '\n';
    out << "labels " << f.num_classes() << '\n';
    for (const auto& l : f.labels()) {
      std::string r = l.render();
      check_line_safe(r);
      out << r << '\n';
    }
    out << "vocab " << f.vocab().size() << '\n';
    for (const auto& w : f.vocab().words()) out << w << '\n';
  }
  if (model.mask()) {
    const AttributeLexicon& lex = *model.mask();
    out << "mask " << lex.kinds().size() << '\n';
    for (const auto& k : lex.kinds()) {
      check_line_safe(k);
      out << "kind " << k << '\n';
      out << "words " << lex.words(k).size() << '\n';
      for (const auto& w : lex.words(k)) {
        check_line_safe(w);
        out << w << '\n';
      }
    }
  } else {
    out << "mask 0\n";
  }
  out << "end\n";
  for (const auto& f : model.levels()) {
    write_floats(out, f.input());
    write_floats(out, f.output());
  }
  if (!out) throw Error("failed writing model");
}

void save_model(const HierarchicalModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  save_model(model, out);
}

HierarchicalModel load_model(std::istream& in) {
  HeaderReader h(in);
  if (h.line() != kMagic) throw DataError("not a model file (bad magic)");
  Hyperparams hp;
  hp.dim = h.count("dim");
  hp.epochs = h.count("epochs");
  try {
    hp.lr = std::stod(h.field("lr"));
  } catch (const std::invalid_argument&) {
    throw DataError("model header: bad lr");
  }
  hp.max_n = h.count("max_n");
  hp.buckets = h.count("buckets");
  const std::size_t depth = h.count("levels");
  if (depth < 1 || depth > kMaxDepth) throw DataError("model header: bad level count");

  struct Pending {
    Hyperparams hp;
    std::vector<CategoryPath> labels;
    std::vector<std::string> vocab;
  };
  std::vector<Pending> pending;
  for (std::size_t i = 1; i <= depth; ++i) {
    if (h.count("level") != i) throw DataError("model header: levels out of order");
    Pending p;
    p.hp = hp;
    p.hp.seed = static_cast<std::uint64_t>(h.count("seed"));
    const std::size_t c = h.count("labels");
    for (std::size_t k = 0; k < c; ++k) p.labels.push_back(parse_path(h.line()));
    const std::size_t v = h.count("vocab");
    p.vocab.reserve(v);
    for (std::size_t k = 0; k < v; ++k) p.vocab.push_back(h.line());
    pending.push_back(std::move(p));
  }
  std::optional<AttributeLexicon> mask;
  const std::size_t kinds = h.count("mask");
  if (kinds > 0) {
    AttributeLexicon lex;
    for (std::size_t k = 0; k < kinds; ++k) {
      std::string kind = h.field("kind");
      const std::size_t nw = h.count("words");
      std::vector<std::string> words;
      for (std::size_t w = 0; w < nw; ++w) words.push_back(h.line());
      lex.add_kind(kind, words);
    }
    mask = std::move(lex);
  }
  if (h.line() != "end") throw DataError("model header: missing end marker");

  std::vector<FlatModel> levels;
  for (std::size_t i = 0; i < depth; ++i) {
    Pending& p = pending[i];
    Vocabulary vocab(std::move(p.vocab));
    const std::size_t rows = vocab.size() + p.hp.buckets;
    std::vector<float> input = read_floats(in, rows * p.hp.dim);
    std::vector<float> output = read_floats(in, p.labels.size() * p.hp.dim);
    levels.push_back(FlatModel::from_parts(i + 1, p.hp, std::move(vocab), std::move(p.labels),
                                           std::move(input), std::move(output)));
  }
  return HierarchicalModel(std::move(levels), std::move(mask));
}

HierarchicalModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path);
  return load_model(in);
}

}  // namespace ctc
