#include "ctc/text.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ctc/error.hpp"

namespace ctc {
namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_split_punct(char c) {
  switch (c) {
    case ',':
    case '.':
    case '/':
    case '(':
    case ')':
    case '"':
    case '\'':
      return true;
    default:
      return false;
  }
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

void split_word(std::string_view word, TokenSeq& out) {
  std::string cur;
  for (std::size_t i = 0; i < word.size(); ++i) {
    char c = word[i];
    if (is_split_punct(c)) {
      bool decimal_point = c == '.' && i > 0 && i + 1 < word.size() && is_digit(word[i - 1]) &&
                           is_digit(word[i + 1]);
      if (!decimal_point) {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
        continue;
      }
    }
    cur.push_back(ascii_lower(c));
  }
  if (!cur.empty()) out.push_back(std::move(cur));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

TokenSeq normalize_tokenize(std::string_view title) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < title.size()) {
    while (i < title.size() && is_space(static_cast<unsigned char>(title[i]))) ++i;
    std::size_t j = i;
    while (j < title.size() && !is_space(static_cast<unsigned char>(title[j]))) ++j;
    if (j > i) split_word(title.substr(i, j - i), out);
    i = j;
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> extract_ngrams(std::span<const std::string> tokens, std::size_t max_n) {
  std::vector<std::string> out;
  for (std::size_t n = 1; n <= max_n && n <= tokens.size(); ++n) {
    for (std::size_t s = 0; s + n <= tokens.size(); ++s) {
      out.push_back(join_tokens(tokens.subspan(s, n)));
    }
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  std::sort(words_.begin(), words_.end());
  words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
}

Vocabulary Vocabulary::from_corpus(std::span<const TokenSeq> corpus) {
  std::set<std::string> words;
  for (const auto& seq : corpus) words.insert(seq.begin(), seq.end());
  return Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

std::int64_t Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::size_t feature_index(std::string_view ngram, const Vocabulary& vocab, std::size_t buckets) {
  if (buckets == 0) throw RangeError("feature_index: buckets must be > 0");
  if (ngram.find(' ') == std::string_view::npos) {
    std::int64_t id = vocab.find(ngram);
    if (id >= 0) return static_cast<std::size_t>(id);
  }
  return vocab.size() + fnv1a32(ngram) % buckets;
}

std::vector<std::size_t> feature_ids(std::span<const std::string> tokens, const Vocabulary& vocab,
                                     std::size_t max_n, std::size_t buckets) {
  std::vector<std::size_t> ids;
  for (const auto& g : extract_ngrams(tokens, max_n)) ids.push_back(feature_index(g, vocab, buckets));
  return ids;
}

void AttributeLexicon::add_kind(const std::string& kind, std::span<const std::string> words) {
  auto pos = std::find(kinds_.begin(), kinds_.end(), kind);
  std::size_t k = static_cast<std::size_t>(pos - kinds_.begin());
  if (pos == kinds_.end()) {
    kinds_.push_back(kind);
    masks_.push_back(mask_token(kind));
  }
  auto& list = words_[kind];
  for (const auto& w : words) {
    std::string lw;
    for (char c : w) lw.push_back(ascii_lower(c));
    if (lw.empty()) continue;
    if (std::find(list.begin(), list.end(), lw) == list.end()) list.push_back(lw);
    owner_.emplace(lw, k);  // keeps the earliest kind on overlap
  }
}

AttributeLexicon AttributeLexicon::parse(std::istream& in) {
  AttributeLexicon lex;
  std::string line;
  std::string kind;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string_view t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) throw DataError("malformed section header", lineno);
      kind = std::string(trim(t.substr(1, t.size() - 2)));
      if (kind.empty()) throw DataError("empty kind name", lineno);
      lex.add_kind(kind, {});
      continue;
    }
    if (kind.empty()) throw DataError("word outside of a [kind] section", lineno);
    std::string w(t);
    lex.add_kind(kind, std::span<const std::string>(&w, 1));
  }
  return lex;
}

AttributeLexicon AttributeLexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file " + path);
  return parse(in);
}

std::string AttributeLexicon::serialize() const {
  std::ostringstream os;
  for (const auto& k : kinds_) {
    os << '[' << k << "]\n";
    for (const auto& w : words_.at(k)) os << w << '\n';
  }
  return os.str();
}

const std::vector<std::string>& AttributeLexicon::words(const std::string& kind) const {
  auto it = words_.find(kind);
  if (it == words_.end()) throw RangeError("unknown attribute kind " + kind);
  return it->second;
}

const std::string* AttributeLexicon::mask_for(std::string_view word) const {
  auto it = owner_.find(std::string(word));
  return it == owner_.end() ? nullptr : &masks_[it->second];
}

TokenSeq mask_attributes(std::span<const std::string> tokens, const AttributeLexicon& lexicon) {
  TokenSeq out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    const std::string* m = lexicon.mask_for(t);
    out.push_back(m ? *m : t);
  }
  return out;
}

}  // namespace ctc
