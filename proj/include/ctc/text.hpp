#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctc {

// Lowercase, non-empty tokens in source order.
using TokenSeq = std::vector<std::string>;

/// Lowercases (ASCII), splits on whitespace and around the punctuation
/// characters , . / ( ) " '. A '.' between two digits is kept so decimal
/// quantities such as "1.2-oz" stay whole. Non-ASCII bytes pass through.
TokenSeq normalize_tokenize(std::string_view title);

std::string join_tokens(std::span<const std::string> tokens);

/// All contiguous n-grams for n = 1..max_n, ordered by n then by start,
/// each rendered as space-joined tokens.
std::vector<std::string> extract_ngrams(std::span<const std::string> tokens, std::size_t max_n);

// 32-bit FNV-1a over the raw bytes.
constexpr std::uint32_t fnv1a32(std::string_view bytes) noexcept {
  std::uint32_t h = 2166136261u;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 16777619u;
  }
  return h;
}

// Dense unigram vocabulary. Ids follow lexicographic order of the words.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);

  static Vocabulary from_corpus(std::span<const TokenSeq> corpus);

  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }

  // -1 if absent.
  std::int64_t find(std::string_view word) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Vocabulary hits map to their dense id; everything else to
/// vocab.size() + fnv1a32(ngram) % buckets.
std::size_t feature_index(std::string_view ngram, const Vocabulary& vocab, std::size_t buckets);

std::vector<std::size_t> feature_ids(std::span<const std::string> tokens, const Vocabulary& vocab,
                                     std::size_t max_n, std::size_t buckets);

// Word lists per attribute kind, each with a constant mask token "<kind>".
// A word listed under several kinds belongs to the first one declared.
class AttributeLexicon {
 public:
  AttributeLexicon() = default;

  // Appends a kind (or extends an existing one) with lowercase words.
  void add_kind(const std::string& kind, std::span<const std::string> words);

  // "[kind]" section headers, one word per line, '#' comments.
  static AttributeLexicon parse(std::istream& in);
  static AttributeLexicon load(const std::string& path);
  std::string serialize() const;

  bool empty() const noexcept { return kinds_.empty(); }
  const std::vector<std::string>& kinds() const noexcept { return kinds_; }
  const std::vector<std::string>& words(const std::string& kind) const;

  // Mask token for `word` or nullptr if the word is not covered.
  const std::string* mask_for(std::string_view word) const;

  static std::string mask_token(std::string_view kind) { return "<" + std::string(kind) + ">"; }

 private:
  std::vector<std::string> kinds_;
  std::vector<std::string> masks_;
  std::map<std::string, std::vector<std::string>> words_;
  std::unordered_map<std::string, std::size_t> owner_;
};

TokenSeq mask_attributes(std::span<const std::string> tokens, const AttributeLexicon& lexicon);

}  // namespace ctc
