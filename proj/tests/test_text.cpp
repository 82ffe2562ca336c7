#include <gtest/gtest.h>

#include <sstream>

#include "ctc/text.hpp"

using ctc::TokenSeq;

namespace {

TEST(Tokenize, CatalogTitle) {
  EXPECT_EQ(ctc::normalize_tokenize("Greenies Breath Buster Bites, 1.2-oz bag"),
            (TokenSeq{"greenies", "breath", "buster", "bites", "1.2-oz", "bag"}));
}

TEST(Tokenize, EmptyAndPunctuation) {
  EXPECT_TRUE(ctc::normalize_tokenize("").empty());
  EXPECT_TRUE(ctc::normalize_tokenize(" , ( ) ").empty());
  EXPECT_EQ(ctc::normalize_tokenize("Red T-Shirt (XL)"), (TokenSeq{"red", "t-shirt", "xl"}));
}

TEST(Tokenize, SplitsSlashesAndQuotes) {
  EXPECT_EQ(ctc::normalize_tokenize("\"Men's\" S/M"), (TokenSeq{"men", "s", "s", "m"}));
  EXPECT_EQ(ctc::normalize_tokenize("end. 3.5 x.y"), (TokenSeq{"end", "3.5", "x", "y"}));
}

TEST(Tokenize, IdempotentOnNormalized) {
  for (const char* title : {"Red T-Shirt (XL)", "Greenies, 1.2-oz bag", "a / b . c"}) {
    TokenSeq once = ctc::normalize_tokenize(title);
    EXPECT_EQ(ctc::normalize_tokenize(ctc::join_tokens(once)), once) << title;
  }
}

TEST(Ngrams, OrderByLengthThenStart) {
  EXPECT_EQ(ctc::extract_ngrams(TokenSeq{"a", "b", "c"}, 2),
            (std::vector<std::string>{"a", "b", "c", "a b", "b c"}));
  EXPECT_EQ(ctc::extract_ngrams(TokenSeq{"a"}, 3), (std::vector<std::string>{"a"}));
  EXPECT_EQ(ctc::extract_ngrams(TokenSeq{"x", "y"}, 1), (std::vector<std::string>{"x", "y"}));
}

// Published FNV-1a 32-bit vectors.
static_assert(ctc::fnv1a32("") == 0x811C9DC5u);
static_assert(ctc::fnv1a32("a") == 0xE40C292Cu);
static_assert(ctc::fnv1a32("foobar") == 0xBF9CF968u);

TEST(Fnv1a, TestVectors) {
  EXPECT_EQ(ctc::fnv1a32(""), 0x811C9DC5u);
  EXPECT_EQ(ctc::fnv1a32("a"), 0xE40C292Cu);
  EXPECT_EQ(ctc::fnv1a32("b"), 0xE70C2DE5u);
  EXPECT_EQ(ctc::fnv1a32("foo"), 0xA9F37ED7u);
  EXPECT_EQ(ctc::fnv1a32("foobar"), 0xBF9CF968u);
}

TEST(FeatureIndex, VocabularyHitIgnoresBuckets) {
  std::vector<std::string> words{"a", "b", "c", "d", "da", "db", "dc", "dog"};
  ctc::Vocabulary vocab(words);
  ASSERT_EQ(vocab.find("dog"), 7);
  EXPECT_EQ(ctc::feature_index("dog", vocab, 10), 7u);
  EXPECT_EQ(ctc::feature_index("dog", vocab, 1000000), 7u);
}

TEST(FeatureIndex, HashedFeatures) {
  ctc::Vocabulary vocab(std::vector<std::string>{"a", "b"});
  EXPECT_EQ(ctc::feature_index("a b", vocab, 1000), 2u + ctc::fnv1a32("a b") % 1000);
  EXPECT_EQ(ctc::feature_index("zzz", vocab, 7), 2u + ctc::fnv1a32("zzz") % 7);
}

TEST(FeatureIds, OneIdPerNgram) {
  ctc::Vocabulary vocab(std::vector<std::string>{"blue", "coat"});
  auto ids = ctc::feature_ids(TokenSeq{"blue", "coat", "xl"}, vocab, 2, 100);
  ASSERT_EQ(ids.size(), 5u);
  EXPECT_EQ(ids[0], 0u);
  EXPECT_EQ(ids[1], 1u);
  EXPECT_GE(ids[2], 2u);
}

TEST(Lexicon, ParseAndMask) {
  std::istringstream in("# starter\n[color]\nred\nnavy\n\n[size]\nxl\nred\n");
  auto lex = ctc::AttributeLexicon::parse(in);
  EXPECT_EQ(lex.kinds(), (std::vector<std::string>{"color", "size"}));
  // First declared kind wins on overlap.
  ASSERT_NE(lex.mask_for("red"), nullptr);
  EXPECT_EQ(*lex.mask_for("red"), "<color>");
  EXPECT_EQ(ctc::mask_attributes(TokenSeq{"red", "t-shirt", "xl"}, lex),
            (TokenSeq{"<color>", "t-shirt", "<size>"}));
  EXPECT_EQ(ctc::mask_attributes(TokenSeq{"navy", "navy", "bag"}, lex),
            (TokenSeq{"<color>", "<color>", "bag"}));
}

TEST(Lexicon, EmptyIsIdentity) {
  ctc::AttributeLexicon lex;
  EXPECT_EQ(ctc::mask_attributes(TokenSeq{"blue", "coat"}, lex), (TokenSeq{"blue", "coat"}));
}

TEST(Lexicon, MaskingIdempotentAndLengthPreserving) {
  ctc::AttributeLexicon lex;
  std::vector<std::string> colors{"red", "blue"};
  lex.add_kind("color", colors);
  TokenSeq t{"red", "blue", "coat", "red"};
  TokenSeq once = ctc::mask_attributes(t, lex);
  EXPECT_EQ(once.size(), t.size());
  EXPECT_EQ(ctc::mask_attributes(once, lex), once);
}

TEST(Lexicon, SerializeRoundTrip) {
  std::istringstream in("[color]\nred\nblue\n[size]\nxl\n");
  auto lex = ctc::AttributeLexicon::parse(in);
  std::istringstream again(lex.serialize());
  auto lex2 = ctc::AttributeLexicon::parse(again);
  EXPECT_EQ(lex2.serialize(), lex.serialize());
  EXPECT_EQ(lex2.words("color"), lex.words("color"));
}

}  // namespace
