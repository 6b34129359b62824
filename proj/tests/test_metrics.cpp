#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "c2c/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace c2c {
namespace {

using testing::uniform_index;

Tokens words(const std::string& s) { return tokenize(s); }

Tokens letters(const std::string& s) {
  Tokens t;
  for (char c : s) t.emplace_back(1, c);
  return t;
}

double bleu1(const std::string& h, const std::string& r, bool cased = true) {
  const std::vector<Tokens> hs{words(h)}, rs{words(r)};
  return corpus_bleu(hs, rs, cased);
}

TEST(Bleu, HandDerivedExample) {
  EXPECT_NEAR(bleu1("the cat sat on mat", "the cat sat on the mat"), 57.89, 0.01);
  const double expected = 100.0 * std::exp(-0.2) * std::pow(1.0 * 0.75 * (2.0 / 3.0) * 0.5, 0.25);
  EXPECT_NEAR(bleu1("the cat sat on mat", "the cat sat on the mat"), expected, 1e-9);
}

TEST(Bleu, IdentityIsHundred) { EXPECT_EQ(bleu1("a b c d e", "a b c d e"), 100.0); }

TEST(Bleu, NoOverlapIsZero) { EXPECT_EQ(bleu1("x y z w", "a b c d"), 0.0); }

TEST(Bleu, ShortSegmentsWithoutFourGramsScoreZero) { EXPECT_EQ(bleu1("a b", "a b"), 0.0); }

TEST(Bleu, UncasedIgnoresCase) {
  EXPECT_EQ(bleu1("The Cat sat on Mat", "the cat sat on mat", false), 100.0);
  EXPECT_LT(bleu1("The Cat sat on Mat", "the cat sat on mat", true), 100.0);
}

TEST(Bleu, Errors) {
  const std::vector<Tokens> one{words("a")}, two{words("a"), words("b")}, none;
  EXPECT_THROW(corpus_bleu(one, two, true), ContractViolation);
  EXPECT_THROW(corpus_bleu(none, none, true), ContractViolation);
}

std::vector<Tokens> random_corpus(std::mt19937_64& rng, std::size_t n, const Tokens& vocab) {
  std::vector<Tokens> out(n);
  for (auto& s : out) {
    s.resize(4 + uniform_index(rng, 12));
    for (auto& w : s) w = vocab[uniform_index(rng, vocab.size())];
  }
  return out;
}

const Tokens kCasedVocab = {"the", "The", "cat", "Cat", "a", "A", "sat", "on", "mat", "EU", "eu"};

TEST(BleuProperty, MatchesRecountOracle) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    const Tokens vocab(kCasedVocab.begin(), kCasedVocab.begin() + 3 + uniform_index(rng, 6));
    const auto hyps = random_corpus(rng, 1 + uniform_index(rng, 5), vocab);
    auto refs = random_corpus(rng, hyps.size(), vocab);
    EXPECT_NEAR(corpus_bleu(hyps, refs, true), oracle::bleu(hyps, refs), 1e-6);
  }
}

TEST(BleuProperty, SelfScoreIsHundred) {
  std::mt19937_64 rng(72);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_corpus(rng, 1 + uniform_index(rng, 5), kCasedVocab);
    EXPECT_EQ(corpus_bleu(c, c, true), 100.0);
  }
}

TEST(BleuProperty, UncasedAtLeastCased) {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 100; ++trial) {
    const auto h = random_corpus(rng, 3, kCasedVocab), r = random_corpus(rng, 3, kCasedVocab);
    EXPECT_GE(corpus_bleu(h, r, false), corpus_bleu(h, r, true));
  }
}

TEST(BleuProperty, InvariantUnderCorpusPermutation) {
  std::mt19937_64 rng(74);
  for (int trial = 0; trial < 50; ++trial) {
    auto h = random_corpus(rng, 6, {"a", "b", "c"}), r = random_corpus(rng, 6, {"a", "b", "c"});
    const double before = corpus_bleu(h, r, true);
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Tokens> hp, rp;
    for (auto i : perm) {
      hp.push_back(h[i]);
      rp.push_back(r[i]);
    }
    EXPECT_EQ(corpus_bleu(hp, rp, true), before);
  }
}

TEST(Ter, Identity) { EXPECT_EQ(ter(words("a b c d"), words("a b c d")), 0.0); }

TEST(Ter, SingleSubstitution) { EXPECT_EQ(ter(words("a b x d"), words("a b c d")), 0.25); }

TEST(Ter, SingleShift) {
  const auto c = ter_counts<std::string>(words("d a b c"), words("a b c d"));
  EXPECT_EQ(c.shifts, 1u);
  EXPECT_EQ(c.edits, 0u);
  EXPECT_EQ(ter(words("d a b c"), words("a b c d")), 0.25);
  EXPECT_EQ(ter(words("d a b c"), words("a b c d"), {.shifts = false}), 0.5);
}

TEST(Ter, BlockShift) {
  const auto c = ter_counts<std::string>(words("d e f a b c"), words("a b c d e f"));
  EXPECT_EQ(c.shifts, 1u);
  EXPECT_EQ(c.edits, 0u);
}

TEST(Ter, ShiftPlusEdit) {
  // move "d" to the end, then substitute x -> c
  const auto c = ter_counts<std::string>(words("d a b x"), words("a b c d"));
  EXPECT_EQ(c.shifts + c.edits, 2u);
}

TEST(Ter, EmptyHypothesisIsAllInsertions) { EXPECT_EQ(ter(Tokens{}, words("a b c")), 1.0); }

TEST(Ter, CanExceedOne) { EXPECT_EQ(ter(words("x y z w"), words("a b")), 2.0); }

TEST(Ter, EmptyReferenceIsContractViolation) {
  EXPECT_THROW(ter(words("a"), Tokens{}), ContractViolation);
  EXPECT_THROW(char_ter("a", ""), ContractViolation);
}

TEST(CharTer, Examples) {
  EXPECT_EQ(char_ter("abcd", "abcd"), 0.0);
  EXPECT_EQ(char_ter("abxd", "abcd"), 0.25);
  EXPECT_EQ(char_ter("a c", "abc"), 1.0 / 3.0);
  EXPECT_EQ(char_ter("äö", "äo"), 0.5);
}

TEST(TerProperty, ShiftFreeTerIsExactEditDistance) {
  const oracle::EditGraph graph("abc", 5);
  const auto& all = graph.strings();
  for (const auto& hyp : all) {
    const auto dist = graph.distances_from(hyp);
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (all[j].empty()) continue;
      const auto c = ter_counts<std::string>(letters(hyp), letters(all[j]), {.shifts = false});
      ASSERT_EQ(c.edits, static_cast<std::uint64_t>(dist[j])) << hyp << " vs " << all[j];
      ASSERT_EQ(c.shifts, 0u);
    }
  }
}

TEST(TerProperty, ShiftsNeverIncreaseCost) {
  std::mt19937_64 rng(75);
  for (int trial = 0; trial < 200; ++trial) {
    const Tokens vocab = {"a", "b", "c", "d"};
    Tokens h(uniform_index(rng, 31)), r(1 + uniform_index(rng, 30));
    for (auto& w : h) w = vocab[uniform_index(rng, vocab.size())];
    for (auto& w : r) w = vocab[uniform_index(rng, vocab.size())];
    EXPECT_LE(ter(h, r), ter(h, r, {.shifts = false}));
  }
}

TEST(TerProperty, CharTerEqualsTerOnSingleCharacterTokens) {
  std::mt19937_64 rng(76);
  for (int trial = 0; trial < 200; ++trial) {
    std::string h = testing::random_string(rng, "abcde", 0, 15);
    const std::string r = testing::random_string(rng, "abcde", 1, 15);
    EXPECT_EQ(char_ter(h, r), ter(letters(h), letters(r)));
  }
}

TEST(TerProperty, Deterministic) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const std::string h = testing::random_string(rng, "ab c", 0, 20);
    const std::string r = testing::random_string(rng, "ab c", 1, 20);
    const auto a = char_ter_counts(h, r), b = char_ter_counts(h, r);
    EXPECT_EQ(a.edits, b.edits);
    EXPECT_EQ(a.shifts, b.shifts);
  }
}

TEST(Evaluate, IdenticalCorpora) {
  const std::vector<std::string> c = {"the cat sat on the mat .", "Hello , world !"};
  const auto r = evaluate(c, c);
  EXPECT_EQ(r.bleu, 100.0);
  EXPECT_EQ(r.bleu_cased, 100.0);
  EXPECT_EQ(r.ter, 0.0);
  EXPECT_EQ(r.char_ter, 0.0);
  EXPECT_EQ(r.segment_count, 2u);
}

TEST(Evaluate, SingleSegmentMatchesSegmentMetrics) {
  const std::vector<std::string> h = {"The cat sat on mat"}, r = {"the cat sat on the mat"};
  const auto rep = evaluate(h, r);
  EXPECT_EQ(rep.bleu_cased, bleu1(h[0], r[0], true));
  EXPECT_EQ(rep.bleu, bleu1(h[0], r[0], false));
  EXPECT_EQ(rep.ter, ter(words(h[0]), words(r[0])));
  EXPECT_EQ(rep.char_ter, char_ter(h[0], r[0]));
}

TEST(Evaluate, MatchesRecountFromRawCounts) {
  std::mt19937_64 rng(78);
  std::vector<std::string> h(50), r(50);
  for (std::size_t i = 0; i < 50; ++i) {
    h[i] = testing::random_string(rng, "aAbB c.", 1, 25);
    r[i] = testing::random_string(rng, "aAbB c.", 1, 25);
    if (words(r[i]).empty()) r[i] += "a";
  }
  std::vector<Tokens> ht, rt, hl, rl;
  std::uint64_t we = 0, wl = 0, ce = 0, cl = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    ht.push_back(words(h[i]));
    rt.push_back(words(r[i]));
    hl.push_back(lowercase_tokens(ht.back()));
    rl.push_back(lowercase_tokens(rt.back()));
    const auto w = ter_counts<std::string>(ht.back(), rt.back());
    we += w.edits + w.shifts;
    wl += rt.back().size();
    const auto c = char_ter_counts(h[i], r[i]);
    ce += c.edits + c.shifts;
    cl += unicode::decode(r[i]).size();
  }
  const auto rep = evaluate(h, r);
  EXPECT_NEAR(rep.bleu_cased, oracle::bleu(ht, rt), 1e-6);
  EXPECT_NEAR(rep.bleu, oracle::bleu(hl, rl), 1e-6);
  EXPECT_EQ(rep.ter, double(we) / double(wl));
  EXPECT_EQ(rep.char_ter, double(ce) / double(cl));
}

TEST(Evaluate, Errors) {
  const std::vector<std::string> one = {"a"}, two = {"a", "b"}, none;
  EXPECT_THROW(evaluate(one, two), DataError);
  EXPECT_THROW(evaluate(none, none), DataError);
}

}  // namespace
}  // namespace c2c
