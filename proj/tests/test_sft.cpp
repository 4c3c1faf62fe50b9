#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "thermoweight/thermoweight.hpp"

using namespace thermoweight;

TEST_CASE("full shift enumeration at n = 2") {
  Sft x = Sft::full_shift(2);
  auto words = enumerate_language(x, 2);
  REQUIRE(words == std::vector<Word>{{0, 0}, {0, 1}, {1, 0}, {1, 1}});
}

TEST_CASE("golden mean enumeration excludes 11") {
  Sft x = twt::golden_mean();
  auto words = enumerate_language(x, 2);
  REQUIRE(words == std::vector<Word>{{0, 0}, {0, 1}, {1, 0}});
  REQUIRE(enumerate_language(x, 4).size() == 8);
}

TEST_CASE("empty word language") {
  Sft x = twt::golden_mean();
  auto words = enumerate_language(x, 0);
  REQUIRE(words.size() == 1);
  REQUIRE(words[0].empty());
}

TEST_CASE("language counts match naive recursion on random SFTs") {
  std::mt19937_64 rng(20240811);
  for (int trial = 0; trial < 25; ++trial) {
    Sft x = twt::random_sft(rng);
    for (int n = 0; n <= 10; n += 2) {
      auto fast = enumerate_language(x, n);
      auto slow = twt::naive_words(x, n);
      REQUIRE(fast == slow);
    }
  }
}

TEST_CASE("enumeration is strictly lexicographically increasing") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Sft x = twt::random_sft(rng);
    auto words = enumerate_language(x, 6);
    for (std::size_t i = 1; i < words.size(); ++i)
      REQUIRE(words[i - 1] < words[i]);
  }
}

TEST_CASE("rank and unrank are inverse") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    Sft x = twt::random_sft(rng);
    LanguageIndex li(x, 7);
    for (std::uint64_t r = 0; r < li.size(); ++r) {
      Word w = li.unrank(r);
      REQUIRE(li.rank(w) == r);
    }
  }
}

TEST_CASE("word count equals transition-matrix path count") {
  Sft x = twt::golden_mean();
  // 1^T A^{n-1} 1 gives Fibonacci numbers 2, 3, 5, 8, ...
  std::vector<std::uint64_t> expected{2, 3, 5, 8, 13, 21, 34, 55};
  for (int n = 1; n <= 8; ++n)
    REQUIRE(LanguageIndex(x, n).size() == expected[n - 1]);
}

TEST_CASE("enumeration cap raises a resource error") {
  Sft x = Sft::full_shift(4);
  ComputeCaps caps;
  caps.max_words = 100;
  REQUIRE_THROWS_AS(enumerate_language(x, 5, caps), resource_error);
}

TEST_CASE("specification gaps: full shift") {
  auto gaps = specification_gaps(Sft::full_shift(2));
  REQUIRE(gaps.weak_p == 0);
  REQUIRE(gaps.exact_p == 0);
}

TEST_CASE("specification gaps: golden mean") {
  auto gaps = specification_gaps(twt::golden_mean());
  REQUIRE(gaps.weak_p == 1);
  REQUIRE(gaps.exact_p == 1);
}

TEST_CASE("specification gaps: 2-cycle has no exact gap") {
  auto gaps = specification_gaps(twt::two_cycle());
  REQUIRE(gaps.weak_p == 1);
  REQUIRE_FALSE(gaps.exact_p.has_value());
}

TEST_CASE("specification gap ordering and primitivity") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    Sft x = twt::random_sft(rng);
    auto gaps = specification_gaps(x);
    if (gaps.exact_p) {
      REQUIRE(gaps.weak_p.has_value());
      REQUIRE(*gaps.weak_p <= *gaps.exact_p);
    }
  }
}

TEST_CASE("weak gap certifies connectors at the word level") {
  // brute-force check of the defining property on small words
  for (Sft x : {twt::golden_mean(), twt::two_cycle(), Sft::full_shift(3)}) {
    auto gaps = specification_gaps(x);
    REQUIRE(gaps.weak_p.has_value());
    const int p = *gaps.weak_p;
    for (const Word& a : twt::naive_words(x, 3))
      for (const Word& b : twt::naive_words(x, 3)) {
        bool found = false;
        for (int q = 0; q <= p && !found; ++q)
          for (const Word& con : twt::naive_words(x, q)) {
            Word joined = a;
            joined.insert(joined.end(), con.begin(), con.end());
            joined.insert(joined.end(), b.begin(), b.end());
            if (x.legal(joined)) {
              found = true;
              break;
            }
          }
        REQUIRE(found);
      }
  }
}

TEST_CASE("higher block recode: identity at m = 1") {
  Sft x = twt::golden_mean();
  auto rec = higher_block_recode(x, 1);
  REQUIRE(rec.recoded.alphabet_size() == 2);
  Word w{0, 1, 0};
  REQUIRE(rec.encode(w) == w);
  REQUIRE(rec.decode(w) == w);
}

TEST_CASE("higher block recode: golden mean at m = 2") {
  Sft x = twt::golden_mean();
  auto rec = higher_block_recode(x, 2);
  REQUIRE(rec.recoded.alphabet_size() == 3);  // blocks 00, 01, 10
  // transitions of the recoded SFT are exactly L_3 of the original
  int edges = 0;
  for (Symbol a = 0; a < 3; ++a) edges += rec.recoded.successors(a).size();
  REQUIRE(edges == static_cast<int>(LanguageIndex(x, 3).size()));
  REQUIRE(edges == 5);
}

TEST_CASE("higher block recode: full shift m = 2 has two successors each") {
  auto rec = higher_block_recode(Sft::full_shift(2), 2);
  REQUIRE(rec.recoded.alphabet_size() == 4);
  for (Symbol a = 0; a < 4; ++a)
    REQUIRE(rec.recoded.successors(a).size() == 2);
}

TEST_CASE("higher block round-trip on randomized SFTs") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 12; ++trial) {
    Sft x = twt::random_sft(rng);
    for (int m : {2, 3}) {
      auto rec = higher_block_recode(x, m);
      for (int n = 1; n + m - 1 <= 8; n += 2) {
        // bijection L_n(recoded) <-> L_{n+m-1}(x)
        auto originals = enumerate_language(x, n + m - 1);
        auto recoded = enumerate_language(rec.recoded, n);
        REQUIRE(originals.size() == recoded.size());
        for (const Word& w : originals) {
          Word enc = rec.encode(w);
          REQUIRE(static_cast<int>(enc.size()) == n);
          REQUIRE(rec.recoded.legal(enc));
          REQUIRE(rec.decode(enc) == w);
        }
      }
    }
  }
}

TEST_CASE("higher block recode preserves weak specification") {
  Sft x = twt::golden_mean();
  auto rec = higher_block_recode(x, 2);
  REQUIRE(specification_gaps(rec.recoded).weak_p.has_value());
}

TEST_CASE("normalization deletes stranded symbols") {
  // symbol 2 has no successor; the pass removes it and reports it
  Sft x(3, {{1, 1, 1}, {1, 0, 0}, {0, 0, 0}});
  REQUIRE(x.alphabet_size() == 2);
  REQUIRE(x.removed_symbols() == std::vector<int>{2});
  REQUIRE(x.original_symbol() == std::vector<int>{0, 1});
}

TEST_CASE("fully disconnected input is rejected") {
  REQUIRE_THROWS_AS(Sft(2, {{0, 0}, {0, 0}}), validation_error);
}

TEST_CASE("validate_chain: full shifts pass") {
  FactorChain chain;
  chain.levels = {Sft::full_shift(3), Sft::full_shift(2)};
  chain.symbol_maps = {{0, 0, 1}};
  chain.weights = {1.0, 1.0};
  auto report = validate_chain(chain, 3);
  REQUIRE(report.passed);
}

TEST_CASE("validate_chain: golden mean onto a point passes") {
  FactorChain chain;
  chain.levels = {twt::golden_mean(), Sft(1, {{1}})};
  chain.symbol_maps = {{0, 0}};
  chain.weights = {1.0, 0.5};
  REQUIRE(validate_chain(chain, 5).passed);
}

TEST_CASE("validate_chain: forbidden image transition is named") {
  // target forbids 1->1 but the map sends the legal 2->2 onto it
  FactorChain chain;
  chain.levels = {Sft::full_shift(3), twt::golden_mean()};
  chain.symbol_maps = {{0, 0, 1}};
  chain.weights = {1.0, 1.0};
  auto report = validate_chain(chain, 2);
  REQUIRE_FALSE(report.passed);
  bool mentions = false;
  for (const auto& issue : report.issues)
    if (issue.what.find("2->2") != std::string::npos) mentions = true;
  REQUIRE(mentions);
}

TEST_CASE("validate_chain: empty fiber is reported") {
  // X: 2-cycle (words alternate), Y: full shift on {0,1}; the identity map
  // sends X into Y but word 00 in Y has no preimage
  FactorChain chain;
  chain.levels = {twt::two_cycle(), Sft::full_shift(2)};
  chain.symbol_maps = {{0, 1}};
  chain.weights = {1.0, 1.0};
  auto report = validate_chain(chain, 2);
  REQUIRE_FALSE(report.passed);
  bool empty_fiber = false;
  for (const auto& issue : report.issues)
    if (issue.what.find("empty fiber") != std::string::npos) empty_fiber = true;
  REQUIRE(empty_fiber);
}

TEST_CASE("tau composes symbol maps") {
  FactorChain chain;
  chain.levels = {Sft::full_shift(4), Sft::full_shift(2), Sft(1, {{1}})};
  chain.symbol_maps = {{0, 0, 1, 1}, {0, 0}};
  chain.weights = {1.0, 0.5, 0.25};
  REQUIRE(chain.tau(0) == std::vector<Symbol>{0, 1, 2, 3});
  REQUIRE(chain.tau(1) == std::vector<Symbol>{0, 0, 1, 1});
  REQUIRE(chain.tau(2) == std::vector<Symbol>{0, 0, 0, 0});
}
