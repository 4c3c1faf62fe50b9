#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <functional>

#include "helpers.hpp"
#include "thermoweight/thermoweight.hpp"

using namespace thermoweight;
using Catch::Approx;

namespace {

const double kLog2 = std::log(2.0);
const double kLog3 = std::log(3.0);

// brute-force oracle for locally-constant values: enumerate all legal
// (w-1)-extensions and take the max of exp(sum f)
double lc_oracle(const Sft& x, const LocallyConstant& lc, const Word& word) {
  if (word.empty()) return 1.0;
  if (!x.legal(word)) return 0.0;
  const int B = lc.window - 1;
  LanguageIndex lw(x, lc.window);
  if (B == 0) {
    double acc = 0.0;
    for (Symbol s : word) acc += lc.log_table[s];
    return std::exp(acc);
  }
  double best = -std::numeric_limits<double>::infinity();
  Word e;
  std::function<void(Symbol)> rec = [&](Symbol last) {
    if (static_cast<int>(e.size()) == B) {
      Word full = word;
      full.insert(full.end(), e.begin(), e.end());
      double acc = 0.0;
      for (std::size_t t = 0; t < word.size(); ++t)
        acc += lc.log_table[lw.rank(std::span(full).subspan(t, lc.window))];
      best = std::max(best, acc);
      return;
    }
    for (Symbol s : x.successors(last)) {
      e.push_back(s);
      rec(s);
      e.pop_back();
    }
  };
  rec(word.back());
  return std::exp(best);
}

}  // namespace

TEST_CASE("log-sum-exp basics") {
  LogValue z;
  REQUIRE(z.is_zero());
  REQUIRE((z + LogValue::one()).log() == Approx(0.0));
  LogValue two = LogValue::one() + LogValue::one();
  REQUIRE(two.log() == Approx(kLog2));
  REQUIRE(two.pow(10.0).log() == Approx(10 * kLog2));
  REQUIRE((two / two).log() == Approx(0.0));

  OnlineLogSum acc;
  for (int i = 0; i < 1000; ++i) acc.add(-700.0);
  REQUIRE(acc.result_log() == Approx(-700.0 + std::log(1000.0)).epsilon(1e-12));
}

TEST_CASE("phi_eval: constant") {
  Sft x = Sft::full_shift(2);
  Potential phi;
  REQUIRE(phi_eval(x, phi, Word{0, 1, 1, 0}).log() == 0.0);
  REQUIRE(phi_eval(x, phi, Word{}).log() == 0.0);
}

TEST_CASE("phi_eval: word outside the language gives zero") {
  Sft x = twt::golden_mean();
  Potential phi;
  REQUIRE(phi_eval(x, phi, Word{1, 1}).is_zero());
  LocallyConstant lc{1, {0.3, -0.2}};
  REQUIRE(phi_eval(x, Potential{lc}, Word{1, 1}).is_zero());
}

TEST_CASE("phi_eval: window-1 additive case") {
  Sft x = Sft::full_shift(2);
  LocallyConstant lc{1, {kLog2, 0.0}};
  REQUIRE(phi_eval(x, Potential{lc}, Word{0, 1}).linear() == Approx(2.0));
}

TEST_CASE("phi_eval: window-2 takes the best extension") {
  Sft x = Sft::full_shift(2);
  // f(00)=0, f(01)=log 3, f(10)=f(11)=log 2
  LocallyConstant lc{2, {0.0, kLog3, kLog2, kLog2}};
  REQUIRE(phi_eval(x, Potential{lc}, Word{0}).linear() == Approx(3.0));
  // phi(01) = exp(f(01)) * max over b of exp(f(1b)) = 3 * 2
  REQUIRE(phi_eval(x, Potential{lc}, Word{0, 1}).linear() == Approx(6.0));
}

TEST_CASE("phi_eval: empty word is one for every kind") {
  Sft x = twt::golden_mean();
  REQUIRE(phi_eval(x, Potential{}, Word{}).log() == 0.0);
  LocallyConstant lc{2, {0.1, -0.3, 0.2}};
  REQUIRE(phi_eval(x, Potential{lc}, Word{}).log() == 0.0);
  MatrixProduct mp{1, {{0.5}, {-0.5}}};
  REQUIRE(phi_eval(x, Potential{mp}, Word{}).log() == 0.0);
}

TEST_CASE("phi_eval: locally constant matches the brute-force sup") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    Sft x = twt::random_sft(rng);
    for (int w = 1; w <= 3; ++w) {
      LocallyConstant lc;
      lc.window = w;
      lc.log_table.resize(LanguageIndex(x, w).size());
      std::uniform_real_distribution<double> val(-1.0, 1.0);
      for (double& v : lc.log_table) v = val(rng);
      Potential phi{lc};
      for (int len = 1; len <= 4; ++len)
        for (const Word& word : twt::naive_words(x, len)) {
          const double got = phi_eval(x, phi, word).linear();
          const double want = lc_oracle(x, lc, word);
          REQUIRE(got == Approx(want).epsilon(1e-10));
        }
    }
  }
}

TEST_CASE("phi_eval: matrix product is the entry sum of the product") {
  Sft x = Sft::full_shift(2);
  const double ninf = -std::numeric_limits<double>::infinity();
  // M0 = [[1,1],[0,1]], M1 = [[2,0],[1,1]] stored as logs
  MatrixProduct mp{2, {{0.0, 0.0, ninf, 0.0}, {kLog2, ninf, 0.0, 0.0}}};
  Potential phi{mp};
  // M0 * M1 = [[3,1],[1,1]], entry sum 6
  REQUIRE(phi_eval(x, phi, Word{0, 1}).linear() == Approx(6.0));
  REQUIRE(phi_eval(x, phi, Word{1}).linear() == Approx(4.0));
}

TEST_CASE("materialized tables agree with per-word evaluation") {
  std::mt19937_64 rng(5150);
  for (int trial = 0; trial < 10; ++trial) {
    Sft x = twt::random_sft(rng);
    Potential phi = twt::random_potential(x, rng);
    const int n = 5;
    auto table = materialize_potential_table(x, phi, n);
    LanguageIndex li(x, n);
    PotentialEvaluator ev(x, phi);
    li.for_each_word([&](std::span<const Symbol> w, std::uint64_t r) {
      REQUIRE(table[r] == Approx(ev(w).log()).margin(1e-12));
    });
  }
}

TEST_CASE("estimate_constants: constant potential on the full shift") {
  Sft x = Sft::full_shift(2);
  auto consts = estimate_constants(x, Potential{}, 0, 4);
  REQUIRE(consts.c.log() == Approx(0.0).margin(1e-14));
  REQUIRE(consts.gamma.log() == Approx(0.0).margin(1e-14));
  REQUIRE(consts.certified);
}

TEST_CASE("estimate_constants: normalized Bernoulli weights") {
  Sft x = Sft::full_shift(2);
  // exp f = (0.3, 0.7)
  LocallyConstant lc{1, {std::log(0.3), std::log(0.7)}};
  auto consts = estimate_constants(x, Potential{lc}, 0, 4);
  REQUIRE(consts.c.log() == Approx(0.0).margin(1e-12));
  // min over I of max_i phi(iI)/phi(I) = the largest weight
  REQUIRE(consts.gamma.linear() == Approx(0.7).epsilon(1e-12));
  REQUIRE(consts.certified);  // L = 4 >= 2w + p = 2
}

TEST_CASE("estimate_constants: constant on the golden mean") {
  Sft x = twt::golden_mean();
  auto consts = estimate_constants(x, Potential{}, 1, 4);
  REQUIRE(consts.c.log() == Approx(0.0).margin(1e-14));
  REQUIRE(consts.gamma.log() == Approx(0.0).margin(1e-14));
}

TEST_CASE("estimate_constants: sub-multiplicativity and connector audits") {
  std::mt19937_64 rng(777);
  for (int trial = 0; trial < 12; ++trial) {
    Sft x = twt::random_sft(rng);
    Potential phi = twt::random_potential(x, rng);
    const int p = *specification_gaps(x).weak_p;
    const int L = 4;
    auto consts = estimate_constants(x, phi, p, L);
    PotentialEvaluator ev(x, phi);
    // (1) phi(IJ) <= c^{-1} phi(I) phi(J) for the stored c
    for (int n = 2; n <= L; ++n)
      for (const Word& w : twt::naive_words(x, n))
        for (int q = 1; q < n; ++q) {
          Word a(w.begin(), w.begin() + q), b(w.begin() + q, w.end());
          if (ev(w).is_zero()) continue;
          const double lhs = ev(w).log();
          const double rhs = -consts.c.log() + ev(a).log() + ev(b).log();
          REQUIRE(lhs <= rhs + 1e-9);
        }
    // (2) some admissible connector achieves phi(IKJ) >= c phi(I) phi(J)
    for (const Word& a : twt::naive_words(x, 2))
      for (const Word& b : twt::naive_words(x, 2)) {
        if (ev(a).is_zero() || ev(b).is_zero()) continue;
        double best = -std::numeric_limits<double>::infinity();
        for (int q = 0; q <= p; ++q)
          for (const Word& con : twt::naive_words(x, q)) {
            Word j = a;
            j.insert(j.end(), con.begin(), con.end());
            j.insert(j.end(), b.begin(), b.end());
            if (x.legal(j)) best = std::max(best, ev(j).log());
          }
        REQUIRE(best >= consts.c.log() + ev(a).log() + ev(b).log() - 1e-9);
      }
  }
}

TEST_CASE("estimate_constants: degenerate potential rejected") {
  Sft x = Sft::full_shift(2);
  const double ninf = -std::numeric_limits<double>::infinity();
  MatrixProduct mp{1, {{ninf}, {ninf}}};
  REQUIRE_THROWS_AS(estimate_constants(x, Potential{mp}, 0, 3),
                    validation_error);
}

TEST_CASE("matrix-product constants are flagged empirical") {
  Sft x = Sft::full_shift(2);
  MatrixProduct mp{1, {{0.2}, {-0.4}}};
  auto consts = estimate_constants(x, Potential{mp}, 0, 4);
  REQUIRE_FALSE(consts.certified);
}

TEST_CASE("bounded oscillation of locally constant potentials") {
  // extension spread of the Birkhoff sum stays below (w-1)(max f - min f)
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 8; ++trial) {
    Sft x = twt::random_sft(rng);
    const int w = 2;
    LocallyConstant lc;
    lc.window = w;
    lc.log_table.resize(LanguageIndex(x, w).size());
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    for (double& v : lc.log_table) v = val(rng);
    const double fspread =
        *std::max_element(lc.log_table.begin(), lc.log_table.end()) -
        *std::min_element(lc.log_table.begin(), lc.log_table.end());
    LanguageIndex lw(x, w);
    for (int n = 2; n <= 6; ++n)
      for (const Word& word : twt::naive_words(x, n)) {
        double best = -1e300, worst = 1e300;
        for (Symbol s : x.successors(word.back())) {
          Word full = word;
          full.push_back(s);
          double acc = 0.0;
          for (std::size_t t = 0; t < word.size(); ++t)
            acc += lc.log_table[lw.rank(std::span(full).subspan(t, w))];
          best = std::max(best, acc);
          worst = std::min(worst, acc);
        }
        REQUIRE(best - worst <= (w - 1) * fspread + 1e-9);
      }
  }
}
