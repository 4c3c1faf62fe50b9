#ifndef THERMOWEIGHT_TEST_HELPERS_HPP
#define THERMOWEIGHT_TEST_HELPERS_HPP

#include <random>
#include <vector>

#include "thermoweight/thermoweight.hpp"

namespace twt {

using namespace thermoweight;

inline Sft golden_mean() { return Sft(2, {{1, 1}, {1, 0}}); }
inline Sft two_cycle() { return Sft(2, {{0, 1}, {1, 0}}); }

// Independent word enumerator: plain recursion over the transition matrix,
// no rank tables.  The oracle for the language machinery.
inline void naive_words_rec(const Sft& x, int n, Word& w,
                            std::vector<Word>& out) {
  if (static_cast<int>(w.size()) == n) {
    out.push_back(w);
    return;
  }
  for (Symbol s = 0; s < x.alphabet_size(); ++s) {
    if (!w.empty() && !x.edge(w.back(), s)) continue;
    w.push_back(s);
    naive_words_rec(x, n, w, out);
    w.pop_back();
  }
}

inline std::vector<Word> naive_words(const Sft& x, int n) {
  std::vector<Word> out;
  Word w;
  naive_words_rec(x, n, w, out);
  return out;
}

// Random essential SFT: draws transition matrices until construction
// succeeds with a connected result.
inline Sft random_sft(std::mt19937_64& rng, int max_symbols = 4) {
  std::uniform_int_distribution<int> ksize(2, max_symbols);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (;;) {
    const int k = ksize(rng);
    std::vector<std::vector<int>> t(k, std::vector<int>(k, 0));
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) t[a][b] = coin(rng) < 0.6 ? 1 : 0;
    try {
      Sft x(k, t);
      if (specification_gaps(x).weak_p) return x;
    } catch (const validation_error&) {
    }
  }
}

// Random chain over x by merging symbols into a smaller alphabet via the
// existential-image transition relation.
inline FactorChain random_chain(std::mt19937_64& rng, int levels_max = 3) {
  std::uniform_int_distribution<int> lv(1, levels_max);
  std::uniform_real_distribution<double> wdist(0.0, 2.0);
  const int k = lv(rng);
  FactorChain chain;
  chain.levels.push_back(random_sft(rng));
  chain.weights.push_back(wdist(rng) + 0.1);
  for (int i = 1; i < k; ++i) {
    const Sft& src = chain.levels.back();
    const int ks = src.alphabet_size();
    if (ks <= 1) break;
    std::uniform_int_distribution<int> tsize(1, ks - 1);
    const int kt = tsize(rng);
    std::vector<Symbol> map(ks);
    for (int s = 0; s < ks; ++s)
      map[s] = (s < kt) ? s : std::uniform_int_distribution<int>(0, kt - 1)(rng);
    std::vector<std::vector<int>> trans(kt, std::vector<int>(kt, 0));
    for (Symbol a = 0; a < ks; ++a)
      for (Symbol b : src.successors(a)) trans[map[a]][map[b]] = 1;
    Sft tgt(kt, trans);
    if (tgt.alphabet_size() != kt) break;  // normalization shrank the image
    chain.symbol_maps.push_back(map);
    chain.levels.push_back(tgt);
    chain.weights.push_back(wdist(rng));
  }
  return chain;
}

// Random potential on x: Constant or LocallyConstant with window 1..2.
inline Potential random_potential(const Sft& x, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_real_distribution<double> val(-1.5, 1.0);
  const int which = kind(rng);
  if (which == 0) return Potential{};
  LocallyConstant lc;
  lc.window = (which == 1) ? 1 : 2;
  lc.log_table.resize(LanguageIndex(x, lc.window).size());
  for (double& v : lc.log_table) v = val(rng);
  return Potential{lc};
}

}  // namespace twt

#endif
