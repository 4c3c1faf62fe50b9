#ifndef THERMOWEIGHT_CHAIN_HPP
#define THERMOWEIGHT_CHAIN_HPP

#include <span>
#include <string>
#include <vector>

#include "thermoweight/errors.hpp"
#include "thermoweight/sft.hpp"

namespace thermoweight {

// One-block factor map induced by a symbol map.
struct FactorMap {
  Sft source;
  Sft target;
  std::vector<Symbol> symbol_map;  // size = source alphabet

  Word apply(std::span<const Symbol> w) const {
    Word out;
    out.reserve(w.size());
    for (Symbol s : w) out.push_back(symbol_map[s]);
    return out;
  }
};

// Tower X_1 -> ... -> X_k of one-block factor maps with weight vector a.
struct FactorChain {
  std::vector<Sft> levels;
  std::vector<std::vector<Symbol>> symbol_maps;  // [i]: levels[i] -> levels[i+1]
  std::vector<double> weights;                   // a_1 > 0, a_i >= 0

  int depth() const { return static_cast<int>(levels.size()); }

  FactorMap map_at(int i) const {
    return FactorMap{levels[i], levels[i + 1], symbol_maps[i]};
  }

  // Composed symbol map tau_i : X_1 -> X_{i+1}; tau_0 is the identity.
  std::vector<Symbol> tau(int i) const {
    std::vector<Symbol> t(levels[0].alphabet_size());
    for (std::size_t s = 0; s < t.size(); ++s) t[s] = static_cast<Symbol>(s);
    for (int j = 0; j < i; ++j)
      for (auto& s : t) s = symbol_maps[j][s];
    return t;
  }

  // Prefix sums A_i = a_1 + ... + a_i.
  std::vector<double> weight_prefix_sums() const {
    std::vector<double> acc(weights.size());
    double s = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc[i] = (s += weights[i]);
    return acc;
  }

  static FactorChain single(Sft x, double a1 = 1.0) {
    FactorChain c;
    c.levels.push_back(std::move(x));
    c.weights.push_back(a1);
    return c;
  }
};

struct ValidationIssue {
  int level = 0;  // index of the map X_{level+1} -> X_{level+2}, 0-based
  std::string what;
};

struct ValidationReport {
  bool passed = true;
  std::vector<std::string> notes;  // normalization log etc.
  std::vector<ValidationIssue> issues;

  void fail(int level, std::string what) {
    passed = false;
    issues.push_back({level, std::move(what)});
  }

  std::string summary() const {
    if (passed) return "ok";
    std::string s;
    for (const auto& i : issues) {
      if (!s.empty()) s += "; ";
      s += "map " + std::to_string(i.level + 1) + ": " + i.what;
    }
    return s;
  }
};

namespace detail {

// Fiber non-emptiness of a target word under a one-block map: subset DP
// over source symbols consistent with the prefix.
inline bool fiber_nonempty(const Sft& x, const std::vector<Symbol>& map,
                           std::span<const Symbol> target_word) {
  const int k = x.alphabet_size();
  std::vector<char> cur(k, 0), nxt(k, 0);
  for (int s = 0; s < k; ++s) cur[s] = (map[s] == target_word[0]);
  for (std::size_t t = 1; t < target_word.size(); ++t) {
    std::fill(nxt.begin(), nxt.end(), 0);
    for (int s = 0; s < k; ++s)
      if (cur[s])
        for (Symbol s2 : x.successors(s))
          if (map[s2] == target_word[t]) nxt[s2] = 1;
    cur.swap(nxt);
  }
  for (int s = 0; s < k; ++s)
    if (cur[s]) return true;
  return false;
}

}  // namespace detail

// Checks every FactorMap invariant and, for word lengths up to `depth`,
// that the induced word maps send L_n(X_i) onto L_n(X_{i+1}).  Words with
// empty fibers are reported by name.
inline ValidationReport validate_chain(const FactorChain& chain, int depth,
                                       const ComputeCaps& caps = {}) {
  ValidationReport report;
  if (chain.levels.empty()) {
    report.fail(0, "chain has no levels");
    return report;
  }
  if (chain.weights.size() != chain.levels.size()) {
    report.fail(0, "weight vector length does not match the number of levels");
    return report;
  }
  if (!(chain.weights[0] > 0)) report.fail(0, "a_1 must be > 0");
  for (std::size_t i = 1; i < chain.weights.size(); ++i)
    if (chain.weights[i] < 0)
      report.fail(0, "a_" + std::to_string(i + 1) + " must be >= 0");
  if (chain.symbol_maps.size() + 1 != chain.levels.size()) {
    report.fail(0, "expected " + std::to_string(chain.levels.size() - 1) +
                       " factor maps");
    return report;
  }
  for (const Sft& x : chain.levels)
    for (int removed : x.removed_symbols())
      report.notes.push_back("normalization removed symbol " +
                             std::to_string(removed));

  for (std::size_t i = 0; i + 1 < chain.levels.size(); ++i) {
    const Sft& x = chain.levels[i];
    const Sft& y = chain.levels[i + 1];
    const auto& map = chain.symbol_maps[i];
    const int li = static_cast<int>(i);
    if (static_cast<int>(map.size()) != x.alphabet_size()) {
      report.fail(li, "symbol map has wrong size");
      continue;
    }
    bool shape_ok = true;
    for (Symbol s = 0; s < x.alphabet_size(); ++s)
      if (map[s] < 0 || map[s] >= y.alphabet_size()) {
        report.fail(li, "symbol " + std::to_string(s) + " maps outside the "
                        "target alphabet");
        shape_ok = false;
      }
    if (!shape_ok) continue;

    // every legal source transition must map to a legal target transition
    for (Symbol a = 0; a < x.alphabet_size(); ++a)
      for (Symbol b : x.successors(a))
        if (!y.edge(map[a], map[b]))
          report.fail(li, "transition " + std::to_string(a) + "->" +
                              std::to_string(b) + " maps onto forbidden " +
                              std::to_string(map[a]) + "->" +
                              std::to_string(map[b]));

    // symbol surjectivity
    std::vector<char> hit(y.alphabet_size(), 0);
    for (Symbol s = 0; s < x.alphabet_size(); ++s) hit[map[s]] = 1;
    for (Symbol b = 0; b < y.alphabet_size(); ++b)
      if (!hit[b])
        report.fail(li, "target symbol " + std::to_string(b) + " is never hit");

    if (!report.passed) continue;

    // word-level surjectivity up to the tested depth
    for (int n = 1; n <= depth; ++n) {
      LanguageIndex ly(y, n);
      check_word_cap(ly.size(), caps, "validate_chain");
      ly.for_each_word([&](std::span<const Symbol> w, std::uint64_t) {
        if (!detail::fiber_nonempty(x, map, w))
          report.fail(li, "word " + word_to_string(w, y.alphabet_size()) +
                              " in L_" + std::to_string(n) +
                              "(target) has an empty fiber");
      });
      if (!report.passed) break;
    }
  }
  return report;
}

inline void require_valid(const FactorChain& chain, int depth,
                          const ComputeCaps& caps = {}) {
  ValidationReport r = validate_chain(chain, depth, caps);
  if (!r.passed) throw validation_error("chain validation failed: " + r.summary());
}

}  // namespace thermoweight

#endif
