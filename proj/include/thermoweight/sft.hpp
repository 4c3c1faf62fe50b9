#ifndef THERMOWEIGHT_SFT_HPP
#define THERMOWEIGHT_SFT_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "thermoweight/errors.hpp"

namespace thermoweight {

using Symbol = int;
using Word = std::vector<Symbol>;

inline std::string word_to_string(std::span<const Symbol> w, int alphabet_size) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (alphabet_size > 10 && i) s += '.';
    s += std::to_string(w[i]);
  }
  return s;
}

// One-sided subshift of finite type over the alphabet {0, ..., K-1}.
// Construction normalizes to the essential core: symbols without a
// successor or without a predecessor are deleted iteratively and the
// survivors renumbered contiguously.  `original_symbol` maps the kept
// symbols back to the caller's numbering, `removed_symbols` records the
// deletions for validation logs.
class Sft {
 public:
  Sft() = default;

  Sft(int alphabet_size, const std::vector<std::vector<int>>& transitions) {
    if (alphabet_size < 1) throw validation_error("alphabet size must be >= 1");
    if (static_cast<int>(transitions.size()) != alphabet_size)
      throw validation_error("transition matrix has " +
                             std::to_string(transitions.size()) + " rows, expected " +
                             std::to_string(alphabet_size));
    for (int a = 0; a < alphabet_size; ++a)
      if (static_cast<int>(transitions[a].size()) != alphabet_size)
        throw validation_error("transition row " + std::to_string(a) +
                               " has wrong length");

    std::vector<char> alive(alphabet_size, 1);
    for (bool changed = true; changed;) {
      changed = false;
      for (int a = 0; a < alphabet_size; ++a) {
        if (!alive[a]) continue;
        bool has_succ = false, has_pred = false;
        for (int b = 0; b < alphabet_size; ++b) {
          if (alive[b] && transitions[a][b]) has_succ = true;
          if (alive[b] && transitions[b][a]) has_pred = true;
        }
        if (!has_succ || !has_pred) {
          alive[a] = 0;
          removed_symbols_.push_back(a);
          changed = true;
        }
      }
    }
    for (int a = 0; a < alphabet_size; ++a)
      if (alive[a]) original_symbol_.push_back(a);
    if (original_symbol_.empty())
      throw validation_error("empty shift space: every symbol was deleted by the "
                             "essential-core normalization");
    std::sort(removed_symbols_.begin(), removed_symbols_.end());

    k_ = static_cast<int>(original_symbol_.size());
    succ_.resize(k_);
    pred_.resize(k_);
    std::vector<int> new_index(alphabet_size, -1);
    for (int i = 0; i < k_; ++i) new_index[original_symbol_[i]] = i;
    for (int a = 0; a < alphabet_size; ++a) {
      if (!alive[a]) continue;
      for (int b = 0; b < alphabet_size; ++b)
        if (alive[b] && transitions[a][b]) {
          succ_[new_index[a]].push_back(new_index[b]);
          pred_[new_index[b]].push_back(new_index[a]);
        }
    }
  }

  static Sft full_shift(int alphabet_size) {
    std::vector<std::vector<int>> t(alphabet_size,
                                    std::vector<int>(alphabet_size, 1));
    return Sft(alphabet_size, t);
  }

  int alphabet_size() const { return k_; }
  const std::vector<Symbol>& successors(Symbol a) const { return succ_[a]; }
  const std::vector<Symbol>& predecessors(Symbol a) const { return pred_[a]; }
  bool edge(Symbol a, Symbol b) const {
    return std::binary_search(succ_[a].begin(), succ_[a].end(), b);
  }
  bool is_full_shift() const {
    for (int a = 0; a < k_; ++a)
      if (static_cast<int>(succ_[a].size()) != k_) return false;
    return true;
  }

  const std::vector<int>& original_symbol() const { return original_symbol_; }
  const std::vector<int>& removed_symbols() const { return removed_symbols_; }

  bool legal(std::span<const Symbol> w) const {
    for (Symbol s : w)
      if (s < 0 || s >= k_) return false;
    for (std::size_t i = 1; i < w.size(); ++i)
      if (!edge(w[i - 1], w[i])) return false;
    return true;
  }

 private:
  int k_ = 0;
  std::vector<std::vector<Symbol>> succ_;  // sorted
  std::vector<std::vector<Symbol>> pred_;  // sorted
  std::vector<int> original_symbol_;
  std::vector<int> removed_symbols_;
};

// Path counts and lexicographic rank/unrank for L_n(X).  The word rank
// (index within the lex-ordered language) is the canonical key all dense
// tables use.
class LanguageIndex {
 public:
  LanguageIndex(Sft&& x, int n) = delete;  // keeps a reference to the SFT
  LanguageIndex(const Sft& x, int n) : x_(&x), n_(n) {
    if (n < 0) throw validation_error("word length must be >= 0");
    const int k = x.alphabet_size();
    ext_.assign(n + 1, std::vector<std::uint64_t>(k, 1));
    for (int len = 2; len <= n; ++len)
      for (int a = 0; a < k; ++a) {
        std::uint64_t c = 0;
        for (Symbol b : x.successors(a)) c = sat_add(c, ext_[len - 1][b]);
        ext_[len][a] = c;
      }
    if (n == 0) {
      total_ = 1;
    } else {
      std::uint64_t c = 0;
      for (int a = 0; a < k; ++a) c = sat_add(c, ext_[n][a]);
      total_ = c;
    }
  }

  const Sft& sft() const { return *x_; }
  int length() const { return n_; }
  std::uint64_t size() const { return total_; }

  // Number of legal words of length `len` starting with symbol a (len >= 1).
  std::uint64_t extensions(int len, Symbol a) const { return ext_[len][a]; }

  std::uint64_t rank(std::span<const Symbol> w) const {
    std::uint64_t r = 0;
    for (int t = 0; t < n_; ++t) {
      if (t == 0) {
        for (Symbol s = 0; s < w[0]; ++s) r += ext_[n_][s];
      } else {
        for (Symbol s : x_->successors(w[t - 1])) {
          if (s >= w[t]) break;
          r += ext_[n_ - t][s];
        }
      }
    }
    return r;
  }

  Word unrank(std::uint64_t r) const {
    Word w;
    w.reserve(n_);
    for (int t = 0; t < n_; ++t) {
      if (t == 0) {
        for (Symbol s = 0;; ++s) {
          if (ext_[n_][s] > r) {
            w.push_back(s);
            break;
          }
          r -= ext_[n_][s];
        }
      } else {
        for (Symbol s : x_->successors(w.back())) {
          if (ext_[n_ - t][s] > r) {
            w.push_back(s);
            break;
          }
          r -= ext_[n_ - t][s];
        }
      }
    }
    return w;
  }

  // Lexicographic depth-first walk over L_n.  push(sym, depth) fires when a
  // symbol is appended (depth = 1-based position), pop(depth) when removed,
  // leaf(word, rank) at each complete word.  Ranks appear in order 0,1,...
  template <class Push, class Pop, class Leaf>
  void walk(Push&& push, Pop&& pop, Leaf&& leaf) const {
    if (n_ == 0) {
      leaf(std::span<const Symbol>{}, std::uint64_t{0});
      return;
    }
    Word w;
    w.reserve(n_);
    std::uint64_t next_rank = 0;
    const int k = x_->alphabet_size();
    std::function<void()> rec = [&]() {
      const int depth = static_cast<int>(w.size()) + 1;
      if (depth == 1) {
        for (Symbol s = 0; s < k; ++s) step(s, depth, rec, w, next_rank, push,
                                            pop, leaf);
      } else {
        for (Symbol s : x_->successors(w.back()))
          step(s, depth, rec, w, next_rank, push, pop, leaf);
      }
    };
    rec();
  }

  template <class Leaf>
  void for_each_word(Leaf&& leaf) const {
    walk([](Symbol, int) {}, [](int) {}, std::forward<Leaf>(leaf));
  }

 private:
  template <class Push, class Pop, class Leaf>
  void step(Symbol s, int depth, std::function<void()>& rec, Word& w,
            std::uint64_t& next_rank, Push&& push, Pop&& pop,
            Leaf&& leaf) const {
    if (ext_[n_ - depth + 1][s] == 0) return;
    w.push_back(s);
    push(s, depth);
    if (depth == n_)
      leaf(std::span<const Symbol>(w), next_rank++);
    else
      rec();
    pop(depth);
    w.pop_back();
  }

  static std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
    constexpr std::uint64_t inf = ~std::uint64_t{0};
    return (a > inf - b) ? inf : a + b;
  }

  const Sft* x_;
  int n_;
  std::vector<std::vector<std::uint64_t>> ext_;
  std::uint64_t total_;
};

// All length-n words of X in lexicographic order.
inline std::vector<Word> enumerate_language(const Sft& x, int n,
                                            const ComputeCaps& caps = {}) {
  LanguageIndex li(x, n);
  check_word_cap(li.size(), caps, "enumerate_language");
  std::vector<Word> out;
  out.reserve(li.size());
  li.for_each_word([&](std::span<const Symbol> w, std::uint64_t) {
    out.emplace_back(w.begin(), w.end());
  });
  return out;
}

struct SpecificationGaps {
  std::optional<int> weak_p;   // connector of length <= p always exists
  std::optional<int> exact_p;  // connector of length exactly p always exists
};

// Minimal (weak / exact) specification gaps, decided at the symbol-pair
// level, which is exact for SFTs: a connector of length q between words
// ending in b and starting in a is a path of q+1 edges from b to a.
inline SpecificationGaps specification_gaps(const Sft& x) {
  const int k = x.alphabet_size();
  SpecificationGaps gaps;

  // weak: max over pairs of (shortest path length - 1); BFS from each symbol.
  int weak = 0;
  bool connected = true;
  for (int a = 0; a < k && connected; ++a) {
    std::vector<int> dist(k, -1);
    std::vector<Symbol> queue{static_cast<Symbol>(a)};
    std::vector<Symbol> next;
    int level = 0;
    while (!queue.empty() && level < k + 1) {
      ++level;
      next.clear();
      for (Symbol u : queue)
        for (Symbol v : x.successors(u))
          if (dist[v] < 0) {
            dist[v] = level;
            next.push_back(v);
          }
      queue.swap(next);
    }
    for (int b = 0; b < k; ++b) {
      if (dist[b] < 0) {
        connected = false;
        break;
      }
      weak = std::max(weak, dist[b] - 1);
    }
  }
  if (connected) gaps.weak_p = weak;

  // exact: minimal p with A^{p+1} strictly positive.  Wielandt's bound
  // (k-1)^2 + 1 limits how far a primitive matrix can take to become
  // positive, so the scan is finite.
  if (connected) {
    const int limit = (k - 1) * (k - 1) + 1;
    std::vector<char> reach(static_cast<std::size_t>(k) * k, 0);
    for (int a = 0; a < k; ++a)
      for (Symbol b : x.successors(a)) reach[a * k + b] = 1;
    for (int len = 1; len <= limit; ++len) {
      bool all = true;
      for (std::size_t i = 0; i < reach.size() && all; ++i)
        if (!reach[i]) all = false;
      if (all) {
        gaps.exact_p = len - 1;
        break;
      }
      std::vector<char> nxt(reach.size(), 0);
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
          if (reach[a * k + b])
            for (Symbol c : x.successors(b)) nxt[a * k + c] = 1;
      reach.swap(nxt);
    }
  }
  return gaps;
}

// Higher block representation: alphabet = L_m(X), transitions by
// (m-1)-overlap with the union word legal.  encode/decode are mutually
// inverse bijections between L_{n+m-1}(X) and L_n(recoded) for n >= 1.
struct HigherBlockRecoding {
  Sft recoded;
  int m = 1;
  std::vector<Word> blocks;  // recoded symbol -> original m-block, lex order

  Word encode(std::span<const Symbol> w) const {
    if (static_cast<int>(w.size()) < m)
      throw depth_error("encode needs a word of length >= m");
    Word out;
    out.reserve(w.size() - m + 1);
    for (std::size_t t = 0; t + m <= w.size(); ++t) {
      Word blk(w.begin() + t, w.begin() + t + m);
      auto it = std::lower_bound(blocks.begin(), blocks.end(), blk);
      if (it == blocks.end() || *it != blk)
        throw validation_error("encode: block not in L_m");
      out.push_back(static_cast<Symbol>(it - blocks.begin()));
    }
    return out;
  }

  Word decode(std::span<const Symbol> w) const {
    if (w.empty()) throw depth_error("decode needs a nonempty word");
    Word out = blocks[w[0]];
    for (std::size_t t = 1; t < w.size(); ++t) out.push_back(blocks[w[t]].back());
    return out;
  }
};

inline HigherBlockRecoding higher_block_recode(const Sft& x, int m,
                                               const ComputeCaps& caps = {}) {
  if (m < 1) throw depth_error("higher-block order must be >= 1");
  LanguageIndex lm(x, m);
  if (lm.size() == 0) throw validation_error("L_m is empty");
  if (lm.size() > static_cast<std::uint64_t>(caps.max_alphabet))
    throw resource_error("higher_block_recode: |L_m| = " +
                         std::to_string(lm.size()) + " exceeds alphabet cap " +
                         std::to_string(caps.max_alphabet));

  HigherBlockRecoding rec;
  rec.m = m;
  rec.blocks = enumerate_language(x, m, caps);
  const int kb = static_cast<int>(rec.blocks.size());
  std::vector<std::vector<int>> t(kb, std::vector<int>(kb, 0));
  for (int u = 0; u < kb; ++u)
    for (int v = 0; v < kb; ++v) {
      const Word& wu = rec.blocks[u];
      const Word& wv = rec.blocks[v];
      bool overlap = true;
      for (int i = 0; i + 1 < m; ++i)
        if (wu[i + 1] != wv[i]) {
          overlap = false;
          break;
        }
      if (overlap && x.edge(wu.back(), wv.back())) t[u][v] = 1;
    }
  rec.recoded = Sft(kb, t);
  // Blocks of an essential SFT are bi-extendable, so normalization keeps
  // the full block alphabet; anything else is a bug.
  if (rec.recoded.alphabet_size() != kb)
    throw validation_error("higher_block_recode: recoded SFT dropped blocks");
  return rec;
}

}  // namespace thermoweight

#endif
