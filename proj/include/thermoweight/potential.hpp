#ifndef THERMOWEIGHT_POTENTIAL_HPP
#define THERMOWEIGHT_POTENTIAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "thermoweight/chain.hpp"
#include "thermoweight/errors.hpp"
#include "thermoweight/log_value.hpp"
#include "thermoweight/sft.hpp"

namespace thermoweight {

// phi(I) = 1 on the whole language.
struct Constant {};

// phi(I) = sup over x in X with prefix I of exp(S_n f(x)), where f depends
// on the first `window` coordinates.  log_table holds log f-values indexed
// by the rank of the window block in L_window(X).  The sup is exact: it is
// a max over legal (window-1)-extensions, computed by dynamic programming.
struct LocallyConstant {
  int window = 1;
  std::vector<double> log_table;
};

// phi(I) = entry sum of M_{i_1} ... M_{i_n}; one nonnegative dim x dim
// matrix per symbol, entries stored as natural logs (-inf encodes 0).
struct MatrixProduct {
  int dim = 1;
  std::vector<std::vector<double>> log_mats;  // per symbol, row-major
};

struct Potential {
  std::variant<Constant, LocallyConstant, MatrixProduct> kind = Constant{};

  bool is_constant() const { return std::holds_alternative<Constant>(kind); }
  const LocallyConstant* locally_constant() const {
    return std::get_if<LocallyConstant>(&kind);
  }
  const MatrixProduct* matrix_product() const {
    return std::get_if<MatrixProduct>(&kind);
  }
  int window() const {
    if (auto* lc = locally_constant()) return lc->window;
    return 1;
  }
};

namespace detail {

inline std::vector<double> log_matrix_multiply(std::span<const double> a,
                                               std::span<const double> b,
                                               int d) {
  std::vector<double> out(static_cast<std::size_t>(d) * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      OnlineLogSum acc;
      for (int l = 0; l < d; ++l) acc.add(a[i * d + l] + b[l * d + j]);
      out[i * d + j] = acc.result_log();
    }
  return out;
}

inline double log_entry_sum(std::span<const double> m) {
  OnlineLogSum acc;
  for (double e : m) acc.add(e);
  return acc.result_log();
}

// Prepared state for LocallyConstant evaluation.  B = window-1 is the
// context length; for any word of length >= B,
//   log phi(I) = det(I) + gmax[trailing B-block],
// where det sums f over the blocks fully inside I and gmax is the best
// score of a legal B-step extension.
struct LcEvaluator {
  const Sft* x = nullptr;
  int w = 1;
  int B = 0;
  std::vector<double> f;          // scaled log table over L_w ranks
  std::vector<std::int64_t> wrank;  // [rb*K+s] -> L_w rank of block(rb)+s, -1 illegal
  std::vector<std::int64_t> brank;  // [rb*K+s] -> trailing B-block rank
  std::vector<Symbol> blast;        // per B-rank, last symbol
  std::vector<double> gmax;         // per B-rank
  std::uint64_t nB = 1;             // |L_B|
  std::optional<LanguageIndex> lw_;
  std::optional<LanguageIndex> lB_;

  LcEvaluator(const Sft& host, const LocallyConstant& lc, double scale) {
    x = &host;
    w = lc.window;
    B = w - 1;
    if (w < 1) throw validation_error("locally-constant window must be >= 1");
    lw_.emplace(host, w);
    const LanguageIndex& lw = *lw_;
    if (lc.log_table.size() != lw.size())
      throw validation_error("locally-constant table has " +
                             std::to_string(lc.log_table.size()) +
                             " entries, |L_w| = " + std::to_string(lw.size()));
    f.resize(lc.log_table.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = scale * lc.log_table[i];
    if (B == 0) return;

    lB_.emplace(host, B);
    const LanguageIndex& lB = *lB_;
    nB = lB.size();
    if (nB > (std::uint64_t{1} << 31))
      throw resource_error("locally-constant context alphabet too large");
    const int k = host.alphabet_size();
    wrank.assign(nB * k, -1);
    brank.assign(nB * k, -1);
    blast.resize(nB);
    std::vector<Word> blocks = enumerate_language(host, B);
    Word wbuf;
    for (std::uint64_t rb = 0; rb < nB; ++rb) {
      const Word& blk = blocks[rb];
      blast[rb] = blk.back();
      for (Symbol s : host.successors(blk.back())) {
        wbuf.assign(blk.begin(), blk.end());
        wbuf.push_back(s);
        wrank[rb * k + s] = static_cast<std::int64_t>(lw.rank(wbuf));
        brank[rb * k + s] =
            static_cast<std::int64_t>(lB.rank(std::span(wbuf).subspan(1)));
      }
    }

    // gmax by backward DP over extension steps
    std::vector<double> cur(nB, 0.0), nxt(nB);
    for (int j = 0; j < B; ++j) {
      for (std::uint64_t rb = 0; rb < nB; ++rb) {
        double best = -std::numeric_limits<double>::infinity();
        for (Symbol s : host.successors(blast[rb])) {
          const double v = f[wrank[rb * k + s]] + cur[brank[rb * k + s]];
          best = std::max(best, v);
        }
        nxt[rb] = best;
      }
      cur.swap(nxt);
    }
    gmax = std::move(cur);
  }

  // det(I): sum of f over blocks fully inside I, in block order.
  double det(std::span<const Symbol> word, const LanguageIndex& lw) const {
    double acc = 0.0;
    for (std::size_t e = w; e <= word.size(); ++e)
      acc += f[lw.rank(word.subspan(e - w, w))];
    return acc;
  }

  double eval_log(std::span<const Symbol> word) const {
    const std::size_t n = word.size();
    if (n == 0) return 0.0;
    if (!x->legal(word)) return -std::numeric_limits<double>::infinity();
    if (B == 0) {
      double acc = 0.0;
      for (Symbol s : word) acc += f[s];
      return acc;
    }
    if (static_cast<int>(n) >= B) {
      const std::uint64_t rb = lB_->rank(word.subspan(n - B, B));
      return det(word, *lw_) + gmax[rb];
    }
    // short words: brute-force over the B-symbol extension
    double best = -std::numeric_limits<double>::infinity();
    Word buf(word.begin(), word.end());
    rec_extend(buf, n + B, 0.0, best, *lw_);
    return best;
  }

 private:
  void rec_extend(Word& buf, std::size_t final_len, double acc, double& best,
                  const LanguageIndex& lw) const {
    if (buf.size() == final_len) {
      best = std::max(best, acc);
      return;
    }
    Symbol last = buf.back();
    for (Symbol s : x->successors(last)) {
      buf.push_back(s);
      double acc2 = acc;
      if (buf.size() >= static_cast<std::size_t>(w))
        acc2 += f[lw.rank(std::span(buf).subspan(buf.size() - w, w))];
      rec_extend(buf, final_len, acc2, best, lw);
      buf.pop_back();
    }
  }
};

}  // namespace detail

// Evaluates phi^scale on words; scale folds an exponent into the potential
// ((sup ...)^s = sup of the scaled sums for s > 0).
class PotentialEvaluator {
 public:
  PotentialEvaluator(const Sft& host, const Potential& phi, double scale = 1.0)
      : x_(&host), scale_(scale) {
    if (auto* lc = phi.locally_constant())
      lc_.emplace(host, *lc, scale);
    else if (auto* mp = phi.matrix_product()) {
      mp_ = mp;
      if (static_cast<int>(mp->log_mats.size()) != host.alphabet_size())
        throw validation_error("matrix-product potential needs one matrix per symbol");
      for (const auto& m : mp->log_mats)
        if (m.size() != static_cast<std::size_t>(mp->dim) * mp->dim)
          throw validation_error("matrix-product potential: wrong matrix shape");
    }
  }

  LogValue operator()(std::span<const Symbol> word) const {
    if (word.empty()) return LogValue::one();
    if (!x_->legal(word)) return LogValue::zero();
    if (lc_) return LogValue::from_log(lc_->eval_log(word));
    if (mp_) {
      std::vector<double> prod = mp_->log_mats[word[0]];
      for (std::size_t t = 1; t < word.size(); ++t)
        prod = detail::log_matrix_multiply(prod, mp_->log_mats[word[t]],
                                           mp_->dim);
      return LogValue::from_log(scale_ * detail::log_entry_sum(prod));
    }
    return LogValue::one();  // Constant
  }

  const Sft& host() const { return *x_; }
  const detail::LcEvaluator* lc() const { return lc_ ? &*lc_ : nullptr; }
  const MatrixProduct* mp() const { return mp_; }
  double scale() const { return scale_; }

 private:
  const Sft* x_;
  double scale_;
  std::optional<detail::LcEvaluator> lc_;
  const MatrixProduct* mp_ = nullptr;
};

// Exact phi(I); off-language words give the zero value, phi(eps) = 1.
inline LogValue phi_eval(const Sft& host, const Potential& phi,
                         std::span<const Symbol> word) {
  return PotentialEvaluator(host, phi)(word);
}

// Dense log-domain table of phi^scale over L_n ranks.
inline std::vector<double> materialize_potential_table(
    const Sft& host, const Potential& phi, int n, double scale = 1.0,
    const ComputeCaps& caps = {}) {
  LanguageIndex li(host, n);
  check_word_cap(li.size(), caps, "materialize_potential_table");
  std::vector<double> table(li.size(), 0.0);
  if (phi.is_constant()) return table;

  PotentialEvaluator ev(host, phi, scale);
  if (const auto* lc = ev.lc()) {
    const int B = lc->B;
    if (n < std::max(B, 1)) {
      li.for_each_word([&](std::span<const Symbol> w, std::uint64_t r) {
        table[r] = ev(w).log();
      });
      return table;
    }
    const int k = host.alphabet_size();
    // DFS stacks: running det and trailing-block rank
    std::vector<double> det_stack(n + 1, 0.0);
    std::vector<std::int64_t> rb_stack(n + 1, -1);
    Word prefix;
    prefix.reserve(n);
    li.walk(
        [&](Symbol s, int depth) {
          prefix.push_back(s);
          double det = det_stack[depth - 1];
          std::int64_t rb = -1;
          if (B == 0) {
            det += lc->f[s];
          } else if (depth == B) {
            rb = static_cast<std::int64_t>(lc->lB_->rank(prefix));
          } else if (depth > B) {
            const std::int64_t prev = rb_stack[depth - 1];
            det += lc->f[lc->wrank[prev * k + s]];
            rb = lc->brank[prev * k + s];
          }
          det_stack[depth] = det;
          rb_stack[depth] = rb;
        },
        [&](int) { prefix.pop_back(); },
        [&](std::span<const Symbol>, std::uint64_t r) {
          table[r] = det_stack[n] + (B > 0 ? lc->gmax[rb_stack[n]] : 0.0);
        });
    return table;
  }

  // matrix product: DFS with a stack of running products
  const MatrixProduct& mp = *ev.mp();
  std::vector<std::vector<double>> prod_stack(n + 1);
  li.walk(
      [&](Symbol s, int depth) {
        if (depth == 1)
          prod_stack[1] = mp.log_mats[s];
        else
          prod_stack[depth] = detail::log_matrix_multiply(
              prod_stack[depth - 1], mp.log_mats[s], mp.dim);
      },
      [&](int) {},
      [&](std::span<const Symbol>, std::uint64_t r) {
        table[r] = scale * detail::log_entry_sum(prod_stack[n]);
      });
  return table;
}

enum class SpecMode { weak, exact };

// Finite-depth estimates of the sub-multiplicativity / connector constants.
// c and gamma are minima over all words and pairs up to checked_length,
// certified when those minima provably equal the true constants.
struct DwConstants {
  int p = 0;
  LogValue c = LogValue::one();
  LogValue gamma = LogValue::one();
  int checked_length = 0;
  SpecMode mode = SpecMode::weak;
  bool certified = false;
};

// Generic constants estimator over any word function (a callable
// span<const Symbol> -> LogValue defined for lengths up to 2L+p+1).
template <class F>
DwConstants estimate_constants_fn(const Sft& x, F&& phi, int p, int L,
                                  SpecMode mode, bool certified,
                                  const ComputeCaps& caps = {}) {
  if (L < 2) throw depth_error("constants need checked length L >= 2");
  if (p < 0) throw depth_error("specification gap p must be >= 0");

  std::vector<std::vector<Word>> words(L + 1);
  std::vector<std::vector<LogValue>> vals(L + 1);
  std::uint64_t total = 0;
  for (int len = 0; len <= L; ++len) {
    words[len] = enumerate_language(x, len, caps);
    total += words[len].size();
    vals[len].reserve(words[len].size());
    for (const Word& w : words[len]) vals[len].push_back(phi(w));
  }
  if (total > 5000)
    throw resource_error("estimate_constants: " + std::to_string(total) +
                         " words at L = " + std::to_string(L) +
                         "; reduce the checked length");

  bool has_positive = false;
  for (const LogValue& v : vals[L])
    if (!v.is_zero()) has_positive = true;
  if (!has_positive)
    throw validation_error("degenerate potential: phi vanishes on all of L_" +
                           std::to_string(L));

  double c_log = 0.0;  // log of the running min, capped at 1

  // condition (1): splits phi(I)phi(J)/phi(IJ)
  for (int len = 2; len <= L; ++len) {
    LanguageIndex li(x, len);
    for (std::size_t r = 0; r < words[len].size(); ++r) {
      const Word& w = words[len][r];
      const LogValue v = vals[len][r];
      if (v.is_zero()) continue;
      for (int q = 1; q < len; ++q) {
        LanguageIndex lq(x, q), lr(x, len - q);
        const LogValue vp = vals[q][lq.rank(std::span(w).first(q))];
        const LogValue vs = vals[len - q][lr.rank(std::span(w).subspan(q))];
        if (vp.is_zero() || vs.is_zero()) {
          c_log = -std::numeric_limits<double>::infinity();
          continue;
        }
        c_log = std::min(c_log, vp.log() + vs.log() - v.log());
      }
    }
  }

  // condition (2): for each pair the best admissible connector
  std::vector<Word> connectors;
  for (int q = (mode == SpecMode::exact ? p : 0); q <= p; ++q)
    for (const Word& kw : words[q]) connectors.push_back(kw);

  Word buf;
  for (int li = 0; li <= L; ++li)
    for (std::size_t ri = 0; ri < words[li].size(); ++ri) {
      if (vals[li][ri].is_zero()) continue;
      for (int lj = 0; lj <= L; ++lj)
        for (std::size_t rj = 0; rj < words[lj].size(); ++rj) {
          if (vals[lj][rj].is_zero()) continue;
          double best = -std::numeric_limits<double>::infinity();
          bool joinable = false;
          for (const Word& kw : connectors) {
            buf.clear();
            buf.insert(buf.end(), words[li][ri].begin(), words[li][ri].end());
            buf.insert(buf.end(), kw.begin(), kw.end());
            buf.insert(buf.end(), words[lj][rj].begin(), words[lj][rj].end());
            if (!x.legal(buf)) continue;
            joinable = true;
            const LogValue v = phi(std::span<const Symbol>(buf));
            best = std::max(best, v.log() - vals[li][ri].log() -
                                      vals[lj][rj].log());
          }
          if (!joinable)
            throw validation_error(
                "no admissible connector between two words; p = " +
                std::to_string(p) + " is below the specification gap");
          c_log = std::min(c_log, best);
        }
    }

  // gamma: one-symbol extension ratios
  double g_log = 0.0;
  for (int len = 0; len <= L; ++len)
    for (std::size_t r = 0; r < words[len].size(); ++r) {
      const LogValue v = vals[len][r];
      if (v.is_zero()) continue;
      const Word& w = words[len][r];
      double best_append = -std::numeric_limits<double>::infinity();
      double best_prepend = best_append;
      const auto try_append = [&](Symbol s) {
        buf.assign(w.begin(), w.end());
        buf.push_back(s);
        best_append = std::max(best_append, phi(std::span<const Symbol>(buf)).log() - v.log());
      };
      const auto try_prepend = [&](Symbol s) {
        buf.assign(1, s);
        buf.insert(buf.end(), w.begin(), w.end());
        best_prepend = std::max(best_prepend, phi(std::span<const Symbol>(buf)).log() - v.log());
      };
      if (len == 0) {
        for (Symbol s = 0; s < x.alphabet_size(); ++s) {
          try_append(s);
          try_prepend(s);
        }
      } else {
        for (Symbol s : x.successors(w.back())) try_append(s);
        for (Symbol s : x.predecessors(w.front())) try_prepend(s);
      }
      g_log = std::min(g_log, std::min(best_append, best_prepend));
    }

  DwConstants out;
  out.p = p;
  out.mode = mode;
  out.checked_length = L;
  out.certified = certified;
  out.c = LogValue::from_log(std::min(0.0, c_log));
  out.gamma = LogValue::from_log(std::min(0.0, g_log));
  return out;
}

inline DwConstants estimate_constants(const Sft& x, const Potential& phi,
                                      int p, int L,
                                      SpecMode mode = SpecMode::weak,
                                      const ComputeCaps& caps = {}) {
  if (L < std::max(2, phi.window()))
    throw depth_error("constants need L >= max(2, window)");
  bool certified = false;
  if (phi.is_constant())
    certified = true;
  else if (const auto* lc = phi.locally_constant())
    certified = (L >= 2 * lc->window + p);

  if (const auto* mp = phi.matrix_product()) {
    // invariant check at estimate depth: products over short legal words
    // must not develop a zero row or column
    PotentialEvaluator ev(x, phi);
    for (int len = 1; len <= std::min(L, 4); ++len)
      for (const Word& w : enumerate_language(x, len, caps)) {
        std::vector<double> prod = mp->log_mats[w[0]];
        for (std::size_t t = 1; t < w.size(); ++t)
          prod = detail::log_matrix_multiply(prod, mp->log_mats[w[t]], mp->dim);
        for (int i = 0; i < mp->dim; ++i) {
          bool row = false, col = false;
          for (int j = 0; j < mp->dim; ++j) {
            if (!std::isinf(prod[i * mp->dim + j])) row = true;
            if (!std::isinf(prod[j * mp->dim + i])) col = true;
          }
          if (!row || !col)
            throw validation_error(
                "matrix-product potential develops a zero row/column on word " +
                word_to_string(w, x.alphabet_size()));
        }
      }
  }

  PotentialEvaluator ev(x, phi);
  return estimate_constants_fn(
      x, [&](std::span<const Symbol> w) { return ev(w); }, p, L, mode,
      certified, caps);
}

}  // namespace thermoweight

#endif
