#ifndef THERMOWEIGHT_PRESSURE_HPP
#define THERMOWEIGHT_PRESSURE_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "thermoweight/chain.hpp"
#include "thermoweight/errors.hpp"
#include "thermoweight/log_value.hpp"
#include "thermoweight/potential.hpp"
#include "thermoweight/sft.hpp"

namespace thermoweight {

// Partition sums u_n = sum over L_n of phi(I)^scale for n = 1..n_max.
// Constant and locally-constant potentials go through transfer DP over
// (window-1)-blocks; matrix products are enumerated (subject to the word
// cap), since the entry-sum norm gives no per-symbol transfer state.
inline std::vector<LogValue> u_sequence(const Sft& x, const Potential& phi,
                                        int n_max, double scale = 1.0,
                                        const ComputeCaps& caps = {}) {
  if (n_max < 1) throw depth_error("u_sequence needs n_max >= 1");
  std::vector<LogValue> u(n_max);
  const int k = x.alphabet_size();

  if (phi.matrix_product()) {
    std::uint64_t visited = 0;
    for (int n = 1; n <= n_max; ++n) {
      LanguageIndex ln(x, n);
      visited += ln.size();
    }
    check_word_cap(visited, caps, "u_sequence (matrix product)");
    const MatrixProduct& mp = *phi.matrix_product();
    std::vector<std::vector<double>> prod_stack(n_max + 1);
    std::vector<OnlineLogSum> acc(n_max + 1);
    LanguageIndex li(x, n_max);
    li.walk(
        [&](Symbol s, int depth) {
          if (depth == 1)
            prod_stack[1] = mp.log_mats[s];
          else
            prod_stack[depth] = detail::log_matrix_multiply(
                prod_stack[depth - 1], mp.log_mats[s], mp.dim);
          acc[depth].add(scale * detail::log_entry_sum(prod_stack[depth]));
        },
        [&](int) {}, [&](std::span<const Symbol>, std::uint64_t) {});
    for (int n = 1; n <= n_max; ++n) u[n - 1] = acc[n].result();
    return u;
  }

  // Constant is locally constant with window 1 and f = 0.
  LocallyConstant lc_storage;
  const LocallyConstant* lc_spec = phi.locally_constant();
  if (!lc_spec) {
    lc_storage.window = 1;
    lc_storage.log_table.assign(k, 0.0);
    lc_spec = &lc_storage;
  }
  detail::LcEvaluator lc(x, *lc_spec, scale);
  const int B = lc.B;

  // short lengths by direct evaluation
  for (int n = 1; n < std::min(n_max + 1, std::max(B, 1)); ++n) {
    OnlineLogSum acc;
    LanguageIndex ln(x, n);
    check_word_cap(ln.size(), caps, "u_sequence");
    ln.for_each_word([&](std::span<const Symbol> w, std::uint64_t) {
      acc.add(lc.eval_log(w));
    });
    u[n - 1] = acc.result();
  }

  if (B == 0) {
    std::vector<double> cur(k), nxt(k);
    for (int s = 0; s < k; ++s) cur[s] = lc.f[s];
    for (int n = 1; n <= n_max; ++n) {
      if (n > 1) {
        for (int s2 = 0; s2 < k; ++s2) {
          OnlineLogSum a;
          for (Symbol s : x.predecessors(s2)) a.add(cur[s]);
          nxt[s2] = a.result_log() + lc.f[s2];
        }
        cur.swap(nxt);
      }
      OnlineLogSum a;
      for (int s = 0; s < k; ++s) a.add(cur[s]);
      u[n - 1] = a.result();
    }
    return u;
  }

  // V_t[b] = sum over length-t words with trailing block b of exp(det);
  // u_t = sum_b V_t[b] * exp(gmax[b]).
  const std::uint64_t nB = lc.nB;
  std::vector<double> cur(nB, 0.0);
  for (int t = B; t <= n_max; ++t) {
    if (t > B) {
      std::vector<OnlineLogSum> acc(nB);
      for (std::uint64_t rb = 0; rb < nB; ++rb) {
        if (std::isinf(cur[rb]) && cur[rb] < 0) continue;
        for (Symbol s : x.successors(lc.blast[rb]))
          acc[lc.brank[rb * k + s]].add(cur[rb] + lc.f[lc.wrank[rb * k + s]]);
      }
      for (std::uint64_t rb = 0; rb < nB; ++rb) cur[rb] = acc[rb].result_log();
    }
    OnlineLogSum total;
    for (std::uint64_t rb = 0; rb < nB; ++rb) total.add(cur[rb] + lc.gmax[rb]);
    if (t >= 1) u[t - 1] = total.result();
  }
  return u;
}

// Certified interval around the pressure P = lim (1/n) log u_n, derived
// from  u_{n+m} <= c^{ -1} u_n u_m  (Fekete upper bound) and the
// super-additivity chain  u_{n+m+p} >= gamma^p c (p+1)^{-1} u_n u_m
// (iterated along multiples, lower bound).
struct PressureBracket {
  int n = 0;
  double lower = 0;
  double upper = 0;
  DwConstants constants_used;
};

inline PressureBracket pressure_bracket(std::span<const LogValue> u,
                                        const DwConstants& consts, int n) {
  if (n < 1 || n > static_cast<int>(u.size()))
    throw depth_error("pressure_bracket: n out of range");
  if (consts.c.is_zero() || consts.gamma.is_zero())
    throw invalid_constants_error("pressure bracket needs c > 0 and gamma > 0");
  const double log_un = u[n - 1].log();
  PressureBracket b;
  b.n = n;
  b.constants_used = consts;
  b.upper = (log_un - consts.c.log()) / n;
  b.lower = (log_un + consts.c.log() + consts.p * consts.gamma.log() -
             std::log(static_cast<double>(consts.p + 1))) /
            (n + consts.p);
  return b;
}

// Values of a recursively folded potential phi^(level) on L_n(X_level).
struct FiberTable {
  int level = 1;  // 1-based
  int depth = 0;
  std::vector<double> log_values;  // over L_n ranks of the level's SFT
};

namespace detail {

// Incremental rank tracking of the projected word while walking the source
// language: partial[depth] accumulates the target-rank contributions of the
// first `depth` projected symbols.
struct ProjRankStack {
  const Sft* y;
  const std::vector<Symbol>* map;
  const LanguageIndex* ly;
  int n;
  std::vector<std::uint64_t> partial;
  std::vector<Symbol> tsym;

  ProjRankStack(const Sft& target, const std::vector<Symbol>& symbol_map,
                const LanguageIndex& target_index, int depth_n)
      : y(&target), map(&symbol_map), ly(&target_index), n(depth_n),
        partial(depth_n + 1, 0), tsym(depth_n + 1, 0) {}

  void push(Symbol s, int depth) {
    const Symbol t = (*map)[s];
    std::uint64_t base = partial[depth - 1];
    if (depth == 1) {
      for (Symbol t2 = 0; t2 < t; ++t2) base += ly->extensions(n, t2);
    } else {
      for (Symbol t2 : y->successors(tsym[depth - 1])) {
        if (t2 >= t) break;
        base += ly->extensions(n - depth + 1, t2);
      }
    }
    partial[depth] = base;
    tsym[depth] = t;
  }

  std::uint64_t rank() const { return partial[n]; }
};

}  // namespace detail

// log of sum over ranks of exp(s * table[r]).
inline double fold_scalar(std::span<const double> log_table, double s) {
  OnlineLogSum acc;
  for (double v : log_table) acc.add(s * v);
  return acc.result_log();
}

// General fiber fold: value(J) = (sum over the fiber of source^s)^t, with
// empty fibers giving zero.  The source is a dense table on L_n(source).
inline FiberTable fiber_potential(const FactorMap& pi,
                                  std::span<const double> source_log,
                                  double s, double t, int n,
                                  const ComputeCaps& caps = {}) {
  if (n < 1) throw depth_error("fiber_potential needs n >= 1");
  if (!(s > 0)) throw validation_error("fiber exponent s must be > 0");
  LanguageIndex lx(pi.source, n);
  LanguageIndex ly(pi.target, n);
  check_word_cap(lx.size(), caps, "fiber_potential source");
  check_word_cap(ly.size(), caps, "fiber_potential target");
  if (source_log.size() != lx.size())
    throw validation_error("fiber_potential: source table size mismatch");

  std::vector<OnlineLogSum> acc(ly.size());
  detail::ProjRankStack proj(pi.target, pi.symbol_map, ly, n);
  lx.walk([&](Symbol sym, int depth) { proj.push(sym, depth); },
          [&](int) {},
          [&](std::span<const Symbol>, std::uint64_t r) {
            acc[proj.rank()].add(s * source_log[r]);
          });

  FiberTable out;
  out.depth = n;
  out.log_values.resize(ly.size());
  for (std::size_t j = 0; j < acc.size(); ++j)
    out.log_values[j] = t * acc[j].result_log();
  return out;
}

// Fast path for Constant / LocallyConstant sources: the fiber sum for each
// target word is computed by per-output-symbol transfer operators on
// (window-1)-blocks, without enumerating the source language.  Matrix
// products fall back to the enumeration path.
inline FiberTable fiber_potential(const FactorMap& pi, const Potential& phi,
                                  double s, double t, int n,
                                  const ComputeCaps& caps = {}) {
  if (n < 1) throw depth_error("fiber_potential needs n >= 1");
  if (!(s > 0)) throw validation_error("fiber exponent s must be > 0");
  if (phi.matrix_product()) {
    std::vector<double> table =
        materialize_potential_table(pi.source, phi, n, 1.0, caps);
    return fiber_potential(pi, table, s, t, n, caps);
  }

  LocallyConstant lc_storage;
  const LocallyConstant* lc_spec = phi.locally_constant();
  if (!lc_spec) {
    lc_storage.window = 1;
    lc_storage.log_table.assign(pi.source.alphabet_size(), 0.0);
    lc_spec = &lc_storage;
  }
  detail::LcEvaluator lc(pi.source, *lc_spec, s);  // evaluates phi^s
  const Sft& x = pi.source;
  const int k = x.alphabet_size();
  const int B = lc.B;

  LanguageIndex ly(pi.target, n);
  check_word_cap(ly.size(), caps, "fiber_potential target");

  FiberTable out;
  out.depth = n;
  out.log_values.assign(ly.size(), -std::numeric_limits<double>::infinity());

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Word> bblocks;
  if (B > 0) bblocks = enumerate_language(x, B);

  std::vector<double> cur, nxt;
  Word fiber_buf;
  ly.for_each_word([&](std::span<const Symbol> J, std::uint64_t j) {
    if (n < std::max(B, 1)) return;  // handled below
    if (B == 0) {
      cur.assign(k, -inf);
      for (int sym = 0; sym < k; ++sym)
        if (pi.symbol_map[sym] == J[0]) cur[sym] = lc.f[sym];
      for (int depth = 2; depth <= n; ++depth) {
        nxt.assign(k, -inf);
        std::vector<OnlineLogSum> a(k);
        for (int sym = 0; sym < k; ++sym) {
          if (std::isinf(cur[sym]) && cur[sym] < 0) continue;
          for (Symbol s2 : x.successors(sym))
            if (pi.symbol_map[s2] == J[depth - 1]) a[s2].add(cur[sym]);
        }
        for (int sym = 0; sym < k; ++sym) nxt[sym] = a[sym].result_log() + lc.f[sym];
        cur.swap(nxt);
      }
      OnlineLogSum total;
      for (int sym = 0; sym < k; ++sym) total.add(cur[sym]);
      out.log_values[j] = t * total.result_log();
      return;
    }
    // warm-up: contexts of length B whose projection matches J's prefix
    cur.assign(lc.nB, -inf);
    bool any = false;
    for (std::uint64_t rb = 0; rb < lc.nB; ++rb) {
      bool match = true;
      for (int i = 0; i < B; ++i)
        if (pi.symbol_map[bblocks[rb][i]] != J[i]) {
          match = false;
          break;
        }
      if (match) {
        cur[rb] = 0.0;
        any = true;
      }
    }
    for (int depth = B + 1; depth <= n && any; ++depth) {
      std::vector<OnlineLogSum> a(lc.nB);
      for (std::uint64_t rb = 0; rb < lc.nB; ++rb) {
        if (std::isinf(cur[rb]) && cur[rb] < 0) continue;
        for (Symbol s2 : x.successors(lc.blast[rb]))
          if (pi.symbol_map[s2] == J[depth - 1])
            a[lc.brank[rb * k + s2]].add(cur[rb] + lc.f[lc.wrank[rb * k + s2]]);
      }
      any = false;
      for (std::uint64_t rb = 0; rb < lc.nB; ++rb) {
        cur[rb] = a[rb].result_log();
        if (!(std::isinf(cur[rb]) && cur[rb] < 0)) any = true;
      }
    }
    OnlineLogSum total;
    for (std::uint64_t rb = 0; rb < lc.nB; ++rb) total.add(cur[rb] + lc.gmax[rb]);
    out.log_values[j] = t * total.result_log();
  });

  if (n < std::max(B, 1)) {
    // words shorter than the context: enumerate fibers directly
    LanguageIndex lx(x, n);
    check_word_cap(lx.size(), caps, "fiber_potential source");
    std::vector<OnlineLogSum> acc(ly.size());
    detail::ProjRankStack proj(pi.target, pi.symbol_map, ly, n);
    lx.walk([&](Symbol sym, int depth) { proj.push(sym, depth); },
            [&](int) {},
            [&](std::span<const Symbol> w, std::uint64_t) {
              acc[proj.rank()].add(lc.eval_log(w));
            });
    for (std::size_t j = 0; j < acc.size(); ++j)
      out.log_values[j] = t * acc[j].result_log();
  }

  out.level = 2;
  return out;
}

// Depth-n tables of the recursive fiber potentials phi^(1), ..., phi^(k)
// plus the scalar phi^(k+1)(n).  levels[0] may be left empty when the
// level-1 language exceeds the cap; the fold then runs through the
// transfer fast path and downstream consumers stream level-1 words.
struct ChainTables {
  FactorChain chain;
  int depth = 0;
  std::vector<FiberTable> levels;
  double log_scalar = 0.0;
  bool level1_materialized = true;
};

inline ChainTables build_chain_tables(const FactorChain& chain,
                                      const Potential& phi, int n,
                                      const ComputeCaps& caps = {},
                                      bool want_level1 = true) {
  const int k = chain.depth();
  const auto prefix = chain.weight_prefix_sums();
  ChainTables tabs;
  tabs.chain = chain;
  tabs.depth = n;
  tabs.levels.resize(k);
  for (int i = 0; i < k; ++i) {
    tabs.levels[i].level = i + 1;
    tabs.levels[i].depth = n;
  }

  // k = 1 and matrix products have no transfer fast path into level 2
  const bool need_level1 = (k == 1) || phi.matrix_product() != nullptr;
  LanguageIndex l1(chain.levels[0], n);
  const bool level1_fits = l1.size() <= caps.max_words;
  if (need_level1 && !level1_fits)
    check_word_cap(l1.size(), caps, "build_chain_tables level 1");
  tabs.level1_materialized = level1_fits && (want_level1 || need_level1);
  if (tabs.level1_materialized)
    tabs.levels[0].log_values =
        materialize_potential_table(chain.levels[0], phi, n, 1.0, caps);

  for (int i = 1; i < k; ++i) {
    const double s = 1.0 / prefix[i - 1];
    const double t = prefix[i - 1];
    FactorMap pi = chain.map_at(i - 1);
    FiberTable folded;
    if (i == 1) {
      if (phi.matrix_product())
        folded = fiber_potential(
            pi, std::span<const double>(tabs.levels[0].log_values), s, t, n,
            caps);
      else
        folded = fiber_potential(pi, phi, s, t, n, caps);
    } else {
      folded = fiber_potential(
          pi, std::span<const double>(tabs.levels[i - 1].log_values), s, t, n,
          caps);
    }
    folded.level = i + 1;
    folded.depth = n;
    tabs.levels[i] = std::move(folded);
  }
  tabs.log_scalar = fold_scalar(
      std::span<const double>(tabs.levels[k - 1].log_values),
      1.0 / prefix[k - 1]);
  return tabs;
}

struct WeightedPressureOptions {
  int constants_length = 6;  // L for the folded constants estimate
  SpecMode mode = SpecMode::weak;
  std::optional<int> p_override;
  bool want_level1_table = true;
  ComputeCaps caps;
};

struct WeightedPressureResult {
  PressureBracket bracket;     // bracket for P^a, already scaled by A_k
  DwConstants folded_constants;
  ChainTables tables;
  double weight_total = 1.0;   // A_k
  int p = 0;
};

namespace detail {

inline int chain_gap(const FactorChain& chain, SpecMode mode,
                     std::optional<int> p_override) {
  SpecificationGaps gaps = specification_gaps(chain.levels[0]);
  std::optional<int> p =
      (mode == SpecMode::exact) ? gaps.exact_p : gaps.weak_p;
  if (!p)
    throw validation_error(mode == SpecMode::exact
                               ? "X_1 does not satisfy specification"
                               : "X_1 does not satisfy weak specification");
  if (p_override) {
    if (*p_override < *p)
      throw validation_error("p override is below the specification gap");
    return *p_override;
  }
  return *p;
}

}  // namespace detail

// Weighted topological pressure P^a = (a_1+...+a_k) * pressure of the
// level-k folded sequence, as a certified bracket, together with all
// intermediate fiber tables for reuse by the equilibrium construction.
inline WeightedPressureResult weighted_pressure(
    const FactorChain& chain, const Potential& phi, int n,
    const WeightedPressureOptions& opts = {}) {
  if (n < 1) throw depth_error("weighted_pressure needs n >= 1");
  require_valid(chain, std::min(n, 2), opts.caps);
  const int k = chain.depth();
  const auto prefix = chain.weight_prefix_sums();
  const double total_weight = prefix[k - 1];
  const int p = detail::chain_gap(chain, opts.mode, opts.p_override);

  WeightedPressureResult res;
  res.weight_total = total_weight;
  res.p = p;

  if (k == 1) {
    // identical code path to the plain pressure bracket
    const double s = 1.0 / chain.weights[0];
    const Sft& x = chain.levels[0];
    std::vector<LogValue> u = u_sequence(x, phi, n, s, opts.caps);
    PotentialEvaluator ev(x, phi, s);
    bool certified = phi.is_constant();
    if (const auto* lc = phi.locally_constant())
      certified = opts.constants_length >= 2 * lc->window + p;
    const int L = std::max(std::min(opts.constants_length, n),
                           std::max(2, phi.window()));
    DwConstants consts = estimate_constants_fn(
        x, [&](std::span<const Symbol> w) { return ev(w); }, p, L, opts.mode,
        certified, opts.caps);
    PressureBracket b0 = pressure_bracket(u, consts, n);
    res.folded_constants = consts;
    res.bracket.n = n;
    res.bracket.lower = chain.weights[0] * b0.lower;
    res.bracket.upper = chain.weights[0] * b0.upper;
    res.bracket.constants_used = consts;

    res.tables.chain = chain;
    res.tables.depth = n;
    res.tables.levels.resize(1);
    LanguageIndex l1(x, n);
    if (opts.want_level1_table && l1.size() <= opts.caps.max_words) {
      res.tables.levels[0].level = 1;
      res.tables.levels[0].depth = n;
      res.tables.levels[0].log_values =
          materialize_potential_table(x, phi, n, 1.0, opts.caps);
      res.tables.level1_materialized = true;
    } else {
      res.tables.level1_materialized = false;
    }
    res.tables.log_scalar = u[n - 1].log();
    return res;
  }

  ChainTables tabs = build_chain_tables(chain, phi, n, opts.caps,
                                        opts.want_level1_table);

  // Folded potential rho(I) = phi^(k)(I)^{1/A_k} on X_k, evaluated from
  // per-length mini-folds; constants are estimated on rho itself.
  const Sft& xk = chain.levels[k - 1];
  int L = std::max(2, std::min({opts.constants_length, n}));
  auto stack_cost = [&](int len_max) {
    std::uint64_t cost = 0;
    for (int i = 1; i < k; ++i)
      for (int m = 1; m <= len_max; ++m)
        cost += LanguageIndex(chain.levels[i], m).size();
    return cost;
  };
  while (L > 2 && stack_cost(2 * L + p + 1) > 2'000'000) --L;

  std::map<int, std::vector<double>> rho_tables;  // length -> phi^(k) table
  std::map<int, LanguageIndex> rho_index;
  for (int m = 1; m <= 2 * L + p + 1; ++m) {
    ChainTables mt = build_chain_tables(chain, phi, m, opts.caps, false);
    rho_tables.emplace(m, std::move(mt.levels[k - 1].log_values));
    rho_index.emplace(m, LanguageIndex(xk, m));
  }
  const double sk = 1.0 / total_weight;
  auto rho = [&](std::span<const Symbol> w) -> LogValue {
    if (w.empty()) return LogValue::one();
    if (!xk.legal(w)) return LogValue::zero();
    const int m = static_cast<int>(w.size());
    const auto& tab = rho_tables.at(m);
    const double v = tab[rho_index.at(m).rank(w)];
    return LogValue::from_log(sk * v);
  };

  bool closure_exact = !phi.matrix_product();
  for (const Sft& level : chain.levels)
    if (!level.is_full_shift()) closure_exact = false;
  DwConstants consts =
      estimate_constants_fn(xk, rho, p, L, opts.mode, closure_exact, opts.caps);
  if (consts.c.is_zero() || consts.gamma.is_zero())
    throw invalid_constants_error(
        "folded potential produced zero constants at the checked depth");

  res.folded_constants = consts;
  const double log_vn = tabs.log_scalar;
  res.bracket.n = n;
  res.bracket.constants_used = consts;
  res.bracket.upper = total_weight * ((log_vn - consts.c.log()) / n);
  res.bracket.lower =
      total_weight *
      ((log_vn + consts.c.log() + p * consts.gamma.log() -
        std::log(static_cast<double>(p + 1))) /
       (n + p));
  res.tables = std::move(tabs);
  return res;
}

}  // namespace thermoweight

#endif
