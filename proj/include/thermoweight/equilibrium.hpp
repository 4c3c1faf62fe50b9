#ifndef THERMOWEIGHT_EQUILIBRIUM_HPP
#define THERMOWEIGHT_EQUILIBRIUM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "thermoweight/chain.hpp"
#include "thermoweight/errors.hpp"
#include "thermoweight/log_value.hpp"
#include "thermoweight/potential.hpp"
#include "thermoweight/pressure.hpp"
#include "thermoweight/sft.hpp"

namespace thermoweight {

// Normalized weights  phi~(I)  of the weighted-equilibrium construction,
// depth n on X_1; their sum telescopes to 1 exactly.
struct PhiTildeTable {
  Sft host;
  int depth = 0;
  std::vector<double> log_values;
  double sum_error = 0.0;  // |sum - 1| as computed
};

// Probability masses on depth-d cylinders.
struct CylinderTable {
  Sft host;
  int depth = 0;
  std::vector<double> masses;
  double normalization_error = 0.0;  // dropped boundary mass
  double invariance_tolerance = 1e-9;  // producer's shift-invariance slack
};

// Grid maxima of the surrounding sums f_{m,l}; certified lower bounds of
// the envelope sup.
struct EnvelopeTable {
  Sft host;
  int depth = 0;
  int source_depth = 0;
  std::vector<double> values;  // linear
};

namespace detail {

// Per-level state for streaming phi~ over L_n(X_1): composed projection
// rank stacks and the level tables.
struct PhiTildeStreamer {
  const ChainTables* tabs;
  std::vector<double> inv_prefix;               // 1/A_i
  std::vector<ProjRankStack> stacks;            // k-1 composed projections
  double log_scalar;

  PhiTildeStreamer(const ChainTables& tables,
                   std::vector<std::optional<LanguageIndex>>& index_storage)
      : tabs(&tables), log_scalar(tables.log_scalar) {
    const FactorChain& chain = tables.chain;
    const int k = chain.depth();
    const auto prefix = chain.weight_prefix_sums();
    inv_prefix.resize(k);
    for (int i = 0; i < k; ++i) inv_prefix[i] = 1.0 / prefix[i];
    index_storage.resize(k);
    taus_.resize(k);
    for (int i = 1; i < k; ++i) {
      taus_[i] = chain.tau(i);
      index_storage[i].emplace(chain.levels[i], tables.depth);
      stacks.emplace_back(chain.levels[i], taus_[i], *index_storage[i],
                          tables.depth);
    }
  }

  void push(Symbol s, int depth) {
    for (auto& st : stacks) st.push(s, depth);
  }

  // log phi~ given the level-1 value of the current word
  double value(double level1_log) const {
    if (std::isinf(level1_log) && level1_log < 0)
      return level1_log;  // phi vanishes -> weight zero
    const int k = tabs->chain.depth();
    double lg = inv_prefix[0] * level1_log;
    for (int i = 1; i < k; ++i) {
      const double ti = tabs->levels[i].log_values[stacks[i - 1].rank()];
      lg += (inv_prefix[i] - inv_prefix[i - 1]) * ti;
    }
    return lg - log_scalar;
  }

 private:
  std::vector<std::vector<Symbol>> taus_;
};

}  // namespace detail

// Exact log-domain evaluation of the product formula for phi~ on every
// word of L_n(X_1).  Requires the level-1 table to be materialized.
inline PhiTildeTable phi_tilde(const ChainTables& tabs, int n,
                               const ComputeCaps& caps = {}) {
  if (tabs.depth != n)
    throw depth_error("phi_tilde: tables are at depth " +
                      std::to_string(tabs.depth) + ", requested " +
                      std::to_string(n));
  for (const FiberTable& t : tabs.levels)
    if (t.depth != n && !(t.level == 1 && !tabs.level1_materialized))
      throw depth_error("phi_tilde: inconsistent fiber-table depth");
  if (!tabs.level1_materialized)
    throw resource_error("phi_tilde needs the level-1 table; reduce n");

  const Sft& x1 = tabs.chain.levels[0];
  LanguageIndex l1(x1, n);
  check_word_cap(l1.size(), caps, "phi_tilde");

  PhiTildeTable out;
  out.host = x1;
  out.depth = n;
  out.log_values.resize(l1.size());

  std::vector<std::optional<LanguageIndex>> storage;
  detail::PhiTildeStreamer streamer(tabs, storage);
  OnlineLogSum total;
  l1.walk([&](Symbol s, int d) { streamer.push(s, d); }, [](int) {},
          [&](std::span<const Symbol>, std::uint64_t r) {
            const double lg = streamer.value(tabs.levels[0].log_values[r]);
            out.log_values[r] = lg;
            total.add(lg);
          });
  out.sum_error = std::abs(std::exp(total.result_log()) - 1.0);
  return out;
}

namespace detail {

// f_{m, n-d-m}(I) for all I in L_d and all shifts m = 0..n-d, as linear
// masses: acc[m * |L_d| + rank(I)].
struct ShiftMarginals {
  int n = 0, d = 0;
  std::uint64_t words_d = 0;
  std::vector<double> acc;

  double f(int m, std::uint64_t rank) const { return acc[m * words_d + rank]; }
};

template <class LogMassOf>
ShiftMarginals shift_marginals_stream(const Sft& x, int n, int d,
                                      LogMassOf&& log_mass,
                                      const ComputeCaps& caps) {
  LanguageIndex ln(x, n), ld(x, d);
  check_word_cap(ln.size(), caps, "cesaro aggregation");
  ShiftMarginals sm;
  sm.n = n;
  sm.d = d;
  sm.words_d = ld.size();
  sm.acc.assign(static_cast<std::size_t>(n - d + 1) * ld.size(), 0.0);
  ln.for_each_word([&](std::span<const Symbol> w, std::uint64_t r) {
    const double lg = log_mass(w, r);
    if (std::isinf(lg) && lg < 0) return;
    const double p = std::exp(lg);
    for (int m = 0; m + d <= n; ++m)
      sm.acc[static_cast<std::size_t>(m) * sm.words_d +
             ld.rank(w.subspan(m, d))] += p;
  });
  return sm;
}

inline ShiftMarginals shift_marginals(const PhiTildeTable& phit, int d,
                                      const ComputeCaps& caps) {
  return shift_marginals_stream(
      phit.host, phit.depth, d,
      [&](std::span<const Symbol>, std::uint64_t r) {
        return phit.log_values[r];
      },
      caps);
}

inline CylinderTable cesaro_from_marginals(const Sft& x,
                                           const ShiftMarginals& sm) {
  CylinderTable out;
  out.host = x;
  out.depth = sm.d;
  out.masses.assign(sm.words_d, 0.0);
  for (int m = 0; m + sm.d <= sm.n; ++m)
    for (std::uint64_t r = 0; r < sm.words_d; ++r)
      out.masses[r] += sm.f(m, r);
  double total = 0.0;
  for (double v : out.masses) total += v;
  if (total <= 0.0) throw validation_error("cesaro measure has empty support");
  for (double& v : out.masses) v /= total;
  out.normalization_error = static_cast<double>(sm.d - 1) / sm.n;
  out.invariance_tolerance =
      1e-9 + 2.0 * static_cast<double>(sm.d + 1) / (sm.n - sm.d + 1);
  return out;
}

}  // namespace detail

// Cesaro-averaged shifts of the depth-n weights eta_n = phi~, truncated to
// the shifts determined by the table (the i > n-d boundary terms carry
// total mass (d-1)/n; they are dropped and the table renormalized).
inline CylinderTable cesaro_measure(const PhiTildeTable& phit, int d,
                                    const ComputeCaps& caps = {}) {
  if (d < 1 || 2 * d > phit.depth)
    throw depth_error("cesaro_measure needs 1 <= d <= n/2");
  return detail::cesaro_from_marginals(
      phit.host, detail::shift_marginals(phit, d, caps));
}

// Fused phi~ + Cesaro aggregation that never materializes the level-1
// table; equal to cesaro_measure(phi_tilde(...), d) up to summation order.
inline CylinderTable equilibrium_measure(const ChainTables& tabs, int d,
                                         const ComputeCaps& caps = {}) {
  const int n = tabs.depth;
  if (d < 1 || 2 * d > n)
    throw depth_error("equilibrium_measure needs 1 <= d <= n/2");
  if (!tabs.level1_materialized)
    throw resource_error(
        "equilibrium_measure without a level-1 table needs the streaming "
        "variant that takes the potential");
  const Sft& x1 = tabs.chain.levels[0];

  LanguageIndex ln(x1, n), ld(x1, d);
  check_word_cap(ln.size(), caps, "equilibrium_measure");
  detail::ShiftMarginals sm;
  sm.n = n;
  sm.d = d;
  sm.words_d = ld.size();
  sm.acc.assign(static_cast<std::size_t>(n - d + 1) * ld.size(), 0.0);

  std::vector<std::optional<LanguageIndex>> storage;
  detail::PhiTildeStreamer streamer(tabs, storage);
  ln.walk(
      [&](Symbol s, int depth) { streamer.push(s, depth); }, [](int) {},
      [&](std::span<const Symbol> w, std::uint64_t r) {
        const double lg = streamer.value(tabs.levels[0].log_values[r]);
        if (std::isinf(lg) && lg < 0) return;
        const double p = std::exp(lg);
        for (int m = 0; m + d <= n; ++m)
          sm.acc[static_cast<std::size_t>(m) * sm.words_d +
                 ld.rank(w.subspan(m, d))] += p;
      });
  return detail::cesaro_from_marginals(x1, sm);
}

// Streaming variant for chains whose level-1 language exceeds the cap:
// recomputes phi(I) along the DFS (Constant / LocallyConstant only).
inline CylinderTable equilibrium_measure(const ChainTables& tabs,
                                         const Potential& phi, int d,
                                         const ComputeCaps& caps = {}) {
  const int n = tabs.depth;
  if (d < 1 || 2 * d > n)
    throw depth_error("equilibrium_measure needs 1 <= d <= n/2");
  if (phi.matrix_product() && !tabs.level1_materialized)
    throw resource_error("matrix-product streaming needs the level-1 table");
  const Sft& x1 = tabs.chain.levels[0];

  LocallyConstant lc_storage;
  const LocallyConstant* lc_spec = phi.locally_constant();
  if (!lc_spec) {
    lc_storage.window = 1;
    lc_storage.log_table.assign(x1.alphabet_size(), 0.0);
    lc_spec = &lc_storage;
  }
  detail::LcEvaluator lc(x1, *lc_spec, 1.0);
  const int B = lc.B;
  const int k = x1.alphabet_size();
  if (n < std::max(B, 1))
    throw depth_error("equilibrium_measure: depth below the potential window");

  LanguageIndex ln(x1, n), ld(x1, d);
  check_word_cap(ln.size(), caps, "equilibrium_measure (streaming)");
  detail::ShiftMarginals sm;
  sm.n = n;
  sm.d = d;
  sm.words_d = ld.size();
  sm.acc.assign(static_cast<std::size_t>(n - d + 1) * ld.size(), 0.0);

  std::vector<std::optional<LanguageIndex>> storage;
  detail::PhiTildeStreamer streamer(tabs, storage);
  std::vector<double> det_stack(n + 1, 0.0);
  std::vector<std::int64_t> rb_stack(n + 1, -1);
  Word prefix;
  prefix.reserve(n);

  ln.walk(
      [&](Symbol s, int depth) {
        streamer.push(s, depth);
        prefix.push_back(s);
        double det = det_stack[depth - 1];
        std::int64_t rb = -1;
        if (B == 0) {
          det += lc.f[s];
        } else if (depth == B) {
          rb = static_cast<std::int64_t>(lc.lB_->rank(prefix));
        } else if (depth > B) {
          const std::int64_t prev = rb_stack[depth - 1];
          det += lc.f[lc.wrank[prev * k + s]];
          rb = lc.brank[prev * k + s];
        }
        det_stack[depth] = det;
        rb_stack[depth] = rb;
      },
      [&](int) { prefix.pop_back(); },
      [&](std::span<const Symbol> w, std::uint64_t) {
        const double level1 = det_stack[n] + (B > 0 ? lc.gmax[rb_stack[n]] : 0.0);
        const double lg = streamer.value(level1);
        if (std::isinf(lg) && lg < 0) return;
        const double p = std::exp(lg);
        for (int m = 0; m + d <= n; ++m)
          sm.acc[static_cast<std::size_t>(m) * sm.words_d +
                 ld.rank(w.subspan(m, d))] += p;
      });
  return detail::cesaro_from_marginals(x1, sm);
}

// Grid maxima f*(I) = max over m+l = n-d of f_{m,l}(I): a certified lower
// bound of the envelope sup of Eq-style surrounding sums.
inline EnvelopeTable envelope(const PhiTildeTable& phit, int d,
                              const ComputeCaps& caps = {}) {
  if (d < 1 || d > phit.depth - 2)
    throw depth_error("envelope needs 1 <= d <= n-2");
  auto sm = detail::shift_marginals(phit, d, caps);
  EnvelopeTable out;
  out.host = phit.host;
  out.depth = d;
  out.source_depth = phit.depth;
  out.values.assign(sm.words_d, 0.0);
  for (int m = 0; m + d <= sm.n; ++m)
    for (std::uint64_t r = 0; r < sm.words_d; ++r)
      out.values[r] = std::max(out.values[r], sm.f(m, r));
  return out;
}

// min / max of mu(I) / reference(I) over words with positive reference and
// mass; the Gibbs property holds when the spread stays bounded in depth.
struct GibbsReport {
  int depth = 0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  std::uint64_t compared = 0;
  double spread() const { return min_ratio > 0 ? max_ratio / min_ratio : 0.0; }
};

inline GibbsReport gibbs_diagnostic(const CylinderTable& mu,
                                    std::span<const double> reference) {
  if (reference.size() != mu.masses.size())
    throw validation_error("gibbs_diagnostic: reference size mismatch");
  GibbsReport rep;
  rep.depth = mu.depth;
  rep.min_ratio = std::numeric_limits<double>::infinity();
  rep.max_ratio = 0.0;
  for (std::size_t r = 0; r < reference.size(); ++r) {
    if (reference[r] <= 0.0 && mu.masses[r] <= 0.0) continue;
    if (reference[r] <= 0.0 || mu.masses[r] <= 0.0) continue;  // zero-mass words excluded
    const double ratio = mu.masses[r] / reference[r];
    rep.min_ratio = std::min(rep.min_ratio, ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    ++rep.compared;
  }
  if (rep.compared == 0)
    throw validation_error("gibbs_diagnostic: empty support");
  return rep;
}

// Correlation ratios sum_{i<=p} m(A n s^{-g-i} B) / (m(A) m(B)) for each
// tested gap g, measured on the Cesaro average of the depth-N weights.
struct MixingReport {
  std::vector<std::pair<int, double>> ratios;  // (gap, ratio)
  double min_ratio = std::numeric_limits<double>::infinity();
  bool exact_mode = false;
};

inline MixingReport mixing_diagnostic(const PhiTildeTable& eta,
                                      const Word& a, const Word& b, int p,
                                      const std::vector<int>& gaps,
                                      bool exact_mode = false,
                                      const ComputeCaps& caps = {}) {
  const int N = eta.depth;
  int max_gap = 0;
  for (int g : gaps) max_gap = std::max(max_gap, g);
  const int pp = exact_mode ? 0 : p;
  if (static_cast<int>(a.size()) + max_gap + pp + static_cast<int>(b.size()) > N)
    throw depth_error("mixing_diagnostic: |A| + gap + p + |B| must be <= N");

  LanguageIndex ln(eta.host, N);
  check_word_cap(ln.size(), caps, "mixing_diagnostic");

  // the pattern list: (offset of B) for every gap+i combination, plus the
  // two single blocks
  std::vector<int> offsets;  // distances m such that B sits at position m
  for (int g : gaps)
    for (int i = 0; i <= pp; ++i) offsets.push_back(g + (exact_mode ? 0 : i));
  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());

  const int la = static_cast<int>(a.size());
  const int lb = static_cast<int>(b.size());
  // joint[m] = averaged mass of { x : x starts with A and s^m x starts with B }
  std::vector<double> joint_sum(offsets.size(), 0.0);
  std::vector<int> joint_cnt(offsets.size(), 0);
  double a_sum = 0.0, b_sum = 0.0;
  int a_cnt = 0, b_cnt = 0;

  ln.for_each_word([&](std::span<const Symbol> w, std::uint64_t r) {
    const double lg = eta.log_values[r];
    if (std::isinf(lg) && lg < 0) return;
    const double mass = std::exp(lg);
    for (int i = 0; i + la <= N; ++i)
      if (std::equal(a.begin(), a.end(), w.begin() + i)) a_sum += mass;
    for (int i = 0; i + lb <= N; ++i)
      if (std::equal(b.begin(), b.end(), w.begin() + i)) b_sum += mass;
    for (std::size_t oi = 0; oi < offsets.size(); ++oi) {
      const int m = offsets[oi];
      const int span = std::max(m + lb, la);
      for (int i = 0; i + span <= N; ++i)
        if (std::equal(a.begin(), a.end(), w.begin() + i) &&
            std::equal(b.begin(), b.end(), w.begin() + i + m))
          joint_sum[oi] += mass;
    }
  });
  a_cnt = N - la + 1;
  b_cnt = N - lb + 1;
  for (std::size_t oi = 0; oi < offsets.size(); ++oi)
    joint_cnt[oi] = N - std::max(offsets[oi] + lb, la) + 1;

  const double ma = a_sum / a_cnt;
  const double mb = b_sum / b_cnt;
  if (ma <= 0 || mb <= 0)
    throw validation_error("mixing_diagnostic: A or B has zero mass");

  auto joint_avg = [&](int m) {
    auto it = std::lower_bound(offsets.begin(), offsets.end(), m);
    const std::size_t oi = static_cast<std::size_t>(it - offsets.begin());
    return joint_sum[oi] / joint_cnt[oi];
  };

  MixingReport rep;
  rep.exact_mode = exact_mode;
  for (int g : gaps) {
    double s = 0.0;
    if (exact_mode)
      s = joint_avg(g);
    else
      for (int i = 0; i <= p; ++i) s += joint_avg(g + i);
    const double ratio = s / (ma * mb);
    rep.ratios.emplace_back(g, ratio);
    rep.min_ratio = std::min(rep.min_ratio, ratio);
  }
  return rep;
}

// ---- entropy estimators ------------------------------------------------

namespace detail {

// prefix marginal of a depth-d mass table at depth j <= d
inline std::vector<double> prefix_marginal(const Sft& x,
                                           std::span<const double> masses,
                                           int d, int j) {
  LanguageIndex ld(x, d), lj(x, j);
  std::vector<double> out(lj.size(), 0.0);
  ld.for_each_word([&](std::span<const Symbol> w, std::uint64_t r) {
    if (masses[r] != 0.0) out[lj.rank(w.first(j))] += masses[r];
  });
  return out;
}

inline double block_entropy(std::span<const double> masses) {
  double h = 0.0;
  for (double m : masses)
    if (m > 0.0) h -= m * std::log(m);
  return h;
}

inline std::vector<double> suffix_marginal(const Sft& x,
                                           std::span<const double> masses,
                                           int d, int j) {
  LanguageIndex ld(x, d), lj(x, j);
  std::vector<double> out(lj.size(), 0.0);
  ld.for_each_word([&](std::span<const Symbol> w, std::uint64_t r) {
    if (masses[r] != 0.0) out[lj.rank(w.subspan(d - j))] += masses[r];
  });
  return out;
}

}  // namespace detail

struct LevelEntropyReport {
  int level = 1;
  std::vector<double> block_entropy;        // H_j, j = 1..d
  std::vector<double> conditional_entropy;  // H_j - H_{j-1}
  std::vector<double> pushforward_masses;   // depth-d table on the level SFT
  double upper_estimate() const { return conditional_entropy.back(); }
};

struct ObjectiveReport {
  std::vector<LevelEntropyReport> levels;
  double potential_average = 0.0;  // (1/d) sum mu(I) log phi(I)
  double objective_upper = 0.0;    // potential_average + sum a_i h_i
  double estimator_slack = 0.0;    // sum a_i (H_d/d - cond_d) + renorm error
};

// Certified upper estimates of the weighted objective of an invariant
// measure given its depth-d cylinder table: block-entropy upper bounds per
// pushforward level plus the sub-additive potential average.
inline ObjectiveReport entropy_and_objective(const FactorChain& chain,
                                             const CylinderTable& mu,
                                             const Potential& phi,
                                             const ComputeCaps& caps = {}) {
  const int d = mu.depth;
  const int k = chain.depth();
  if (d < 1) throw depth_error("entropy_and_objective needs depth >= 1");

  // stationarity proxy: prefix and suffix marginals at depth d-1 must agree
  if (d >= 2) {
    auto pre = detail::prefix_marginal(chain.levels[0], mu.masses, d, d - 1);
    auto suf = detail::suffix_marginal(chain.levels[0], mu.masses, d, d - 1);
    double dev = 0.0;
    for (std::size_t i = 0; i < pre.size(); ++i)
      dev = std::max(dev, std::abs(pre[i] - suf[i]));
    if (dev > mu.invariance_tolerance + 1e-9)
      throw validation_error(
          "inconsistent marginals: table deviates from shift-invariance by " +
          std::to_string(dev));
  }

  ObjectiveReport rep;
  rep.levels.resize(k);
  const auto prefix_weights = chain.weight_prefix_sums();
  (void)prefix_weights;

  for (int i = 0; i < k; ++i) {
    LevelEntropyReport& lv = rep.levels[i];
    lv.level = i + 1;
    const Sft& xi = chain.levels[i];
    // pushforward of the depth-d table under tau_{i-1}
    if (i == 0) {
      lv.pushforward_masses = mu.masses;
    } else {
      LanguageIndex l1(chain.levels[0], d);
      LanguageIndex li(xi, d);
      std::vector<Symbol> tau = chain.tau(i);
      lv.pushforward_masses.assign(li.size(), 0.0);
      Word buf(d);
      l1.for_each_word([&](std::span<const Symbol> w, std::uint64_t r) {
        if (mu.masses[r] == 0.0) return;
        for (int t = 0; t < d; ++t) buf[t] = tau[w[t]];
        lv.pushforward_masses[li.rank(buf)] += mu.masses[r];
      });
    }
    double prev = 0.0;
    for (int j = 1; j <= d; ++j) {
      const auto marg =
          (j == d) ? lv.pushforward_masses
                   : detail::prefix_marginal(xi, lv.pushforward_masses, d, j);
      const double hj = detail::block_entropy(marg);
      lv.block_entropy.push_back(hj);
      lv.conditional_entropy.push_back(hj - prev);
      prev = hj;
    }
  }

  // potential average over the depth-d table
  std::vector<double> philog =
      materialize_potential_table(chain.levels[0], phi, d, 1.0, caps);
  double avg = 0.0;
  for (std::size_t r = 0; r < philog.size(); ++r)
    if (mu.masses[r] > 0.0) avg += mu.masses[r] * philog[r];
  rep.potential_average = avg / d;

  rep.objective_upper = rep.potential_average;
  rep.estimator_slack = mu.normalization_error;
  for (int i = 0; i < k; ++i) {
    const double hd = rep.levels[i].block_entropy.back();
    const double cond = rep.levels[i].conditional_entropy.back();
    rep.objective_upper += chain.weights[i] * cond;
    rep.estimator_slack += chain.weights[i] * std::max(0.0, hd / d - cond);
  }
  return rep;
}

// ---- conditional equilibrium --------------------------------------------

struct ConditionalReport {
  double psi_star_estimate = 0.0;  // (1/n) sum nu log psi
  double h_mu_estimate = 0.0;
  double h_nu_estimate = 0.0;
  double potential_average = 0.0;
  double lhs_estimate = 0.0;  // Phi_* + h_mu - h_nu
  double gap = 0.0;
};

// The relative construction eta_n(I) = nu(pi I) phi(I) / psi(pi I) with
// 0/0 = 0, Cesaro-averaged to depth d, plus the relativized-pressure
// report comparing both sides of the variational identity.
inline std::pair<CylinderTable, ConditionalReport> conditional_equilibrium(
    const FactorMap& pi, const Potential& phi, const CylinderTable& nu, int d,
    const ComputeCaps& caps = {}) {
  const int n = nu.depth;
  if (d < 1 || 2 * d > n)
    throw depth_error("conditional_equilibrium needs 1 <= d <= n/2");
  LanguageIndex ly(pi.target, n);
  if (nu.masses.size() != ly.size())
    throw validation_error("nu table does not match L_n(Y)");

  FiberTable psi = fiber_potential(pi, phi, 1.0, 1.0, n, caps);
  for (std::uint64_t j = 0; j < ly.size(); ++j)
    if (nu.masses[j] > 0.0 && std::isinf(psi.log_values[j]))
      throw validation_error(
          "nu is not supported on the image of the phi-weighted language");

  // eta over L_n(X), streamed into the shift marginals
  const Sft& x = pi.source;
  std::vector<double> phitab = materialize_potential_table(x, phi, n, 1.0, caps);
  LanguageIndex lx(x, n), ld(x, d);
  check_word_cap(lx.size(), caps, "conditional_equilibrium");
  detail::ProjRankStack proj(pi.target, pi.symbol_map, ly, n);
  detail::ShiftMarginals sm;
  sm.n = n;
  sm.d = d;
  sm.words_d = ld.size();
  sm.acc.assign(static_cast<std::size_t>(n - d + 1) * ld.size(), 0.0);
  lx.walk(
      [&](Symbol s, int depth) { proj.push(s, depth); }, [](int) {},
      [&](std::span<const Symbol> w, std::uint64_t r) {
        const std::uint64_t j = proj.rank();
        if (nu.masses[j] <= 0.0) return;
        const double lg =
            std::log(nu.masses[j]) + phitab[r] - psi.log_values[j];
        if (std::isinf(lg) && lg < 0) return;
        const double p = std::exp(lg);
        for (int m = 0; m + d <= n; ++m)
          sm.acc[static_cast<std::size_t>(m) * sm.words_d +
                 ld.rank(w.subspan(m, d))] += p;
      });
  CylinderTable mu = detail::cesaro_from_marginals(x, sm);

  ConditionalReport rep;
  for (std::uint64_t j = 0; j < ly.size(); ++j)
    if (nu.masses[j] > 0.0)
      rep.psi_star_estimate += nu.masses[j] * psi.log_values[j];
  rep.psi_star_estimate /= n;

  // h_nu from nu's own marginals, conditional estimate at depth min(n, d+1)
  const int jn = std::min(n, d + 1);
  const auto nu_j = detail::prefix_marginal(pi.target, nu.masses, n, jn);
  const auto nu_j1 = detail::prefix_marginal(pi.target, nu.masses, n, jn - 1);
  rep.h_nu_estimate =
      detail::block_entropy(nu_j) -
      (jn >= 2 ? detail::block_entropy(nu_j1) : 0.0);

  FactorChain single = FactorChain::single(x);
  ObjectiveReport obj = entropy_and_objective(single, mu, phi, caps);
  rep.h_mu_estimate = obj.levels[0].upper_estimate();
  rep.potential_average = obj.potential_average;
  rep.lhs_estimate =
      rep.potential_average + rep.h_mu_estimate - rep.h_nu_estimate;
  rep.gap = std::abs(rep.lhs_estimate - rep.psi_star_estimate);
  return {std::move(mu), rep};
}

}  // namespace thermoweight

#endif
