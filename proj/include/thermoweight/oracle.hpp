#ifndef THERMOWEIGHT_ORACLE_HPP
#define THERMOWEIGHT_ORACLE_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "thermoweight/chain.hpp"
#include "thermoweight/equilibrium.hpp"
#include "thermoweight/errors.hpp"
#include "thermoweight/potential.hpp"
#include "thermoweight/pressure.hpp"
#include "thermoweight/sft.hpp"

namespace thermoweight {

// Stationary Markov measure of a given order on an SFT: kernel rows are
// indexed by L_order(X) states, the initial law is the stationary solution
// of the kernel.  Competitor measures for variational sweeps, with exact
// entropy.
struct MarkovMeasure {
  Sft host;
  int order = 1;
  std::vector<double> kernel;   // |L_order| x K row-major
  std::vector<double> initial;  // stationary law on L_order
};

namespace detail {

// solve pi = pi T, sum pi = 1 by Gaussian elimination on (T^t - I)
inline std::vector<double> stationary_law(const std::vector<double>& t,
                                          std::size_t s) {
  std::vector<double> m(s * (s + 1), 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j)
      m[i * (s + 1) + j] = t[j * s + i] - (i == j ? 1.0 : 0.0);
    m[i * (s + 1) + s] = 0.0;
  }
  // replace the last equation with the normalization
  for (std::size_t j = 0; j < s; ++j) m[(s - 1) * (s + 1) + j] = 1.0;
  m[(s - 1) * (s + 1) + s] = 1.0;

  for (std::size_t col = 0; col < s; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col; r < s; ++r)
      if (std::abs(m[r * (s + 1) + col]) > std::abs(m[piv * (s + 1) + col]))
        piv = r;
    if (std::abs(m[piv * (s + 1) + col]) < 1e-13)
      throw validation_error("stationary law is not unique (reducible kernel)");
    if (piv != col)
      for (std::size_t j = 0; j <= s; ++j)
        std::swap(m[piv * (s + 1) + j], m[col * (s + 1) + j]);
    for (std::size_t r = 0; r < s; ++r) {
      if (r == col) continue;
      const double f = m[r * (s + 1) + col] / m[col * (s + 1) + col];
      if (f == 0.0) continue;
      for (std::size_t j = col; j <= s; ++j)
        m[r * (s + 1) + j] -= f * m[col * (s + 1) + j];
    }
  }
  std::vector<double> pi(s);
  for (std::size_t i = 0; i < s; ++i)
    pi[i] = m[i * (s + 1) + s] / m[i * (s + 1) + i];
  return pi;
}

}  // namespace detail

// Builds a MarkovMeasure, solving the stationarity equations for the
// initial law; rejects kernels that are not row-stochastic, put mass on
// forbidden transitions, or have no unique stationary law.
inline MarkovMeasure make_markov(const Sft& host, int order,
                                 std::vector<double> kernel) {
  if (order < 0) throw validation_error("markov order must be >= 0");
  const int k = host.alphabet_size();
  if (order == 0 && !host.is_full_shift())
    throw validation_error("order-0 (Bernoulli) kernels need a full shift");
  LanguageIndex lo(host, order);
  const std::size_t states = lo.size();
  if (kernel.size() != states * k)
    throw validation_error("markov kernel has the wrong shape");

  std::vector<Word> state_words = enumerate_language(host, order);
  for (std::size_t u = 0; u < states; ++u) {
    double row = 0.0;
    for (int j = 0; j < k; ++j) {
      const double p = kernel[u * k + j];
      if (p < 0) throw validation_error("negative kernel entry");
      if (p > 0 && order >= 1 && !host.edge(state_words[u].back(), j))
        throw validation_error("kernel puts mass on a forbidden transition");
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-9)
      throw validation_error("kernel row " + std::to_string(u) +
                             " sums to " + std::to_string(row));
  }

  // state transition matrix under the kernel
  std::vector<double> t(states * states, 0.0);
  Word buf;
  for (std::size_t u = 0; u < states; ++u)
    for (int j = 0; j < k; ++j) {
      const double p = kernel[u * k + j];
      if (p == 0.0) continue;
      buf.assign(state_words[u].begin(), state_words[u].end());
      buf.push_back(j);
      const std::uint64_t v =
          (order == 0) ? 0 : lo.rank(std::span(buf).subspan(1));
      t[u * states + v] += p;
    }
  std::vector<double> pi = detail::stationary_law(t, states);
  for (double& p : pi) p = std::max(p, 0.0);
  double residual = 0.0;
  for (std::size_t v = 0; v < states; ++v) {
    double acc = 0.0;
    for (std::size_t u = 0; u < states; ++u) acc += pi[u] * t[u * states + v];
    residual = std::max(residual, std::abs(acc - pi[v]));
  }
  if (residual > 1e-10)
    throw validation_error("non-stationary kernel rejected (residual " +
                           std::to_string(residual) + ")");
  return MarkovMeasure{host, order, std::move(kernel), std::move(pi)};
}

// Exact entropy -sum_u pi(u) sum_j P(u,j) log P(u,j).
inline double markov_entropy(const MarkovMeasure& mu) {
  const int k = mu.host.alphabet_size();
  double h = 0.0;
  for (std::size_t u = 0; u < mu.initial.size(); ++u)
    for (int j = 0; j < k; ++j) {
      const double p = mu.kernel[u * k + j];
      if (p > 0) h -= mu.initial[u] * p * std::log(p);
    }
  return h;
}

// Cylinder masses at depth d by kernel products (marginal of the initial
// law when d <= order).
inline CylinderTable markov_cylinder_table(const MarkovMeasure& mu, int d,
                                           const ComputeCaps& caps = {}) {
  if (d < 0) throw depth_error("markov_cylinder_table needs d >= 0");
  const Sft& x = mu.host;
  const int k = x.alphabet_size();
  CylinderTable out;
  out.host = x;
  out.depth = d;
  out.invariance_tolerance = 1e-10;

  LanguageIndex lo(x, mu.order);
  LanguageIndex ld(x, d);
  check_word_cap(ld.size(), caps, "markov_cylinder_table");
  out.masses.assign(ld.size(), 0.0);

  if (d <= mu.order) {
    std::vector<Word> states = enumerate_language(x, mu.order);
    for (std::size_t u = 0; u < states.size(); ++u)
      out.masses[ld.rank(std::span(states[u]).first(d))] += mu.initial[u];
    return out;
  }

  ld.for_each_word([&](std::span<const Symbol> w, std::uint64_t r) {
    double mass = mu.initial[lo.rank(w.first(mu.order))];
    for (int t = mu.order; t < d && mass > 0; ++t) {
      const std::uint64_t state =
          (mu.order == 0) ? 0 : lo.rank(w.subspan(t - mu.order, mu.order));
      mass *= mu.kernel[state * k + w[t]];
    }
    out.masses[r] = mass;
  });
  return out;
}

// Seeded random kernel supported on the legal transitions.
inline MarkovMeasure random_markov(const Sft& host, int order,
                                   std::mt19937_64& rng) {
  const int k = host.alphabet_size();
  LanguageIndex lo(host, order);
  std::vector<Word> states = enumerate_language(host, order);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::vector<double> kernel(states.size() * k, 0.0);
    for (std::size_t u = 0; u < states.size(); ++u) {
      double row = 0.0;
      for (int j = 0; j < k; ++j) {
        const bool legal = (order == 0) || host.edge(states[u].back(), j);
        if (legal) {
          kernel[u * k + j] = unif(rng);
          row += kernel[u * k + j];
        }
      }
      for (int j = 0; j < k; ++j) kernel[u * k + j] /= row;
    }
    try {
      return make_markov(host, order, std::move(kernel));
    } catch (const validation_error&) {
      continue;  // reducible draw; try again
    }
  }
  throw validation_error("random_markov: could not draw an irreducible kernel");
}

// Exact weighted pressure of the constant potential on a two-level
// full-shift chain with given fiber sizes, plus the per-symbol weights of
// the unique equilibrium (symbols in fiber b all get the same weight).
// Fiber sizes may be positive reals so the formula can be composed for
// deeper towers.
struct ClosedFormResult {
  double pressure = 0.0;
  std::vector<double> symbol_weight_per_fiber;  // weight of one symbol in fiber b
};

inline ClosedFormResult closed_form_full_shift(
    const std::vector<double>& fiber_sizes, double a1, double a2) {
  if (!(a1 > 0) || a2 < 0)
    throw validation_error("closed form needs a1 > 0, a2 >= 0");
  const double e = a1 / (a1 + a2);
  double z = 0.0;
  for (double nb : fiber_sizes) {
    if (!(nb > 0)) throw validation_error("fiber sizes must be positive");
    z += std::pow(nb, e);
  }
  ClosedFormResult res;
  res.pressure = (a1 + a2) * std::log(z);
  for (double nb : fiber_sizes)
    res.symbol_weight_per_fiber.push_back(std::pow(nb, e - 1.0) / z);
  return res;
}

// Dominance report: every candidate's certified objective upper estimate
// must stay below the pressure upper bound; the pipeline equilibrium must
// attain the lower bound up to its reported estimator slack.
struct SweepReport {
  std::vector<double> objectives;
  double best_objective = -std::numeric_limits<double>::infinity();
  bool dominance_ok = true;
  double equilibrium_objective = 0.0;
  double equilibrium_slack = 0.0;
  bool attainment_ok = true;
  std::uint64_t seed = 0;
};

inline SweepReport variational_sweep(const FactorChain& chain,
                                     const Potential& phi,
                                     const std::vector<MarkovMeasure>& candidates,
                                     int d, const PressureBracket& bracket,
                                     const CylinderTable* equilibrium = nullptr,
                                     double tolerance = 1e-9,
                                     const ComputeCaps& caps = {}) {
  SweepReport rep;
  for (const MarkovMeasure& cand : candidates) {
    if (cand.host.alphabet_size() != chain.levels[0].alphabet_size())
      throw validation_error("sweep candidate is not hosted on X_1");
    CylinderTable table = markov_cylinder_table(cand, d, caps);
    ObjectiveReport obj = entropy_and_objective(chain, table, phi, caps);
    rep.objectives.push_back(obj.objective_upper);
    rep.best_objective = std::max(rep.best_objective, obj.objective_upper);
    if (obj.objective_upper > bracket.upper + tolerance) rep.dominance_ok = false;
  }
  if (equilibrium) {
    ObjectiveReport obj = entropy_and_objective(chain, *equilibrium, phi, caps);
    rep.equilibrium_objective = obj.objective_upper;
    rep.equilibrium_slack = obj.estimator_slack;
    rep.attainment_ok = obj.objective_upper >=
                        bracket.lower - obj.estimator_slack - tolerance;
  }
  return rep;
}

}  // namespace thermoweight

#endif
