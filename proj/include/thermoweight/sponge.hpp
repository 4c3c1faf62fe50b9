#ifndef THERMOWEIGHT_SPONGE_HPP
#define THERMOWEIGHT_SPONGE_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "thermoweight/chain.hpp"
#include "thermoweight/equilibrium.hpp"
#include "thermoweight/errors.hpp"
#include "thermoweight/oracle.hpp"
#include "thermoweight/potential.hpp"
#include "thermoweight/pressure.hpp"
#include "thermoweight/sft.hpp"

namespace thermoweight {

// A self-affine Sierpinski sponge: image on the k-torus of a digit
// subshift under the base-(m_1,...,m_k) coding of the diagonal
// endomorphism.  Digits are k-vectors; an optional transition matrix over
// the digit set replaces the full shift.
struct SpongeSpec {
  std::vector<int> bases;                // 2 <= m_1 <= ... <= m_k
  std::vector<std::vector<int>> digits;  // distinct k-vectors, lex-sorted on input
  std::optional<std::vector<std::vector<int>>> sft_transitions;
};

inline void validate_sponge_spec(const SpongeSpec& spec) {
  const int k = static_cast<int>(spec.bases.size());
  if (k < 1) throw validation_error("sponge needs at least one base");
  for (int i = 0; i < k; ++i) {
    if (spec.bases[i] < 2) throw validation_error("sponge bases must be >= 2");
    if (i && spec.bases[i] < spec.bases[i - 1])
      throw validation_error("sponge bases must be nondecreasing");
  }
  if (spec.digits.empty()) throw validation_error("sponge digit set is empty");
  for (const auto& d : spec.digits) {
    if (static_cast<int>(d.size()) != k)
      throw validation_error("digit arity does not match the bases");
    for (int i = 0; i < k; ++i)
      if (d[i] < 0 || d[i] >= spec.bases[i])
        throw validation_error("digit coordinate out of range");
  }
  auto sorted = spec.digits;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw validation_error("duplicate digits");
}

// Kenyon-Peres weight vector for bases m_1 <= ... <= m_k:
// a_1 = 1/log m_k, a_{i+1} = 1/log m_{k-i} - 1/log m_{k-i+1}.
inline std::vector<double> kenyon_peres_weights(const std::vector<int>& bases) {
  const int k = static_cast<int>(bases.size());
  std::vector<double> a(k);
  a[0] = 1.0 / std::log(static_cast<double>(bases[k - 1]));
  for (int i = 1; i < k; ++i)
    a[i] = 1.0 / std::log(static_cast<double>(bases[k - 1 - i])) -
           1.0 / std::log(static_cast<double>(bases[k - i]));
  return a;
}

// The coordinate-projection tower: X_1 is the digit subshift, X_{i+1} its
// image under dropping the last (largest-base) coordinate, with the
// existential-image transition relation.  validate_chain must pass at the
// requested depth; a failure means the image language is a proper sofic
// subshift of the projected relation and the computation aborts.
inline FactorChain build_sponge_chain(const SpongeSpec& spec,
                                      int validation_depth = 3,
                                      const ComputeCaps& caps = {}) {
  validate_sponge_spec(spec);
  const int k = static_cast<int>(spec.bases.size());
  auto digits = spec.digits;
  std::sort(digits.begin(), digits.end());

  FactorChain chain;
  if (spec.sft_transitions) {
    Sft x1(static_cast<int>(digits.size()), *spec.sft_transitions);
    // normalization may delete digits; keep the survivors in digit space
    std::vector<std::vector<int>> kept;
    for (int s : x1.original_symbol()) kept.push_back(digits[s]);
    digits = std::move(kept);
    chain.levels.push_back(std::move(x1));
  } else {
    chain.levels.push_back(Sft::full_shift(static_cast<int>(digits.size())));
  }

  std::vector<std::vector<int>> level_digits = digits;
  for (int i = 1; i < k; ++i) {
    // project away the last coordinate of the current level's digits
    std::vector<std::vector<int>> proj(level_digits.size());
    for (std::size_t s = 0; s < level_digits.size(); ++s)
      proj[s] = std::vector<int>(level_digits[s].begin(),
                                 level_digits[s].end() - 1);
    std::vector<std::vector<int>> targets = proj;
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

    std::vector<Symbol> map(level_digits.size());
    for (std::size_t s = 0; s < proj.size(); ++s)
      map[s] = static_cast<Symbol>(
          std::lower_bound(targets.begin(), targets.end(), proj[s]) -
          targets.begin());

    const Sft& src = chain.levels.back();
    const int kt = static_cast<int>(targets.size());
    std::vector<std::vector<int>> trans(kt, std::vector<int>(kt, 0));
    for (Symbol a = 0; a < src.alphabet_size(); ++a)
      for (Symbol b : src.successors(a)) trans[map[a]][map[b]] = 1;
    Sft target(kt, trans);
    if (target.alphabet_size() != kt)
      throw validation_error("projected transition relation is not essential");
    chain.levels.push_back(std::move(target));
    chain.symbol_maps.push_back(std::move(map));
    level_digits = std::move(targets);
  }
  chain.weights = kenyon_peres_weights(spec.bases);

  ValidationReport report = validate_chain(chain, validation_depth, caps);
  if (!report.passed)
    throw validation_error(
        "sponge projection chain failed validation (the image language is a "
        "proper sofic subshift): " + report.summary());
  return chain;
}

struct SpongeDimension {
  PressureBracket bracket;  // brackets dim_H R(X)
  CylinderTable measure;    // Cesaro table of the maximizing measure
  int measure_depth_n = 0;  // depth used for the measure construction
  DwConstants folded_constants;
  std::vector<double> weights;
};

// Hausdorff dimension of the sponge as the Kenyon-Peres-weighted pressure
// of the constant potential, with the Cesaro table of the unique
// dimension-maximizing measure.  The measure stage uses the largest depth
// <= n whose level-1 language fits the word cap.
inline SpongeDimension sponge_dimension(const SpongeSpec& spec, int n, int d,
                                        const WeightedPressureOptions& opts_in = {}) {
  FactorChain chain = build_sponge_chain(spec, 3, opts_in.caps);
  SpecificationGaps gaps = specification_gaps(chain.levels[0]);
  if (!gaps.weak_p)
    throw validation_error(
        "digit subshift does not satisfy weak specification; the uniqueness "
        "theorem does not apply");

  Potential constant;  // phi = 1
  WeightedPressureOptions opts = opts_in;
  opts.want_level1_table = false;
  WeightedPressureResult wp = weighted_pressure(chain, constant, n, opts);

  int n_measure = n;
  while (n_measure > 2 * d &&
         LanguageIndex(chain.levels[0], n_measure).size() > opts.caps.max_words)
    --n_measure;
  if (LanguageIndex(chain.levels[0], n_measure).size() > opts.caps.max_words)
    throw resource_error("sponge measure table cannot fit the word cap");
  if (2 * d > n_measure)
    throw depth_error("sponge_dimension needs d <= n_measure/2");

  ChainTables tabs =
      (n_measure == n) ? std::move(wp.tables)
                       : build_chain_tables(chain, constant, n_measure,
                                            opts.caps, false);
  CylinderTable measure = equilibrium_measure(tabs, constant, d, opts.caps);

  SpongeDimension out;
  out.bracket = wp.bracket;
  out.measure = std::move(measure);
  out.measure_depth_n = n_measure;
  out.folded_constants = wp.folded_constants;
  out.weights = chain.weights;
  return out;
}

// Bedford-McMullen closed form for k = 2 full-shift digit systems:
// log_{m_1} sum_b t_b^{log m_1 / log m_2}, t_b the fiber count over the
// first (base m_1) coordinate.  Agrees with closed_form_full_shift applied
// to the Kenyon-Peres weights.
inline double mcmullen_oracle(const SpongeSpec& spec) {
  validate_sponge_spec(spec);
  if (spec.bases.size() != 2 || spec.sft_transitions)
    throw validation_error("mcmullen_oracle needs k = 2 full-shift digits");
  const double m1 = spec.bases[0], m2 = spec.bases[1];
  std::vector<int> counts(spec.bases[0], 0);
  for (const auto& dgt : spec.digits) ++counts[dgt[0]];
  double z = 0.0;
  for (int t : counts)
    if (t > 0) z += std::pow(static_cast<double>(t), std::log(m1) / std::log(m2));
  return std::log(z) / std::log(m1);
}

}  // namespace thermoweight

#endif
