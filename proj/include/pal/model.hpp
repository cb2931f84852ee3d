#ifndef PAL_MODEL_HPP
#define PAL_MODEL_HPP

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pal/types.hpp"

namespace pal {

/// Initial distribution of the compartment counts.
struct VectorPoissonInit {
  Vec lambda0;  // nonnegative intensities, one per compartment
};
struct MultinomialInit {
  std::int64_t n = 0;
  Vec pi0;  // probability vector
};
struct DeterministicInit {
  IVec x0;
};
/// Independent Multinomial(sizes[k], pi0) per block of `block_size`
/// compartments, used by metapopulation models.
struct BlockMultinomialInit {
  Vec sizes;  // expected size per block
  Vec pi0;    // shared within-block initial distribution, length block_size
};

using InitialDistribution =
    std::variant<VectorPoissonInit, MultinomialInit, DeterministicInit, BlockMultinomialInit>;

/// Mean of the initial distribution (the filter's lambda_bar_0).
Vec initial_mean(const InitialDistribution& init);
int initial_dim(const InitialDistribution& init);

/// Prevalence observation block: detection q_t, mis-reporting G_t, clutter kappa_t.
struct PrevalenceModel {
  std::function<Vec(int)> q;
  std::function<Mat(int)> G;
  std::function<Vec(int)> kappa;
  /// Per-capita clutter limit kappa_inf(t); empty if the model has no
  /// large-population embedding.
  std::function<Vec(int)> kappa_limit;
};

/// Incidence observation block: per-edge reporting Q_t and observation times.
struct IncidenceModel {
  std::function<Mat(int)> Q;
  std::vector<int> tau;  // tau_1 < tau_2 < ... (tau_0 = 0 implicit)
};

/// A latent compartmental model with all parameters bound.  Time-varying
/// ingredients are closures of t (t >= 1), so horizons need no preallocation.
/// Kernels take the raw nonnegative summary vector s; builtin generic models
/// apply normalize_counts internally while the measles model divides by fixed
/// city populations.
struct ModelSpec {
  int m = 0;
  InitialDistribution initial = DeterministicInit{IVec()};
  std::function<Vec(int)> alpha;                  // immigration intensities
  std::function<Vec(int)> delta;                  // survival probabilities
  std::function<Mat(int, const Vec&)> kernel;     // (t, s) -> row-stochastic m x m

  /// Optional block-diagonal kernel structure: m = block_size * n_blocks and
  /// kernel_blocks(t, s) returns the diagonal blocks.  The dense kernel above
  /// must agree with the assembled blocks.
  int block_size = 0;
  std::function<std::vector<Mat>(int, const Vec&)> kernel_blocks;

  std::optional<PrevalenceModel> prevalence;
  std::optional<IncidenceModel> incidence;

  /// Per-capita limits for the asymptotics module; absent (size 0 / empty
  /// function) when the model declares no large-population embedding.
  Vec lambda0_limit;
  std::function<Vec(int)> alpha_limit;

  bool has_blocks() const { return block_size > 0 && static_cast<bool>(kernel_blocks); }
  int n_blocks() const { return block_size > 0 ? m / block_size : 0; }
};

/// Prior density descriptor for one parameter.
struct Prior {
  enum class Kind { Flat, TruncNormal };
  Kind kind = Kind::Flat;
  double mean = 0.0, sd = 1.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  static Prior flat(double lo, double hi);
  static Prior trunc_normal(double mean, double sd, double lo, double hi);
  double logpdf(double x) const;
};

/// Named, bounded parameter vector with prior and proposal metadata.
struct ParamVector {
  std::vector<std::string> names;
  Vec values;
  Vec lo, hi;
  std::vector<Prior> prior;
  Vec proposal_sd;

  int dim() const { return static_cast<int>(values.size()); }
  int index_of(const std::string& name) const;
  bool within_bounds(const Vec& theta) const;
  double log_prior(const Vec& theta) const;
  void validate() const;
};

/// A parametric model: theta -> bound ModelSpec.
struct ModelFamily {
  ParamVector params;
  std::function<ModelSpec(const Vec&)> build;

  ModelSpec at(const Vec& theta) const;
};

/// Evaluates the kernel with finiteness checks; throws NumericalError
/// carrying (t, s) on a non-finite entry.
Mat eval_kernel(const ModelSpec& spec, int t, const Vec& s);

/// Checks every structural invariant for t = 1..T at a grid of probe
/// summaries; violations are returned as messages, never thrown.
std::vector<std::string> validate_spec(const ModelSpec& spec, int T);

/// True when the zero pattern of every kernel row is the same across the
/// supplied theta grid (Assumption-3-style support stability probe).
bool kernel_support_stable(const ModelFamily& family, const std::vector<Vec>& thetas,
                           const std::vector<Vec>& probes, int T);

}  // namespace pal

#endif
