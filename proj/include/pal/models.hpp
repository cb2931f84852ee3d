#ifndef PAL_MODELS_HPP
#define PAL_MODELS_HPP

#include <utility>
#include <vector>

#include "pal/model.hpp"

namespace pal {

/// Options shared by the SEIR builders.  Empty vectors select the closed
/// population defaults (delta == 1, alpha == 0, kappa == 0).
struct SeirOptions {
  double h = 1.0;
  InitialDistribution initial = DeterministicInit{IVec()};
  Vec alpha;  // immigration intensities, length 4
  Vec delta;  // survival probabilities, length 4
  // prevalence block
  bool with_prevalence = false;
  Vec q;
  Mat G;
  Vec kappa;
  // incidence block
  bool with_incidence = false;
  Mat Q;
  std::vector<int> tau;
  // per-capita limits
  Vec lambda0_limit;
  Vec alpha_limit;
  Vec kappa_limit;
};

/// Discrete-time SEIR as a Latent Compartmental Model; the infection hazard
/// uses the third coordinate of the normalised summary vector.
ModelSpec build_seir(double beta, double rho, double gamma, const SeirOptions& opt);

/// The simulation-study SEIR: Mult(n, [.99 0 .01 0]) start, immigration
/// 0.04n, survival 0.98, clutter 0.01n, detection [.1 .1 .3 .2] and the
/// false-positive/false-negative mis-reporting matrix, with per-capita
/// limits declared.  Parameters (beta, rho, gamma).
ModelFamily seir_sim_study_family(std::int64_t n);
SeirOptions seir_sim_study_options(std::int64_t n);

/// Boarding-school SIR: fixed start x0 (default [763 1 0]), closed
/// population, observed symptomatic counts encoded as y = [0 y 0] with
/// q = [0 q 0].  Parameters (beta, gamma, q) with the truncated-Gaussian
/// priors used for the outbreak data.
ModelSpec build_sir_boarding(double beta, double gamma, double q,
                             const IVec& x0 = IVec());
ModelFamily sir_boarding_family(const IVec& x0 = IVec());

/// Age-structured SEIR with d groups (m = 4d): symmetric contact matrix B,
/// per-group hazards B * (infective fractions), weekly aggregated incidence
/// on the E->I edge reported with probability q.  The kernel carries the
/// block-diagonal structure so filtering cost is linear in d.
struct AgeStructuredOptions {
  double h = 1.0 / 7.0;     // daily steps, rates per week
  int tau_step = 7;         // weekly observations
  int weeks = 19;
  std::vector<IVec> x0;     // initial state per group
  double rho = 7.0 / 1.5;   // per-week exit rate from E (1.5 days)
  double gamma = 7.0 / 1.5; // per-week recovery rate
};
ModelSpec build_age_structured(const Mat& B, double q, const AgeStructuredOptions& opt);
/// Parameters: upper triangle of B (b_11, b_12, ..., b_dd) followed by q.
ModelFamily age_structured_family(int d, const AgeStructuredOptions& opt);

/// Reproduction number from the next-generation matrix n_i B_ij / (n gamma):
/// largest eigenvalue modulus.
double next_generation_r0(const Mat& B, const Vec& group_populations, double gamma);
/// Power-iteration evaluation of the same quantity, kept as an independent
/// check of the eigensolver route.
double next_generation_r0_power(const Mat& B, const Vec& group_populations, double gamma,
                                int iters = 500);

/// Static data of the spatial measles model: city populations, distances,
/// lagged birth schedules, death rates, reporting rates and school calendar.
struct GravityConfig {
  Vec populations;   // n_k
  Mat distances;     // s_kl, symmetric, positive off diagonal
  Mat births;        // years x J, annual births already shifted by the entry lag
  Mat death_rate;    // years x J, annual death rates
  Vec report_rate;   // per-city reporting probability of the I->R edge
  int steps_per_year = 104;  // half-week steps
  std::vector<std::pair<int, int>> term_ranges;  // school terms as [start, end) steps
  int tau_step = 4;  // fortnightly observations

  int cities() const { return static_cast<int>(populations.size()); }
  double term_proportion() const;
  bool in_term(int step_of_year) const;
  void validate() const;
};

struct MeaslesParams {
  double beta_bar = 0.0;
  double rho = 0.0;
  double gamma = 0.0;
  double g = 0.0;  // gravitational constant
  double a = 0.0;  // holiday effect
  double c = 0.0;  // cohort fraction
  Vec pi0;         // length-4 initial distribution
};

/// Gravity-coupled measles metapopulation model (m = 4J): per-city SEIR
/// blocks, school-term forcing, lagged births with a cohort pulse, death
/// thinning, aggregated I->R incidence.  City coupling enters only through
/// the infective fractions with fixed initial populations as denominators.
ModelSpec build_measles_gravity(const GravityConfig& cfg, const MeaslesParams& p);
/// Parameters: beta_bar, rho, gamma, g, a, c, pi1, pi2, pi3.
ModelFamily measles_family(const GravityConfig& cfg);

std::vector<int> measles_schedule(const GravityConfig& cfg, int T);

}  // namespace pal

#endif
