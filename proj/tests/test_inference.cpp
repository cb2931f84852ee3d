#include <doctest.h>

#include "pal/inference.hpp"
#include "pal/io.hpp"
#include "pal/models.hpp"
#include "test_util.hpp"

using namespace pal;

TEST_SUITE_BEGIN("inference");

namespace {

ParamVector one_param(const std::string& name, double value, double lo, double hi,
                      double sd) {
  ParamVector p;
  p.names = {name};
  p.values = Vec::Constant(1, value);
  p.lo = Vec::Constant(1, lo);
  p.hi = Vec::Constant(1, hi);
  p.prior = {Prior::flat(lo, hi)};
  p.proposal_sd = Vec::Constant(1, sd);
  return p;
}

/// One-compartment family whose PAL is exactly a Poisson likelihood in the
/// mean parameter: x0 ~ Pois(theta), identity dynamics, full observation.
ModelFamily poisson_mean_family(double lo, double hi) {
  ModelFamily fam;
  fam.params = one_param("mean", 3.0, lo, hi, 0.8);
  fam.build = [](const Vec& theta) {
    ModelSpec spec;
    spec.m = 1;
    spec.initial = VectorPoissonInit{Vec::Constant(1, theta[0])};
    spec.alpha = [](int) { return Vec(Vec::Zero(1)); };
    spec.delta = [](int) { return Vec(Vec::Ones(1)); };
    spec.kernel = [](int, const Vec&) { return Mat(Mat::Ones(1, 1)); };
    PrevalenceModel prev;
    prev.q = [](int) { return Vec(Vec::Ones(1)); };
    prev.G = [](int) { return Mat(Mat::Ones(1, 1)); };
    prev.kappa = [](int) { return Vec(Vec::Zero(1)); };
    spec.prevalence = std::move(prev);
    return spec;
  };
  return fam;
}

ObservationSeries scalar_obs(std::int64_t y) {
  ObservationSeries obs;
  obs.kind = ObservationSeries::Kind::Prevalence;
  obs.y = {IVec(), IVec::Constant(1, y)};
  return obs;
}

/// cdf of Gamma(k, 1) with integer shape, via the Poisson tail identity.
double gamma_cdf_int(int shape, double x) {
  if (x <= 0.0) return 0.0;
  double tail = 0.0, term = 1.0;
  for (int k = 0; k < shape; ++k) {
    if (k > 0) term *= x / k;
    tail += term;
  }
  return 1.0 - std::exp(-x) * tail;
}

}  // namespace

TEST_CASE("golden-section coordinate ascent recovers a quadratic maximum") {
  ParamVector params;
  params.names = {"a", "b"};
  params.values = Vec::Zero(2);
  params.lo = Vec::Constant(2, -5.0);
  params.hi = Vec::Constant(2, 5.0);
  params.prior = {Prior::flat(-5, 5), Prior::flat(-5, 5)};
  params.proposal_sd = Vec::Constant(2, 0.1);
  auto objective = [](const Vec& th) {
    return -std::pow(th[0] - 1.3, 2) - 2.0 * std::pow(th[1] + 0.4, 2);
  };
  FitOptions opt;
  opt.outer_cycles = 60;
  opt.coordinate_iters = 40;
  const FitResult fit = maximize_objective(objective, params, Vec::Zero(2), opt);
  CHECK(std::abs(fit.theta_hat[0] - 1.3) < 1e-6);
  CHECK(std::abs(fit.theta_hat[1] + 0.4) < 1e-6);
  // the trace never decreases
  for (size_t c = 1; c < fit.trace.size(); ++c) CHECK(fit.trace[c] >= fit.trace[c - 1]);
}

TEST_CASE("coordinate ascent skips failing probes and reports them") {
  ParamVector params = one_param("a", 0.0, -2.0, 2.0, 0.1);
  auto objective = [](const Vec& th) {
    if (th[0] > 1.0) throw std::runtime_error("outside the stable region");
    return -(th[0] - 0.7) * (th[0] - 0.7);
  };
  FitOptions opt;
  opt.outer_cycles = 30;
  opt.coordinate_iters = 30;
  const FitResult fit = maximize_objective(objective, params, Vec::Zero(1), opt);
  CHECK(std::abs(fit.theta_hat[0] - 0.7) < 1e-5);
  CHECK(fit.failed_evaluations > 0);
}

TEST_CASE("parameter groups cycle in order") {
  ParamVector params;
  params.names = {"a", "b", "c"};
  params.values = Vec::Zero(3);
  params.lo = Vec::Constant(3, -3.0);
  params.hi = Vec::Constant(3, 3.0);
  params.prior = std::vector<Prior>(3, Prior::flat(-3, 3));
  params.proposal_sd = Vec::Constant(3, 0.1);
  auto objective = [](const Vec& th) { return -(th - Vec::Ones(3)).squaredNorm(); };
  FitOptions opt;
  opt.outer_cycles = 40;
  opt.coordinate_iters = 30;
  opt.groups = {{0, 2}, {1}};
  const FitResult fit = maximize_objective(objective, params, Vec::Zero(3), opt);
  CHECK((fit.theta_hat - Vec::Ones(3)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("maximum PAL on sim-study data lands near the DGP") {
  const ModelFamily fam = seir_sim_study_family(10000);
  Rng rng(61);
  auto [rec, obs] =
      simulate(fam.at(fam.params.values), 100, rng, ObservationSeries::Kind::Prevalence);
  ObservationSeries data;
  data.kind = ObservationSeries::Kind::Prevalence;
  data.y = obs.y;
  FitOptions opt;
  opt.outer_cycles = 40;
  opt.coordinate_iters = 15;
  opt.groups = {{0, 2}};  // estimate (beta, gamma) with rho held at truth
  Vec theta0 = fam.params.values;
  theta0[0] = 1.0;
  theta0[2] = 0.5;
  const FitResult fit = maximize_pal(fam, data, theta0, opt);
  CHECK(std::abs(fit.theta_hat[0] - 0.5) / 0.5 < 0.15);
  CHECK(std::abs(fit.theta_hat[2] - 0.1) / 0.1 < 0.15);
}

TEST_CASE("palmh matches the analytic posterior on the conjugate-style toy") {
  const ModelFamily fam = poisson_mean_family(0.01, 40.0);
  const ObservationSeries data = scalar_obs(3);
  MhOptions opt;
  opt.iterations = 100000;
  opt.burnin = 10000;
  opt.thin_to = 100000;
  opt.seed = 62;
  const Chain chain = metropolis_pal(fam, data, Vec::Constant(1, 3.0), opt);
  // posterior is Gamma(y + 1, 1) on an interval that carries ~all its mass
  std::vector<double> draws;
  for (Eigen::Index r = 0; r < chain.draws.rows(); r += 20) draws.push_back(chain.draws(r, 0));
  const double d = test::ks_statistic_cdf(draws, [](double x) { return gamma_cdf_int(4, x); });
  CHECK(d < 1.628 / std::sqrt(static_cast<double>(draws.size())));
}

TEST_CASE("palmh with transforms matches the same posterior") {
  const ModelFamily fam = poisson_mean_family(0.01, 40.0);
  const ObservationSeries data = scalar_obs(3);
  MhOptions opt;
  opt.iterations = 100000;
  opt.burnin = 10000;
  opt.thin_to = 100000;
  opt.seed = 63;
  opt.use_transforms = true;
  const Chain chain = metropolis_pal(fam, data, Vec::Constant(1, 3.0), opt);
  std::vector<double> draws;
  for (Eigen::Index r = 0; r < chain.draws.rows(); r += 20) draws.push_back(chain.draws(r, 0));
  const double d = test::ks_statistic_cdf(draws, [](double x) { return gamma_cdf_int(4, x); });
  CHECK(d < 1.628 / std::sqrt(static_cast<double>(draws.size())));
}

TEST_CASE("two palmh chains with different seeds agree") {
  const ModelFamily fam = poisson_mean_family(0.01, 40.0);
  const ObservationSeries data = scalar_obs(5);
  MhOptions opt;
  opt.iterations = 50000;
  opt.thin_to = 50000;
  opt.seed = 641;
  const Chain a = metropolis_pal(fam, data, Vec::Constant(1, 5.0), opt);
  opt.seed = 642;
  const Chain b = metropolis_pal(fam, data, Vec::Constant(1, 5.0), opt);
  auto mean_se = [](const Chain& c) {
    const Vec col = c.draws.col(0);
    const double m = col.mean();
    const double sd = std::sqrt((col.array() - m).square().sum() / (col.size() - 1));
    return std::pair<double, double>{m, sd / std::sqrt(effective_sample_size(col))};
  };
  const auto [ma, sa] = mean_se(a);
  const auto [mb, sb] = mean_se(b);
  CHECK(std::abs(ma - mb) < 3.0 * std::hypot(sa, sb));
}

TEST_CASE("theta-free likelihood accepts every in-bounds proposal") {
  ModelFamily fam = poisson_mean_family(0.0, 1.0);
  fam.params.proposal_sd = Vec::Constant(1, 0.02);
  const LoglikBackend flat = [](const Vec&, Rng&) { return 0.0; };
  MhOptions opt;
  opt.iterations = 20000;
  opt.seed = 64;
  const Chain chain = metropolis_exact(fam, flat, Vec::Constant(1, 0.5), opt);
  // with sd = 0.02 from the middle of [0,1] nearly every proposal is in bounds
  CHECK(chain.accept_rate[0] > 0.97);
}

TEST_CASE("pmmh with a zero-variance likelihood reproduces exact MH draw for draw") {
  // deterministic latent state, binomially observed: the PF weight is the
  // same for every particle, so its estimate is exact with zero variance
  ModelFamily fam;
  fam.params = one_param("q", 0.5, 0.0, 1.0, 0.1);
  fam.build = [](const Vec& theta) {
    ModelSpec spec;
    spec.m = 2;
    IVec x0(2);
    x0 << 30, 10;
    spec.initial = DeterministicInit{x0};
    spec.alpha = [](int) { return Vec(Vec::Zero(2)); };
    spec.delta = [](int) { return Vec(Vec::Ones(2)); };
    spec.kernel = [](int, const Vec&) { return Mat(Mat::Identity(2, 2)); };
    PrevalenceModel prev;
    const double q = theta[0];
    prev.q = [q](int) { return Vec(Vec::Constant(2, q)); };
    prev.G = [](int) { return Mat(Mat::Identity(2, 2)); };
    prev.kappa = [](int) { return Vec(Vec::Zero(2)); };
    spec.prevalence = std::move(prev);
    return spec;
  };
  ObservationSeries data;
  data.kind = ObservationSeries::Kind::Prevalence;
  data.y = {IVec(), (IVec(2) << 14, 6).finished(), (IVec(2) << 17, 4).finished()};

  const LoglikBackend exact = [&](const Vec& theta, Rng&) {
    double ll = 0.0;
    ll += binomial_logpmf(14, 30, theta[0]) + binomial_logpmf(6, 10, theta[0]);
    ll += binomial_logpmf(17, 30, theta[0]) + binomial_logpmf(4, 10, theta[0]);
    return ll;
  };
  MhOptions opt;
  opt.iterations = 4000;
  opt.seed = 65;
  const Chain mh = metropolis_exact(fam, exact, Vec::Constant(1, 0.5), opt);
  const Chain pm = pmmh_chain(fam, make_pf_backend(fam, data, 25), Vec::Constant(1, 0.5), opt);
  REQUIRE(mh.draws.rows() == pm.draws.rows());
  for (Eigen::Index r = 0; r < mh.draws.rows(); ++r)
    CHECK(mh.draws(r, 0) == pm.draws(r, 0));
}

TEST_CASE("dapmmh with screen equal to target accepts every screened proposal") {
  const ModelFamily fam = poisson_mean_family(0.01, 40.0);
  const ObservationSeries data = scalar_obs(3);
  const LoglikBackend pal = make_pal_backend(fam, data);
  MhOptions opt;
  opt.iterations = 20000;
  opt.seed = 66;
  const Chain chain = dapmmh_chain(fam, pal, pal, Vec::Constant(1, 3.0), opt);
  CHECK(chain.stage1_accepts == chain.stage2_accepts);
  CHECK(chain.pf_calls == chain.stage1_accepts);
  CHECK(chain.stage1_accepts <
        static_cast<std::int64_t>(opt.iterations));  // screening rejects some
}

TEST_CASE("dapmmh and exact-backend pmmh target the same distribution") {
  // tiny instance where the enumeration oracle replaces the particle filter:
  // both samplers reduce to exact MH over the same posterior
  ModelFamily fam = poisson_mean_family(1.0, 8.0);
  ModelSpec toy = test::tiny_prevalence_toy(true);
  fam.build = [toy](const Vec& theta) {
    ModelSpec spec = toy;
    const double scale = theta[0];
    spec.initial = VectorPoissonInit{(Vec(2) << scale, 2.0).finished()};
    spec.delta = [](int) { return Vec(Vec::Ones(2)); };
    spec.alpha = [](int) { return Vec(Vec::Zero(2)); };
    return spec;
  };
  Rng sim(67);
  auto [rec, obs] = simulate(fam.at(Vec::Constant(1, 4.0)), 1, sim,
                             ObservationSeries::Kind::Prevalence);
  const LoglikBackend enum_ll = [fam, obs](const Vec& theta, Rng&) {
    return exact_loglik_enumerate(fam.at(theta), obs, 25).loglik;
  };
  const LoglikBackend pal = make_pal_backend(fam, obs);
  MhOptions opt;
  opt.iterations = 4000;
  opt.burnin = 500;
  opt.thin_to = 4000;
  opt.seed = 68;
  const Chain a = pmmh_chain(fam, enum_ll, Vec::Constant(1, 4.0), opt);
  opt.seed = 69;
  const Chain b = dapmmh_chain(fam, enum_ll, pal, Vec::Constant(1, 4.0), opt);
  std::vector<double> da, db;
  for (Eigen::Index r = 0; r < a.draws.rows(); r += 5) da.push_back(a.draws(r, 0));
  for (Eigen::Index r = 0; r < b.draws.rows(); r += 5) db.push_back(b.draws(r, 0));
  CHECK(test::ks_statistic(da, db) < test::ks_critical_01(da.size(), db.size()));
}

TEST_CASE("acf oracle: iid and AR(1)") {
  Rng rng(70);
  const int N = 100000;
  Vec iid(N), ar(N);
  double prev = 0.0;
  for (int i = 0; i < N; ++i) {
    iid[i] = rng.normal(0.0, 1.0);
    prev = 0.9 * prev + rng.normal(0.0, 1.0);
    ar[i] = prev;
  }
  const Vec acf_iid = autocorrelations(iid, {1, 2, 5});
  for (int i = 0; i < 3; ++i) CHECK(std::abs(acf_iid[i]) < 4.0 / std::sqrt(N));
  const Vec acf_ar = autocorrelations(ar, {1});
  CHECK(std::abs(acf_ar[0] - 0.9) < 0.02);
  CHECK(effective_sample_size(ar) < effective_sample_size(iid) / 5.0);
}

TEST_CASE("chain diagnostics reject lags beyond the chain length") {
  Chain chain;
  chain.names = {"a"};
  chain.draws = Mat::Random(50, 1);
  chain.logtarget = Vec::Zero(50);
  CHECK_THROWS_AS(chain_diagnostics(chain, {60}), ConfigError);
  const ChainDiagnostics d = chain_diagnostics(chain, {1, 2});
  CHECK(d.acf.rows() == 2);
  CHECK(d.ess.size() == 1);
}

TEST_CASE("posterior predictive collapses for a deterministic model") {
  ModelFamily fam;
  fam.params = one_param("unused", 1.0, 0.0, 2.0, 0.1);
  fam.build = [](const Vec&) {
    ModelSpec spec;
    spec.m = 2;
    IVec x0(2);
    x0 << 11, 4;
    spec.initial = DeterministicInit{x0};
    spec.alpha = [](int) { return Vec(Vec::Zero(2)); };
    spec.delta = [](int) { return Vec(Vec::Ones(2)); };
    spec.kernel = [](int, const Vec&) { return Mat(Mat::Identity(2, 2)); };
    PrevalenceModel prev;
    prev.q = [](int) { return Vec(Vec::Ones(2)); };
    prev.G = [](int) { return Mat(Mat::Identity(2, 2)); };
    prev.kappa = [](int) { return Vec(Vec::Zero(2)); };
    spec.prevalence = std::move(prev);
    return spec;
  };
  Chain chain;
  chain.names = {"unused"};
  chain.draws = Mat::Constant(1, 1, 1.0);
  chain.logtarget = Vec::Zero(1);
  Rng rng(71);
  const PredictiveBands bands =
      posterior_predictive(fam, chain, 50, 5, ObservationSeries::Kind::Prevalence, rng);
  for (int t = 0; t < 5; ++t) {
    CHECK(bands.lo(t, 0) == 11.0);
    CHECK(bands.hi(t, 0) == 11.0);
    CHECK(bands.mean(t, 1) == 4.0);
  }

  // reproducible under the same seed
  Rng r1(72), r2(72);
  const PredictiveBands b1 =
      posterior_predictive(fam, chain, 20, 5, ObservationSeries::Kind::Prevalence, r1);
  const PredictiveBands b2 =
      posterior_predictive(fam, chain, 20, 5, ObservationSeries::Kind::Prevalence, r2);
  CHECK((b1.mean - b2.mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("posterior predictive bands cover the outbreak data") {
  const ModelFamily fam = sir_boarding_family();
  const ObservationSeries data =
      observations_from_csv(read_csv(std::filesystem::path(PAL_SOURCE_DIR) / "data/bsflu.csv"), 3);
  MhOptions opt;
  opt.iterations = 20000;
  opt.thin_to = 4000;
  opt.seed = 75;
  const Chain chain = metropolis_pal(fam, data, fam.params.values, opt);
  Rng rng(76);
  const PredictiveBands bands =
      posterior_predictive(fam, chain, 1000, 14, ObservationSeries::Kind::Prevalence, rng);
  int covered = 0;
  for (int t = 1; t <= 14; ++t)
    if (bands.lo(t - 1, 1) <= data.y[t][1] && data.y[t][1] <= bands.hi(t - 1, 1)) ++covered;
  CHECK(covered >= 13);  // >= 90% of the 14 observed points
}

TEST_CASE("palmh mixes faster than a noisy pmmh chain") {
  const ModelFamily fam = sir_boarding_family();
  Rng sim(77);
  auto [rec, obs] = simulate(fam.at(fam.params.values), 10, sim,
                             ObservationSeries::Kind::Prevalence);
  ObservationSeries data;
  data.kind = ObservationSeries::Kind::Prevalence;
  data.y = obs.y;
  MhOptions opt;
  opt.iterations = 5000;
  opt.thin_to = 5000;
  opt.seed = 78;
  const Chain palmh = metropolis_pal(fam, data, fam.params.values, opt);
  const Chain pmmh = pmmh_chain(fam, data, fam.params.values, 100, opt);
  const ChainDiagnostics da = chain_diagnostics(palmh, {1});
  const ChainDiagnostics db = chain_diagnostics(pmmh, {1});
  CHECK(da.ess.mean() > db.ess.mean());
}

TEST_CASE("proposal adaptation lands acceptance between 20 and 40 percent") {
  const ModelFamily fam = sir_boarding_family();
  Rng sim(73);
  auto [rec, obs] = simulate(fam.at(fam.params.values), 14, sim,
                             ObservationSeries::Kind::Prevalence);
  ObservationSeries data;
  data.kind = ObservationSeries::Kind::Prevalence;
  data.y = obs.y;
  MhOptions opt;
  opt.iterations = 8000;
  opt.seed = 74;
  opt.adapt = true;
  opt.adapt_iters = 3000;
  const Chain chain = metropolis_pal(fam, data, fam.params.values, opt);
  for (int j = 0; j < 3; ++j) {
    CHECK(chain.accept_rate[j] > 0.12);
    CHECK(chain.accept_rate[j] < 0.55);
  }
}

TEST_SUITE_END();
