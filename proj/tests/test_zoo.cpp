#include <doctest.h>

#include "pal/filter.hpp"
#include "pal/limits.hpp"
#include "pal/models.hpp"
#include "pal/simulate.hpp"
#include "test_util.hpp"

using namespace pal;

TEST_SUITE_BEGIN("zoo");

namespace {

GravityConfig synthetic_gravity(int J, int years) {
  GravityConfig cfg;
  cfg.populations.resize(J);
  cfg.report_rate.resize(J);
  Mat coords(J, 2);
  for (int k = 0; k < J; ++k) {
    cfg.populations[k] = 40000.0 + 15000.0 * k;
    cfg.report_rate[k] = 0.5 + 0.05 * k;
    coords(k, 0) = 10.0 * k;
    coords(k, 1) = 7.0 * ((k * 13) % 5);
  }
  cfg.distances.resize(J, J);
  for (int k = 0; k < J; ++k)
    for (int l = 0; l < J; ++l)
      cfg.distances(k, l) = std::hypot(coords(k, 0) - coords(l, 0), coords(k, 1) - coords(l, 1));
  cfg.births.resize(years, J);
  cfg.death_rate.resize(years, J);
  for (int y = 0; y < years; ++y)
    for (int k = 0; k < J; ++k) {
      cfg.births(y, k) = 0.018 * cfg.populations[k];
      cfg.death_rate(y, k) = 0.017;
    }
  cfg.steps_per_year = 104;
  // three terms totalling 79 of 104 steps: proportion 0.7596
  cfg.term_ranges = {{0, 24}, {30, 58}, {64, 91}};
  cfg.tau_step = 4;
  return cfg;
}

MeaslesParams measles_dgp() {
  MeaslesParams p;
  p.beta_bar = 30.0;
  p.rho = 1.0;
  p.gamma = 1.0;
  p.g = 500.0;
  p.a = 0.3;
  p.c = 0.4;
  p.pi0 = Vec(4);
  p.pi0 << 0.05, 0.001, 0.001, 0.948;
  return p;
}

}  // namespace

TEST_CASE("sim-study preset validates across the prior support") {
  for (double beta : {0.05, 0.5, 1.8})
    for (double gamma : {0.02, 0.1, 1.5}) {
      const ModelFamily fam = seir_sim_study_family(100000);
      Vec th(3);
      th << beta, 0.05, gamma;
      CHECK(validate_spec(fam.at(th), 10).empty());
    }
}

TEST_CASE("beta zero means no S->E flow ever") {
  SeirOptions opt = seir_sim_study_options(1000);
  const ModelSpec spec = build_seir(0.0, 0.05, 0.1, opt);
  const LimitTrace lim = limit_trajectory_prevalence(spec, 50);
  // susceptible mass obeys the pure immigration/emigration recursion and E
  // fills from immigration only (no S->E inflow)
  double s = 0.99, e = 0.0;
  for (int t = 1; t <= 50; ++t) {
    s = 0.98 * s + 0.04;
    e = 0.98 * std::exp(-0.05) * e + 0.04;
    CHECK(lim.nu[t][0] == doctest::Approx(s).epsilon(1e-12));
    CHECK(lim.nu[t][1] == doctest::Approx(e).epsilon(1e-12));
  }
}

TEST_CASE("step-size halving agrees to second order in the rates") {
  // composition of two h-steps matches one 2h-step to O(rate^2)
  Vec eta(4);
  eta << 0.7, 0.1, 0.15, 0.05;
  auto kernel_for = [&](double rate_scale, double h) {
    SeirOptions opt;
    opt.h = h;
    IVec x0(4);
    x0 << 70, 10, 15, 5;
    opt.initial = DeterministicInit{x0};
    const ModelSpec spec =
        build_seir(0.4 * rate_scale, 0.3 * rate_scale, 0.2 * rate_scale, opt);
    return spec.kernel(1, eta);
  };
  std::vector<double> gaps;
  for (double eps : {1e-2, 1e-3}) {
    const Mat two_small = kernel_for(eps, 0.5) * kernel_for(eps, 0.5);
    const Mat one_big = kernel_for(eps, 1.0);
    gaps.push_back((two_small - one_big).cwiseAbs().maxCoeff());
  }
  CHECK(gaps[1] / gaps[0] < 0.02);  // second-order decay in the rate scale
}

TEST_CASE("boarding school: q = 1 reveals the infective count") {
  const ModelSpec spec = build_sir_boarding(2.0, 0.5, 1.0);
  Rng rng(51);
  auto [rec, obs] = simulate(spec, 14, rng, ObservationSeries::Kind::Prevalence);
  for (int t = 1; t <= 14; ++t) {
    CHECK(obs.y[t][1] == rec.x[t][1]);
    CHECK(obs.y[t][0] == 0);
    CHECK(obs.y[t][2] == 0);
  }
}

TEST_CASE("boarding school validates across the prior support") {
  for (double beta : {0.1, 2.0, 4.0})
    for (double gamma : {0.05, 0.5, 2.0})
      for (double q : {0.05, 0.8, 1.0})
        CHECK(validate_spec(build_sir_boarding(beta, gamma, q), 14).empty());
}

TEST_CASE("age-structured d=1 reduces exactly to the SEIR chain") {
  AgeStructuredOptions opt;
  opt.h = 1.0 / 7.0;
  opt.weeks = 6;
  IVec x0(4);
  x0 << 900, 0, 3, 0;
  opt.x0 = {x0};
  opt.rho = 7.0 / 1.5;
  opt.gamma = 7.0 / 1.5;
  Mat B(1, 1);
  B << 9.0;
  const ModelSpec age = build_age_structured(B, 0.5, opt);

  SeirOptions sopt;
  sopt.h = opt.h;
  sopt.initial = DeterministicInit{x0};
  sopt.with_incidence = true;
  Mat Q = Mat::Zero(4, 4);
  Q(1, 2) = 0.5;
  sopt.Q = Q;
  sopt.tau = age.incidence->tau;
  const ModelSpec seir = build_seir(9.0, opt.rho, opt.gamma, sopt);

  Rng rng(52);
  auto [rec, obs] = simulate(age, 42, rng, ObservationSeries::Kind::Aggregated);
  const FilterTrace a = pal_incidence_agg(age, obs.Ybar, obs.tau, true, true);
  const FilterTrace b = pal_incidence_agg(seir, obs.Ybar, obs.tau, true, true);
  CHECK(std::abs(a.total - b.total) < 1e-10 * std::max(1.0, std::abs(b.total)));
  for (size_t r = 1; r < a.M.size(); ++r)
    CHECK((a.M[r] - b.M[r]).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("published initial states are accepted by the age-structured builder") {
  AgeStructuredOptions opt;
  opt.weeks = 19;
  IVec x1(4), x2(4), x3(4), x4(4);
  x1 << 948, 0, 1, 0;
  x2 << 1689, 0, 1, 0;
  x3 << 3466, 0, 1, 0;
  x4 << 1894, 0, 1, 0;
  opt.x0 = {x1, x2, x3, x4};
  Mat B = Mat::Constant(4, 4, 5.0);
  const ModelSpec spec = build_age_structured(B, 0.5, opt);
  CHECK(spec.m == 16);
  CHECK(validate_spec(spec, 10).empty());
  CHECK_THROWS_AS(build_age_structured((Mat(2, 2) << 1.0, 2.0, 3.0, 4.0).finished(), 0.5,
                                       AgeStructuredOptions{}),
                  ConfigError);
}

TEST_CASE("next-generation R0 matches the power-iteration oracle") {
  Rng rng(53);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 2 + static_cast<int>(rng.uniform() * 3.0);
    Mat B(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        B(i, j) = rng.uniform() * 10.0;
        B(j, i) = B(i, j);
      }
    Vec pops(d);
    for (int i = 0; i < d; ++i) pops[i] = 500.0 + rng.uniform() * 5000.0;
    const double gamma = 0.2 + rng.uniform();
    const double a = next_generation_r0(B, pops, gamma);
    const double b = next_generation_r0_power(B, pops, gamma);
    CHECK(a == doctest::Approx(b).epsilon(1e-8));
  }
}

TEST_CASE("school-term forcing takes two values with the calendar proportion") {
  const GravityConfig cfg = synthetic_gravity(3, 6);
  CHECK(cfg.term_proportion() == doctest::Approx(0.759).epsilon(2e-3));
  const MeaslesParams p = measles_dgp();
  const ModelSpec spec = build_measles_gravity(cfg, p);
  // collect the S->E hazard over a year at a fixed summary vector
  Vec s = initial_mean(spec.initial);
  std::vector<double> hazards;
  for (int t = 1; t <= cfg.steps_per_year; ++t) {
    const Mat K = spec.kernel(t, s);
    hazards.push_back(-std::log(K(0, 0)));
  }
  std::sort(hazards.begin(), hazards.end());
  const double lo = hazards.front(), hi = hazards.back();
  CHECK(hi > lo);
  int n_hi = 0;
  for (double h : hazards) {
    const bool is_lo = std::abs(h - lo) < 1e-12, is_hi = std::abs(h - hi) < 1e-12;
    CHECK((is_lo || is_hi));
    if (is_hi) ++n_hi;
  }
  CHECK(static_cast<double>(n_hi) / cfg.steps_per_year ==
        doctest::Approx(cfg.term_proportion()).epsilon(1e-12));
  // term/holiday hazards scale as the displayed forcing formula
  const double prop = cfg.term_proportion();
  CHECK(hi / lo == doctest::Approx((1.0 + 2.0 * (1.0 - prop) * p.a) /
                                   (1.0 - 2.0 * prop * p.a))
                       .epsilon(1e-9));
}

TEST_CASE("measles spec validates and conserves block structure") {
  const GravityConfig cfg = synthetic_gravity(4, 6);
  const ModelSpec spec = build_measles_gravity(cfg, measles_dgp());
  CHECK(spec.m == 16);
  CHECK(spec.has_blocks());
  CHECK(validate_spec(spec, 12).empty());
}

TEST_CASE("gravity g=0 decouples the cities") {
  const int J = 5, years = 3;
  const GravityConfig cfg = synthetic_gravity(J, years);
  MeaslesParams p = measles_dgp();
  p.g = 0.0;
  const ModelSpec joint = build_measles_gravity(cfg, p);
  const int T = 104;
  const std::vector<int> tau = measles_schedule(cfg, T);
  std::vector<int> tau0{0};
  tau0.insert(tau0.end(), tau.begin(), tau.end());

  Rng rng(54);
  auto [rec, obs] = simulate(joint, T, rng, ObservationSeries::Kind::Aggregated);
  ObservationSeries obs_with_zero = obs;
  const FilterTrace whole = pal_incidence_agg_open(joint, obs.Ybar, tau0, true, false);

  double sum_cities = 0.0;
  for (int k = 0; k < J; ++k) {
    GravityConfig single;
    single.populations = cfg.populations.segment(k, 1);
    single.report_rate = cfg.report_rate.segment(k, 1);
    single.distances = Mat::Zero(1, 1);
    single.births = cfg.births.col(k);
    single.death_rate = cfg.death_rate.col(k);
    single.steps_per_year = cfg.steps_per_year;
    single.term_ranges = cfg.term_ranges;
    single.tau_step = cfg.tau_step;
    const ModelSpec city = build_measles_gravity(single, p);
    std::vector<IMat> Yk(obs.Ybar.size());
    for (size_t r = 1; r < obs.Ybar.size(); ++r)
      Yk[r] = obs.Ybar[r].block(4 * k, 4 * k, 4, 4);
    sum_cities += pal_incidence_agg_open(city, Yk, tau0, true, false).total;
  }
  CHECK(std::abs(whole.total - sum_cities) < 1e-10 * std::max(1.0, std::abs(whole.total)));
}

TEST_SUITE_END();
