#include "pal/models.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace pal {

namespace {

Mat seir_kernel_matrix(double h, double beta_eta3, double rho, double gamma) {
  Mat K = Mat::Zero(4, 4);
  const double pse = std::exp(-h * beta_eta3);
  const double pei = std::exp(-h * rho);
  const double pir = std::exp(-h * gamma);
  K(0, 0) = pse;
  K(0, 1) = 1.0 - pse;
  K(1, 1) = pei;
  K(1, 2) = 1.0 - pei;
  K(2, 2) = pir;
  K(2, 3) = 1.0 - pir;
  K(3, 3) = 1.0;
  return K;
}

Vec const_vec(int m, double v) { return Vec::Constant(m, v); }

ParamVector make_params(std::vector<std::string> names, const Vec& values, const Vec& lo,
                        const Vec& hi, std::vector<Prior> prior, const Vec& psd) {
  ParamVector p;
  p.names = std::move(names);
  p.values = values;
  p.lo = lo;
  p.hi = hi;
  p.prior = std::move(prior);
  p.proposal_sd = psd;
  p.validate();
  return p;
}

}  // namespace

ModelSpec build_seir(double beta, double rho, double gamma, const SeirOptions& opt) {
  if (beta < 0.0 || rho < 0.0 || gamma < 0.0 || opt.h <= 0.0)
    throw ConfigError("build_seir: rates must be nonnegative and h positive");
  ModelSpec spec;
  spec.m = 4;
  spec.initial = opt.initial;
  const Vec alpha = opt.alpha.size() ? opt.alpha : Vec::Zero(4);
  const Vec delta = opt.delta.size() ? opt.delta : Vec::Ones(4);
  spec.alpha = [alpha](int) { return alpha; };
  spec.delta = [delta](int) { return delta; };
  const double h = opt.h;
  spec.kernel = [h, beta, rho, gamma](int, const Vec& s) {
    const Vec eta = normalize_counts(s);
    return seir_kernel_matrix(h, beta * eta[2], rho, gamma);
  };
  if (opt.with_prevalence) {
    PrevalenceModel prev;
    const Vec q = opt.q;
    const Mat G = opt.G.size() ? opt.G : Mat(Mat::Identity(4, 4));
    const Vec kappa = opt.kappa.size() ? opt.kappa : Vec::Zero(4);
    prev.q = [q](int) { return q; };
    prev.G = [G](int) { return G; };
    prev.kappa = [kappa](int) { return kappa; };
    if (opt.kappa_limit.size()) {
      const Vec kl = opt.kappa_limit;
      prev.kappa_limit = [kl](int) { return kl; };
    }
    spec.prevalence = std::move(prev);
  }
  if (opt.with_incidence) {
    IncidenceModel inc;
    const Mat Q = opt.Q;
    inc.Q = [Q](int) { return Q; };
    inc.tau = opt.tau;
    spec.incidence = std::move(inc);
  }
  spec.lambda0_limit = opt.lambda0_limit;
  if (opt.alpha_limit.size()) {
    const Vec al = opt.alpha_limit;
    spec.alpha_limit = [al](int) { return al; };
  }
  return spec;
}

SeirOptions seir_sim_study_options(std::int64_t n) {
  SeirOptions opt;
  opt.h = 1.0;
  Vec pi0(4);
  pi0 << 0.99, 0.0, 0.01, 0.0;
  opt.initial = MultinomialInit{n, pi0};
  opt.alpha = const_vec(4, 0.04 * static_cast<double>(n));
  opt.delta = const_vec(4, 0.98);
  opt.with_prevalence = true;
  opt.q = Vec(4);
  opt.q << 0.1, 0.1, 0.3, 0.2;
  opt.G = Mat(4, 4);
  opt.G << 0.95, 0.0, 0.05, 0.0,
           0.30, 0.0, 0.70, 0.0,
           0.15, 0.0, 0.85, 0.0,
           0.00, 0.0, 0.00, 1.0;
  opt.kappa = const_vec(4, 0.01 * static_cast<double>(n));
  opt.lambda0_limit = pi0;
  opt.alpha_limit = const_vec(4, 0.04);
  opt.kappa_limit = const_vec(4, 0.01);
  return opt;
}

ModelFamily seir_sim_study_family(std::int64_t n) {
  ModelFamily fam;
  Vec values(3), lo(3), hi(3), psd(3);
  values << 0.5, 0.05, 0.1;
  lo << 1e-4, 1e-4, 1e-4;
  hi << 2.0, 2.0, 2.0;
  psd << 0.02, 0.02, 0.02;
  std::vector<Prior> priors(3, Prior::flat(1e-4, 2.0));
  fam.params = make_params({"beta", "rho", "gamma"}, values, lo, hi, priors, psd);
  fam.build = [n](const Vec& theta) {
    return build_seir(theta[0], theta[1], theta[2], seir_sim_study_options(n));
  };
  return fam;
}

ModelSpec build_sir_boarding(double beta, double gamma, double q, const IVec& x0_in) {
  IVec x0 = x0_in;
  if (x0.size() == 0) {
    x0.resize(3);
    x0 << 763, 1, 0;
  }
  ModelSpec spec;
  spec.m = 3;
  spec.initial = DeterministicInit{x0};
  spec.alpha = [](int) { return Vec::Zero(3); };
  spec.delta = [](int) { return Vec::Ones(3); };
  spec.kernel = [beta, gamma](int, const Vec& s) {
    const Vec eta = normalize_counts(s);
    Mat K = Mat::Zero(3, 3);
    const double psi = std::exp(-beta * eta[1]);
    const double pir = std::exp(-gamma);
    K(0, 0) = psi;
    K(0, 1) = 1.0 - psi;
    K(1, 1) = pir;
    K(1, 2) = 1.0 - pir;
    K(2, 2) = 1.0;
    return K;
  };
  PrevalenceModel prev;
  Vec qv = Vec::Zero(3);
  qv[1] = q;
  prev.q = [qv](int) { return qv; };
  prev.G = [](int) { return Mat(Mat::Identity(3, 3)); };
  prev.kappa = [](int) { return Vec::Zero(3); };
  prev.kappa_limit = [](int) { return Vec::Zero(3); };
  spec.prevalence = std::move(prev);
  spec.lambda0_limit = x0.cast<double>() / static_cast<double>(x0.sum());
  spec.alpha_limit = [](int) { return Vec::Zero(3); };
  return spec;
}

ModelFamily sir_boarding_family(const IVec& x0) {
  ModelFamily fam;
  Vec values(3), lo(3), hi(3), psd(3);
  values << 2.0, 0.5, 0.8;
  lo << 0.0, 0.0, 0.0;
  hi << std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 1.0;
  psd << 0.15, 0.05, 0.05;
  std::vector<Prior> priors{Prior::trunc_normal(0.0, 1.0, 0.0, std::numeric_limits<double>::infinity()),
                            Prior::trunc_normal(0.0, 1.0, 0.0, std::numeric_limits<double>::infinity()),
                            Prior::trunc_normal(0.5, 0.5, 0.0, 1.0)};
  fam.params = make_params({"beta", "gamma", "q"}, values, lo, hi, priors, psd);
  const IVec x0c = x0;
  fam.build = [x0c](const Vec& theta) {
    return build_sir_boarding(theta[0], theta[1], theta[2], x0c);
  };
  return fam;
}

ModelSpec build_age_structured(const Mat& B, double q, const AgeStructuredOptions& opt) {
  const int d = static_cast<int>(B.rows());
  if (B.cols() != d || d < 1) throw ConfigError("build_age_structured: B must be square");
  if ((B - B.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ConfigError("build_age_structured: B must be symmetric");
  if ((B.array() < 0.0).any()) throw ConfigError("build_age_structured: B must be nonnegative");
  if (static_cast<int>(opt.x0.size()) != d)
    throw ConfigError("build_age_structured: need one initial state per group");

  const int m = 4 * d;
  IVec x0(m);
  for (int k = 0; k < d; ++k) x0.segment(4 * k, 4) = opt.x0[k];

  ModelSpec spec;
  spec.m = m;
  spec.initial = DeterministicInit{x0};
  spec.alpha = [m](int) { return Vec::Zero(m); };
  spec.delta = [m](int) { return Vec::Ones(m); };

  const double h = opt.h, rho = opt.rho, gamma = opt.gamma;
  const Mat Bc = B;
  auto blocks_of = [d, h, rho, gamma, Bc](int, const Vec& s) {
    const Vec eta = normalize_counts(s);
    Vec infective(d);
    for (int k = 0; k < d; ++k) infective[k] = eta[4 * k + 2];
    const Vec beta_bar = Bc * infective;
    std::vector<Mat> blocks(d);
    for (int k = 0; k < d; ++k) blocks[k] = seir_kernel_matrix(h, beta_bar[k], rho, gamma);
    return blocks;
  };
  spec.block_size = 4;
  spec.kernel_blocks = blocks_of;
  spec.kernel = [m, blocks_of](int t, const Vec& s) {
    const auto blocks = blocks_of(t, s);
    Mat K = Mat::Zero(m, m);
    for (size_t k = 0; k < blocks.size(); ++k)
      K.block(4 * k, 4 * k, 4, 4) = blocks[k];
    return K;
  };

  IncidenceModel inc;
  Mat Q = Mat::Zero(m, m);
  for (int k = 0; k < d; ++k) Q(4 * k + 1, 4 * k + 2) = q;
  inc.Q = [Q](int) { return Q; };
  for (int r = 1; r <= opt.weeks; ++r) inc.tau.push_back(r * opt.tau_step);
  spec.incidence = std::move(inc);

  spec.lambda0_limit = x0.cast<double>() / static_cast<double>(x0.sum());
  spec.alpha_limit = [m](int) { return Vec::Zero(m); };
  return spec;
}

ModelFamily age_structured_family(int d, const AgeStructuredOptions& opt) {
  const int nb = d * (d + 1) / 2;
  Vec values(nb + 1), lo(nb + 1), hi(nb + 1), psd(nb + 1);
  std::vector<Prior> priors;
  std::vector<std::string> names;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      names.push_back("b" + std::to_string(i + 1) + std::to_string(j + 1));
      priors.push_back(Prior::trunc_normal(0.0, 10.0, 0.0, std::numeric_limits<double>::infinity()));
    }
  names.push_back("q");
  priors.push_back(Prior::trunc_normal(0.5, 0.5, 0.0, 1.0));
  values.head(nb).setConstant(5.0);
  values[nb] = 0.5;
  lo.setZero();
  hi.head(nb).setConstant(std::numeric_limits<double>::infinity());
  hi[nb] = 1.0;
  psd.setConstant(0.25);
  ModelFamily fam;
  fam.params = make_params(std::move(names), values, lo, hi, std::move(priors), psd);
  const AgeStructuredOptions optc = opt;
  fam.build = [d, optc](const Vec& theta) {
    Mat B(d, d);
    int idx = 0;
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        B(i, j) = theta[idx];
        B(j, i) = theta[idx];
        ++idx;
      }
    return build_age_structured(B, theta[idx], optc);
  };
  return fam;
}

double next_generation_r0(const Mat& B, const Vec& group_populations, double gamma) {
  const double n = group_populations.sum();
  Mat NG = (group_populations.asDiagonal() * B) / (n * gamma);
  Eigen::EigenSolver<Mat> es(NG);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double next_generation_r0_power(const Mat& B, const Vec& group_populations, double gamma,
                                int iters) {
  const double n = group_populations.sum();
  Mat NG = (group_populations.asDiagonal() * B) / (n * gamma);
  Vec v = Vec::Ones(NG.rows()).normalized();
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    Vec w = NG * v;
    lambda = w.norm();
    if (lambda == 0.0) return 0.0;
    v = w / lambda;
  }
  return lambda;
}

double GravityConfig::term_proportion() const {
  double steps = 0.0;
  for (const auto& [a, b] : term_ranges) steps += b - a;
  return steps / steps_per_year;
}

bool GravityConfig::in_term(int step_of_year) const {
  for (const auto& [a, b] : term_ranges)
    if (step_of_year >= a && step_of_year < b) return true;
  return false;
}

void GravityConfig::validate() const {
  const int J = cities();
  if (J < 1) throw ConfigError("GravityConfig: need at least one city");
  if ((populations.array() <= 0.0).any()) throw ConfigError("GravityConfig: populations must be positive");
  if (distances.rows() != J || distances.cols() != J)
    throw ConfigError("GravityConfig: distance matrix shape mismatch");
  if ((distances - distances.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw ConfigError("GravityConfig: distance matrix must be symmetric");
  for (int k = 0; k < J; ++k)
    for (int l = 0; l < J; ++l)
      if (k != l && distances(k, l) <= 0.0)
        throw ConfigError("GravityConfig: off-diagonal distances must be positive");
  if (births.cols() != J || death_rate.cols() != J)
    throw ConfigError("GravityConfig: births/death_rate must have one column per city");
  if (report_rate.size() != J) throw ConfigError("GravityConfig: report_rate size mismatch");
  if ((report_rate.array() < 0.0).any() || (report_rate.array() > 1.0).any())
    throw ConfigError("GravityConfig: report rates must lie in [0,1]");
  if (term_ranges.empty()) throw ConfigError("GravityConfig: school calendar missing");
}

ModelSpec build_measles_gravity(const GravityConfig& cfg, const MeaslesParams& p) {
  cfg.validate();
  if (p.pi0.size() != 4 || std::abs(p.pi0.sum() - 1.0) > 1e-9 || (p.pi0.array() < 0.0).any())
    throw ConfigError("build_measles_gravity: pi0 must be a length-4 probability vector");
  const int J = cfg.cities();
  const int m = 4 * J;
  const double total = cfg.populations.sum();

  // gravity weights: W(k,l) = v_kl / n_k off diagonal, 1 + row sum on it
  double sbar = 0.0;
  int pairs = 0;
  for (int k = 0; k < J; ++k)
    for (int l = 0; l < J; ++l)
      if (k != l) {
        sbar += cfg.distances(k, l);
        ++pairs;
      }
  sbar = pairs > 0 ? sbar / pairs : 1.0;
  const double nbar = cfg.populations.mean();
  Mat W = Mat::Zero(J, J);
  for (int k = 0; k < J; ++k) {
    double rowsum = 0.0;
    for (int l = 0; l < J; ++l) {
      if (l == k) continue;
      const double v = p.g * (sbar / nbar) * cfg.populations[k] * cfg.populations[l] /
                       cfg.distances(k, l);
      W(k, l) = v / cfg.populations[k];
      rowsum += W(k, l);
    }
    W(k, k) = 1.0 + rowsum;
  }

  const int spy = cfg.steps_per_year;
  const int cohort_step = cfg.term_ranges.front().first;
  const double prop = cfg.term_proportion();
  const double beta_term = (1.0 + 2.0 * (1.0 - prop) * p.a) * p.beta_bar;
  const double beta_holiday = (1.0 - 2.0 * prop * p.a) * p.beta_bar;
  if (beta_holiday < 0.0)
    throw ConfigError("build_measles_gravity: holiday transmission rate is negative");

  auto year_of = [spy](int t) { return (t - 1) / spy; };
  auto step_of = [spy](int t) { return (t - 1) % spy; };

  ModelSpec spec;
  spec.m = m;
  spec.initial = BlockMultinomialInit{cfg.populations, p.pi0};

  const Mat births = cfg.births;
  const double c = p.c;
  spec.alpha = [J, m, spy, cohort_step, births, c, year_of, step_of](int t) {
    Vec a = Vec::Zero(m);
    const int y = std::min<int>(year_of(t), static_cast<int>(births.rows()) - 1);
    const int s = step_of(t);
    for (int k = 0; k < J; ++k) {
      const double annual = births(y, k);
      double rate = annual * (1.0 - c) / spy;
      if (s == cohort_step) rate += annual * c;
      a[4 * k] = rate;
    }
    return a;
  };
  const Mat death = cfg.death_rate;
  spec.delta = [J, m, spy, death, year_of](int t) {
    Vec d(m);
    const int y = std::min<int>(year_of(t), static_cast<int>(death.rows()) - 1);
    for (int k = 0; k < J; ++k)
      d.segment(4 * k, 4).setConstant(std::exp(-death(y, k) / spy));
    return d;
  };

  const GravityConfig cfgc = cfg;
  const double rho = p.rho, gamma = p.gamma;
  const Vec pops = cfg.populations;
  auto blocks_of = [J, W, pops, beta_term, beta_holiday, rho, gamma, cfgc, step_of](
                       int t, const Vec& s) {
    Vec eta_tilde(J);
    for (int k = 0; k < J; ++k) eta_tilde[k] = s[4 * k + 2] / pops[k];
    const Vec f = W * eta_tilde;
    const double beta_t = cfgc.in_term(step_of(t)) ? beta_term : beta_holiday;
    std::vector<Mat> blocks(J);
    for (int k = 0; k < J; ++k)
      blocks[k] = seir_kernel_matrix(1.0, beta_t * f[k] /*already a hazard*/, rho, gamma);
    return blocks;
  };
  spec.block_size = 4;
  spec.kernel_blocks = blocks_of;
  spec.kernel = [m, blocks_of](int t, const Vec& s) {
    const auto blocks = blocks_of(t, s);
    Mat K = Mat::Zero(m, m);
    for (size_t k = 0; k < blocks.size(); ++k) K.block(4 * k, 4 * k, 4, 4) = blocks[k];
    return K;
  };

  IncidenceModel inc;
  Mat Q = Mat::Zero(m, m);
  for (int k = 0; k < J; ++k) Q(4 * k + 2, 4 * k + 3) = cfg.report_rate[k];
  inc.Q = [Q](int) { return Q; };
  // default schedule spans the years covered by the vital schedules
  inc.tau = measles_schedule(cfg, static_cast<int>(cfg.births.rows()) * spy);
  spec.incidence = std::move(inc);

  Vec lambda0 = initial_mean(spec.initial) / total;
  spec.lambda0_limit = lambda0;
  auto alpha_fn = spec.alpha;
  spec.alpha_limit = [alpha_fn, total](int t) { return Vec(alpha_fn(t) / total); };
  return spec;
}

ModelFamily measles_family(const GravityConfig& cfg) {
  Vec values(9), lo(9), hi(9), psd(9);
  values << 30.0, 1.0, 1.0, 500.0, 0.3, 0.4, 0.95, 2e-4, 2e-4;
  lo << 1.0, 0.05, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0;
  hi << 100.0, 5.0, 5.0, 5000.0, 0.6, 1.0, 1.0, 0.05, 0.05;
  psd << 1.0, 0.05, 0.05, 20.0, 0.02, 0.02, 0.01, 1e-4, 1e-4;
  std::vector<Prior> priors;
  for (int i = 0; i < 9; ++i) priors.push_back(Prior::flat(lo[i], hi[i]));
  ModelFamily fam;
  fam.params = make_params({"beta_bar", "rho", "gamma", "g", "a", "c", "pi1", "pi2", "pi3"},
                           values, lo, hi, std::move(priors), psd);
  const GravityConfig cfgc = cfg;
  fam.build = [cfgc](const Vec& theta) {
    MeaslesParams p;
    p.beta_bar = theta[0];
    p.rho = theta[1];
    p.gamma = theta[2];
    p.g = theta[3];
    p.a = theta[4];
    p.c = theta[5];
    p.pi0 = Vec(4);
    p.pi0 << theta[6], theta[7], theta[8], 1.0 - theta[6] - theta[7] - theta[8];
    if (p.pi0[3] < 0.0) throw ConfigError("measles_family: pi0 entries sum above one");
    return build_measles_gravity(cfgc, p);
  };
  return fam;
}

std::vector<int> measles_schedule(const GravityConfig& cfg, int T) {
  std::vector<int> tau;
  for (int t = cfg.tau_step; t <= T; t += cfg.tau_step) tau.push_back(t);
  return tau;
}

}  // namespace pal
