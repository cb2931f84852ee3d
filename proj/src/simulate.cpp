#include "pal/simulate.hpp"

namespace pal {

int ObservationSeries::horizon() const {
  switch (kind) {
    case Kind::Prevalence: return static_cast<int>(y.size()) - 1;
    case Kind::Incidence: return static_cast<int>(Y.size()) - 1;
    case Kind::Aggregated: return tau.empty() ? 0 : tau.back();
  }
  return 0;
}

IVec sample_initial(const ModelSpec& spec, Rng& rng) {
  if (const auto* p = std::get_if<VectorPoissonInit>(&spec.initial)) {
    IVec x(p->lambda0.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.poisson(p->lambda0[i]);
    return x;
  }
  if (const auto* p = std::get_if<MultinomialInit>(&spec.initial))
    return rng.multinomial(p->n, p->pi0);
  if (const auto* p = std::get_if<DeterministicInit>(&spec.initial)) return p->x0;
  const auto& b = std::get<BlockMultinomialInit>(spec.initial);
  const int bs = static_cast<int>(b.pi0.size());
  IVec x(bs * b.sizes.size());
  for (Eigen::Index k = 0; k < b.sizes.size(); ++k)
    x.segment(k * bs, bs) = rng.multinomial(static_cast<std::int64_t>(b.sizes[k]), b.pi0);
  return x;
}

LatentStep step_latent(const IVec& x_prev, int t, const ModelSpec& spec, Rng& rng) {
  const int m = spec.m;
  LatentStep out;
  out.xbar.resize(m);
  const Vec delta = spec.delta(t);
  for (int i = 0; i < m; ++i) out.xbar[i] = rng.binomial(x_prev[i], delta[i]);

  const Mat K = spec.kernel(t, out.xbar.cast<double>());
  out.Z = IMat::Zero(m, m);
  for (int i = 0; i < m; ++i)
    if (out.xbar[i] > 0) out.Z.row(i) = rng.multinomial(out.xbar[i], K.row(i)).transpose();

  const Vec alpha = spec.alpha(t);
  out.xhat.resize(m);
  for (int i = 0; i < m; ++i) out.xhat[i] = rng.poisson(alpha[i]);

  out.x = out.Z.colwise().sum().transpose() + out.xhat;
  return out;
}

IVec observe_prevalence(const IVec& x, int t, const ModelSpec& spec, Rng& rng) {
  if (!spec.prevalence) throw ConfigError("observe_prevalence: spec has no prevalence block");
  const int m = spec.m;
  const Vec q = spec.prevalence->q(t);
  const Mat G = spec.prevalence->G(t);
  const Vec kappa = spec.prevalence->kappa(t);
  IVec y = IVec::Zero(m);
  for (int j = 0; j < m; ++j) {
    const std::int64_t detected = rng.binomial(x[j], q[j]);
    if (detected > 0) y += rng.multinomial(detected, G.row(j));
  }
  for (int i = 0; i < m; ++i) y[i] += rng.poisson(kappa[i]);
  return y;
}

IMat observe_incidence(const IMat& Z, int t, const ModelSpec& spec, Rng& rng) {
  if (!spec.incidence) throw ConfigError("observe_incidence: spec has no incidence block");
  const Mat Q = spec.incidence->Q(t);
  IMat Y = IMat::Zero(Z.rows(), Z.cols());
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    for (Eigen::Index j = 0; j < Z.cols(); ++j)
      if (Q(i, j) > 0.0 && Z(i, j) > 0) Y(i, j) = rng.binomial(Z(i, j), Q(i, j));
  return Y;
}

std::pair<LatentRecord, ObservationSeries> simulate(const ModelSpec& spec, int T, Rng& rng,
                                                    ObservationSeries::Kind kind) {
  if (T < 1) throw ConfigError("simulate: T must be >= 1");
  ObservationSeries obs;
  obs.kind = kind;
  std::vector<int> schedule;
  if (kind == ObservationSeries::Kind::Aggregated) {
    if (!spec.incidence || spec.incidence->tau.empty())
      throw ConfigError("simulate: aggregated observations need a tau schedule");
    for (int s : spec.incidence->tau)
      if (s <= T) schedule.push_back(s);
    if (schedule.empty() || schedule.back() != T)
      throw ConfigError("simulate: horizon T must end on an observation time");
  }

  LatentRecord rec;
  rec.x.resize(T + 1);
  rec.xbar.resize(T);
  rec.Z.resize(T + 1);
  rec.xhat.resize(T + 1);
  rec.x[0] = sample_initial(spec, rng);

  if (kind == ObservationSeries::Kind::Prevalence) obs.y.resize(T + 1);
  if (kind == ObservationSeries::Kind::Incidence) obs.Y.resize(T + 1);

  IMat window;  // running aggregated sum
  std::vector<int> tau;
  size_t next_r = 1;
  if (kind == ObservationSeries::Kind::Aggregated) {
    tau.push_back(0);
    for (int s : schedule) tau.push_back(s);
    obs.tau = tau;
    obs.Ybar.resize(tau.size());
    window = IMat::Zero(spec.m, spec.m);
  }

  for (int t = 1; t <= T; ++t) {
    LatentStep step = step_latent(rec.x[t - 1], t, spec, rng);
    rec.xbar[t - 1] = step.xbar;
    rec.Z[t] = step.Z;
    rec.xhat[t] = step.xhat;
    rec.x[t] = step.x;
    switch (kind) {
      case ObservationSeries::Kind::Prevalence:
        obs.y[t] = observe_prevalence(rec.x[t], t, spec, rng);
        break;
      case ObservationSeries::Kind::Incidence:
        obs.Y[t] = observe_incidence(rec.Z[t], t, spec, rng);
        break;
      case ObservationSeries::Kind::Aggregated:
        window += observe_incidence(rec.Z[t], t, spec, rng);
        if (next_r < tau.size() && t == tau[next_r]) {
          obs.Ybar[next_r] = window;
          window.setZero();
          ++next_r;
        }
        break;
    }
  }
  return {std::move(rec), std::move(obs)};
}

}  // namespace pal
