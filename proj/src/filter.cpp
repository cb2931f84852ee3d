#include "pal/filter.hpp"

#include <cmath>
#include <sstream>

namespace pal {

namespace {

void check_finite(const Vec& v, const char* what, int t) {
  if (!v.allFinite())
    throw NumericalError(std::string("filter divergence: non-finite ") + what + " at t=" +
                         std::to_string(t));
}

void check_finite(const Mat& v, const char* what, int t) {
  if (!v.allFinite())
    throw NumericalError(std::string("filter divergence: non-finite ") + what + " at t=" +
                         std::to_string(t));
}

void require_closed(const ModelSpec& spec, int T) {
  for (int t = 1; t <= T; ++t) {
    if ((spec.delta(t).array() != 1.0).any())
      throw ConfigError("incidence filter requires delta == 1 (no emigration) at t=" +
                        std::to_string(t));
    if ((spec.alpha(t).array() != 0.0).any())
      throw ConfigError("incidence filter requires alpha == 0 (no immigration) at t=" +
                        std::to_string(t));
  }
}

}  // namespace

Vec predict_prevalence(const Vec& lambda_bar_prev, int t, const ModelSpec& spec) {
  const Vec thinned = lambda_bar_prev.cwiseProduct(spec.delta(t));
  Vec lambda;
  if (spec.has_blocks()) {
    const auto blocks = spec.kernel_blocks(t, thinned);
    const int bs = spec.block_size;
    lambda.resize(spec.m);
    for (int k = 0; k < spec.n_blocks(); ++k)
      lambda.segment(k * bs, bs) = blocks[k].transpose() * thinned.segment(k * bs, bs);
  } else {
    lambda = spec.kernel(t, thinned).transpose() * thinned;
  }
  lambda += spec.alpha(t);
  check_finite(lambda, "predicted intensity", t);
  return lambda;
}

PrevalenceUpdate update_prevalence(const Vec& lambda, const Vec& y, int t,
                                   const ModelSpec& spec, bool drop_constant) {
  if (!spec.prevalence) throw ConfigError("update_prevalence: spec has no prevalence block");
  const int m = spec.m;
  const Vec q = spec.prevalence->q(t);
  const Mat G = spec.prevalence->G(t);
  const Vec kappa = spec.prevalence->kappa(t);

  PrevalenceUpdate out;
  out.mu = G.transpose() * lambda.cwiseProduct(q) + kappa;
  check_finite(out.mu, "observation intensity", t);

  // ratio_i = y_i / mu_i with the 0/0 -> 0 convention; y_i > 0 on mu_i = 0 is
  // a probability-zero observation under the model.
  Vec ratio(m);
  for (int i = 0; i < m; ++i) {
    if (out.mu[i] == 0.0) {
      if (y[i] > 0.0) {
        std::ostringstream os;
        os << "probability-zero observation: y(" << (i + 1) << ")=" << y[i]
           << " but mu(" << (i + 1) << ")=0 at t=" << t;
        throw IncompatibilityError(os.str());
      }
      ratio[i] = 0.0;
    } else {
      ratio[i] = y[i] / out.mu[i];
    }
  }

  // lambda_bar_j = [1 - q_j + sum_i ratio_i q_j G(j,i)] lambda_j
  const Vec back = G * ratio;  // back_j = sum_i G(j,i) ratio_i
  out.lambda_bar = (Vec::Ones(m) - q + q.cwiseProduct(back)).cwiseProduct(lambda);
  check_finite(out.lambda_bar, "updated intensity", t);

  double ll = 0.0;
  for (int i = 0; i < m; ++i) {
    ll -= out.mu[i];
    if (y[i] > 0.0) ll += y[i] * std::log(out.mu[i]);  // 0 log 0 := 0
    if (!drop_constant) ll -= log_factorial(y[i]);
  }
  if (!std::isfinite(ll))
    throw NumericalError("filter divergence: non-finite log-likelihood term at t=" +
                         std::to_string(t));
  out.loglik = ll;
  return out;
}

FilterTrace pal_prevalence(const ModelSpec& spec, const std::vector<IVec>& y,
                           bool drop_constant, bool keep_trace) {
  const int T = static_cast<int>(y.size()) - 1;
  if (T < 1) throw ConfigError("pal_prevalence: need observations for t = 1..T");
  FilterTrace trace;
  trace.drop_constant = drop_constant;
  Vec lambda_bar = initial_mean(spec.initial);
  if (keep_trace) {
    trace.lambda_pred.resize(T + 1);
    trace.lambda_upd.resize(T + 1);
    trace.mu.resize(T + 1);
    trace.lambda_upd[0] = lambda_bar;
  }
  trace.step_loglik.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    const Vec lambda = predict_prevalence(lambda_bar, t, spec);
    PrevalenceUpdate upd = update_prevalence(lambda, y[t].cast<double>(), t, spec, drop_constant);
    lambda_bar = upd.lambda_bar;
    trace.step_loglik[t] = upd.loglik;
    trace.total += upd.loglik;
    if (keep_trace) {
      trace.lambda_pred[t] = lambda;
      trace.lambda_upd[t] = std::move(upd.lambda_bar);
      trace.mu[t] = std::move(upd.mu);
    }
  }
  return trace;
}

Mat predict_incidence(const Vec& lambda_bar_prev, int t, const ModelSpec& spec) {
  const Mat K = spec.kernel(t, lambda_bar_prev);
  Mat Lambda = lambda_bar_prev.asDiagonal() * K;
  check_finite(Lambda, "predicted transition intensity", t);
  return Lambda;
}

Mat predict_incidence_thinned(const Vec& thinned, int t, const ModelSpec& spec) {
  const Eigen::Index m = spec.m;
  Mat Lambda = Mat::Zero(m, m);
  if (spec.has_blocks()) {
    const auto blocks = spec.kernel_blocks(t, thinned);
    const int bs = spec.block_size;
    for (int k = 0; k < spec.n_blocks(); ++k) {
      const auto seg = Eigen::seqN(k * bs, bs);
      Lambda(seg, seg) = thinned(seg).asDiagonal() * blocks[k];
    }
  } else {
    Lambda = thinned.asDiagonal() * spec.kernel(t, thinned);
  }
  check_finite(Lambda, "predicted transition intensity", t);
  return Lambda;
}

namespace {

/// Shared update arithmetic for the aggregated pass.  The element order is
/// fixed so that with a unit schedule M == Lambda o Q holds bitwise and the
/// update reproduces Algorithm-2 output exactly.
struct AggUpdate {
  Mat Lambda_bar;
  double loglik;
};

AggUpdate agg_update(const Mat& Lambda_tau, const Mat& Q_tau, const Mat& M, const Mat& Ybar,
                     int r, bool drop_constant) {
  const Eigen::Index m = Lambda_tau.rows();
  AggUpdate out;
  out.Lambda_bar.resize(m, m);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double lam = Lambda_tau(i, j);
      const double q = Q_tau(i, j);
      const double mass = M(i, j);
      const double ybar = Ybar(i, j);
      double reported;
      if (mass == 0.0) {
        if (ybar > 0.0) {
          std::ostringstream os;
          os << "probability-zero observation: Ybar(" << (i + 1) << "," << (j + 1)
             << ")=" << ybar << " but M=0 at r=" << r;
          throw IncompatibilityError(os.str());
        }
        reported = 0.0;
      } else {
        reported = ybar * (lam * q / mass);
      }
      out.Lambda_bar(i, j) = (1.0 - q) * lam + reported;
      ll -= mass;
      if (ybar > 0.0) ll += ybar * std::log(mass);
      if (!drop_constant) ll -= log_factorial(ybar);
    }
  }
  if (!std::isfinite(ll))
    throw NumericalError("filter divergence: non-finite log-likelihood term at r=" +
                         std::to_string(r));
  out.loglik = ll;
  return out;
}

}  // namespace

FilterTrace pal_incidence_unit(const ModelSpec& spec, const std::vector<IMat>& Y,
                               bool drop_constant, bool keep_trace) {
  std::vector<Mat> Yd(Y.size());
  for (size_t t = 1; t < Y.size(); ++t) Yd[t] = Y[t].cast<double>();
  return pal_incidence_unit(spec, Yd, drop_constant, keep_trace);
}

FilterTrace pal_incidence_unit(const ModelSpec& spec, const std::vector<Mat>& Y,
                               bool drop_constant, bool keep_trace) {
  if (!spec.incidence) throw ConfigError("pal_incidence_unit: spec has no incidence block");
  const int T = static_cast<int>(Y.size()) - 1;
  if (T < 1) throw ConfigError("pal_incidence_unit: need observations for t = 1..T");
  require_closed(spec, T);

  FilterTrace trace;
  trace.drop_constant = drop_constant;
  Vec lambda_bar = initial_mean(spec.initial);
  if (keep_trace) {
    trace.Lambda_pred.resize(T + 1);
    trace.Lambda_upd.resize(T + 1);
    trace.M.resize(T + 1);
    trace.lambda_upd.resize(T + 1);
    trace.lambda_upd[0] = lambda_bar;
  }
  trace.step_loglik.assign(T + 1, 0.0);
  const Eigen::Index m = spec.m;
  for (int t = 1; t <= T; ++t) {
    const Mat Lambda = predict_incidence(lambda_bar, t, spec);
    const Mat Q = spec.incidence->Q(t);
    const Mat& Yd = Y[t];
    Mat M(m, m), Lambda_bar(m, m);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const double lam = Lambda(i, j);
        const double q = Q(i, j);
        const double mass = lam * q;
        const double yv = Yd(i, j);
        M(i, j) = mass;
        if (mass == 0.0 && yv > 0.0) {
          std::ostringstream os;
          os << "probability-zero observation: Y(" << (i + 1) << "," << (j + 1) << ")=" << yv
             << " but Lambda*Q=0 at t=" << t;
          throw IncompatibilityError(os.str());
        }
        Lambda_bar(i, j) = (1.0 - q) * lam + yv;
        ll -= mass;
        if (yv > 0.0) ll += yv * std::log(mass);
        if (!drop_constant) ll -= log_factorial(yv);
      }
    }
    if (!std::isfinite(ll))
      throw NumericalError("filter divergence: non-finite log-likelihood term at t=" +
                           std::to_string(t));
    lambda_bar = Lambda_bar.colwise().sum().transpose();
    trace.step_loglik[t] = ll;
    trace.total += ll;
    if (keep_trace) {
      trace.Lambda_pred[t] = Lambda;
      trace.Lambda_upd[t] = std::move(Lambda_bar);
      trace.M[t] = std::move(M);
      trace.lambda_upd[t] = lambda_bar;
    }
  }
  return trace;
}

namespace {

FilterTrace incidence_agg_impl(const ModelSpec& spec, const std::vector<Mat>& Ybar,
                               const std::vector<int>& tau, bool drop_constant, bool keep_trace,
                               bool open_population) {
  if (!spec.incidence) throw ConfigError("aggregated filter: spec has no incidence block");
  const int R = static_cast<int>(Ybar.size()) - 1;
  if (R < 1) throw ConfigError("aggregated filter: need observations for r = 1..R");
  if (static_cast<int>(tau.size()) != R + 1 || tau[0] != 0)
    throw ConfigError("aggregated filter: tau must be [0, tau_1, ..., tau_R]");
  for (int r = 1; r <= R; ++r)
    if (tau[r] <= tau[r - 1]) throw ConfigError("aggregated filter: tau not strictly increasing");
  const int T = tau[R];
  if (!open_population) require_closed(spec, T);

  FilterTrace trace;
  trace.drop_constant = drop_constant;
  Vec lambda_bar = initial_mean(spec.initial);
  const Eigen::Index m = spec.m;
  if (keep_trace) {
    trace.Lambda_pred.resize(T + 1);
    trace.Lambda_upd.resize(R + 1);
    trace.M.resize(R + 1);
    trace.lambda_upd.resize(T + 1);
    trace.lambda_upd[0] = lambda_bar;
  }
  trace.step_loglik.assign(R + 1, 0.0);

  for (int r = 1; r <= R; ++r) {
    Mat Msum = Mat::Zero(m, m);
    Mat Lambda_tau;  // prediction at the observation time
    for (int t = tau[r - 1] + 1; t <= tau[r]; ++t) {
      const Vec thinned =
          open_population ? Vec(lambda_bar.cwiseProduct(spec.delta(t))) : lambda_bar;
      Mat Lambda = predict_incidence_thinned(thinned, t, spec);
      Vec next = Lambda.colwise().sum().transpose();
      const Mat Q = spec.incidence->Q(t);
      Msum.noalias() += Lambda.cwiseProduct(Q);
      if (t < tau[r]) {
        if (open_population) next += spec.alpha(t);
        lambda_bar = next;
        if (keep_trace) {
          trace.Lambda_pred[t] = std::move(Lambda);
          trace.lambda_upd[t] = lambda_bar;
        }
      } else {
        Lambda_tau = std::move(Lambda);
      }
    }
    const int t_obs = tau[r];
    AggUpdate upd =
        agg_update(Lambda_tau, spec.incidence->Q(t_obs), Msum, Ybar[r], r, drop_constant);
    lambda_bar = upd.Lambda_bar.colwise().sum().transpose();
    if (open_population) lambda_bar += spec.alpha(t_obs);
    trace.step_loglik[r] = upd.loglik;
    trace.total += upd.loglik;
    if (keep_trace) {
      trace.Lambda_pred[t_obs] = std::move(Lambda_tau);
      trace.Lambda_upd[r] = std::move(upd.Lambda_bar);
      trace.M[r] = std::move(Msum);
      trace.lambda_upd[t_obs] = lambda_bar;
    }
  }
  return trace;
}

}  // namespace

namespace {
std::vector<Mat> to_real(const std::vector<IMat>& Y) {
  std::vector<Mat> Yd(Y.size());
  for (size_t t = 1; t < Y.size(); ++t) Yd[t] = Y[t].cast<double>();
  return Yd;
}
}  // namespace

FilterTrace pal_incidence_agg(const ModelSpec& spec, const std::vector<Mat>& Ybar,
                              const std::vector<int>& tau, bool drop_constant, bool keep_trace) {
  return incidence_agg_impl(spec, Ybar, tau, drop_constant, keep_trace, false);
}

FilterTrace pal_incidence_agg(const ModelSpec& spec, const std::vector<IMat>& Ybar,
                              const std::vector<int>& tau, bool drop_constant, bool keep_trace) {
  return incidence_agg_impl(spec, to_real(Ybar), tau, drop_constant, keep_trace, false);
}

FilterTrace pal_incidence_agg_open(const ModelSpec& spec, const std::vector<Mat>& Ybar,
                                   const std::vector<int>& tau, bool drop_constant,
                                   bool keep_trace) {
  return incidence_agg_impl(spec, Ybar, tau, drop_constant, keep_trace, true);
}

FilterTrace pal_incidence_agg_open(const ModelSpec& spec, const std::vector<IMat>& Ybar,
                                   const std::vector<int>& tau, bool drop_constant,
                                   bool keep_trace) {
  return incidence_agg_impl(spec, to_real(Ybar), tau, drop_constant, keep_trace, true);
}

}  // namespace pal
