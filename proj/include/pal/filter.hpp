#ifndef PAL_FILTER_HPP
#define PAL_FILTER_HPP

#include <vector>

#include "pal/model.hpp"

namespace pal {

/// Per-step output of the PAL recursions.  Vector fields are filled for
/// prevalence (case I), matrix fields for incidence (case II).  All log-PAL
/// accumulation is in natural log, ascending t.
struct FilterTrace {
  std::vector<Vec> lambda_pred;   // lambda_t, index t = 1..T
  std::vector<Vec> lambda_upd;    // lambda_bar_t, index t = 0..T
  std::vector<Vec> mu;            // mu_t, index t = 1..T

  std::vector<Mat> Lambda_pred;   // Lambda_t, index t = 1..T
  std::vector<Mat> Lambda_upd;    // Lambda_bar at observation times
  std::vector<Mat> M;             // M_r, index r = 1..R

  std::vector<double> step_loglik;  // per observation (t or r), index from 1
  double total = 0.0;
  bool drop_constant = true;  // whether 1'log(y!) terms were omitted
};

/// Algorithm step: lambda_t = [(lambda_bar o delta_t)' K_{t,s}]' + alpha_t
/// with the kernel evaluated at s = lambda_bar o delta_t.
Vec predict_prevalence(const Vec& lambda_bar_prev, int t, const ModelSpec& spec);

struct PrevalenceUpdate {
  Vec lambda_bar;
  Vec mu;
  double loglik;
};

/// Update/likelihood step of the case (I) recursion; y may be real-valued
/// (the limit recursions feed deterministic intensities through it).
/// 0/0 -> 0 and 0 log 0 -> 0; y > 0 on a zero-intensity coordinate raises
/// IncompatibilityError.
PrevalenceUpdate update_prevalence(const Vec& lambda, const Vec& y, int t,
                                   const ModelSpec& spec, bool drop_constant);

/// Case (I): full forward pass over y_{1:T} (y index 1..T; index 0 ignored).
FilterTrace pal_prevalence(const ModelSpec& spec, const std::vector<IVec>& y,
                           bool drop_constant = true, bool keep_trace = true);

/// Case (II) prediction: Lambda_t = (lambda_bar x 1) o K_{t, s} at
/// s = lambda_bar (no emigration), shared by the unit and aggregated passes.
Mat predict_incidence(const Vec& lambda_bar_prev, int t, const ModelSpec& spec);

/// Block-aware case (II) prediction on an already-thinned intensity, the
/// step shared by the aggregated filters and the limit recursions.
Mat predict_incidence_thinned(const Vec& thinned, int t, const ModelSpec& spec);

/// Case (II) with per-step observations Y_{1:T}; requires delta == 1 and
/// alpha == 0 over the horizon.  The recursions are defined on reals; the
/// real-valued overloads are what the limit recursions reuse.
FilterTrace pal_incidence_unit(const ModelSpec& spec, const std::vector<Mat>& Y,
                               bool drop_constant = true, bool keep_trace = true);
FilterTrace pal_incidence_unit(const ModelSpec& spec, const std::vector<IMat>& Y,
                               bool drop_constant = true, bool keep_trace = true);

/// Case (II) with aggregated observations Ybar_{1:R} at times tau; requires
/// delta == 1 and alpha == 0.  With tau_r = r this reproduces
/// pal_incidence_unit bit-exactly.
FilterTrace pal_incidence_agg(const ModelSpec& spec, const std::vector<Mat>& Ybar,
                              const std::vector<int>& tau, bool drop_constant = true,
                              bool keep_trace = true);
FilterTrace pal_incidence_agg(const ModelSpec& spec, const std::vector<IMat>& Ybar,
                              const std::vector<int>& tau, bool drop_constant = true,
                              bool keep_trace = true);

/// Aggregated-incidence recursion for open populations (emigration via delta,
/// immigration via alpha), the filter used by the measles model.  Exploits
/// the spec's block-diagonal kernel when present, with cross-city coupling
/// entering only through the kernel argument.
FilterTrace pal_incidence_agg_open(const ModelSpec& spec, const std::vector<Mat>& Ybar,
                                   const std::vector<int>& tau, bool drop_constant = true,
                                   bool keep_trace = true);
FilterTrace pal_incidence_agg_open(const ModelSpec& spec, const std::vector<IMat>& Ybar,
                                   const std::vector<int>& tau, bool drop_constant = true,
                                   bool keep_trace = true);

}  // namespace pal

#endif
