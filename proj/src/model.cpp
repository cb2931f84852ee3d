#include "pal/model.hpp"

#include <cmath>
#include <sstream>

namespace pal {

Vec initial_mean(const InitialDistribution& init) {
  if (const auto* p = std::get_if<VectorPoissonInit>(&init)) return p->lambda0;
  if (const auto* p = std::get_if<MultinomialInit>(&init))
    return static_cast<double>(p->n) * p->pi0;
  if (const auto* p = std::get_if<DeterministicInit>(&init)) return p->x0.cast<double>();
  const auto& b = std::get<BlockMultinomialInit>(init);
  const int bs = static_cast<int>(b.pi0.size());
  Vec mean(bs * b.sizes.size());
  for (Eigen::Index k = 0; k < b.sizes.size(); ++k) mean.segment(k * bs, bs) = b.sizes[k] * b.pi0;
  return mean;
}

int initial_dim(const InitialDistribution& init) {
  return static_cast<int>(initial_mean(init).size());
}

Prior Prior::flat(double lo, double hi) {
  Prior p;
  p.kind = Kind::Flat;
  p.lo = lo;
  p.hi = hi;
  return p;
}

Prior Prior::trunc_normal(double mean, double sd, double lo, double hi) {
  Prior p;
  p.kind = Kind::TruncNormal;
  p.mean = mean;
  p.sd = sd;
  p.lo = lo;
  p.hi = hi;
  return p;
}

static double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double Prior::logpdf(double x) const {
  if (x < lo || x > hi) return -std::numeric_limits<double>::infinity();
  if (kind == Kind::Flat) return 0.0;
  const double z = (x - mean) / sd;
  double mass = 1.0;
  if (std::isfinite(lo) || std::isfinite(hi)) {
    const double a = std::isfinite(lo) ? normal_cdf((lo - mean) / sd) : 0.0;
    const double b = std::isfinite(hi) ? normal_cdf((hi - mean) / sd) : 1.0;
    mass = b - a;
  }
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI) - std::log(mass);
}

int ParamVector::index_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw ConfigError("unknown parameter name: " + name);
}

bool ParamVector::within_bounds(const Vec& theta) const {
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    if (theta[i] < lo[i] || theta[i] > hi[i]) return false;
  return true;
}

double ParamVector::log_prior(const Vec& theta) const {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    lp += prior[i].logpdf(theta[i]);
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  }
  return lp;
}

void ParamVector::validate() const {
  const auto d = values.size();
  if (static_cast<Eigen::Index>(names.size()) != d || lo.size() != d || hi.size() != d ||
      static_cast<Eigen::Index>(prior.size()) != d || proposal_sd.size() != d)
    throw ConfigError("ParamVector: inconsistent field sizes");
  if (!within_bounds(values)) throw ConfigError("ParamVector: values out of bounds");
  if ((proposal_sd.array() <= 0.0).any()) throw ConfigError("ParamVector: proposal_sd must be positive");
}

ModelSpec ModelFamily::at(const Vec& theta) const {
  if (!params.within_bounds(theta)) throw ConfigError("ModelFamily::at: theta out of bounds");
  return build(theta);
}

Mat eval_kernel(const ModelSpec& spec, int t, const Vec& s) {
  Mat K = spec.kernel(t, s);
  if (!K.allFinite()) {
    std::ostringstream os;
    os << "kernel evaluation error at t=" << t << ", s=[" << s.transpose() << "]";
    throw NumericalError(os.str());
  }
  return K;
}

static void check_kernel_matrix(const Mat& K, int t, const char* tag,
                                std::vector<std::string>& out) {
  std::ostringstream os;
  if (!K.allFinite()) {
    os << "kernel has non-finite entry at t=" << t << " (" << tag << ")";
    out.push_back(os.str());
    return;
  }
  if ((K.array() < 0.0).any()) {
    os << "kernel has negative entry at t=" << t << " (" << tag << ")";
    out.push_back(os.str());
  }
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    if (std::abs(K.row(i).sum() - 1.0) > 1e-12) {
      std::ostringstream rs;
      rs << "kernel row " << (i + 1) << " not stochastic at t=" << t << " (" << tag
         << "), sum=" << K.row(i).sum();
      out.push_back(rs.str());
    }
  }
}

std::vector<std::string> validate_spec(const ModelSpec& spec, int T) {
  std::vector<std::string> out;
  if (spec.m <= 0) {
    out.push_back("m must be positive");
    return out;
  }
  if (initial_dim(spec.initial) != spec.m) out.push_back("initial distribution dimension != m");
  const Vec mean0 = initial_mean(spec.initial);
  if ((mean0.array() < 0.0).any()) out.push_back("initial mean has negative entry");

  // probe summaries: zero, uniform, unit directions at a few scales
  std::vector<Vec> probes;
  probes.push_back(Vec::Zero(spec.m));
  probes.push_back(Vec::Ones(spec.m));
  probes.push_back(mean0);
  for (int i = 0; i < spec.m; ++i) {
    Vec e = Vec::Zero(spec.m);
    e[i] = 1.0;
    probes.push_back(e);
    probes.push_back(100.0 * e + Vec::Ones(spec.m));
  }

  for (int t = 1; t <= T; ++t) {
    if (spec.delta) {
      const Vec d = spec.delta(t);
      if (d.size() != spec.m) out.push_back(describe_step("delta has wrong length", t));
      else if ((d.array() < 0.0).any() || (d.array() > 1.0).any())
        out.push_back(describe_step("delta out of [0,1]", t));
    } else {
      out.push_back("delta function missing");
      break;
    }
    if (spec.alpha) {
      const Vec a = spec.alpha(t);
      if (a.size() != spec.m) out.push_back(describe_step("alpha has wrong length", t));
      else if ((a.array() < 0.0).any()) out.push_back(describe_step("alpha has negative entry", t));
    } else {
      out.push_back("alpha function missing");
      break;
    }
    for (const auto& s : probes) {
      Mat K;
      try {
        K = spec.kernel(t, s);
      } catch (const std::exception& e) {
        out.push_back(describe_step((std::string("kernel threw: ") + e.what()).c_str(), t));
        continue;
      }
      if (K.rows() != spec.m || K.cols() != spec.m) {
        out.push_back(describe_step("kernel has wrong shape", t));
        continue;
      }
      check_kernel_matrix(K, t, "probe", out);
      if (spec.has_blocks()) {
        const auto blocks = spec.kernel_blocks(t, s);
        const int bs = spec.block_size;
        if (static_cast<int>(blocks.size()) != spec.n_blocks()) {
          out.push_back(describe_step("kernel_blocks has wrong block count", t));
        } else {
          for (int k = 0; k < spec.n_blocks(); ++k) {
            if ((blocks[k] - K.block(k * bs, k * bs, bs, bs)).cwiseAbs().maxCoeff() > 1e-12) {
              out.push_back(describe_step("kernel_blocks disagrees with dense kernel", t));
              break;
            }
          }
        }
      }
    }
    if (spec.prevalence) {
      const Vec q = spec.prevalence->q(t);
      const Mat G = spec.prevalence->G(t);
      const Vec kp = spec.prevalence->kappa(t);
      if (q.size() != spec.m || G.rows() != spec.m || G.cols() != spec.m || kp.size() != spec.m)
        out.push_back(describe_step("prevalence block has wrong shape", t));
      else {
        if ((q.array() < 0.0).any() || (q.array() > 1.0).any())
          out.push_back(describe_step("q out of [0,1]", t));
        if ((kp.array() < 0.0).any()) out.push_back(describe_step("kappa negative", t));
        std::vector<std::string> gviol;
        check_kernel_matrix(G, t, "G", gviol);
        for (auto& v : gviol) out.push_back("G: " + v);
      }
    }
    if (spec.incidence) {
      const Mat Q = spec.incidence->Q(t);
      if (Q.rows() != spec.m || Q.cols() != spec.m)
        out.push_back(describe_step("Q has wrong shape", t));
      else if ((Q.array() < 0.0).any() || (Q.array() > 1.0).any())
        out.push_back(describe_step("Q out of [0,1]", t));
    }
  }
  if (spec.incidence) {
    int prev = 0;
    for (size_t r = 0; r < spec.incidence->tau.size(); ++r) {
      if (spec.incidence->tau[r] <= prev) {
        out.push_back("tau schedule not strictly increasing");
        break;
      }
      prev = spec.incidence->tau[r];
    }
  }
  if (spec.prevalence && spec.incidence)
    out.push_back("exactly one of prevalence/incidence may be active per run");
  return out;
}

bool kernel_support_stable(const ModelFamily& family, const std::vector<Vec>& thetas,
                           const std::vector<Vec>& probes, int T) {
  if (thetas.empty()) return true;
  for (const auto& s : probes) {
    for (int t = 1; t <= T; ++t) {
      const Mat K0 = family.at(thetas.front()).kernel(t, s);
      for (size_t j = 1; j < thetas.size(); ++j) {
        const Mat K = family.at(thetas[j]).kernel(t, s);
        for (Eigen::Index r = 0; r < K.rows(); ++r)
          for (Eigen::Index c = 0; c < K.cols(); ++c)
            if ((K0(r, c) == 0.0) != (K(r, c) == 0.0)) return false;
      }
    }
  }
  return true;
}

}  // namespace pal
