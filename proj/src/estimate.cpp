#include "barista/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>

namespace barista {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

/**
 * The closed-form mass H = g1 + g2 + g3 (so C = 1/(T H)) and its first and
 * second derivatives in the exponents, with a = 1 - d1/T, b = d2/T.
 */
struct MassDerivatives {
  double H = 0;
  Eigen::Vector3d d = Eigen::Vector3d::Zero();
  Eigen::Matrix3d dd = Eigen::Matrix3d::Zero();
  double log_a = 0, log_b = 0;

  explicit MassDerivatives(const Params& p) {
    const double a1 = p.alpha1(), a2 = p.alpha2(), a3 = p.alpha3();
    const double T = p.horizon();
    log_a = std::log1p(-p.d1() / T);
    const double A = std::exp(a2 * log_a);
    const double A1 = std::exp((a2 - a1) * log_a);
    double B = 0, BL = 0, BL2 = 0;
    if (p.d2() > 0) {
      log_b = std::log(p.d2() / T);
      B = std::exp(a2 * log_b);
      BL = B * log_b;
      BL2 = BL * log_b;
    } else {
      log_b = -std::numeric_limits<double>::infinity();
    }
    const double La = log_a, La2 = La * La;
    const double D1 = A1 - A, D2 = A - B;
    H = D1 / a1 + D2 / a2 + B / a3;

    d(0) = -La * A1 / a1 - D1 / (a1 * a1);
    d(1) = La * D1 / a1 + (A * La - BL) / a2 - D2 / (a2 * a2) + BL / a3;
    d(2) = -B / (a3 * a3);

    dd(0, 0) = La2 * A1 / a1 + 2 * La * A1 / (a1 * a1) + 2 * D1 / (a1 * a1 * a1);
    dd(0, 1) = dd(1, 0) = -La2 * A1 / a1 - La * D1 / (a1 * a1);
    dd(1, 1) = La2 * D1 / a1 + (A * La2 - BL2) / a2 -
               2 * (A * La - BL) / (a2 * a2) + 2 * D2 / (a2 * a2 * a2) + BL2 / a3;
    dd(1, 2) = dd(2, 1) = -BL / (a3 * a3);
    dd(2, 2) = 2 * B / (a3 * a3 * a3);
  }
};

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::QuickCrude: return "qc";
    case Method::Grid: return "grid";
    case Method::GA: return "ga";
    case Method::ClosedForm: return "closed-form";
  }
  return "unknown";
}

ParamArray to_array(const Params& p) {
  ParamArray v;
  v << p.alpha1(), p.alpha2(), p.alpha3(), p.d1(), p.d2(), p.c();
  return v;
}

double ecdf(const BidSample& sample, double t) {
  if (sample.empty()) throw std::invalid_argument("ecdf: empty sample");
  if (!(t >= 0 && t <= sample.horizon()))
    throw std::domain_error("ecdf: time " + fmt(t) + " outside [0, T]");
  const auto& x = sample.times();
  const auto k = std::upper_bound(x.begin(), x.end(), t) - x.begin();
  return double(k) / double(x.size());
}

// Quick and crude -------------------------------------------------------------

double qc_alpha(const CdfFn& F, double T, double t, double s) {
  if (!(s > 0 && s < t && t <= T))
    throw EstimationError("alpha", "need 0 < s < t <= T, got s=" + fmt(s) + " t=" + fmt(t));
  const double mid = T - std::sqrt(s * t);
  const double outer = F(mid) - F(T - t);
  const double inner = F(T - s) - F(mid);
  if (outer == 0 || inner == 0)
    throw EstimationError("alpha", "no events in part of the window [" + fmt(T - t) +
                                       ", " + fmt(T - s) + "]");
  if ((outer > 0) != (inner > 0))
    throw EstimationError("alpha", "cdf not monotone over the window");
  return 2 * (std::log(std::abs(outer)) - std::log(std::abs(inner))) /
         (std::log(t) - std::log(s));
}

double qc_alpha(const CdfFn& F, double T, Window w) {
  return qc_alpha(F, T, T - w.lo, T - w.hi);
}

double qc_alpha3_survival(const CdfFn& F, double T, double t3, double t3p) {
  if (!(t3 < t3p && t3p < T))
    throw EstimationError("alpha3", "need t3 < t3' < T, got t3=" + fmt(t3) + " t3'=" + fmt(t3p));
  const double R = 1 - F(t3), Rp = 1 - F(t3p);
  if (!(R > 0 && Rp > 0))
    throw EstimationError("alpha3", "zero survival at " + fmt(Rp > 0 ? t3 : t3p));
  return std::log(R / Rp) / std::log((T - t3) / (T - t3p));
}

Changepoints qc_changepoints(const CdfFn& F, const Eigen::Vector3d& al,
                             const SafePoints& sp, double T) {
  const double a1 = al(0), a2 = al(1), a3 = al(2);
  auto same = [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(std::abs(x), std::abs(y)); };
  if (same(a1, a2)) throw EstimationError("changepoints", "alpha1 = alpha2, d1 is unidentifiable");
  if (same(a2, a3)) throw EstimationError("changepoints", "alpha2 = alpha3, d2 is unidentifiable");
  if (!(sp.t1 > 0 && sp.t2p < sp.t2 && sp.t3 < T))
    throw EstimationError("changepoints", "safe points must satisfy 0 < t1, t2' < t2, t3 < T");

  const double dF2 = F(sp.t2) - F(sp.t2p);
  // stage-2 mass over [t2', t2] without the constant C T
  const double m2 = (std::pow(1 - sp.t2p / T, a2) - std::pow(1 - sp.t2 / T, a2)) / a2;
  if (!(dF2 > 0)) throw EstimationError("changepoints", "no events between t2' and t2");

  const double m1 = -std::expm1(a1 * std::log1p(-sp.t1 / T)) / a1;
  const double x = F(sp.t1) / dF2 * m2 / m1;  // (1 - d1/T)^(a2 - a1)
  const double m3 = std::pow(1 - sp.t3 / T, a3) / a3;
  const double y = (1 - F(sp.t3)) / dF2 * m2 / m3;  // (d2/T)^(a2 - a3)
  if (!(x > 0)) throw EstimationError("changepoints", "no events before t1");
  if (!(y > 0)) throw EstimationError("changepoints", "no events after t3");
  return {T * (1 - std::pow(x, 1 / (a2 - a1))), T * std::pow(y, 1 / (a2 - a3))};
}

void QcConfig::validate(double T) const {
  auto check = [T](Window w, const char* name) {
    if (!(w.lo >= 0 && w.lo < w.hi && w.hi <= T))
      throw std::invalid_argument(std::string("qc config: ") + name + " window [" + fmt(w.lo) +
                                  ", " + fmt(w.hi) + "] must be ordered and inside [0, T]");
  };
  check(stage1, "stage1");
  check(stage2, "stage2");
  check(stage3, "stage3");
  if (!(stage1.hi < T && stage2.hi < T && stage3.hi < T))
    throw std::invalid_argument("qc config: windows must end before T");
  if (!(safe.t1 > 0 && safe.t1 <= T && safe.t2p >= 0 && safe.t2p < safe.t2 &&
        safe.t2 <= T && safe.t3 >= 0 && safe.t3 < T))
    throw std::invalid_argument("qc config: safe points need 0 < t1, t2' < t2, t3 < T");
}

FitResult qc_fit(const BidSample& sample, const QcConfig& cfg) {
  const double T = sample.horizon();
  cfg.validate(T);
  if (sample.empty()) throw EstimationError("sample", "no events");
  const CdfFn F = [&](double t) { return ecdf(sample, t); };

  auto stage = [](const char* name, auto&& f) {
    try {
      return f();
    } catch (const EstimationError& e) {
      throw EstimationError(name, e.what());
    }
  };
  const double a1 = stage("stage1", [&] { return qc_alpha(F, T, cfg.stage1); });
  const double a2 = stage("stage2", [&] { return qc_alpha(F, T, cfg.stage2); });
  const double a3 = stage("stage3", [&] {
    return qc_alpha3_survival(F, T, cfg.stage3.lo, cfg.stage3.hi);
  });
  const Eigen::Vector3d estimated(a1, a2, a3);
  const Changepoints cp = qc_changepoints(F, cfg.changepoint_alphas.value_or(estimated), cfg.safe, T);

  FitResult r;
  r.family = FamilyTag::ThreeStage;
  r.method = Method::QuickCrude;
  try {
    const Params shape(a1, a2, a3, cp.d1, cp.d2, 1, T);
    r.c_hat = estimate_c(shape, double(sample.size()));
    r.params = shape.with_c(r.c_hat);
  } catch (const std::invalid_argument& e) {
    throw EstimationError("changepoints", std::string("estimates form no valid model: ") + e.what());
  }
  r.loglik = loglik(sample, r.params);
  return r;
}

// Log-likelihood --------------------------------------------------------------

LoglikEvaluator::LoglikEvaluator(const BidSample& sample)
    : times_(sample.times().begin(), sample.times().end()),
      prefix_(sample.size() + 1, 0.0),
      horizon_(sample.horizon()) {
  for (std::size_t i = 0; i < times_.size(); ++i)
    prefix_[i + 1] = prefix_[i] + std::log1p(-times_[i] / horizon_);
}

void LoglikEvaluator::check(const Params& p) const {
  if (p.horizon() != horizon_)
    throw std::invalid_argument("loglik: model horizon " + fmt(p.horizon()) +
                                " differs from sample horizon " + fmt(horizon_));
}

StageStats LoglikEvaluator::stats(double d1, double d2) const {
  const std::size_t n = times_.size();
  const auto i1 = std::size_t(std::lower_bound(times_.begin(), times_.end(), d1) - times_.begin());
  std::size_t i3 = n;
  if (d2 > 0)
    i3 = std::max(i1, std::size_t(std::lower_bound(times_.begin(), times_.end(), horizon_ - d2) -
                                  times_.begin()));
  StageStats s;
  s.n = double(n);
  s.n1 = double(i1);
  s.n3 = double(n - i3);
  s.S1 = prefix_[i1];
  s.S2 = prefix_[i3] - prefix_[i1];
  s.S3 = prefix_[n] - prefix_[i3];
  return s;
}

double LoglikEvaluator::operator()(const Params& p) const {
  check(p);
  const StageStats s = stats(p.d1(), p.d2());
  const detail::Terms<double> k(p);
  double v = -s.n * std::log(horizon_ * k.total) + (p.alpha1() - 1) * s.S1 +
             (p.alpha2() - 1) * s.S2 + (p.alpha3() - 1) * s.S3;
  if (s.n1 > 0) v += s.n1 * (p.alpha2() - p.alpha1()) * std::log1p(-p.d1() / horizon_);
  if (s.n3 > 0) v += s.n3 * (p.alpha2() - p.alpha3()) * std::log(p.d2() / horizon_);
  return v;
}

Eigen::Vector3d LoglikEvaluator::gradient(const Params& p) const {
  check(p);
  const StageStats s = stats(p.d1(), p.d2());
  const MassDerivatives m(p);
  Eigen::Vector3d g = -s.n * m.d / m.H;
  g(0) += s.S1 - s.n1 * m.log_a;
  g(1) += s.S2 + s.n1 * m.log_a;
  g(2) += s.S3;
  if (s.n3 > 0) {
    g(1) += s.n3 * m.log_b;
    g(2) -= s.n3 * m.log_b;
  }
  return g;
}

Eigen::Matrix3d LoglikEvaluator::hessian(const Params& p) const {
  check(p);
  const MassDerivatives m(p);
  return -double(size()) * (m.dd / m.H - m.d * m.d.transpose() / (m.H * m.H));
}

double loglik(const BidSample& sample, const Params& p) {
  return LoglikEvaluator(sample)(p);
}

Eigen::Vector3d loglik_gradient(const BidSample& sample, const Params& p) {
  return LoglikEvaluator(sample).gradient(p);
}

Eigen::Matrix3d loglik_hessian(const BidSample& sample, const Params& p) {
  return LoglikEvaluator(sample).hessian(p);
}

Eigen::Vector3d normalization_gradient(const Params& p) {
  const double a1 = p.alpha1(), a2 = p.alpha2(), a3 = p.alpha3();
  const double T = p.horizon();
  const double a = 1 - p.d1() / T, b = p.d2() / T;
  const double La = std::log(a);
  const double C = normalization_constant(p);
  const double A = std::pow(a, a2), B = std::pow(b, a2);
  const double BLb = p.d2() > 0 ? B * std::log(b) : 0.0;
  const double k = C * C * T;
  Eigen::Vector3d g;
  g(0) = k / (a1 * a1) * A * (std::pow(a, -a1) * (1 + a1 * La) - 1);
  g(1) = -k / (a2 * a2) *
         (B - A - a2 * a2 / a1 * A * La * (1 - std::pow(a, -a1)) - a2 * BLb +
          a2 * A * La + a2 * a2 / a3 * BLb);
  g(2) = k / (a3 * a3) * B;
  return g;
}

Params refine_alphas(const LoglikEvaluator& ll, const Params& start,
                     FamilyTag family, int max_iterations) {
  Eigen::MatrixXd P;
  switch (family) {
    case FamilyTag::OneStage:
      P = Eigen::Vector3d::Ones();
      break;
    case FamilyTag::TwoStage:
      P.resize(3, 2);
      P << 1, 0, 1, 0, 0, 1;
      break;
    case FamilyTag::ThreeStage:
      P = Eigen::Matrix3d::Identity();
      break;
  }
  auto with_alphas = [&](const Eigen::Vector3d& al) {
    return Params(al(0), al(1), al(2), start.d1(), start.d2(), start.c(), start.horizon());
  };
  Eigen::Vector3d al(start.alpha1(), start.alpha2(), start.alpha3());
  double f = ll(start);
  for (int it = 0; it < max_iterations; ++it) {
    const Params cur = with_alphas(al);
    const Eigen::VectorXd g = P.transpose() * ll.gradient(cur);
    const Eigen::MatrixXd negH = -(P.transpose() * ll.hessian(cur) * P);
    Eigen::VectorXd step;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(negH);
    if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0).all()) {
      step = ldlt.solve(g);
    } else {
      step = g / std::max(1.0, g.norm());
    }
    const Eigen::Vector3d dir = P * step;
    bool improved = false;
    for (double t = 1; t > 1e-12; t /= 2) {
      const Eigen::Vector3d next = al + t * dir;
      if ((next.array() <= 0).any()) continue;
      const double fn = ll(with_alphas(next));
      if (fn > f) {
        const double gain = fn - f;
        al = next;
        f = fn;
        improved = gain > 1e-14 * (1 + std::abs(f));
        break;
      }
    }
    if (!improved) break;
  }
  return with_alphas(al);
}

OneStageMle mle_nhpp1(const BidSample& sample) {
  if (sample.empty()) throw EstimationError("one-stage", "empty sample");
  const double T = sample.horizon();
  double sum = 0;
  for (double x : sample.times()) sum += std::log1p(-x / T);
  if (!(sum < 0)) throw EstimationError("one-stage", "all events at time 0");
  const double n = double(sample.size());
  const double alpha = -n / sum;
  return {alpha, n * alpha / T};
}

double estimate_c(const Params& shape, double n) {
  if (!(n >= 0)) throw std::domain_error("estimate_c: negative count");
  return n / unit_mass(shape);
}

ParamArray bootstrap_se(const BidSample& sample, const Fitter& fitter,
                        std::size_t B, Seed seed) {
  if (B < 2) throw std::invalid_argument("bootstrap_se: need at least 2 replicates");
  const auto& x = sample.times();
  std::vector<ParamArray> fits;
  fits.reserve(B);
  std::size_t failed = 0;
  std::string last_error;
  for (std::size_t r = 0; r < B; ++r) {
    Rng rng(derive(seed, r));
    std::vector<double> resampled(x.size());
    for (auto& v : resampled) v = x[rng.index(x.size())];
    try {
      fits.push_back(to_array(fitter(BidSample(std::move(resampled), sample.horizon())).params));
    } catch (const std::exception& e) {
      ++failed;
      last_error = e.what();
    }
  }
  if (double(failed) > 0.2 * double(B) || fits.size() < 2)
    throw EstimationError("bootstrap", std::to_string(failed) + " of " + std::to_string(B) +
                                           " refits failed (fraction " +
                                           fmt(double(failed) / double(B)) + "); last: " + last_error);
  ParamArray mean = ParamArray::Zero();
  for (const auto& f : fits) mean += f;
  mean /= double(fits.size());
  ParamArray var = ParamArray::Zero();
  for (const auto& f : fits) var += (f - mean).cwiseAbs2();
  return (var / double(fits.size() - 1)).cwiseSqrt();
}

}  // namespace barista
