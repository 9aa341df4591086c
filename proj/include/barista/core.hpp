#ifndef BARISTA_CORE_HPP
#define BARISTA_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>

namespace barista {

/**
 * Parameter vector of the three-stage arrival process on [0, T].
 *
 * The intensity is a piecewise power law in the time-to-close u = 1 - s/T:
 *
 *   stage 1, s in [0, d1)        : c (1 - d1/T)^(a2 - a1) u^(a1 - 1)
 *   stage 2, s in [d1, T - d2)   : c u^(a2 - 1)
 *   stage 3, s in [T - d2, T]    : c (d2/T)^(a2 - a3)  u^(a3 - 1)
 *
 * The prefactors make the intensity continuous at both changepoints. d1 = 0
 * removes stage 1 and d2 = 0 removes stage 3. Values are validated on
 * construction, so a BasicParams object always satisfies
 * 0 <= d1 < T - d2 <= T with every exponent, c and T strictly positive.
 */
template <typename Scalar>
class BasicParams {
 public:
  BasicParams(Scalar alpha1, Scalar alpha2, Scalar alpha3, Scalar d1,
              Scalar d2, Scalar c, Scalar horizon)
      : alpha1_(alpha1),
        alpha2_(alpha2),
        alpha3_(alpha3),
        d1_(d1),
        d2_(d2),
        c_(c),
        horizon_(horizon) {
    validate();
  }

  Scalar alpha1() const { return alpha1_; }
  Scalar alpha2() const { return alpha2_; }
  Scalar alpha3() const { return alpha3_; }
  Scalar d1() const { return d1_; }
  Scalar d2() const { return d2_; }
  Scalar c() const { return c_; }
  Scalar horizon() const { return horizon_; }

  /// Start of the final stage, T - d2.
  Scalar last_changepoint() const { return horizon_ - d2_; }

  BasicParams with_c(Scalar c) const {
    return BasicParams(alpha1_, alpha2_, alpha3_, d1_, d2_, c, horizon_);
  }

  template <typename Other>
  BasicParams<Other> cast() const {
    return BasicParams<Other>(Other(alpha1_), Other(alpha2_), Other(alpha3_),
                              Other(d1_), Other(d2_), Other(c_),
                              Other(horizon_));
  }

  friend bool operator==(const BasicParams&, const BasicParams&) = default;

 private:
  void validate() const {
    auto fail = [this](const char* what) {
      std::ostringstream os;
      os << "invalid parameters (" << what << "): alpha=(" << alpha1_ << ", "
         << alpha2_ << ", " << alpha3_ << ") d1=" << d1_ << " d2=" << d2_
         << " c=" << c_ << " T=" << horizon_;
      throw std::invalid_argument(os.str());
    };
    // Negated comparisons so NaN is rejected too.
    if (!(alpha1_ > 0) || !(alpha2_ > 0) || !(alpha3_ > 0))
      fail("exponents must be positive");
    if (!(c_ > 0)) fail("c must be positive");
    if (!(horizon_ > 0) || !std::isfinite(double(horizon_)))
      fail("horizon must be positive and finite");
    if (!(d1_ >= 0) || !(d2_ >= 0)) fail("changepoints must be nonnegative");
    if (!(d1_ < horizon_ - d2_)) fail("need d1 < T - d2");
  }

  Scalar alpha1_, alpha2_, alpha3_, d1_, d2_, c_, horizon_;
};

using Params = BasicParams<double>;

enum class Stage { First, Second, Third };

/// Half-open stage membership: [0, d1), [d1, T - d2), [T - d2, T].
template <typename Scalar>
Stage stage_of(const BasicParams<Scalar>& p, Scalar s) {
  if (s < p.d1()) return Stage::First;
  if (p.d2() > 0 && s >= p.last_changepoint()) return Stage::Third;
  return Stage::Second;
}

namespace detail {

template <typename Scalar>
void check_time(const BasicParams<Scalar>& p, Scalar s, const char* op) {
  if (!(s >= 0 && s <= p.horizon())) {
    std::ostringstream os;
    os << op << ": time " << s << " outside [0, " << p.horizon() << "]";
    throw std::domain_error(os.str());
  }
}

/**
 * Shared closed-form pieces. With a = 1 - d1/T and b = d2/T:
 *   g1 = (a^(a2-a1) - a^a2) / a1     mass of stage 1 over cT
 *   g2 = (a^a2 - b^a2) / a2          mass of stage 2 over cT
 *   g3 = b^a2 / a3                   mass of stage 3 over cT
 * and total = g1 + g2 + g3, so m(T) = c T total and C = 1 / (T total).
 */
template <typename Scalar>
struct Terms {
  Scalar a, b, A, A1, B, g1, g2, g3, total;

  explicit Terms(const BasicParams<Scalar>& p) {
    using std::pow;
    const Scalar T = p.horizon();
    a = 1 - p.d1() / T;
    b = p.d2() / T;
    A = pow(a, p.alpha2());
    A1 = pow(a, p.alpha2() - p.alpha1());
    B = pow(b, p.alpha2());
    g1 = (A1 - A) / p.alpha1();
    g2 = (A - B) / p.alpha2();
    g3 = B / p.alpha3();
    total = g1 + g2 + g3;
  }
};

/// Cumulative mass over cT up to s, i.e. m(s) / (c T).
template <typename Scalar>
Scalar cumulative_mass(const BasicParams<Scalar>& p, const Terms<Scalar>& k,
                       Scalar s) {
  using std::expm1;
  using std::log1p;
  using std::pow;
  const Scalar T = p.horizon();
  switch (stage_of(p, s)) {
    case Stage::First:
      return -k.A1 * expm1(p.alpha1() * log1p(-s / T)) / p.alpha1();
    case Stage::Second:
      return k.g1 + (k.A - pow(1 - s / T, p.alpha2())) / p.alpha2();
    case Stage::Third:
      return k.g1 + k.g2 -
             k.B * expm1(p.alpha3() * std::log((1 - s / T) / k.b)) /
                 p.alpha3();
  }
  return Scalar(0);
}

/// Remaining mass over cT beyond s, i.e. (m(T) - m(s)) / (c T).
template <typename Scalar>
Scalar remaining_mass(const BasicParams<Scalar>& p, const Terms<Scalar>& k,
                      Scalar s) {
  using std::pow;
  const Scalar T = p.horizon();
  const Scalar u = 1 - s / T;
  switch (stage_of(p, s)) {
    case Stage::First:
      return (k.A1 * pow(u, p.alpha1()) - k.A) / p.alpha1() + k.g2 + k.g3;
    case Stage::Second:
      return (pow(u, p.alpha2()) - k.B) / p.alpha2() + k.g3;
    case Stage::Third:
      return k.B * pow(u / k.b, p.alpha3()) / p.alpha3();
  }
  return Scalar(0);
}

/// Intensity over c, evaluated with the formula of a given branch.
template <typename Scalar>
Scalar branch_shape(const BasicParams<Scalar>& p, Stage stage, Scalar s) {
  using std::pow;
  const Scalar T = p.horizon();
  const Scalar u = 1 - s / T;
  switch (stage) {
    case Stage::First:
      return pow(1 - p.d1() / T, p.alpha2() - p.alpha1()) *
             pow(u, p.alpha1() - 1);
    case Stage::Second:
      return pow(u, p.alpha2() - 1);
    case Stage::Third:
      return pow(p.d2() / T, p.alpha2() - p.alpha3()) *
             pow(u, p.alpha3() - 1);
  }
  return Scalar(0);
}

}  // namespace detail

/// h(theta) = m(T) / c: expected count per unit of intensity scale.
template <typename Scalar>
Scalar unit_mass(const BasicParams<Scalar>& p) {
  return p.horizon() * detail::Terms<Scalar>(p).total;
}

/**
 * C = c / m(T), the density normalizer. It depends only on the shape
 * parameters and T: c cancels.
 */
template <typename Scalar>
Scalar normalization_constant(const BasicParams<Scalar>& p) {
  const Scalar a = 1 - p.d1() / p.horizon();
  const Scalar b = p.d2() / p.horizon();
  const Scalar a1 = p.alpha1(), a2 = p.alpha2(), a3 = p.alpha3();
  using std::pow;
  const Scalar denom = pow(a, a2) * a3 * (a1 - a2) + a3 * a2 * pow(a, a2 - a1) +
                       pow(b, a2) * a1 * (a2 - a3);
  return a1 * a2 * a3 / p.horizon() / denom;
}

template <typename Scalar>
Scalar intensity(const BasicParams<Scalar>& p, Scalar s) {
  detail::check_time(p, s, "intensity");
  return p.c() * detail::branch_shape(p, stage_of(p, s), s);
}

/// m(s) = E N(s).
template <typename Scalar>
Scalar mean_count(const BasicParams<Scalar>& p, Scalar s) {
  detail::check_time(p, s, "mean_count");
  const detail::Terms<Scalar> k(p);
  if (s == p.horizon()) return p.c() * p.horizon() * k.total;
  return p.c() * p.horizon() * detail::cumulative_mass(p, k, s);
}

/// F(s) = m(s) / m(T).
template <typename Scalar>
Scalar cdf(const BasicParams<Scalar>& p, Scalar s) {
  detail::check_time(p, s, "cdf");
  if (s == p.horizon()) return Scalar(1);
  const detail::Terms<Scalar> k(p);
  return detail::cumulative_mass(p, k, s) / k.total;
}

/// 1 - F(s), computed without cancellation near T.
template <typename Scalar>
Scalar survival(const BasicParams<Scalar>& p, Scalar s) {
  detail::check_time(p, s, "survival");
  if (s == p.horizon()) return Scalar(0);
  const detail::Terms<Scalar> k(p);
  return detail::remaining_mass(p, k, s) / k.total;
}

template <typename Scalar>
Scalar pdf(const BasicParams<Scalar>& p, Scalar s) {
  detail::check_time(p, s, "pdf");
  return detail::branch_shape(p, stage_of(p, s), s) /
         (p.horizon() * detail::Terms<Scalar>(p).total);
}

/**
 * Quantile function. Each branch of F is inverted in closed form; the branch
 * is chosen by comparing u with F(d1) and F(T - d2).
 */
template <typename Scalar>
Scalar inverse_cdf(const BasicParams<Scalar>& p, Scalar u) {
  using std::pow;
  if (!(u >= 0 && u <= 1)) {
    std::ostringstream os;
    os << "inverse_cdf: probability " << u << " outside [0, 1]";
    throw std::domain_error(os.str());
  }
  const Scalar T = p.horizon();
  if (u == 0) return Scalar(0);
  if (u == 1) return T;
  const detail::Terms<Scalar> k(p);
  const Scalar first_end = k.g1 / k.total;
  const Scalar second_end = (k.g1 + k.g2) / k.total;
  Scalar remaining;  // u-coordinate (1 - s/T) of the answer
  if (p.d1() > 0 && u < first_end) {
    remaining = pow(1 - p.alpha1() * k.total * u / k.A1, 1 / p.alpha1());
  } else if (p.d2() > 0 && u >= second_end) {
    remaining = k.b * pow(p.alpha3() * k.total * (1 - u) / k.B, 1 / p.alpha3());
  } else {
    Scalar base = k.A - p.alpha2() * (k.total * u - k.g1);
    if (base < 0) base = 0;
    remaining = pow(base, 1 / p.alpha2());
  }
  Scalar s = T * (1 - remaining);
  if (s < 0) s = 0;
  if (s > T) s = T;
  return s;
}

/**
 * Regeneration at fraction beta: the process seen after beta*T, on a clock
 * restarted at beta*T, is again a three-stage process with
 *   c' = c (1 - beta)^(a2 - 1), d1' = max(d1 - beta T, 0),
 *   d2' = min(d2, T'), T' = (1 - beta) T.
 * Its intensity at s equals intensity(p, beta T + s). When beta*T already
 * lies in the last stage the result is the single-stage process with
 * exponent a3 (the d2' = T' case of the formulas above is degenerate).
 */
template <typename Scalar>
BasicParams<Scalar> restrict(const BasicParams<Scalar>& p, Scalar beta) {
  using std::pow;
  if (!(beta >= 0 && beta < 1)) {
    std::ostringstream os;
    os << "restrict: beta " << beta << " outside [0, 1)";
    throw std::domain_error(os.str());
  }
  if (beta == 0) return p;
  const Scalar T = p.horizon();
  const Scalar new_T = (1 - beta) * T;
  const Scalar new_c = p.c() * pow(1 - beta, p.alpha2() - 1);
  const Scalar new_d1 = std::max(p.d1() - beta * T, Scalar(0));
  const Scalar new_d2 = std::min(p.d2(), new_T);
  if (new_d2 >= new_T) {
    // Only the last stage remains; fold its prefactor into c.
    const Scalar c3 = p.c() * pow(p.d2() / T, p.alpha2() - p.alpha3()) *
                      pow(1 - beta, p.alpha3() - 1);
    return BasicParams<Scalar>(p.alpha3(), p.alpha3(), p.alpha3(), 0, 0, c3,
                               new_T);
  }
  return BasicParams<Scalar>(p.alpha1(), p.alpha2(), p.alpha3(), new_d1,
                             new_d2, new_c, new_T);
}

/// Relative tolerance for shape agreement in superpose.
inline constexpr double kShapeTolerance = 1e-9;

/**
 * Sum of independent processes with common shape: the scales add.
 * Throws std::invalid_argument naming the first entry whose shape differs
 * from entry 0 by more than kShapeTolerance (relative).
 */
template <typename Scalar>
BasicParams<Scalar> superpose(std::span<const BasicParams<Scalar>> ps) {
  if (ps.empty()) throw std::invalid_argument("superpose: empty input");
  const auto& ref = ps.front();
  auto close = [](Scalar x, Scalar y) {
    using std::abs;
    const Scalar scale = std::max(abs(x), abs(y));
    return abs(x - y) <= Scalar(kShapeTolerance) * scale;
  };
  Scalar c_sum = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& q = ps[i];
    const char* bad = nullptr;
    if (!close(q.alpha1(), ref.alpha1())) bad = "alpha1";
    else if (!close(q.alpha2(), ref.alpha2())) bad = "alpha2";
    else if (!close(q.alpha3(), ref.alpha3())) bad = "alpha3";
    else if (!close(q.d1(), ref.d1())) bad = "d1";
    else if (!close(q.d2(), ref.d2())) bad = "d2";
    else if (!close(q.horizon(), ref.horizon())) bad = "horizon";
    if (bad) {
      std::ostringstream os;
      os << "superpose: entry " << i << " differs from entry 0 in " << bad;
      throw std::invalid_argument(os.str());
    }
    c_sum += q.c();
  }
  return ref.with_c(c_sum);
}

// Nested families ----------------------------------------------------------

enum class FamilyTag { OneStage, TwoStage, ThreeStage };

inline const char* family_name(FamilyTag tag) {
  switch (tag) {
    case FamilyTag::OneStage: return "one-stage";
    case FamilyTag::TwoStage: return "two-stage";
    case FamilyTag::ThreeStage: return "three-stage";
  }
  return "unknown";
}

/// Number of free shape parameters (exponents and changepoints).
inline int free_parameter_count(FamilyTag tag) {
  switch (tag) {
    case FamilyTag::OneStage: return 1;
    case FamilyTag::TwoStage: return 3;
    case FamilyTag::ThreeStage: return 5;
  }
  return 0;
}

/// Single power law, intensity c (1 - s/T)^(alpha - 1).
template <typename Scalar>
struct BasicOneStage {
  Scalar alpha, c, horizon;
};

/// One changepoint at T - d2.
template <typename Scalar>
struct BasicTwoStage {
  Scalar alpha2, alpha3, d2, c, horizon;
};

template <typename Scalar>
using BasicModelFamily = std::variant<BasicOneStage<Scalar>,
                                      BasicTwoStage<Scalar>,
                                      BasicParams<Scalar>>;

using OneStage = BasicOneStage<double>;
using TwoStage = BasicTwoStage<double>;
using ModelFamily = BasicModelFamily<double>;

template <typename Scalar>
BasicParams<Scalar> as_barista(const BasicOneStage<Scalar>& m) {
  return BasicParams<Scalar>(m.alpha, m.alpha, m.alpha, 0, 0, m.c, m.horizon);
}

template <typename Scalar>
BasicParams<Scalar> as_barista(const BasicTwoStage<Scalar>& m) {
  return BasicParams<Scalar>(m.alpha2, m.alpha2, m.alpha3, 0, m.d2, m.c,
                             m.horizon);
}

template <typename Scalar>
BasicParams<Scalar> as_barista(const BasicParams<Scalar>& m) {
  return m;
}

template <typename Scalar>
BasicParams<Scalar> as_barista(const BasicModelFamily<Scalar>& m) {
  return std::visit([](const auto& x) { return as_barista(x); }, m);
}

template <typename Scalar>
FamilyTag tag_of(const BasicModelFamily<Scalar>& m) {
  return static_cast<FamilyTag>(m.index());
}

/// Reads the family's own parameters back out of an embedded vector.
template <typename Scalar>
BasicModelFamily<Scalar> to_family(FamilyTag tag, const BasicParams<Scalar>& p) {
  switch (tag) {
    case FamilyTag::OneStage:
      return BasicOneStage<Scalar>{p.alpha2(), p.c(), p.horizon()};
    case FamilyTag::TwoStage:
      return BasicTwoStage<Scalar>{p.alpha2(), p.alpha3(), p.d2(), p.c(),
                                   p.horizon()};
    case FamilyTag::ThreeStage:
      return p;
  }
  return p;
}

}  // namespace barista

#endif  // BARISTA_CORE_HPP
