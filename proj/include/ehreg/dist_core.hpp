#pragma once

// Densities, distribution functions and random variates for the H scale
// family, the EH error mixture and the conjugate kernels of the samplers.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ehreg/errors.hpp"
#include "ehreg/random.hpp"

namespace ehreg {

/// Controls the adaptive Gauss-Kronrod integrations. The integration is
/// accepted when the Kronrod error estimate is below rel_tol times the L1
/// norm of the integrand (with a 100x slack before it counts as failure).
struct QuadratureSpec {
  double rel_tol = 1e-10;
  unsigned max_depth = 25;
};

namespace detail {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

template <class F>
double integrate(F&& f, double a, double b, const QuadratureSpec& q, const char* what) {
  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, q.max_depth, q.rel_tol, &error, &l1);
  if (!std::isfinite(value) || error > 100.0 * q.rel_tol * l1 + std::numeric_limits<double>::min()) {
    throw NumericError(std::string("quadrature did not converge: ") + what, error);
  }
  return value;
}

/// log u for u = expm1(t) without overflow for large t.
inline double log_expm1(double t) {
  return t < 30.0 ? std::log(std::expm1(t)) : t + std::log1p(-std::exp(-t));
}

}  // namespace detail

/// Log of the N(mean, var) density at x.
inline double log_normal_density(double x, double mean, double var) {
  const double z = (x - mean) / std::sqrt(var);
  return -detail::kLogSqrt2Pi - 0.5 * std::log(var) - 0.5 * z * z;
}

inline double normal_density(double x, double mean = 0.0, double var = 1.0) {
  return std::exp(log_normal_density(x, mean, var));
}

/// Log of the IG(shape, scale) density.
inline double log_inv_gamma_density(double u, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(u) - scale / u;
}

/// Log density of the Student t with nu degrees of freedom, location 0, scale 1.
inline double log_student_t_density(double x, double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
         0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

// ---------------------------------------------------------------------------
// H family
// ---------------------------------------------------------------------------

/// Parameters of H(u; gamma, delta) with density
///   C(delta, gamma) (1+u)^{-(1+delta)} {1 + log(1+u)}^{-(1+gamma)}.
/// delta = 0 is the EH scale law, for which C = gamma exactly. For delta > 0
/// the constant is integrated once at construction and kept with the value.
class HParams {
 public:
  explicit HParams(double gamma, double delta = 0.0, const QuadratureSpec& quad = {})
      : gamma_(gamma), delta_(delta) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("HParams: gamma must be positive");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw DomainError("HParams: delta must be nonnegative");
    constant_ = delta == 0.0 ? gamma : 1.0 / unnormalized_mass(gamma, delta, quad);
  }

  double gamma() const noexcept { return gamma_; }
  double delta() const noexcept { return delta_; }
  double normalizing_constant() const noexcept { return constant_; }

 private:
  // Integral over t = log(1+u) and then s = log(1+t):
  //   int_0^inf exp(-delta t) (1+t)^{-(1+gamma)} dt = int_0^inf exp(-delta (e^s - 1) - gamma s) ds
  static double unnormalized_mass(double gamma, double delta, const QuadratureSpec& quad) {
    auto f = [=](double s) {
      const double t = std::expm1(s);
      return std::exp(-delta * t - gamma * s);
    };
    return detail::integrate(f, 0.0, std::numeric_limits<double>::infinity(), quad, "H normalizing constant");
  }

  double gamma_;
  double delta_;
  double constant_;
};

/// Mixing weight and shape of the EH error law
///   (1-s) N(0,1) + s int N(0,u) H(u; gamma) du.
struct EHParams {
  double s = 0.1;
  double gamma = 1.0;

  void validate() const {
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("EHParams: s must lie in [0, 1]");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("EHParams: gamma must be positive");
  }
};

/// GIG(lambda, a, b): density proportional to u^{lambda-1} exp(-(a u + b/u)/2).
struct GigParams {
  double lambda = 0.5;
  double a = 1.0;
  double b = 1.0;
};

inline double h_density(double u, const HParams& p) {
  if (!std::isfinite(u)) throw DomainError("h_density: u must be finite");
  if (u < 0.0) throw DomainError("h_density: u must be nonnegative");
  const double l = std::log1p(u);
  return p.normalizing_constant() * std::exp(-(1.0 + p.delta()) * l - (1.0 + p.gamma()) * std::log1p(l));
}

/// Closed-form CDF 1 - {1 + log(1+u)}^{-gamma}; delta = 0 only.
inline double h_cdf(double u, const HParams& p) {
  if (p.delta() != 0.0) throw UnsupportedParameter("h_cdf: closed form requires delta = 0");
  if (std::isnan(u)) throw DomainError("h_cdf: u is NaN");
  if (u <= 0.0) return 0.0;
  return -std::expm1(-p.gamma() * std::log1p(std::log1p(u)));
}

/// h_cdf as a function of t = log(1+u), for quantiles beyond double range.
inline double h_cdf_log1p(double t, const HParams& p) {
  if (p.delta() != 0.0) throw UnsupportedParameter("h_cdf_log1p: closed form requires delta = 0");
  if (std::isnan(t)) throw DomainError("h_cdf_log1p: t is NaN");
  if (t <= 0.0) return 0.0;
  return -std::expm1(-p.gamma() * std::log1p(t));
}

/// log(1 + h_quantile(prob)) = (1-prob)^{-1/gamma} - 1, finite for every prob < 1.
inline double h_quantile_log1p(double prob, const HParams& p) {
  if (p.delta() != 0.0) throw UnsupportedParameter("h_quantile: closed form requires delta = 0");
  if (!(prob >= 0.0 && prob < 1.0)) throw DomainError("h_quantile: prob must lie in [0, 1)");
  return std::expm1(-std::log1p(-prob) / p.gamma());
}

/// Inverse of h_cdf: exp((1-prob)^{-1/gamma} - 1) - 1. Saturates at the
/// largest finite double when the quantile is beyond double range
/// (log(1+u) > 709.78); h_quantile_log1p stays exact there.
inline double h_quantile(double prob, const HParams& p) {
  const double u = std::expm1(h_quantile_log1p(prob, p));
  return std::isfinite(u) ? u : std::numeric_limits<double>::max();
}

/// Exact draw from H(.; gamma) by inversion.
inline double sample_h(RngStream& rng, const HParams& p) {
  if (p.delta() != 0.0) throw UnsupportedParameter("sample_h: inversion requires delta = 0");
  return h_quantile(1.0 - rng.uniform(), p);
}

/// Heavy component int_0^inf N(x; 0, u) H(u; gamma, delta) du.
///
/// Evaluated on t = log(1+u), where H(u)du = C e^{-delta t}(1+t)^{-1-gamma} dt,
/// and then r = sqrt(t), which removes the u^{-1/2} endpoint singularity at
/// x = 0. The integrand peaks at u = x^2, used as a breakpoint.
inline double heavy_component_density(double x, const HParams& p, const QuadratureSpec& quad = {}) {
  if (!std::isfinite(x)) throw DomainError("heavy_component_density: x must be finite");
  const double x2 = x * x;
  const double c = p.normalizing_constant();
  const double g = p.gamma();
  const double d = p.delta();
  auto integrand = [=](double r) {
    const double t = r * r;
    const double mix = c * std::exp(-d * t - (1.0 + g) * std::log1p(t));
    if (t < 1e-300) return x2 == 0.0 ? 2.0 * mix / std::sqrt(2.0 * std::numbers::pi) : 0.0;
    const double lu = detail::log_expm1(t);
    const double lphi = -detail::kLogSqrt2Pi - 0.5 * lu - 0.5 * x2 * std::exp(-lu);
    return 2.0 * r * std::exp(lphi) * mix;
  };
  const double peak = std::sqrt(std::log1p(x2));
  const double inf = std::numeric_limits<double>::infinity();
  if (peak < 1e-3) return detail::integrate(integrand, 0.0, inf, quad, "heavy component");
  return detail::integrate(integrand, 0.0, peak, quad, "heavy component") +
         detail::integrate(integrand, peak, inf, quad, "heavy component");
}

/// (1-s) N(x; 0, 1) + s * heavy component under H(.; gamma, delta).
inline double mixture_density(double x, double s, const HParams& p, const QuadratureSpec& quad = {}) {
  if (!(s >= 0.0 && s <= 1.0)) throw DomainError("mixture_density: s must lie in [0, 1]");
  const double thin = (1.0 - s) * normal_density(x);
  return s == 0.0 ? thin : thin + s * heavy_component_density(x, p, quad);
}

inline double eh_density(double x, const EHParams& p, const QuadratureSpec& quad = {}) {
  p.validate();
  return mixture_density(x, p.s, HParams(p.gamma), quad);
}

/// Limit of |x| (log|x|)^{1+gamma} f_EH(x) as |x| -> infinity: s gamma / 2^{1+gamma}.
inline double eh_tail_constant(const EHParams& p) {
  p.validate();
  if (p.s == 0.0) throw DomainError("eh_tail_constant: tail is Gaussian (undefined constant) when s = 0");
  return p.s * p.gamma / std::pow(2.0, 1.0 + p.gamma);
}

// ---------------------------------------------------------------------------
// Random variates
// ---------------------------------------------------------------------------

/// GIG(1/2, a, b) draw.
///
/// b = 0 degenerates to Ga(1/2, a/2). Otherwise u = sqrt(b/a) / Y with
/// Y ~ InverseGaussian(mean 1, shape sqrt(ab)), drawn by the transformation
/// with multiple roots, written in the cancellation-free form.
inline double sample_gig_half(RngStream& rng, double a, double b) {
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("sample_gig_half: a must be positive");
  if (!(b >= 0.0)) throw DomainError("sample_gig_half: b must be nonnegative");
  if (b < 1e-300) return rng.gamma(0.5, 0.5 * a);
  if (!std::isfinite(b)) return std::numeric_limits<double>::max();
  const double omega = std::sqrt(a) * std::sqrt(b);
  const double scale = std::sqrt(b) / std::sqrt(a);
  const double z = rng.normal();
  const double t = 0.5 * z * z / omega;
  const double y1 = 1.0 / (1.0 + t + std::sqrt(t * (2.0 + t)));
  const double y = rng.uniform() * (1.0 + y1) <= 1.0 ? y1 : 1.0 / y1;
  return scale / y;
}

/// Closed-form GIG(1/2, a, b) moments for b > 0 (half-integer Bessel ratios).
inline double gig_half_mean(double a, double b) {
  return std::sqrt(b / a) * (1.0 + 1.0 / std::sqrt(a * b));
}
inline double gig_half_mean_reciprocal(double a, double b) { return std::sqrt(a / b); }

namespace detail {

/// Index of the first leading principal minor that is not positive.
inline Eigen::Index first_nonpositive_minor(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) return j + 1;
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  return n;
}

inline Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success || !llt.matrixLLT().diagonal().allFinite()) {
    throw NumericError(std::string(what) + ": matrix not positive definite (leading minor " +
                       std::to_string(first_nonpositive_minor(m)) + " of " + std::to_string(m.rows()) + ")");
  }
  return llt;
}

inline Eigen::VectorXd standard_normals(RngStream& rng, Eigen::Index n) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
  return z;
}

}  // namespace detail

enum class MvnParam { covariance, precision };

/// Factorization of a Gaussian precision matrix arranged so that the implied
/// square root of the covariance is exactly its lower Cholesky factor: the
/// Cholesky factor of the row/column-reversed precision is used. Precision
/// and covariance parameterizations therefore map the same standard normal
/// vector to the same draw.
class PrecisionFactor {
 public:
  explicit PrecisionFactor(const Eigen::MatrixXd& precision, const char* what = "precision")
      : llt_(detail::checked_llt(precision.reverse(), what)) {}

  /// Q^{-1} b.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt_.solve(b.reverse()).reverse(); }

  /// L z, where L is the lower Cholesky factor of Q^{-1}.
  Eigen::VectorXd covariance_root_times(const Eigen::VectorXd& z) const {
    Eigen::VectorXd w = llt_.matrixU().solve(z.reverse());
    return w.reverse();
  }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Draw from N(mean, S) where S is the covariance or the precision (inverse
/// covariance) according to `param`.
inline Eigen::VectorXd sample_mvn(RngStream& rng, const Eigen::VectorXd& mean, const Eigen::MatrixXd& matrix,
                                  MvnParam param = MvnParam::covariance) {
  if (matrix.rows() != mean.size() || matrix.cols() != mean.size()) {
    throw DomainError("sample_mvn: dimension mismatch");
  }
  const Eigen::VectorXd z = detail::standard_normals(rng, mean.size());
  if (param == MvnParam::covariance) {
    const auto llt = detail::checked_llt(matrix, "sample_mvn covariance");
    return mean + llt.matrixL() * z;
  }
  return mean + PrecisionFactor(matrix, "sample_mvn precision").covariance_root_times(z);
}

/// Draw from N(Q^{-1} b, Q^{-1}): the form every conjugate Gaussian update takes.
inline Eigen::VectorXd sample_mvn_canonical(RngStream& rng, const Eigen::MatrixXd& precision,
                                            const Eigen::VectorXd& linear, const char* what = "precision") {
  const PrecisionFactor f(precision, what);
  const Eigen::VectorXd z = detail::standard_normals(rng, linear.size());
  return f.solve(linear) + f.covariance_root_times(z);
}

}  // namespace ehreg
