#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stretch_ranger/error.hpp"
#include "stretch_ranger/units.hpp"

namespace stretch_ranger {

struct CalibrationPoint {
  double displacement = 0.0;  // m
  double transmission = 0.0;
  double weight = 1.0;
};

enum class Monotonicity { increasing, decreasing, none };

inline const char* to_string(Monotonicity m) {
  switch (m) {
    case Monotonicity::increasing: return "increasing";
    case Monotonicity::decreasing: return "decreasing";
    case Monotonicity::none: return "none";
  }
  return "none";
}

struct MonotonicityCertificate {
  Monotonicity direction = Monotonicity::none;
  double margin = 0.0;       // min |dy/dx| over the valid range, per mm
  double margin_at_mm = 0.0; // where it is attained
  std::vector<double> derivative_roots_mm;

  bool monotone() const { return direction != Monotonicity::none; }
};

// y = a x + b x^2 + c3 x^3 + d with x in millimetres.
struct CalibrationCurve {
  double a = 0.0;
  double b = 0.0;
  double c3 = 0.0;
  double d = 0.0;
  double x_lo = 0.0;  // mm
  double x_hi = 0.0;  // mm
  MonotonicityCertificate certificate;
  double rms_residual = 0.0;
  double max_residual = 0.0;
  std::size_t n_points = 0;

  bool monotone() const { return certificate.monotone(); }
};

namespace calib {

inline double evaluate_unchecked(const CalibrationCurve& c, double x_mm) {
  return ((c.c3 * x_mm + c.b) * x_mm + c.a) * x_mm + c.d;
}

inline double slope(const CalibrationCurve& c, double x_mm) {
  return (3.0 * c.c3 * x_mm + 2.0 * c.b) * x_mm + c.a;
}

// Extrapolation is an error, never a clamp.
inline double evaluate(const CalibrationCurve& c, double x_mm) {
  const double slack = 1e-12 * std::max(1.0, std::abs(c.x_hi - c.x_lo));
  if (x_mm < c.x_lo - slack)
    throw Error(ErrorKind::out_of_range, "displacement below the calibrated range").with_hint(c.x_lo);
  if (x_mm > c.x_hi + slack)
    throw Error(ErrorKind::out_of_range, "displacement above the calibrated range").with_hint(c.x_hi);
  return evaluate_unchecked(c, x_mm);
}

// Sign of dy/dx over the valid range, decided from the derivative's real roots
// and its values at the endpoints and vertex.
inline MonotonicityCertificate certify_monotone(const CalibrationCurve& c) {
  MonotonicityCertificate cert;
  const double qa = 3.0 * c.c3;
  const double qb = 2.0 * c.b;
  const double qc = c.a;
  if (qa != 0.0) {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
      if (q != 0.0) {
        cert.derivative_roots_mm.push_back(q / qa);
        cert.derivative_roots_mm.push_back(qc / q);
      } else {
        cert.derivative_roots_mm.push_back(0.0);
      }
      std::sort(cert.derivative_roots_mm.begin(), cert.derivative_roots_mm.end());
    }
  } else if (qb != 0.0) {
    cert.derivative_roots_mm.push_back(-qc / qb);
  }

  std::vector<double> probes = {c.x_lo, c.x_hi};
  if (qa != 0.0) {
    const double vertex = -qb / (2.0 * qa);
    if (vertex > c.x_lo && vertex < c.x_hi) probes.push_back(vertex);
  }
  for (double r : cert.derivative_roots_mm)
    if (r > c.x_lo && r < c.x_hi) probes.push_back(r);

  double lo = slope(c, probes.front());
  double hi = lo;
  double at_lo = probes.front();
  double at_hi = probes.front();
  for (double x : probes) {
    const double s = slope(c, x);
    if (s < lo) { lo = s; at_lo = x; }
    if (s > hi) { hi = s; at_hi = x; }
  }
  if (lo > 0.0) {
    cert.direction = Monotonicity::increasing;
    cert.margin = lo;
    cert.margin_at_mm = at_lo;
  } else if (hi < 0.0) {
    cert.direction = Monotonicity::decreasing;
    cert.margin = -hi;
    cert.margin_at_mm = at_hi;
  } else {
    cert.direction = Monotonicity::none;
    cert.margin = 0.0;
  }
  return cert;
}

inline CalibrationCurve make_curve(double a, double b, double c3, double d, double x_lo_mm,
                                   double x_hi_mm) {
  require(x_lo_mm < x_hi_mm, ErrorKind::invalid_parameter, "valid range must be non-empty");
  CalibrationCurve curve{a, b, c3, d, x_lo_mm, x_hi_mm, {}, 0.0, 0.0, 0};
  curve.certificate = certify_monotone(curve);
  return curve;
}

// Coefficients reported for the 15 mm and 45 mm discriminator filters.
inline CalibrationCurve reference_curve_15mm() {
  return make_curve(0.05291, 0.00690, -2.3166e-4, 0.70997, 0.0, 15.0);
}
inline CalibrationCurve reference_curve_45mm() {
  return make_curve(0.01594, 0.00211, -2.6388e-5, 0.30690, 0.0, 45.0);
}

// Weighted least squares by Householder QR on the column-scaled Vandermonde
// system; the normal equations are never formed.
inline CalibrationCurve fit_cubic(std::span<const CalibrationPoint> points) {
  std::vector<double> xs;
  for (const auto& p : points) {
    require(std::isfinite(p.transmission) && std::isfinite(p.displacement),
            ErrorKind::fit_failure, "calibration point is not finite");
    require(p.weight >= 0.0, ErrorKind::fit_failure, "calibration weight must be non-negative");
    if (p.weight > 0.0) xs.push_back(units::to_mm(p.displacement));
  }
  std::sort(xs.begin(), xs.end());
  const auto distinct = static_cast<std::size_t>(std::unique(xs.begin(), xs.end()) - xs.begin());
  if (distinct < 4)
    throw Error(ErrorKind::fit_failure, "cubic fit needs at least 4 distinct displacements, got " +
                                            std::to_string(distinct));

  const double x_lo = xs.front();
  const double x_hi = xs[distinct - 1];
  const double scale = std::max(std::abs(x_lo), std::abs(x_hi));

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd design(n, 4);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    const double sw = std::sqrt(p.weight);
    const double u = units::to_mm(p.displacement) / scale;
    design(i, 0) = sw * u;
    design(i, 1) = sw * u * u;
    design(i, 2) = sw * u * u * u;
    design(i, 3) = sw;
    rhs(i) = sw * p.transmission;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 4) throw Error(ErrorKind::fit_failure, "calibration system is rank deficient");
  const Eigen::VectorXd coef = qr.solve(rhs);

  CalibrationCurve curve = make_curve(coef(0) / scale, coef(1) / (scale * scale),
                                      coef(2) / (scale * scale * scale), coef(3), x_lo, x_hi);
  double sq = 0.0;
  for (const auto& p : points) {
    const double r = evaluate_unchecked(curve, units::to_mm(p.displacement)) - p.transmission;
    sq += r * r;
    curve.max_residual = std::max(curve.max_residual, std::abs(r));
  }
  curve.n_points = points.size();
  curve.rms_residual = std::sqrt(sq / static_cast<double>(points.size()));
  return curve;
}

// Unique x in the valid range with evaluate(x) = y, by Newton steps kept
// inside a shrinking bracket (bisection when a step leaves it).
inline double invert(const CalibrationCurve& c, double y, double x_tol_mm = 1e-12) {
  if (!c.monotone())
    throw Error(ErrorKind::non_monotone, "calibration curve is not certified monotone");
  const double y_lo = evaluate_unchecked(c, c.x_lo);
  const double y_hi = evaluate_unchecked(c, c.x_hi);
  const double y_min = std::min(y_lo, y_hi);
  const double y_max = std::max(y_lo, y_hi);
  const double slack = 1e-12 * std::max(1.0, std::abs(y));
  if (y < y_min - slack)
    throw Error(ErrorKind::out_of_range, "transmission below the calibrated range")
        .with_hint(y_lo < y_hi ? c.x_lo : c.x_hi);
  if (y > y_max + slack)
    throw Error(ErrorKind::out_of_range, "transmission above the calibrated range")
        .with_hint(y_lo < y_hi ? c.x_hi : c.x_lo);
  if (y <= y_min) return y_lo < y_hi ? c.x_lo : c.x_hi;
  if (y >= y_max) return y_lo < y_hi ? c.x_hi : c.x_lo;

  const double sign = c.certificate.direction == Monotonicity::increasing ? 1.0 : -1.0;
  auto g = [&](double x) { return sign * (evaluate_unchecked(c, x) - y); };
  double lo = c.x_lo;  // g(lo) <= 0
  double hi = c.x_hi;  // g(hi) >= 0
  double x = lo + (hi - lo) * (y - y_lo) / (y_hi - y_lo);
  for (int iter = 0; iter < 200; ++iter) {
    const double gx = g(x);
    if (gx == 0.0) return x;
    if (gx < 0.0) lo = x; else hi = x;
    double next = x - gx / (sign * slope(c, x));
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - x);
    x = next;
    if (step <= x_tol_mm || hi - lo <= x_tol_mm) break;
  }
  return x;
}

}  // namespace calib
}  // namespace stretch_ranger
