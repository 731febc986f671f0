#pragma once

namespace recorrupt {

/// psi(x) for x > 0, absolute error below 1e-10.
double digamma(double x);
/// psi_1(x) for x > 0, absolute error below 1e-10.
double trigamma(double x);

double normal_cdf(double x);
double normal_quantile(double p);
/// Inverse of the regularized lower incomplete gamma function P(a, .).
double gamma_quantile(double shape, double p);
/// Inverse of the regularized upper incomplete gamma function Q(a, .).
double gamma_quantile_upper(double shape, double q);

inline constexpr double kEulerGamma = 0.57721566490153286061;

} // namespace recorrupt
