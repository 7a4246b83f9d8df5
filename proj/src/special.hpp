#pragma once

namespace grassmix::special {

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a), a > 0, x >= 0.
double gammainc_lower_reg(double a, double x);

/// CDF of Gamma(shape, rate) at x.
double gamma_cdf(double x, double shape, double rate);

/// Standard normal CDF.
double normal_cdf(double z);

} // namespace grassmix::special
