#pragma once

namespace survhier::tn {

// Scaled complementary error function exp(x^2) erfc(x), accurate over the
// full double range (asymptotic series for large positive x, direct product
// otherwise). For x <= ~-26.6 the result overflows to +inf.
double erfcx(double x);

double std_normal_pdf(double x);
double std_normal_cdf(double x);

// log Phi(x), stable arbitrarily far into the lower tail (never -inf for
// finite x); evaluated through erfcx so there is no premature underflow.
double std_normal_logcdf(double x);

// log(1 - Phi(x)) = std_normal_logcdf(-x).
double std_normal_logsf(double x);

// Inverse Mills ratio phi(x) / (1 - Phi(x)). Stable for all finite x; for
// x beyond 38 the asymptotic expansion is used.
double hazard(double x);

struct TruncMoments {
    double mean = 0.0;
    double var = 0.0;
    double log_mass = 0.0; // log prior mass of the kept tail
};

// Moments of N(mu, var) truncated to (lower, +inf).
TruncMoments upper_tail_moments(double mu, double var, double lower);

// Moments of N(mu, var) truncated to (-inf, upper].
TruncMoments lower_tail_moments(double mu, double var, double upper);

} // namespace survhier::tn
