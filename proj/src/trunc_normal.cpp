#include "survhier/trunc_normal.hpp"

#include <cmath>
#include <limits>

#include "survhier/errors.hpp"

namespace survhier::tn {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kSqrt2OverPi = 0.7978845608028653559; // sqrt(2/pi)
constexpr double kLogSqrt2Pi = 0.9189385332046727418;  // log(sqrt(2*pi))

// erfcx on [25, inf) via the asymptotic series
//   erfcx(x) ~ (1/(x sqrt(pi))) * sum_n (-1)^n (2n-1)!! / (2x^2)^n,
// which at x >= 25 converges below double precision within ten terms.
double erfcx_asymptotic(double x) {
    const double ix2 = 1.0 / (2.0 * x * x);
    double term = 1.0;
    double sum = 1.0;
    for (int n = 1; n <= 10; ++n) {
        term *= -(2.0 * n - 1.0) * ix2;
        sum += term;
    }
    return sum / (x * 1.7724538509055160273); // sqrt(pi)
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw domain_error(std::string("non-finite input: ") + what);
}

// Standardized upper-tail quantities at truncation point xi:
// lambda = hazard(xi) and ratio = var/parent-var = 1 + xi*lambda - lambda^2.
void std_upper_tail(double xi, double& lambda, double& var_ratio) {
    if (xi > 38.0) {
        // Asymptotic clamp: lambda = xi + 1/xi - 2/xi^3 + 10/xi^5 and
        // var_ratio = 1/xi^2 - 6/xi^4 + 50/xi^6 (next term O(xi^-8)).
        const double ix = 1.0 / xi;
        const double ix2 = ix * ix;
        lambda = xi + ix * (1.0 + ix2 * (-2.0 + 10.0 * ix2));
        var_ratio = ix2 * (1.0 + ix2 * (-6.0 + 50.0 * ix2));
        return;
    }
    lambda = hazard(xi);
    // 1 + xi*lambda - lambda^2 written to limit cancellation.
    var_ratio = 1.0 - lambda * (lambda - xi);
    if (var_ratio <= 0.0) var_ratio = std::numeric_limits<double>::min();
}

} // namespace

double erfcx(double x) {
    if (std::isnan(x)) return x;
    if (x >= 25.0) return erfcx_asymptotic(x);
    if (x >= 0.0) return std::exp(x * x) * std::erfc(x);
    // erfcx(-x) = 2 exp(x^2) - erfcx(x); overflows naturally for x < -26.6.
    const double e = std::exp(x * x);
    if (!std::isfinite(e)) return e;
    return 2.0 * e - erfcx(-x);
}

double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x - kLogSqrt2Pi);
}

double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

double std_normal_logcdf(double x) {
    if (std::isnan(x)) return x;
    if (x >= -1.0) {
        return std::log(0.5 * std::erfc(-x * kInvSqrt2));
    }
    // Phi(x) = 0.5 exp(-x^2/2) erfcx(-x/sqrt(2)) for x < 0.
    return -0.5 * x * x + std::log(0.5 * erfcx(-x * kInvSqrt2));
}

double std_normal_logsf(double x) { return std_normal_logcdf(-x); }

double hazard(double x) {
    if (std::isnan(x)) return x;
    if (x < -36.0) {
        // Phi(-x) differs from 1 by < 1e-280; the ratio is just the density.
        return std_normal_pdf(x);
    }
    return kSqrt2OverPi / erfcx(x * kInvSqrt2);
}

TruncMoments upper_tail_moments(double mu, double var, double lower) {
    check_finite(mu, "mu");
    check_finite(var, "var");
    check_finite(lower, "lower");
    if (var <= 0.0) throw domain_error("upper_tail_moments: var must be > 0");
    const double s = std::sqrt(var);
    const double xi = (lower - mu) / s;
    double lambda, ratio;
    std_upper_tail(xi, lambda, ratio);
    TruncMoments out;
    out.mean = mu + s * lambda;
    out.var = var * ratio;
    out.log_mass = std_normal_logsf(xi);
    return out;
}

TruncMoments lower_tail_moments(double mu, double var, double upper) {
    check_finite(mu, "mu");
    check_finite(var, "var");
    check_finite(upper, "upper");
    if (var <= 0.0) throw domain_error("lower_tail_moments: var must be > 0");
    const double s = std::sqrt(var);
    const double xi = (upper - mu) / s;
    // Reflection of the upper-tail case at -xi.
    double lambda, ratio;
    std_upper_tail(-xi, lambda, ratio);
    TruncMoments out;
    out.mean = mu - s * lambda;
    out.var = var * ratio;
    out.log_mass = std_normal_logcdf(xi);
    return out;
}

} // namespace survhier::tn
