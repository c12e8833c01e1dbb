#include "survhier/screen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "survhier/errors.hpp"
#include "survhier/trunc_normal.hpp"

namespace survhier {

namespace {

struct NullFit {
    double mu = 0.0;
    double sigma2 = 1.0;
};

// Intercept-only censored normal MLE by EM: censored subjects are imputed
// with their upper-truncated conditional moments, then (mu, sigma2) are the
// complete-data estimates. Each sweep increases the censored likelihood.
NullFit fit_null(const Eigen::VectorXd& y, const std::vector<std::uint8_t>& status) {
    const long n = y.size();
    long events = 0;
    for (auto s : status) events += (s == 1);
    if (events == 0)
        throw unsupported_error("screen: every subject is censored; the null model is unbounded");

    NullFit fit;
    fit.mu = y.mean();
    fit.sigma2 = (y.array() - fit.mu).square().sum() / static_cast<double>(n);
    if (!(fit.sigma2 > 0.0)) fit.sigma2 = 1.0;

    for (int sweep = 0; sweep < 500; ++sweep) {
        double sum = 0.0, sumsq = 0.0;
        for (long i = 0; i < n; ++i) {
            if (status[static_cast<size_t>(i)] == 1) {
                sum += y[i];
                sumsq += y[i] * y[i];
            } else {
                const auto mom = tn::upper_tail_moments(fit.mu, fit.sigma2, y[i]);
                sum += mom.mean;
                sumsq += mom.var + mom.mean * mom.mean;
            }
        }
        const double mu = sum / static_cast<double>(n);
        double sigma2 = sumsq / static_cast<double>(n) - mu * mu;
        if (!(sigma2 > 0.0)) sigma2 = 1e-12;
        const double step = std::abs(mu - fit.mu) + std::abs(sigma2 - fit.sigma2);
        fit.mu = mu;
        fit.sigma2 = sigma2;
        if (step <= 1e-12 * (1.0 + std::abs(mu) + sigma2)) break;
    }
    return fit;
}

} // namespace

ScreenResult screen_genes(const RawCovariates& cov, const RawOutcomes& outcomes, int top_q) {
    if (top_q < 1) throw config_error("screen: top_q must be at least 1");
    const long n = cov.values.rows();
    if (outcomes.time.size() != n)
        throw data_error("screen: covariates and outcomes disagree on the number of subjects");

    Eigen::VectorXd y(n);
    for (long i = 0; i < n; ++i) y[i] = std::log(outcomes.time[i]);
    const NullFit null_fit = fit_null(y, outcomes.status);

    // Per-subject score of the regression coefficient at beta = 0:
    // events contribute the scaled residual, censored subjects the scaled
    // inverse Mills ratio of the standardized bound.
    const double sd = std::sqrt(null_fit.sigma2);
    Eigen::VectorXd s(n);
    for (long i = 0; i < n; ++i) {
        if (outcomes.status[static_cast<size_t>(i)] == 1)
            s[i] = (y[i] - null_fit.mu) / null_fit.sigma2;
        else
            s[i] = tn::hazard((y[i] - null_fit.mu) / sd) / sd;
    }

    ScreenResult out;
    out.null_mu = null_fit.mu;
    out.null_sigma2 = null_fit.sigma2;
    const long g_count = cov.values.cols();
    out.statistic.resize(g_count);
    for (long g = 0; g < g_count; ++g) {
        // Centering the gene column orthogonalizes the score against the
        // intercept that the null already absorbs.
        const Eigen::ArrayXd x = cov.values.col(g).array() - cov.values.col(g).mean();
        double u = 0.0, v = 0.0;
        for (long i = 0; i < n; ++i) {
            u += x[i] * s[i];
            v += x[i] * x[i] * s[i] * s[i];
        }
        out.statistic[g] = v > 0.0 ? (u * u) / v : 0.0;
    }

    std::vector<long> order(static_cast<size_t>(g_count));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](long a, long b) {
        if (out.statistic[a] != out.statistic[b]) return out.statistic[a] > out.statistic[b];
        return cov.gene_ids[static_cast<size_t>(a)] < cov.gene_ids[static_cast<size_t>(b)];
    });
    const size_t keep = std::min<size_t>(static_cast<size_t>(top_q), order.size());
    for (size_t r = 0; r < keep; ++r)
        out.kept_gene_ids.push_back(cov.gene_ids[static_cast<size_t>(order[r])]);
    std::sort(out.kept_gene_ids.begin(), out.kept_gene_ids.end());
    return out;
}

} // namespace survhier
