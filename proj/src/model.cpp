#include "survhier/model.hpp"

#include <cmath>
#include <string>

#include "survhier/errors.hpp"
#include "survhier/trunc_normal.hpp"

namespace survhier {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_normal_density(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double log_bernoulli(int b, double rate) {
    return b ? std::log(rate) : std::log1p(-rate);
}

} // namespace

void Hyperparams::validate() const {
    if (!(r1 > 0) || !(r2 > 0) || !(s1 > 0) || !(s2 > 0) || !std::isfinite(r1) ||
        !std::isfinite(r2) || !std::isfinite(s1) || !std::isfinite(s2))
        throw domain_error("hyperparameters must be positive and finite");
    if (!(r2 <= r1) || !(s2 <= s1))
        throw domain_error("spike variances must not exceed slab variances (r2 <= r1, s2 <= s1)");
}

void ModelParams::validate() const {
    if (!(tau > 0) || !std::isfinite(tau)) throw domain_error("tau must be positive and finite");
    if (!(zeta1 > 0) || !(zeta1 < 1) || !(zeta2 > 0) || !(zeta2 < 1))
        throw domain_error("zeta1/zeta2 must lie strictly inside (0, 1)");
}

Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& X, const IndexMap& map,
                                 const Eigen::VectorXd& w) {
    if (w.size() != map.n_coefficients())
        throw structural_error("linear_predictor: coefficient vector has wrong length");
    if (X.cols() != map.layout().p())
        throw structural_error("linear_predictor: covariate matrix has wrong width");
    Eigen::VectorXd lin = Eigen::VectorXd::Zero(X.rows());
    for (long f = 0; f < w.size(); ++f) {
        if (w[f] == 0.0) continue;
        const auto [a, b] = map.columns_of(f);
        if (b < 0)
            lin.noalias() += w[f] * X.col(a);
        else
            lin.noalias() += w[f] * X.col(a).cwiseProduct(X.col(b));
    }
    return lin;
}

Eigen::VectorXd linear_predictor(const SurvivalDataset& data, const IndexMap& map,
                                 const Eigen::VectorXd& w) {
    return linear_predictor(data.X, map, w);
}

double log_likelihood(const SurvivalDataset& data, const IndexMap& map, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& z, const ModelParams& params) {
    params.validate();
    const auto cens = data.censored_subjects();
    if (z.size() != static_cast<long>(cens.size()))
        throw structural_error("log_likelihood: z must have one entry per censored subject");
    const Eigen::VectorXd lin = linear_predictor(data, map, w);
    const double v = 1.0 / params.tau;
    double ll = 0.0;
    for (int i = 0; i < data.n(); ++i)
        if (data.delta[i] == 1) ll += log_normal_density(data.y_star[i], lin[i], v);
    for (size_t s = 0; s < cens.size(); ++s) {
        const int i = cens[s];
        if (!(z[s] > data.c[i]))
            throw domain_error("log_likelihood: censored latent " + std::to_string(s) +
                               " does not exceed its censoring bound");
        ll += log_normal_density(z[s], lin[i], v);
    }
    return ll;
}

double log_likelihood_threeterm(const SurvivalDataset& data, const IndexMap& map,
                                const Eigen::VectorXd& w, const Eigen::VectorXd& z,
                                const Eigen::VectorXd& censor_bounds, const ModelParams& params) {
    params.validate();
    if (censor_bounds.size() != data.n())
        throw structural_error("log_likelihood_threeterm: need a censoring bound per subject");
    const auto cens = data.censored_subjects();
    if (z.size() != static_cast<long>(cens.size()))
        throw structural_error("log_likelihood_threeterm: z must match the censored subjects");
    const Eigen::VectorXd lin = linear_predictor(data, map, w);
    const double v = 1.0 / params.tau;
    const double sd = std::sqrt(v);
    // The three factors of the generative story, accumulated separately:
    // truncated observed-outcome densities, truncated latent densities, and
    // the censoring-indicator probabilities.
    double obs_term = 0.0, latent_term = 0.0, indicator_term = 0.0;
    size_t s = 0;
    for (int i = 0; i < data.n(); ++i) {
        const double xi = (censor_bounds[i] - lin[i]) / sd;
        const double log_F = tn::std_normal_logcdf(xi);   // P(outcome <= bound)
        const double log_SF = tn::std_normal_logsf(xi);   // P(outcome > bound)
        if (data.delta[i] == 1) {
            obs_term += log_normal_density(data.y_star[i], lin[i], v) - log_F;
            indicator_term += log_F;
        } else {
            const double zi = z[s++];
            if (!(zi > data.c[i]))
                throw domain_error("log_likelihood_threeterm: latent below its bound");
            latent_term += log_normal_density(zi, lin[i], v) - log_SF;
            indicator_term += log_SF;
        }
    }
    return obs_term + latent_term + indicator_term;
}

double log_prior(const LatentConfig& config, const IndexMap& map, const Hyperparams& hyper,
                 const ModelParams& params) {
    hyper.validate();
    params.validate();
    const long N = map.n_coefficients();
    if (config.w.size() != N || static_cast<long>(config.beta.size()) != N ||
        static_cast<int>(config.alpha.size()) != map.n_blocks())
        throw structural_error("log_prior: configuration sizes do not match the index map");

    double lp = 0.0;
    for (long f = 0; f < N; ++f) {
        const double var = config.beta[f] ? hyper.r1 : hyper.r2;
        lp += log_normal_density(config.w[f], 0.0, var);
        lp += log_bernoulli(config.beta[f], params.zeta1);
    }
    for (int b = 0; b < map.n_blocks(); ++b) {
        const double var = config.alpha[b] ? hyper.s1 : hyper.s2;
        const auto& r = map.block_range(b);
        for (long f = r.main_begin; f < r.main_end; ++f)
            lp += log_normal_density(config.w[f], 0.0, var);
        for (long f = r.inter_begin; f < r.inter_end; ++f)
            lp += log_normal_density(config.w[f], 0.0, var);
        lp += log_bernoulli(config.alpha[b], params.zeta2);
    }
    for (long f = map.n_mains(); f < N; ++f) {
        const auto [pa, pb] = map.parents_of(f);
        const bool both = config.beta[pa] && config.beta[pb];
        lp += log_normal_density(config.w[f], 0.0, both ? hyper.r1 : hyper.r2);
    }
    return lp;
}

ExactPosterior exact_posterior_small(const SurvivalDataset& data, const IndexMap& map,
                                     const Hyperparams& hyper, const ModelParams& params) {
    hyper.validate();
    params.validate();
    const long N = map.n_coefficients();
    const int B = map.n_blocks();
    if (N > 12 || B > 4)
        throw capacity_error("exact_posterior_small: limited to 12 coefficients and 4 blocks");
    if (data.n_censored() > 0)
        throw unsupported_error("exact_posterior_small: censored subjects are not supported");
    const int n = data.n();

    // Materialize the (small) expanded design once.
    Eigen::MatrixXd Xe(n, N);
    for (long f = 0; f < N; ++f) Xe.col(f) = coefficient_column(data.X, map, f);
    const Eigen::MatrixXd XtX = Xe.transpose() * Xe;
    const Eigen::VectorXd Xty = Xe.transpose() * data.y_star;
    const double yty = data.y_star.squaredNorm();

    const long n_beta_cfg = 1L << N;
    const long n_alpha_cfg = 1L << B;
    const long n_cfg = n_beta_cfg * n_alpha_cfg;

    std::vector<double> log_post(n_cfg);
    Eigen::MatrixXd means(N, n_cfg);

    const double tau = params.tau;
    double max_lp = -std::numeric_limits<double>::infinity();
    for (long cb = 0; cb < n_beta_cfg; ++cb) {
        for (long ca = 0; ca < n_alpha_cfg; ++ca) {
            const long cfg = cb * n_alpha_cfg + ca;
            // Diagonal prior precision assembled from the active layers, and
            // the log-normalizers of each Gaussian prior factor.
            Eigen::VectorXd D(N);
            double log_const = 0.0;
            for (long f = 0; f < N; ++f) {
                const double vr = (cb >> f) & 1 ? hyper.r1 : hyper.r2;
                const double vs = (ca >> map.block_of(f)) & 1 ? hyper.s1 : hyper.s2;
                double prec = 1.0 / vr + 1.0 / vs;
                double sum_log_v = std::log(vr) + std::log(vs);
                int n_factors = 2;
                if (!map.is_main(f)) {
                    const auto [pa, pb] = map.parents_of(f);
                    const bool both = ((cb >> pa) & 1) && ((cb >> pb) & 1);
                    const double vm = both ? hyper.r1 : hyper.r2;
                    prec += 1.0 / vm;
                    sum_log_v += std::log(vm);
                    n_factors = 3;
                }
                D[f] = prec;
                log_const += -0.5 * sum_log_v - 0.5 * (n_factors - 1) * kLog2Pi;
                log_const += log_bernoulli((cb >> f) & 1, params.zeta1);
            }
            for (int b = 0; b < B; ++b) log_const += log_bernoulli((ca >> b) & 1, params.zeta2);

            Eigen::MatrixXd M = tau * XtX;
            M.diagonal() += D;
            Eigen::LLT<Eigen::MatrixXd> llt(M);
            if (llt.info() != Eigen::Success)
                throw numerical_error("exact_posterior_small: Cholesky failed");
            const Eigen::VectorXd rhs = tau * Xty;
            const Eigen::VectorXd mu = llt.solve(rhs);
            double log_det_M = 0.0;
            for (long f = 0; f < N; ++f) log_det_M += 2.0 * std::log(llt.matrixL()(f, f));

            const double quad = mu.dot(rhs); // mu' M mu
            const double lp = log_const - 0.5 * n * kLog2Pi + 0.5 * n * std::log(tau) -
                              0.5 * log_det_M - 0.5 * tau * yty + 0.5 * quad;
            log_post[cfg] = lp;
            means.col(cfg) = mu;
            max_lp = std::max(max_lp, lp);
        }
    }

    double total = 0.0;
    for (long cfg = 0; cfg < n_cfg; ++cfg) total += std::exp(log_post[cfg] - max_lp);
    const double log_evidence = max_lp + std::log(total);

    ExactPosterior out;
    out.log_evidence = log_evidence;
    out.beta_prob = Eigen::VectorXd::Zero(N);
    out.alpha_prob = Eigen::VectorXd::Zero(B);
    out.w_mean = Eigen::VectorXd::Zero(N);
    for (long cb = 0; cb < n_beta_cfg; ++cb) {
        for (long ca = 0; ca < n_alpha_cfg; ++ca) {
            const long cfg = cb * n_alpha_cfg + ca;
            const double p = std::exp(log_post[cfg] - log_evidence);
            for (long f = 0; f < N; ++f)
                if ((cb >> f) & 1) out.beta_prob[f] += p;
            for (int b = 0; b < B; ++b)
                if ((ca >> b) & 1) out.alpha_prob[b] += p;
            out.w_mean += p * means.col(cfg);
        }
    }
    return out;
}

} // namespace survhier
