#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "survhier/data.hpp"
#include "survhier/layout.hpp"

namespace survhier {

// Spike/slab scale hyperparameters. r1/s1 are the slab variances (fixed at 1
// by convention), r2/s2 the spike variances; the lower level (r) acts per
// coefficient, the higher level (s) per pathway/pathway-pair block, and the
// main-interaction coupling reuses (r1, r2).
struct Hyperparams {
    double r1 = 1.0;
    double r2 = 1e-3;
    double s1 = 1.0;
    double s2 = 1e-3;
    void validate() const;
};

// Parameters estimated by EM: noise precision and the two inclusion rates.
struct ModelParams {
    double tau = 1.0;
    double zeta1 = 0.5;
    double zeta2 = 0.5;
    void validate() const;
};

// A full point configuration of the latent variables: coefficients, both
// indicator layers, and censored latents (aligned with censored_subjects()).
struct LatentConfig {
    Eigen::VectorXd w;                // length p(p+1)/2
    std::vector<std::uint8_t> beta;   // per coefficient
    std::vector<std::uint8_t> alpha;  // per block
    Eigen::VectorXd z;                // per censored subject
};

// Linear predictor x~_i w for every subject, skipping zero coefficients.
Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& X, const IndexMap& map,
                                 const Eigen::VectorXd& w);
Eigen::VectorXd linear_predictor(const SurvivalDataset& data, const IndexMap& map,
                                 const Eigen::VectorXd& w);

// Complete-data log-likelihood. The censoring-probability factors of the
// generative story cancel against the truncation normalizers, so this reduces
// to a sum of Gaussian log-densities at y* (events) and z (censored latents);
// z_i > c_i is required. log_likelihood_threeterm keeps the three factors
// explicit (truncated outcome densities plus the censoring-indicator
// probability) so tests can assert the cancellation numerically; it needs a
// censoring bound for every subject.
double log_likelihood(const SurvivalDataset& data, const IndexMap& map, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& z, const ModelParams& params);
double log_likelihood_threeterm(const SurvivalDataset& data, const IndexMap& map,
                                const Eigen::VectorXd& w, const Eigen::VectorXd& z,
                                const Eigen::VectorXd& censor_bounds, const ModelParams& params);

// Joint log-density of (w, beta, alpha) under the three prior layers:
// per-coefficient spike/slab selected by beta, per-block spike/slab selected
// by alpha, and the main-interaction coupling selected by the product of the
// parent-main indicators.
double log_prior(const LatentConfig& config, const IndexMap& map, const Hyperparams& hyper,
                 const ModelParams& params);

struct ExactPosterior {
    Eigen::VectorXd beta_prob;  // exact marginal inclusion per coefficient
    Eigen::VectorXd alpha_prob; // exact marginal inclusion per block
    Eigen::VectorXd w_mean;     // exact posterior mean of the coefficients
    double log_evidence = 0.0;
};

// Exact posterior by enumerating all indicator configurations (uncensored
// data only; capacity limits p(p+1)/2 <= 12 and K(K+1)/2 <= 4). Serves as the
// ground-truth oracle for the variational approximation.
ExactPosterior exact_posterior_small(const SurvivalDataset& data, const IndexMap& map,
                                     const Hyperparams& hyper, const ModelParams& params);

} // namespace survhier
