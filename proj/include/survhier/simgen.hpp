#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "survhier/data.hpp"
#include "survhier/layout.hpp"
#include "survhier/rng.hpp"

namespace survhier {

enum class Correlation { ar, cr1, cr2 };
enum class EffectPattern { s1, s2, s3 };

// One simulation scenario. Defaults: n=400, K=100 pathways sized 10-13 over
// 1000 distinct genes with 22 genes appearing in 2-6 pathways, AR(0.6)
// covariates, all-positive effects, 20% censoring.
struct ScenarioSpec {
    int n = 400;
    int n_test = 100;
    int K = 100;
    int size_lo = 10;
    int size_hi = 13;
    int n_distinct = 1000;
    int n_overlap = 22;
    int mult_lo = 2;
    int mult_hi = 6;
    Correlation correlation = Correlation::ar;
    double rho = 0.6;          // within-pathway AR parameter (ar / cr2)
    EffectPattern pattern = EffectPattern::s1;
    double censor_rate = 0.20; // 0 disables censoring
    std::uint64_t seed = 1;

    void validate() const;
};

// True effects: 4 active pathways, 2 active pathway pairs, 5 main effects per
// active pathway and 12 interactions per active pair, both hierarchies exact.
struct GroundTruth {
    Eigen::VectorXd w0;
    std::vector<long> active_lower_main;   // 20 flat indices, ascending
    std::vector<long> active_lower_inter;  // 24 flat indices, ascending
    std::vector<int> active_higher_main;   // 4 pathway ids
    std::vector<std::pair<int, int>> active_higher_inter; // 2 (k, k') pairs
};

// Cholesky factor of the distinct-gene correlation matrix.
struct CovarianceModel {
    Eigen::MatrixXd chol; // lower triangular, n_distinct x n_distinct
};

struct ResponseDraw {
    Eigen::VectorXd y; // latent (uncensored) log times
    Eigen::VectorXd y_star;
    Eigen::VectorXd c;
    std::vector<std::uint8_t> delta;
    double realized_censoring = 0.0;
};

struct SimulatedData {
    PathwayLayout layout;
    GroundTruth truth;
    SurvivalDataset train;
    SurvivalDataset test; // empty when n_test == 0
    Eigen::VectorXd y_uncensored_train, y_uncensored_test;
    double gamma_shape = 0.0, gamma_scale = 0.0; // 0 when uncensored
    double realized_censoring_train = 0.0, realized_censoring_test = 0.0;
};

// Draws pathway sizes, assigns the overlapping genes to distinct pathways,
// fills the rest with single-membership genes, and shuffles within-pathway
// order. Deterministic given spec.seed.
PathwayLayout gen_layout(const ScenarioSpec& spec);

// Places the active pathways (the first four with enough single-membership
// genes), the two active pairs (first+second, third+fourth), the 20 mains and
// 24 interactions, and draws magnitudes from Uniform(0.8, 1.2). Sign pattern:
// s1 all positive; s2 flips the first active pathway's mains and the first
// active pair's interactions; s3 flips a fair coin per coefficient.
GroundTruth gen_effects(const ScenarioSpec& spec, const PathwayLayout& layout,
                        const IndexMap& map);

// Distinct-gene correlation matrix per the scenario's structure: within each
// pathway rho^|lag| (ar, cr2) or constant 0.2 (cr1); for cr1/cr2 additionally
// 0.1 between genes of the active pathways and genes of the single confounding
// pathway that follows them; first pathway wins when a duplicated gene pair
// co-occurs. Throws config_error when the matrix is not positive definite.
CovarianceModel build_covariance(const ScenarioSpec& spec, const PathwayLayout& layout);

// n x p pathway-aligned covariates; duplicated genes share one draw.
Eigen::MatrixXd gen_covariates(const ScenarioSpec& spec, const PathwayLayout& layout,
                               const CovarianceModel& cov, int n, Rng& rng);

// Fixes the Gamma shape at 2 and bisects the scale until the Monte-Carlo
// censoring probability (1e4 fresh pseudo-subjects) hits the target.
std::pair<double, double> calibrate_censoring(const ScenarioSpec& spec,
                                              const PathwayLayout& layout, const IndexMap& map,
                                              const GroundTruth& truth,
                                              const CovarianceModel& cov, double target);

// Latent log-times x~ w0 + N(0,1); censoring bounds are logs of Gamma draws;
// delta_i = 1{y_i <= c_i}. gamma_scale == 0 disables censoring.
ResponseDraw gen_response(const ScenarioSpec& spec, const Eigen::MatrixXd& X,
                          const IndexMap& map, const GroundTruth& truth, double gamma_shape,
                          double gamma_scale, Rng& rng);

// Full scenario draw: layout, truth, calibrated censoring, train and test
// sets (the test set shares layout, truth, and censoring parameters).
SimulatedData simulate(const ScenarioSpec& spec);

// The 42-cell replication grid: {AR(0.6), AR(0.4), CR1, CR2} x {K=100, K=50}
// x {S1,S2,S3} x {20%, 40%}, minus the singular CR2/K=50 cells.
std::vector<ScenarioSpec> replication_scenarios(std::uint64_t base_seed);

} // namespace survhier
