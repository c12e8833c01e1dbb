#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "survhier/data.hpp"
#include "survhier/layout.hpp"
#include "survhier/vbem.hpp"

namespace survhier {

// Two-level selection read off a fit: coefficients with eta above the
// threshold, blocks with r_hl above the threshold, and the reported
// coefficient vector (posterior means on the selected set, zero elsewhere).
struct SelectionSets {
    std::vector<long> selected_lower; // flat coefficient indices, ascending
    std::vector<int> selected_higher; // block ids, ascending
    Eigen::VectorXd coefficients;
};

// Strict inequality at the threshold.
SelectionSets select(const FitResult& result, double threshold = 0.5);

// Log-likelihood of the censored log-normal regression at a fixed coefficient
// vector and precision: Gaussian log-density of y* for events, upper-tail
// log-probability of the bound for censored subjects.
double censored_lognormal_loglik(const SurvivalDataset& data, const IndexMap& map,
                                 const Eigen::VectorXd& w, double tau);

// BIC = -2 * plug-in log-likelihood + df * log(n), with the likelihood taken
// at the thresholded coefficient vector and fitted tau, df = selected count.
double bic(const FitResult& result, const SurvivalDataset& data, const IndexMap& map,
           double threshold = 0.5);

// Alternative criterion (not the default): -2 * final ELBO + df * log(n).
double bic_elbo(const FitResult& result, const SurvivalDataset& data, double threshold = 0.5);

struct TuneRow {
    double s2 = 0.0;
    double r2 = 0.0;
    double criterion = 0.0; // BIC (or the ELBO variant); NaN when failed
    int iterations = 0;
    bool converged = false;
    bool failed = false;
    std::string message;
};

struct TuneOutcome {
    Hyperparams best_hyper;
    FitResult best;
    std::vector<TuneRow> table; // one row per grid point, grid order
};

// s2, r2 in {1e-4, 1e-3, 1e-2}^2, s2-major ascending.
std::vector<std::pair<double, double>> default_tuning_grid();

// Fits every (s2, r2) grid point and keeps the criterion minimizer; exact
// ties go to the larger (s2, r2) pair (weaker shrinkage), compared
// lexicographically. Grid points that fail numerically are recorded in the
// table and skipped; if every point fails a numerical_error is thrown.
// `gram` optionally shares a precomputed gram diagonal across the grid.
TuneOutcome tune(const SurvivalDataset& data, const IndexMap& map,
                 const std::vector<std::pair<double, double>>& grid, const Hyperparams& base,
                 const FitConfig& config, const Eigen::VectorXd* gram = nullptr,
                 bool use_elbo_criterion = false);

} // namespace survhier
