#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "survhier/data.hpp"
#include "survhier/layout.hpp"
#include "survhier/selection.hpp"
#include "survhier/simgen.hpp"

namespace survhier {

// Selection accuracy and prediction metrics for one fitted model.
struct EvalReport {
    // Lower-level (coefficient) and higher-level (pathway block) confusion
    // counts, split into main-effect and interaction strata.
    int lm_tp = 0, lm_fp = 0, li_tp = 0, li_fp = 0;
    int hm_tp = 0, hm_fp = 0, hi_tp = 0, hi_fp = 0;
    // Root sum of squared coefficient errors over all mains / interactions.
    double m_rsse = 0.0, i_rsse = 0.0;
    // IPCW concordance on the test set.
    double c_statistic = 0.0;
};

// Confusion counts at the four strata (lower main, lower interaction,
// higher main = diagonal blocks, higher interaction = off-diagonal blocks).
EvalReport tp_fp(const IndexMap& map, const SelectionSets& selected, const GroundTruth& truth);

// (main RSSE, interaction RSSE) of an estimated coefficient vector.
std::pair<double, double> rsse(const IndexMap& map, const Eigen::VectorXd& estimated,
                               const Eigen::VectorXd& w0);

// Right-continuous step function with value 1 before the first drop.
struct KmCurve {
    std::vector<double> times; // ascending drop locations
    std::vector<double> value; // curve value at and after times[i]
    double operator()(double t) const;
};

// Kaplan-Meier estimate of the censoring survival function G(t) = P(C > t):
// the "events" are the censored subjects (delta == 0). At tied times the
// observed events leave the risk set before the censorings are processed.
KmCurve km_censoring_survival(const Eigen::VectorXd& times,
                              const std::vector<std::uint8_t>& delta);

// IPCW concordance: sum over ordered test pairs (i, j) with delta_i = 1,
// t_i <= horizon and t_i < t_j of G(t_i)^-2 * [1{risk_i > risk_j} + 1/2 1{tie}],
// normalized by the same sum without the concordance factor. G comes from the
// training set. Pairs whose weight would divide by G = 0 are dropped. A NaN
// horizon means "largest recorded test time" (which imposes no truncation).
// Throws undefined_metric_error when no comparable pairs exist.
double uno_c(const Eigen::VectorXd& train_times, const std::vector<std::uint8_t>& train_delta,
             const Eigen::VectorXd& test_times, const std::vector<std::uint8_t>& test_delta,
             const Eigen::VectorXd& risk,
             double horizon = std::numeric_limits<double>::quiet_NaN());

// Full report for one fit: confusion counts, RSSE of the thresholded
// coefficients, and the test-set concordance of risk = -(x~ . coefficients).
EvalReport evaluate(const IndexMap& map, const SelectionSets& selected, const GroundTruth& truth,
                    const SurvivalDataset& train, const SurvivalDataset& test);

// Selection stability under resampling.
struct OoiReport {
    Eigen::VectorXd frequency; // per-coefficient selection frequency
    int n_success = 0;
    int n_failed = 0;
    // Mean, over successful runs with a nonempty selection, of the average
    // frequency across that run's selected coefficients; NaN if no such run.
    double mean_selected_ooi = std::numeric_limits<double>::quiet_NaN();
};

using FitRunner = std::function<SelectionSets(const SurvivalDataset&)>;

// Repeatedly fits on random subsets of `split * n` subjects and tallies how
// often each coefficient is selected. Fits that end in a numerical error are
// counted in n_failed and excluded from the frequency denominator.
OoiReport ooi(const SurvivalDataset& data, long n_coefficients, const FitRunner& fit,
              int n_resamples, double split = 0.75, std::uint64_t seed = 0);

} // namespace survhier
