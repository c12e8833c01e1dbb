#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "survhier/layout.hpp"

namespace survhier {

// Right-censored survival data on the log-time scale, with the design held as
// the n x p pathway-aligned covariate matrix (duplicated genes are repeated
// columns; interaction columns are derived on demand through IndexMap).
struct SurvivalDataset {
    PathwayLayout layout;
    Eigen::MatrixXd X; // n x p
    // Per subject: delta == 1 -> y_star is the observed log event time;
    // delta == 0 -> c is the log censoring bound (y_star mirrors c so that
    // either field is safe to read for the recorded follow-up value).
    Eigen::VectorXd y_star;
    Eigen::VectorXd c;
    std::vector<std::uint8_t> delta;

    int n() const { return static_cast<int>(X.rows()); }
    int n_events() const;
    int n_censored() const { return n() - n_events(); }
    std::vector<int> censored_subjects() const;

    void validate() const; // shape/finite/indicator checks; throws data errors
};

} // namespace survhier
