#pragma once

// Shared builders for the unit tests: simple layouts and synthetic
// log-normal survival datasets with optional censoring.

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "survhier/data.hpp"
#include "survhier/layout.hpp"
#include "survhier/model.hpp"
#include "survhier/rng.hpp"

namespace testutil {

// K pathways with the given sizes over consecutive distinct genes (no overlap).
inline survhier::PathwayLayout plain_layout(const std::vector<int>& sizes) {
    std::vector<std::pair<int, int>> rows;
    int g = 1;
    for (size_t k = 0; k < sizes.size(); ++k)
        for (int j = 0; j < sizes[k]; ++j) rows.emplace_back(static_cast<int>(k) + 1, g++);
    return survhier::PathwayLayout::from_membership(rows);
}

// iid N(0,1) per distinct gene; duplicated genes share one draw per subject.
inline Eigen::MatrixXd random_design(const survhier::PathwayLayout& layout, int n,
                                     survhier::Rng& rng) {
    Eigen::MatrixXd genes(n, layout.n_distinct);
    for (long i = 0; i < genes.rows(); ++i)
        for (long g = 0; g < genes.cols(); ++g) genes(i, g) = rng.normal();
    Eigen::MatrixXd X(n, layout.p());
    for (int c = 0; c < layout.p(); ++c) X.col(c) = genes.col(layout.col_gene[c] - 1);
    return X;
}

// Log-normal responses at the given flat coefficient vector and noise
// precision. A finite censor_shift draws per-subject bounds c_i ~ N(lp_i +
// censor_shift, 1); +inf disables censoring. Events store y in both outcome
// fields, censored subjects store the bound in both.
inline survhier::SurvivalDataset synth_dataset(const survhier::PathwayLayout& layout,
                                               const survhier::IndexMap& map,
                                               const Eigen::VectorXd& w_flat, int n, double tau,
                                               double censor_shift, std::uint64_t seed) {
    survhier::Rng rng(seed);
    survhier::SurvivalDataset d;
    d.layout = layout;
    d.X = random_design(layout, n, rng);
    const Eigen::VectorXd lin = survhier::linear_predictor(d.X, map, w_flat);
    const double sd = 1.0 / std::sqrt(tau);
    d.y_star.resize(n);
    d.c.resize(n);
    d.delta.assign(static_cast<size_t>(n), 1);
    for (int i = 0; i < n; ++i) {
        const double y = lin[i] + sd * rng.normal();
        double bound = std::numeric_limits<double>::infinity();
        if (std::isfinite(censor_shift)) bound = lin[i] + censor_shift + rng.normal();
        if (y <= bound) {
            d.delta[static_cast<size_t>(i)] = 1;
            d.y_star[i] = y;
            d.c[i] = y;
        } else {
            d.delta[static_cast<size_t>(i)] = 0;
            d.y_star[i] = bound;
            d.c[i] = bound;
        }
    }
    d.validate();
    return d;
}

} // namespace testutil
