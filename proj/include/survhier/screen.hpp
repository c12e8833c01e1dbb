#pragma once

#include <vector>

#include <Eigen/Dense>

#include "survhier/io.hpp"

namespace survhier {

// Marginal gene screening for large inputs: each gene is scored with a
// univariate censored log-normal regression score test against the
// intercept-only null (fitted once by EM), using a robust (empirical)
// variance. Genes are ranked by the resulting chi-square-like statistic.
struct ScreenResult {
    Eigen::VectorXd statistic;      // aligned with the input gene columns
    std::vector<int> kept_gene_ids; // top-q gene ids, ascending
    double null_mu = 0.0;
    double null_sigma2 = 0.0;
};

ScreenResult screen_genes(const RawCovariates& cov, const RawOutcomes& outcomes, int top_q);

} // namespace survhier
