#include "survhier/data.hpp"

#include <cmath>
#include <string>

#include "survhier/errors.hpp"

namespace survhier {

int SurvivalDataset::n_events() const {
    int k = 0;
    for (auto d : delta) k += (d == 1);
    return k;
}

std::vector<int> SurvivalDataset::censored_subjects() const {
    std::vector<int> out;
    for (int i = 0; i < n(); ++i)
        if (delta[i] == 0) out.push_back(i);
    return out;
}

void SurvivalDataset::validate() const {
    const int rows = n();
    if (X.cols() != layout.p())
        throw structural_error("dataset: X has " + std::to_string(X.cols()) +
                               " columns but the layout expects " + std::to_string(layout.p()));
    if (y_star.size() != rows || c.size() != rows || static_cast<int>(delta.size()) != rows)
        throw structural_error("dataset: outcome vectors do not match the number of subjects");
    if (rows == 0) throw data_error("dataset: no subjects");
    for (int i = 0; i < rows; ++i) {
        if (delta[i] != 0 && delta[i] != 1)
            throw data_error("dataset: status of subject " + std::to_string(i) + " is not 0/1");
        const double v = delta[i] == 1 ? y_star[i] : c[i];
        if (!std::isfinite(v))
            throw data_error("dataset: non-finite outcome for subject " + std::to_string(i));
    }
    if (!X.allFinite()) throw data_error("dataset: covariates contain non-finite values");
}

} // namespace survhier
