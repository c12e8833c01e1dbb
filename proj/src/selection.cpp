#include "survhier/selection.hpp"

#include <cmath>
#include <limits>

#include "survhier/errors.hpp"
#include "survhier/model.hpp"
#include "survhier/trunc_normal.hpp"

namespace survhier {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112353;
}

SelectionSets select(const FitResult& result, double threshold) {
    SelectionSets out;
    const long N = result.state.eta.size();
    out.coefficients = Eigen::VectorXd::Zero(N);
    for (long j = 0; j < N; ++j) {
        if (result.state.eta[j] > threshold) {
            out.selected_lower.push_back(j);
            out.coefficients[j] = result.state.m[j];
        }
    }
    const int B = static_cast<int>(result.state.r_hl.size());
    for (int b = 0; b < B; ++b)
        if (result.state.r_hl[b] > threshold) out.selected_higher.push_back(b);
    return out;
}

double censored_lognormal_loglik(const SurvivalDataset& data, const IndexMap& map,
                                 const Eigen::VectorXd& w, double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw domain_error("plug-in likelihood: tau must be positive");
    const Eigen::VectorXd lin = linear_predictor(data, map, w);
    const double sd = std::sqrt(1.0 / tau);
    double ll = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        if (data.delta[i]) {
            const double r = data.y_star[i] - lin[i];
            ll += 0.5 * (std::log(tau) - kLog2Pi) - 0.5 * tau * r * r;
        } else {
            ll += tn::std_normal_logsf((data.c[i] - lin[i]) / sd);
        }
    }
    return ll;
}

double bic(const FitResult& result, const SurvivalDataset& data, const IndexMap& map,
           double threshold) {
    const SelectionSets sel = select(result, threshold);
    const double ll = censored_lognormal_loglik(data, map, sel.coefficients, result.params.tau);
    const double df = static_cast<double>(sel.selected_lower.size());
    return -2.0 * ll + df * std::log(static_cast<double>(data.n()));
}

double bic_elbo(const FitResult& result, const SurvivalDataset& data, double threshold) {
    const SelectionSets sel = select(result, threshold);
    const double df = static_cast<double>(sel.selected_lower.size());
    return -2.0 * result.elbo_trace.back() + df * std::log(static_cast<double>(data.n()));
}

std::vector<std::pair<double, double>> default_tuning_grid() {
    const double values[] = {1e-4, 1e-3, 1e-2};
    std::vector<std::pair<double, double>> grid;
    for (double s2 : values)
        for (double r2 : values) grid.emplace_back(s2, r2);
    return grid;
}

TuneOutcome tune(const SurvivalDataset& data, const IndexMap& map,
                 const std::vector<std::pair<double, double>>& grid, const Hyperparams& base,
                 const FitConfig& config, const Eigen::VectorXd* gram, bool use_elbo_criterion) {
    if (grid.empty()) throw config_error("tune: the hyperparameter grid is empty");
    config.validate();

    Eigen::VectorXd gram_local;
    if (gram == nullptr) {
        gram_local = gram_diagonal(data.X, map);
        gram = &gram_local;
    }

    TuneOutcome out;
    bool have_best = false;
    double best_criterion = std::numeric_limits<double>::infinity();
    std::pair<double, double> best_pair{0.0, 0.0};

    for (const auto& [s2, r2] : grid) {
        TuneRow row;
        row.s2 = s2;
        row.r2 = r2;
        row.criterion = std::numeric_limits<double>::quiet_NaN();
        Hyperparams hyper = base;
        hyper.s2 = s2;
        hyper.r2 = r2;
        try {
            VbemEngine engine(data, map, hyper, gram);
            FitResult fit = engine.fit(config);
            const double crit = use_elbo_criterion ? bic_elbo(fit, data) : bic(fit, data, map);
            row.criterion = crit;
            row.iterations = fit.iterations;
            row.converged = fit.converged;
            const std::pair<double, double> here{s2, r2};
            const bool better =
                !have_best || crit < best_criterion ||
                (crit == best_criterion && here > best_pair);
            if (better) {
                have_best = true;
                best_criterion = crit;
                best_pair = here;
                out.best_hyper = hyper;
                out.best = std::move(fit);
            }
        } catch (const numerical_error& e) {
            row.failed = true;
            row.message = e.what();
        }
        out.table.push_back(std::move(row));
    }

    if (!have_best) throw numerical_error("tune: every grid point failed numerically");
    return out;
}

} // namespace survhier
