#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "support/util.hpp"
#include "survhier/errors.hpp"
#include "survhier/selection.hpp"

using namespace survhier;
using testutil::plain_layout;
using testutil::synth_dataset;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

FitResult handmade_fit(long n_coef, int n_blocks) {
    FitResult fit;
    fit.state.m = Eigen::VectorXd::LinSpaced(n_coef, 1.0, static_cast<double>(n_coef));
    fit.state.sigma2 = Eigen::VectorXd::Constant(n_coef, 0.1);
    fit.state.eta = Eigen::VectorXd::Constant(n_coef, 0.1);
    fit.state.r_hl = Eigen::VectorXd::Constant(n_blocks, 0.1);
    fit.elbo_trace = {-10.0, -8.0};
    return fit;
}

} // namespace

TEST_CASE("selection keeps strictly-above-threshold factors and zeroes the rest") {
    FitResult fit = handmade_fit(5, 2);
    fit.state.eta << 0.9, 0.5, 0.2, 0.500000001, 0.51;
    fit.state.r_hl << 0.5, 0.7;

    const SelectionSets sel = select(fit);
    CHECK(sel.selected_lower == std::vector<long>{0, 3, 4});
    CHECK(sel.selected_higher == std::vector<int>{1});
    CHECK(sel.coefficients[0] == fit.state.m[0]);
    CHECK(sel.coefficients[1] == 0.0);
    CHECK(sel.coefficients[2] == 0.0);
    CHECK(sel.coefficients[3] == fit.state.m[3]);
    CHECK(sel.coefficients[4] == fit.state.m[4]);

    const SelectionSets strict = select(fit, 0.95);
    CHECK(strict.selected_lower.empty());
    CHECK(strict.coefficients.isZero(0.0));
}

TEST_CASE("censored log-normal likelihood matches a direct formula") {
    const PathwayLayout L = plain_layout({2, 2});
    const IndexMap map(L);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(map.n_coefficients());
    w[0] = 1.5;
    w[6] = -0.7;
    const SurvivalDataset data = synth_dataset(L, map, w, 50, 1.2, 0.6, 15);
    REQUIRE(data.n_censored() > 0);

    const double tau = 1.2;
    const Eigen::VectorXd lin = linear_predictor(data, map, w);
    const double sd = 1.0 / std::sqrt(tau);
    double ref = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        const double zi = (data.y_star[i] - lin[i]) / sd;
        if (data.delta[static_cast<size_t>(i)] == 1)
            ref += -0.5 * std::log(2.0 * M_PI) - std::log(sd) - 0.5 * zi * zi;
        else
            ref += std::log(0.5 * std::erfc(zi / std::sqrt(2.0))); // log P(Y > c)
    }
    const double got = censored_lognormal_loglik(data, map, w, tau);
    CHECK(got == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("information criteria count the selected coefficients as model size") {
    const PathwayLayout L = plain_layout({2, 2});
    const IndexMap map(L);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(map.n_coefficients());
    w[0] = 2.0;
    const SurvivalDataset data = synth_dataset(L, map, w, 60, 1.0, 0.8, 25);
    const VbemEngine engine(data, map, Hyperparams{});
    const FitResult fit = engine.fit(FitConfig{});

    const SelectionSets sel = select(fit);
    const double ll = censored_lognormal_loglik(data, map, sel.coefficients, fit.params.tau);
    const double expect =
        -2.0 * ll + static_cast<double>(sel.selected_lower.size()) * std::log(60.0);
    CHECK(bic(fit, data, map) == doctest::Approx(expect).epsilon(1e-12));

    const double expect_elbo = -2.0 * fit.elbo_trace.back() +
                               static_cast<double>(sel.selected_lower.size()) * std::log(60.0);
    CHECK(bic_elbo(fit, data) == doctest::Approx(expect_elbo).epsilon(1e-12));
}

TEST_CASE("the default tuning grid is the 3x3 spike product, major axis first") {
    const auto grid = default_tuning_grid();
    REQUIRE(grid.size() == 9);
    const double v[3] = {1e-4, 1e-3, 1e-2};
    size_t at = 0;
    for (double s2 : v)
        for (double r2 : v) {
            CHECK(grid[at].first == s2);
            CHECK(grid[at].second == r2);
            ++at;
        }
}

TEST_CASE("tuning scans the grid in order and keeps the criterion minimizer") {
    const PathwayLayout L = plain_layout({2, 2});
    const IndexMap map(L);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(map.n_coefficients());
    w[0] = 2.0;
    w[4] = 1.2; // first interaction (parents 0 and 1)
    const SurvivalDataset data = synth_dataset(L, map, w, 80, 1.0, 0.8, 33);

    const auto grid = default_tuning_grid();
    const TuneOutcome out = tune(data, map, grid, Hyperparams{}, FitConfig{});

    REQUIRE(out.table.size() == grid.size());
    for (size_t i = 0; i < grid.size(); ++i) {
        CHECK(out.table[i].s2 == grid[i].first);
        CHECK(out.table[i].r2 == grid[i].second);
        CHECK_FALSE(out.table[i].failed);
        CHECK(std::isfinite(out.table[i].criterion));
    }

    // Recompute the winner with the documented tie rule: smallest criterion,
    // exact ties to the lexicographically larger (s2, r2).
    size_t best = 0;
    for (size_t i = 1; i < out.table.size(); ++i) {
        const auto& row = out.table[i];
        const auto& cur = out.table[best];
        if (row.criterion < cur.criterion ||
            (row.criterion == cur.criterion &&
             std::make_pair(row.s2, row.r2) > std::make_pair(cur.s2, cur.r2)))
            best = i;
    }
    CHECK(out.best_hyper.s2 == out.table[best].s2);
    CHECK(out.best_hyper.r2 == out.table[best].r2);
    CHECK(out.best_hyper.r1 == 1.0);
    CHECK(out.best_hyper.s1 == 1.0);

    // The stored best fit is the refit at the winning point.
    const VbemEngine engine(data, map, out.best_hyper);
    const FitResult refit = engine.fit(FitConfig{});
    REQUIRE(refit.elbo_trace.size() == out.best.elbo_trace.size());
    CHECK(refit.elbo_trace.back() == out.best.elbo_trace.back());
    CHECK((refit.state.m.array() == out.best.state.m.array()).all());

    // The planted structure survives tuning.
    const SelectionSets sel = select(out.best);
    CHECK(std::find(sel.selected_lower.begin(), sel.selected_lower.end(), 0) !=
          sel.selected_lower.end());
    CHECK(std::find(sel.selected_lower.begin(), sel.selected_lower.end(), 4) !=
          sel.selected_lower.end());
}

TEST_CASE("the alternative criterion is wired through") {
    const PathwayLayout L = plain_layout({2});
    const IndexMap map(L);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(map.n_coefficients());
    w[0] = 1.8;
    const SurvivalDataset data = synth_dataset(L, map, w, 60, 1.0, kInf, 41);

    const auto grid = default_tuning_grid();
    const TuneOutcome out = tune(data, map, grid, Hyperparams{}, FitConfig{}, nullptr, true);
    CHECK(out.table.size() == 9);
    const double recomputed = bic_elbo(out.best, data);
    bool found = false;
    for (const auto& row : out.table)
        if (row.s2 == out.best_hyper.s2 && row.r2 == out.best_hyper.r2) {
            CHECK(row.criterion == doctest::Approx(recomputed).epsilon(1e-12));
            found = true;
        }
    CHECK(found);
}

TEST_CASE("a grid where every point fails raises a numerical error") {
    const PathwayLayout L = plain_layout({2});
    const IndexMap map(L);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(map.n_coefficients());
    SurvivalDataset data = synth_dataset(L, map, w, 30, 1.0, kInf, 2);
    data.X(0, 0) = std::numeric_limits<double>::infinity(); // poison the design

    CHECK_THROWS_AS(tune(data, map, default_tuning_grid(), Hyperparams{}, FitConfig{}),
                    numerical_error);
}

TEST_CASE("a shared gram diagonal gives identical tuning results") {
    const PathwayLayout L = plain_layout({2, 2});
    const IndexMap map(L);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(map.n_coefficients());
    w[0] = 1.5;
    const SurvivalDataset data = synth_dataset(L, map, w, 50, 1.0, 0.8, 71);

    const Eigen::VectorXd gram = gram_diagonal(data.X, map);
    const auto grid = default_tuning_grid();
    const TuneOutcome a = tune(data, map, grid, Hyperparams{}, FitConfig{});
    const TuneOutcome b = tune(data, map, grid, Hyperparams{}, FitConfig{}, &gram);
    CHECK(a.best_hyper.s2 == b.best_hyper.s2);
    CHECK(a.best_hyper.r2 == b.best_hyper.r2);
    CHECK(a.best.elbo_trace.back() == b.best.elbo_trace.back());
    for (size_t i = 0; i < a.table.size(); ++i)
        CHECK(a.table[i].criterion == b.table[i].criterion);
}
