#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "support/util.hpp"
#include "survhier/errors.hpp"
#include "survhier/model.hpp"
#include "survhier/rng.hpp"

using namespace survhier;
using testutil::plain_layout;
using testutil::synth_dataset;

namespace {

double ref_log_normal(double x, double var) {
    return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * x * x / var;
}

// Independent restatement of the three-layer prior: per-coefficient
// spike/slab picked by beta, per-block spike/slab picked by alpha applied to
// every member coefficient, and a second spike/slab on each interaction
// picked by the product of its parent-main betas. Plus both Bernoulli layers.
double ref_log_prior(const LatentConfig& cfg, const IndexMap& map, const Hyperparams& h,
                     const ModelParams& params) {
    double lp = 0.0;
    for (long f = 0; f < map.n_coefficients(); ++f) {
        lp += ref_log_normal(cfg.w[f], cfg.beta[static_cast<size_t>(f)] ? h.r1 : h.r2);
        lp += cfg.beta[static_cast<size_t>(f)] ? std::log(params.zeta1)
                                               : std::log(1.0 - params.zeta1);
        const int b = map.block_of(f);
        lp += ref_log_normal(cfg.w[f], cfg.alpha[static_cast<size_t>(b)] ? h.s1 : h.s2);
        if (!map.is_main(f)) {
            const auto [pa, pb] = map.parents_of(f);
            const bool both =
                cfg.beta[static_cast<size_t>(pa)] && cfg.beta[static_cast<size_t>(pb)];
            lp += ref_log_normal(cfg.w[f], both ? h.r1 : h.r2);
        }
    }
    for (int b = 0; b < map.n_blocks(); ++b)
        lp += cfg.alpha[static_cast<size_t>(b)] ? std::log(params.zeta2)
                                                : std::log(1.0 - params.zeta2);
    return lp;
}

} // namespace

TEST_CASE("linear predictor equals the explicit interaction design") {
    const PathwayLayout L = plain_layout({2, 2});
    const IndexMap map(L);
    Rng rng(3);
    const Eigen::MatrixXd X = testutil::random_design(L, 17, rng);

    Eigen::MatrixXd full(17, map.n_coefficients());
    for (long f = 0; f < map.n_coefficients(); ++f) full.col(f) = coefficient_column(X, map, f);

    Eigen::VectorXd w(map.n_coefficients());
    for (long f = 0; f < w.size(); ++f) w[f] = rng.normal();

    const Eigen::VectorXd got = linear_predictor(X, map, w);
    const Eigen::VectorXd ref = full * w;
    CHECK((got - ref).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + ref.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("censoring factors cancel against truncation normalizers") {
    const PathwayLayout L = plain_layout({2, 2});
    const IndexMap map(L);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(map.n_coefficients());
    w[0] = 1.2;
    w[5] = -0.8;
    const SurvivalDataset data = synth_dataset(L, map, w, 40, 1.3, 0.3, 99);
    REQUIRE(data.n_censored() > 0);
    REQUIRE(data.n_events() > 0);

    Rng rng(5);
    const auto cens = data.censored_subjects();
    Eigen::VectorXd z(cens.size());
    for (size_t s = 0; s < cens.size(); ++s)
        z[s] = data.c[cens[s]] + 0.1 + std::abs(rng.normal());

    // Any bound >= the observed event time must cancel exactly.
    Eigen::VectorXd bounds = data.c;
    for (int i = 0; i < data.n(); ++i)
        if (data.delta[static_cast<size_t>(i)] == 1) bounds[i] = data.y_star[i] + rng.uniform(0.0, 2.0);

    ModelParams params;
    params.tau = 1.7;
    const double direct = log_likelihood(data, map, w, z, params);
    const double threeterm = log_likelihood_threeterm(data, map, w, z, bounds, params);
    CHECK(std::abs(direct - threeterm) <= 1e-10 * (1.0 + std::abs(direct)));
}

TEST_CASE("latents below their censoring bound are rejected") {
    const PathwayLayout L = plain_layout({2});
    const IndexMap map(L);
    const Eigen::VectorXd w = Eigen::VectorXd::Zero(map.n_coefficients());
    const SurvivalDataset data = synth_dataset(L, map, w, 30, 1.0, 0.0, 4);
    REQUIRE(data.n_censored() > 0);
    const auto cens = data.censored_subjects();
    Eigen::VectorXd z(cens.size());
    for (size_t s = 0; s < cens.size(); ++s) z[s] = data.c[cens[s]] - 0.5;
    ModelParams params;
    CHECK_THROWS_AS(log_likelihood(data, map, w, z, params), domain_error);
}

TEST_CASE("prior density matches an independent restatement") {
    const PathwayLayout L = plain_layout({2, 2});
    const IndexMap map(L);
    Rng rng(21);
    for (int t = 0; t < 50; ++t) {
        LatentConfig cfg;
        cfg.w.resize(map.n_coefficients());
        cfg.beta.resize(static_cast<size_t>(map.n_coefficients()));
        cfg.alpha.resize(static_cast<size_t>(map.n_blocks()));
        for (long f = 0; f < map.n_coefficients(); ++f) {
            cfg.w[f] = rng.normal();
            cfg.beta[static_cast<size_t>(f)] = rng.uniform() < 0.5;
        }
        for (int b = 0; b < map.n_blocks(); ++b)
            cfg.alpha[static_cast<size_t>(b)] = rng.uniform() < 0.5;

        Hyperparams h;
        h.r1 = rng.uniform(0.5, 2.0);
        h.r2 = h.r1 * rng.uniform(1e-4, 1.0);
        h.s1 = rng.uniform(0.5, 2.0);
        h.s2 = h.s1 * rng.uniform(1e-4, 1.0);
        ModelParams params;
        params.zeta1 = rng.uniform(0.05, 0.95);
        params.zeta2 = rng.uniform(0.05, 0.95);

        const double got = log_prior(cfg, map, h, params);
        const double ref = ref_log_prior(cfg, map, h, params);
        CHECK(std::abs(got - ref) <= 1e-9 * (1.0 + std::abs(ref)));
    }
}

TEST_CASE("turning off both parent mains swaps an interaction onto the spike") {
    const PathwayLayout L = plain_layout({2, 2});
    const IndexMap map(L);
    const long inter = map.n_mains(); // first interaction
    const auto [pa, pb] = map.parents_of(inter);

    LatentConfig cfg;
    cfg.w = Eigen::VectorXd::Zero(map.n_coefficients());
    cfg.w[inter] = 0.9;
    cfg.beta.assign(static_cast<size_t>(map.n_coefficients()), 0);
    cfg.alpha.assign(static_cast<size_t>(map.n_blocks()), 0);
    cfg.beta[static_cast<size_t>(pa)] = 1;
    cfg.beta[static_cast<size_t>(pb)] = 1;

    Hyperparams h;
    ModelParams params;
    const double with_parents = log_prior(cfg, map, h, params);
    cfg.beta[static_cast<size_t>(pb)] = 0;
    const double without = log_prior(cfg, map, h, params);

    // Difference = coupling-layer swap on w_inter plus one parent's own
    // Gaussian swap at w = 0 plus the parent's Bernoulli flip.
    const double expected = (ref_log_normal(0.9, h.r1) - ref_log_normal(0.9, h.r2)) +
                            (ref_log_normal(0.0, h.r1) - ref_log_normal(0.0, h.r2)) +
                            (std::log(params.zeta1) - std::log(1.0 - params.zeta1));
    CHECK(with_parents - without == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("exact enumeration honours its capacity and support contracts") {
    const PathwayLayout big = plain_layout({3, 3}); // 21 coefficients
    const IndexMap big_map(big);
    const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(big_map.n_coefficients());
    const SurvivalDataset big_data =
        synth_dataset(big, big_map, w0, 20, 1.0, std::numeric_limits<double>::infinity(), 8);
    Hyperparams h;
    ModelParams params;
    CHECK_THROWS_AS(exact_posterior_small(big_data, big_map, h, params), capacity_error);

    const PathwayLayout L = plain_layout({2, 2});
    const IndexMap map(L);
    const Eigen::VectorXd w1 = Eigen::VectorXd::Zero(map.n_coefficients());
    const SurvivalDataset censored = synth_dataset(L, map, w1, 20, 1.0, 1.0, 8);
    REQUIRE(censored.n_censored() > 0);
    CHECK_THROWS_AS(exact_posterior_small(censored, map, h, params), unsupported_error);
}

TEST_CASE("exact posterior recovers a strong planted main effect") {
    const PathwayLayout L = plain_layout({2, 2});
    const IndexMap map(L);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(map.n_coefficients());
    w[0] = 2.0;
    const SurvivalDataset data =
        synth_dataset(L, map, w, 30, 1.0, std::numeric_limits<double>::infinity(), 12);

    Hyperparams h; // slab 1, spikes 1e-3
    ModelParams params;
    params.tau = 1.0;
    params.zeta1 = 0.25;
    params.zeta2 = 0.25;
    const ExactPosterior post = exact_posterior_small(data, map, h, params);

    CHECK(post.beta_prob[0] > 0.95);
    for (long f = 1; f < map.n_coefficients(); ++f) CHECK(post.beta_prob[f] < 0.5);
    CHECK(post.alpha_prob[map.block_id(1, 1)] > 0.9);
    CHECK(std::abs(post.w_mean[0] - 2.0) < 0.5);
    for (long f = 1; f < map.n_coefficients(); ++f) CHECK(std::abs(post.w_mean[f]) < 0.2);
    CHECK(std::isfinite(post.log_evidence));
}

TEST_CASE("enumeration evidence matches the closed form for one coefficient") {
    const PathwayLayout L = plain_layout({1});
    const IndexMap map(L);
    REQUIRE(map.n_coefficients() == 1);
    REQUIRE(map.n_blocks() == 1);

    Eigen::VectorXd w(1);
    w[0] = 1.4;
    const SurvivalDataset data =
        synth_dataset(L, map, w, 25, 2.0, std::numeric_limits<double>::infinity(), 77);

    Hyperparams h;
    h.r1 = 0.8;
    h.r2 = 2e-3;
    h.s1 = 1.5;
    h.s2 = 1e-2;
    ModelParams params;
    params.tau = 2.0;
    params.zeta1 = 0.3;
    params.zeta2 = 0.6;

    // Direct Gaussian marginal per indicator pair via the determinant lemma:
    // y ~ N(0, tau^-1 I + v x x^T) with 1/v = 1/r_beta + 1/s_alpha. The joint
    // density keeps both prior layers as separate Gaussian factors, so their
    // product carries the normalization deficit sqrt(v / (2 pi r s)) relative
    // to a single normalized N(0, v) prior.
    const Eigen::VectorXd x = data.X.col(0);
    const Eigen::VectorXd y = data.y_star;
    const int n = data.n();
    const double xx = x.squaredNorm(), xy = x.dot(y), yy = y.squaredNorm();
    auto log_marginal = [&](double v) {
        const double logdet = -n * std::log(params.tau) + std::log1p(v * params.tau * xx);
        const double quad =
            params.tau * yy - params.tau * params.tau * v * xy * xy / (1.0 + v * params.tau * xx);
        return -0.5 * n * std::log(2.0 * M_PI) - 0.5 * logdet - 0.5 * quad;
    };
    double log_terms[4];
    int t = 0;
    for (int beta = 0; beta < 2; ++beta) {
        for (int alpha = 0; alpha < 2; ++alpha) {
            const double rv = beta ? h.r1 : h.r2;
            const double sv = alpha ? h.s1 : h.s2;
            const double v = 1.0 / (1.0 / rv + 1.0 / sv);
            const double pair_norm = 0.5 * std::log(v / (2.0 * M_PI * rv * sv));
            const double prior = (beta ? std::log(params.zeta1) : std::log(1.0 - params.zeta1)) +
                                 (alpha ? std::log(params.zeta2) : std::log(1.0 - params.zeta2));
            log_terms[t++] = prior + pair_norm + log_marginal(v);
        }
    }
    double mx = *std::max_element(log_terms, log_terms + 4);
    double sum = 0.0;
    for (double lt : log_terms) sum += std::exp(lt - mx);
    const double ref_evidence = mx + std::log(sum);

    const ExactPosterior post = exact_posterior_small(data, map, h, params);
    CHECK(post.log_evidence == doctest::Approx(ref_evidence).epsilon(1e-10));

    // Exact beta marginal from the same four terms.
    const double p_beta1 =
        std::exp(log_terms[2] - ref_evidence) + std::exp(log_terms[3] - ref_evidence);
    CHECK(post.beta_prob[0] == doctest::Approx(p_beta1).epsilon(1e-9));
}
