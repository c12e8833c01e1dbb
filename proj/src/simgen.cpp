#include "survhier/simgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "survhier/errors.hpp"
#include "survhier/model.hpp"

namespace survhier {
namespace {

// Sub-stream tags: each generation stage draws from its own reproducible
// stream, so regenerating one artifact never perturbs the others.
enum SeedRole : std::uint64_t {
    role_layout = 1,
    role_effects = 2,
    role_covariates = 3,
    role_response = 4,
    role_calibration = 5,
    role_test_covariates = 6,
    role_test_response = 7,
};

constexpr int kActivePathways = 4;
constexpr int kMainsPerActive = 5;
constexpr int kIntersPerPair = 12;
constexpr double kMagnitudeLo = 0.8;
constexpr double kMagnitudeHi = 1.2;
constexpr double kCrossCorrelation = 0.1;
constexpr double kCr1Within = 0.2;
constexpr int kCalibrationDraws = 10000;
constexpr int kBisectionIterations = 80;
constexpr double kGammaScaleLo = 1e-9;
constexpr double kGammaScaleHi = 1e9;

void fisher_yates(std::vector<int>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<long>(i) - 1));
        std::swap(v[i - 1], v[j]);
    }
}

// Moves a uniform without-replacement sample of `count` entries to the front.
void partial_shuffle(std::vector<int>& v, int count, Rng& rng) {
    for (int t = 0; t < count; ++t) {
        const long j = rng.uniform_int(t, static_cast<long>(v.size()) - 1);
        std::swap(v[static_cast<size_t>(t)], v[static_cast<size_t>(j)]);
    }
}

// Within-pathway positions (1-based) whose gene belongs to no other pathway.
std::vector<int> single_positions(const PathwayLayout& layout, const std::vector<int>& mult,
                                  int k) {
    std::vector<int> pos;
    for (int c = layout.offsets[static_cast<size_t>(k) - 1];
         c < layout.offsets[static_cast<size_t>(k)]; ++c)
        if (mult[static_cast<size_t>(layout.col_gene[static_cast<size_t>(c)])] == 1)
            pos.push_back(layout.col_pos[static_cast<size_t>(c)]);
    return pos; // ascending: col_pos runs 1..p_k in column order
}

struct ActivePick {
    std::array<int, kActivePathways> pathways{}; // 1-based, ascending
    int confounder = 0; // pathway right after the last active one; may be K+1
};

// The active pathways are the first four (in index order) able to host five
// main effects on single-membership genes. Everything past the last active
// pathway is inactive, so the confounder slot right after it is always free.
ActivePick pick_active_pathways(const PathwayLayout& layout) {
    const std::vector<int> mult = layout.gene_multiplicity();
    ActivePick out;
    int found = 0;
    for (int k = 1; k <= layout.K && found < kActivePathways; ++k) {
        if (static_cast<int>(single_positions(layout, mult, k).size()) >= kMainsPerActive)
            out.pathways[static_cast<size_t>(found++)] = k;
    }
    if (found < kActivePathways)
        throw config_error(
            "effects: fewer than four pathways contain five single-membership genes");
    out.confounder = out.pathways[kActivePathways - 1] + 1;
    return out;
}

} // namespace

void ScenarioSpec::validate() const {
    if (n < 1) throw config_error("scenario: n must be positive");
    if (n_test < 0) throw config_error("scenario: n_test must be nonnegative");
    if (K < 1) throw config_error("scenario: K must be positive");
    if (size_lo < 1 || size_hi < size_lo)
        throw config_error("scenario: pathway size range is invalid");
    if (n_distinct < 1) throw config_error("scenario: n_distinct must be positive");
    if (n_overlap < 0 || n_overlap > n_distinct)
        throw config_error("scenario: overlapping gene count out of range");
    if (n_overlap > 0 && (mult_lo < 2 || mult_hi < mult_lo || mult_hi > K))
        throw config_error("scenario: overlap multiplicity range is invalid");
    if (correlation != Correlation::cr1 && !(rho > -1.0 && rho < 1.0))
        throw config_error("scenario: rho must lie in (-1, 1)");
    if (!(censor_rate >= 0.0 && censor_rate < 1.0))
        throw config_error("scenario: censor_rate must lie in [0, 1)");
}

PathwayLayout gen_layout(const ScenarioSpec& spec) {
    spec.validate();
    Rng rng(mix_seed(spec.seed, role_layout));

    // Multiplicities of the overlapping genes (gene ids 1..n_overlap); each
    // extra membership adds one member slot beyond the distinct-gene count.
    std::vector<int> mult(static_cast<size_t>(spec.n_overlap));
    long total_slots = spec.n_distinct;
    for (int& m : mult) {
        m = static_cast<int>(rng.uniform_int(spec.mult_lo, spec.mult_hi));
        total_slots += m - 1;
    }
    if (total_slots < static_cast<long>(spec.K) * spec.size_lo ||
        total_slots > static_cast<long>(spec.K) * spec.size_hi)
        throw config_error(
            "layout: member slots cannot be partitioned into pathways of the requested sizes");

    // Start every pathway at the minimum size and hand out the remaining
    // slots one at a time, uniformly among pathways still below the maximum.
    std::vector<int> sizes(static_cast<size_t>(spec.K), spec.size_lo);
    long rem = total_slots - static_cast<long>(spec.K) * spec.size_lo;
    std::vector<int> open(static_cast<size_t>(spec.K));
    std::iota(open.begin(), open.end(), 0);
    while (rem-- > 0) {
        const size_t pick =
            static_cast<size_t>(rng.uniform_int(0, static_cast<long>(open.size()) - 1));
        const size_t k = static_cast<size_t>(open[pick]);
        if (++sizes[k] == spec.size_hi) {
            open[pick] = open.back();
            open.pop_back();
        }
    }

    // Overlapping genes first: each picks its pathways uniformly without
    // replacement among those that still have free capacity.
    std::vector<int> free_slots(sizes);
    std::vector<std::vector<int>> members(static_cast<size_t>(spec.K));
    for (int g = 0; g < spec.n_overlap; ++g) {
        std::vector<int> cand;
        for (int k = 0; k < spec.K; ++k)
            if (free_slots[static_cast<size_t>(k)] > 0) cand.push_back(k);
        if (static_cast<int>(cand.size()) < mult[static_cast<size_t>(g)])
            throw config_error(
                "layout: not enough pathways with free capacity for an overlapping gene");
        partial_shuffle(cand, mult[static_cast<size_t>(g)], rng);
        for (int t = 0; t < mult[static_cast<size_t>(g)]; ++t) {
            members[static_cast<size_t>(cand[static_cast<size_t>(t)])].push_back(g + 1);
            --free_slots[static_cast<size_t>(cand[static_cast<size_t>(t)])];
        }
    }

    // Single-membership genes fill the remaining slots in shuffled order.
    std::vector<int> slots;
    slots.reserve(static_cast<size_t>(spec.n_distinct - spec.n_overlap));
    for (int k = 0; k < spec.K; ++k)
        slots.insert(slots.end(), static_cast<size_t>(free_slots[static_cast<size_t>(k)]), k);
    fisher_yates(slots, rng);
    for (size_t t = 0; t < slots.size(); ++t)
        members[static_cast<size_t>(slots[t])].push_back(spec.n_overlap + 1 +
                                                         static_cast<int>(t));

    // Shuffle the within-pathway order and emit the membership rows.
    std::vector<std::pair<int, int>> rows;
    rows.reserve(static_cast<size_t>(total_slots));
    for (int k = 0; k < spec.K; ++k) {
        fisher_yates(members[static_cast<size_t>(k)], rng);
        for (int gene : members[static_cast<size_t>(k)]) rows.emplace_back(k + 1, gene);
    }
    return PathwayLayout::from_membership(std::move(rows));
}

GroundTruth gen_effects(const ScenarioSpec& spec, const PathwayLayout& layout,
                        const IndexMap& map) {
    Rng rng(mix_seed(spec.seed, role_effects));
    const ActivePick act = pick_active_pathways(layout);
    const std::vector<int> mult = layout.gene_multiplicity();

    GroundTruth truth;
    truth.w0 = Eigen::VectorXd::Zero(map.n_coefficients());
    truth.active_higher_main.assign(act.pathways.begin(), act.pathways.end());
    truth.active_higher_inter = {{act.pathways[0], act.pathways[1]},
                                 {act.pathways[2], act.pathways[3]}};

    // Five main-effect positions per active pathway, restricted to single-
    // membership genes so a signal column is never silently duplicated into
    // another pathway.
    std::array<std::vector<int>, kActivePathways> mains;
    for (int a = 0; a < kActivePathways; ++a) {
        std::vector<int> cand = single_positions(layout, mult, act.pathways[static_cast<size_t>(a)]);
        partial_shuffle(cand, kMainsPerActive, rng);
        cand.resize(kMainsPerActive);
        std::sort(cand.begin(), cand.end());
        mains[static_cast<size_t>(a)] = cand;
        for (int pos : cand)
            truth.active_lower_main.push_back(
                map.flatten({EffectKind::main_effect, act.pathways[static_cast<size_t>(a)],
                             act.pathways[static_cast<size_t>(a)], pos, 0}));
    }

    // Twelve of the 25 main-by-main combinations per active pathway pair.
    for (int pr = 0; pr < 2; ++pr) {
        const int k = act.pathways[static_cast<size_t>(2 * pr)];
        const int kp = act.pathways[static_cast<size_t>(2 * pr + 1)];
        std::vector<int> combo(kMainsPerActive * kMainsPerActive);
        std::iota(combo.begin(), combo.end(), 0);
        partial_shuffle(combo, kIntersPerPair, rng);
        combo.resize(kIntersPerPair);
        std::sort(combo.begin(), combo.end());
        for (int t : combo) {
            const int j = mains[static_cast<size_t>(2 * pr)][static_cast<size_t>(t / kMainsPerActive)];
            const int l = mains[static_cast<size_t>(2 * pr + 1)][static_cast<size_t>(t % kMainsPerActive)];
            truth.active_lower_inter.push_back(
                map.flatten({EffectKind::interaction, k, kp, j, l}));
        }
    }

    // Magnitudes Uniform(0.8, 1.2), drawn in flat order. Sign patterns: s1
    // all positive; s2 flips the first active pathway's mains and the first
    // active pair's interactions; s3 flips a fair coin per coefficient.
    auto draw = [&](bool flip_group) {
        const double w = rng.uniform(kMagnitudeLo, kMagnitudeHi);
        bool neg = false;
        switch (spec.pattern) {
            case EffectPattern::s1: neg = false; break;
            case EffectPattern::s2: neg = flip_group; break;
            case EffectPattern::s3: neg = rng.uniform() < 0.5; break;
        }
        return neg ? -w : w;
    };
    {
        size_t t = 0;
        for (int a = 0; a < kActivePathways; ++a)
            for (int i = 0; i < kMainsPerActive; ++i)
                truth.w0[truth.active_lower_main[t++]] = draw(a == 0);
    }
    {
        size_t t = 0;
        for (int pr = 0; pr < 2; ++pr)
            for (int i = 0; i < kIntersPerPair; ++i)
                truth.w0[truth.active_lower_inter[t++]] = draw(pr == 0);
    }
    return truth;
}

CovarianceModel build_covariance(const ScenarioSpec& spec, const PathwayLayout& layout) {
    const int G = layout.n_distinct;
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(G, G);
    std::vector<std::uint8_t> taken(static_cast<size_t>(G) * static_cast<size_t>(G), 0);

    // A duplicated gene is copied into each member pathway, so it cannot be
    // independent of all of them; it carries correlation structure in its
    // lowest-index (home) pathway only. Ignoring foreign guests keeps each
    // pathway's contribution a principal submatrix of its target correlation
    // matrix, and the whole gene matrix their direct sum, which is positive
    // definite whenever the per-pathway targets are. Letting guests correlate
    // in every member pathway would instead glue up to mult_hi chains through
    // one gene and lose positive definiteness at realistic multiplicities.
    std::vector<int> home(static_cast<size_t>(G), 0);
    for (int c = 0; c < layout.p(); ++c) {
        const int g = layout.col_gene[static_cast<size_t>(c)] - 1;
        const int k = layout.col_pathway[static_cast<size_t>(c)];
        if (home[static_cast<size_t>(g)] == 0 || k < home[static_cast<size_t>(g)])
            home[static_cast<size_t>(g)] = k;
    }

    auto place = [&](int g, int h, double v) {
        if (g == h) return;
        const size_t a = static_cast<size_t>(g) * static_cast<size_t>(G) + static_cast<size_t>(h);
        const size_t b = static_cast<size_t>(h) * static_cast<size_t>(G) + static_cast<size_t>(g);
        if (taken[a]) return;
        taken[a] = taken[b] = 1;
        C(g, h) = C(h, g) = v;
    };

    for (int k = 1; k <= layout.K; ++k) {
        const int begin = layout.offsets[static_cast<size_t>(k) - 1];
        const int end = layout.offsets[static_cast<size_t>(k)];
        for (int ci = begin; ci < end; ++ci)
            for (int cj = ci + 1; cj < end; ++cj) {
                const int gi = layout.col_gene[static_cast<size_t>(ci)] - 1;
                const int gj = layout.col_gene[static_cast<size_t>(cj)] - 1;
                if (home[static_cast<size_t>(gi)] != k || home[static_cast<size_t>(gj)] != k)
                    continue;
                const int lag = layout.col_pos[static_cast<size_t>(cj)] -
                                layout.col_pos[static_cast<size_t>(ci)];
                double v = 0.0;
                switch (spec.correlation) {
                    case Correlation::ar:
                    case Correlation::cr2: v = std::pow(spec.rho, lag); break;
                    case Correlation::cr1: v = kCr1Within; break;
                }
                place(gi, gj, v);
            }
    }

    if (spec.correlation != Correlation::ar) {
        const ActivePick act = pick_active_pathways(layout);
        if (act.confounder > layout.K)
            throw config_error(
                "covariates: no pathway follows the active ones to act as the confounder");
        const int cb = layout.offsets[static_cast<size_t>(act.confounder) - 1];
        const int ce = layout.offsets[static_cast<size_t>(act.confounder)];
        for (int a = 0; a < kActivePathways; ++a) {
            const int k = act.pathways[static_cast<size_t>(a)];
            for (int ci = layout.offsets[static_cast<size_t>(k) - 1];
                 ci < layout.offsets[static_cast<size_t>(k)]; ++ci)
                for (int cj = cb; cj < ce; ++cj) {
                    const int gi = layout.col_gene[static_cast<size_t>(ci)] - 1;
                    const int gj = layout.col_gene[static_cast<size_t>(cj)] - 1;
                    if (home[static_cast<size_t>(gi)] != k ||
                        home[static_cast<size_t>(gj)] != act.confounder)
                        continue;
                    place(gi, gj, kCrossCorrelation);
                }
        }
    }

    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() != Eigen::Success)
        throw config_error("covariates: the requested correlation structure yields a "
                           "singular (not positive definite) gene covariance matrix");
    CovarianceModel out;
    out.chol = llt.matrixL();
    return out;
}

Eigen::MatrixXd gen_covariates(const ScenarioSpec& spec, const PathwayLayout& layout,
                               const CovarianceModel& cov, int n, Rng& rng) {
    (void)spec;
    const int G = layout.n_distinct;
    Eigen::MatrixXd Z(n, G);
    for (int i = 0; i < n; ++i) // subject-major draw order
        for (int g = 0; g < G; ++g) Z(i, g) = rng.normal();
    const Eigen::MatrixXd U = Z * cov.chol.transpose(); // row i = L z_i
    Eigen::MatrixXd X(n, layout.p());
    for (int c = 0; c < layout.p(); ++c) X.col(c) = U.col(layout.col_gene[static_cast<size_t>(c)] - 1);
    return X;
}

std::pair<double, double> calibrate_censoring(const ScenarioSpec& spec,
                                              const PathwayLayout& layout, const IndexMap& map,
                                              const GroundTruth& truth,
                                              const CovarianceModel& cov, double target) {
    if (!(target > 0.0 && target < 1.0))
        throw config_error("censoring calibration: target rate must lie in (0, 1)");
    Rng rng(mix_seed(spec.seed, role_calibration));
    const int G = layout.n_distinct;

    // Express the active coefficients over distinct genes so each pseudo-
    // subject only needs the correlated values of the genes carrying signal.
    struct MainTerm {
        int gene;
        double w;
    };
    struct InterTerm {
        int gene_a, gene_b;
        double w;
    };
    std::vector<MainTerm> mains;
    std::vector<InterTerm> inters;
    for (long f : truth.active_lower_main) {
        const auto cols = map.columns_of(f);
        mains.push_back({layout.col_gene[static_cast<size_t>(cols.first)] - 1, truth.w0[f]});
    }
    for (long f : truth.active_lower_inter) {
        const auto cols = map.columns_of(f);
        inters.push_back({layout.col_gene[static_cast<size_t>(cols.first)] - 1,
                          layout.col_gene[static_cast<size_t>(cols.second)] - 1, truth.w0[f]});
    }
    std::vector<int> needed;
    for (const auto& t : mains) needed.push_back(t.gene);
    for (const auto& t : inters) {
        needed.push_back(t.gene_a);
        needed.push_back(t.gene_b);
    }
    std::sort(needed.begin(), needed.end());
    needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
    // Contiguous copies of the needed Cholesky rows, one column each.
    Eigen::MatrixXd Lrows(G, static_cast<int>(needed.size()));
    std::vector<int> slot(static_cast<size_t>(G), -1);
    for (size_t r = 0; r < needed.size(); ++r) {
        Lrows.col(static_cast<int>(r)) = cov.chol.row(needed[r]).transpose();
        slot[static_cast<size_t>(needed[r])] = static_cast<int>(r);
    }

    // One latent log-time and one unit-scale Gamma draw per pseudo-subject;
    // the scale enters the comparison only through log(theta), so a single
    // sample set serves every bisection step.
    Eigen::VectorXd y(kCalibrationDraws), log_g(kCalibrationDraws);
    Eigen::VectorXd z(G), uval(static_cast<int>(needed.size()));
    for (int s = 0; s < kCalibrationDraws; ++s) {
        for (int g = 0; g < G; ++g) z[g] = rng.normal();
        for (size_t r = 0; r < needed.size(); ++r) {
            const int g = needed[r];
            uval[static_cast<int>(r)] =
                Lrows.col(static_cast<int>(r)).head(g + 1).dot(z.head(g + 1));
        }
        double lp = 0.0;
        for (const auto& t : mains) lp += t.w * uval[slot[static_cast<size_t>(t.gene)]];
        for (const auto& t : inters)
            lp += t.w * uval[slot[static_cast<size_t>(t.gene_a)]] *
                  uval[slot[static_cast<size_t>(t.gene_b)]];
        y[s] = lp + rng.normal();
        log_g[s] = std::log(rng.gamma_int_shape(2, 1.0));
    }

    // P(censored) = P(y > log(theta) + log g) is nonincreasing in theta;
    // bisect log(theta) until the Monte-Carlo rate pins the target.
    auto censor_rate = [&](double log_theta) {
        int count = 0;
        for (int s = 0; s < kCalibrationDraws; ++s)
            if (y[s] > log_theta + log_g[s]) ++count;
        return static_cast<double>(count) / kCalibrationDraws;
    };
    double lo = std::log(kGammaScaleLo), hi = std::log(kGammaScaleHi);
    if (censor_rate(lo) < target || censor_rate(hi) > target)
        throw config_error("censoring calibration: target rate is outside the achievable range");
    for (int it = 0; it < kBisectionIterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (censor_rate(mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    return {2.0, std::exp(0.5 * (lo + hi))};
}

ResponseDraw gen_response(const ScenarioSpec& spec, const Eigen::MatrixXd& X,
                          const IndexMap& map, const GroundTruth& truth, double gamma_shape,
                          double gamma_scale, Rng& rng) {
    (void)spec;
    const int n = static_cast<int>(X.rows());
    ResponseDraw out;
    out.y = linear_predictor(X, map, truth.w0);
    for (int i = 0; i < n; ++i) out.y[i] += rng.normal(); // all noise draws first
    out.y_star = out.y;
    out.c = out.y; // events record the follow-up bound as the event time
    out.delta.assign(static_cast<size_t>(n), 1);
    if (gamma_scale > 0.0) {
        const int shape = static_cast<int>(std::lround(gamma_shape));
        if (shape < 1) throw config_error("response: gamma shape must be a positive integer");
        int censored = 0;
        for (int i = 0; i < n; ++i) {
            const double bound = std::log(rng.gamma_int_shape(shape, gamma_scale));
            if (out.y[i] > bound) { // censored: the event lies beyond the bound
                out.delta[static_cast<size_t>(i)] = 0;
                out.y_star[i] = bound;
                out.c[i] = bound;
                ++censored;
            }
        }
        out.realized_censoring = static_cast<double>(censored) / n;
    }
    return out;
}

SimulatedData simulate(const ScenarioSpec& spec) {
    spec.validate();
    SimulatedData out;
    out.layout = gen_layout(spec);
    const IndexMap map(out.layout);
    out.truth = gen_effects(spec, out.layout, map);
    const CovarianceModel cov = build_covariance(spec, out.layout);
    if (spec.censor_rate > 0.0)
        std::tie(out.gamma_shape, out.gamma_scale) =
            calibrate_censoring(spec, out.layout, map, out.truth, cov, spec.censor_rate);

    {
        Rng rng(mix_seed(spec.seed, role_covariates));
        out.train.X = gen_covariates(spec, out.layout, cov, spec.n, rng);
    }
    {
        Rng rng(mix_seed(spec.seed, role_response));
        ResponseDraw resp =
            gen_response(spec, out.train.X, map, out.truth, out.gamma_shape, out.gamma_scale, rng);
        out.train.layout = out.layout;
        out.train.y_star = std::move(resp.y_star);
        out.train.c = std::move(resp.c);
        out.train.delta = std::move(resp.delta);
        out.y_uncensored_train = std::move(resp.y);
        out.realized_censoring_train = resp.realized_censoring;
    }
    out.train.validate();

    if (spec.n_test > 0) {
        {
            Rng rng(mix_seed(spec.seed, role_test_covariates));
            out.test.X = gen_covariates(spec, out.layout, cov, spec.n_test, rng);
        }
        Rng rng(mix_seed(spec.seed, role_test_response));
        ResponseDraw resp =
            gen_response(spec, out.test.X, map, out.truth, out.gamma_shape, out.gamma_scale, rng);
        out.test.layout = out.layout;
        out.test.y_star = std::move(resp.y_star);
        out.test.c = std::move(resp.c);
        out.test.delta = std::move(resp.delta);
        out.y_uncensored_test = std::move(resp.y);
        out.realized_censoring_test = resp.realized_censoring;
        out.test.validate();
    }
    return out;
}

std::vector<ScenarioSpec> replication_scenarios(std::uint64_t base_seed) {
    struct Corr {
        Correlation c;
        double rho;
    };
    const std::array<Corr, 4> corrs{{{Correlation::ar, 0.6},
                                     {Correlation::ar, 0.4},
                                     {Correlation::cr1, 0.0},
                                     {Correlation::cr2, 0.6}}};
    const std::array<int, 2> ks{100, 50};
    const std::array<EffectPattern, 3> patterns{EffectPattern::s1, EffectPattern::s2,
                                                EffectPattern::s3};
    const std::array<double, 2> rates{0.20, 0.40};
    std::vector<ScenarioSpec> out;
    std::uint64_t tag = 0;
    for (const Corr& corr : corrs)
        for (int K : ks) {
            // CR2 at K=50 couples blocks too large for positive definiteness.
            if (corr.c == Correlation::cr2 && K == 50) continue;
            for (EffectPattern pat : patterns)
                for (double rate : rates) {
                    ScenarioSpec s;
                    s.K = K;
                    s.size_lo = (K == 100) ? 10 : 20;
                    s.size_hi = (K == 100) ? 13 : 23;
                    s.correlation = corr.c;
                    s.rho = corr.rho;
                    s.pattern = pat;
                    s.censor_rate = rate;
                    s.seed = mix_seed(base_seed, 1000 + tag++);
                    out.push_back(s);
                }
        }
    return out;
}

} // namespace survhier
