#include "survhier/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "survhier/errors.hpp"
#include "survhier/model.hpp"
#include "survhier/rng.hpp"

namespace survhier {

EvalReport tp_fp(const IndexMap& map, const SelectionSets& selected, const GroundTruth& truth) {
    if (truth.w0.size() != map.n_coefficients() ||
        selected.coefficients.size() != map.n_coefficients())
        throw structural_error("tp_fp: selection and truth are built on different layouts");

    EvalReport rep;
    const std::unordered_set<long> true_main(truth.active_lower_main.begin(),
                                             truth.active_lower_main.end());
    const std::unordered_set<long> true_inter(truth.active_lower_inter.begin(),
                                              truth.active_lower_inter.end());
    for (long f : selected.selected_lower) {
        if (map.is_main(f))
            true_main.count(f) ? ++rep.lm_tp : ++rep.lm_fp;
        else
            true_inter.count(f) ? ++rep.li_tp : ++rep.li_fp;
    }

    std::unordered_set<int> true_hm, true_hi;
    for (int k : truth.active_higher_main) true_hm.insert(map.block_id(k, k));
    for (const auto& [k, kp] : truth.active_higher_inter) true_hi.insert(map.block_id(k, kp));
    for (int b : selected.selected_higher) {
        const auto [k, kp] = map.block_pathways(b);
        if (k == kp)
            true_hm.count(b) ? ++rep.hm_tp : ++rep.hm_fp;
        else
            true_hi.count(b) ? ++rep.hi_tp : ++rep.hi_fp;
    }
    return rep;
}

std::pair<double, double> rsse(const IndexMap& map, const Eigen::VectorXd& estimated,
                               const Eigen::VectorXd& w0) {
    if (estimated.size() != w0.size() || estimated.size() != map.n_coefficients())
        throw structural_error("rsse: coefficient vectors have mismatched lengths");
    double m2 = 0.0, i2 = 0.0;
    for (long f = 0; f < estimated.size(); ++f) {
        const double d = estimated[f] - w0[f];
        (map.is_main(f) ? m2 : i2) += d * d;
    }
    return {std::sqrt(m2), std::sqrt(i2)};
}

double KmCurve::operator()(double t) const {
    // First drop strictly after t -> value of the last drop at or before t.
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return value[static_cast<size_t>(it - times.begin()) - 1];
}

KmCurve km_censoring_survival(const Eigen::VectorXd& times,
                              const std::vector<std::uint8_t>& delta) {
    const long n = times.size();
    if (static_cast<long>(delta.size()) != n)
        throw structural_error("km: times and status have different lengths");
    if (n < 2) throw data_error("km: need at least two subjects");

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return times[a] < times[b]; });

    KmCurve curve;
    double g = 1.0;
    size_t i = 0;
    long processed = 0;
    while (i < order.size()) {
        const double t = times[order[i]];
        long d = 0, c = 0;
        while (i < order.size() && times[order[i]] == t) {
            (delta[static_cast<size_t>(order[i])] == 1) ? ++d : ++c;
            ++i;
        }
        // Events at t leave the risk set before the censorings at t are
        // processed, so the censoring hazard denominator excludes them.
        const long at_risk_for_censoring = (n - processed) - d;
        if (c > 0) {
            g *= 1.0 - static_cast<double>(c) / static_cast<double>(at_risk_for_censoring);
            curve.times.push_back(t);
            curve.value.push_back(g);
        }
        processed += d + c;
    }
    return curve;
}

double uno_c(const Eigen::VectorXd& train_times, const std::vector<std::uint8_t>& train_delta,
             const Eigen::VectorXd& test_times, const std::vector<std::uint8_t>& test_delta,
             const Eigen::VectorXd& risk, double horizon) {
    const long n = test_times.size();
    if (static_cast<long>(test_delta.size()) != n || risk.size() != n)
        throw structural_error("uno_c: test arrays have mismatched lengths");
    const KmCurve g = km_censoring_survival(train_times, train_delta);
    if (std::isnan(horizon)) horizon = test_times.maxCoeff();

    double num = 0.0, den = 0.0;
    for (long i = 0; i < n; ++i) {
        if (test_delta[static_cast<size_t>(i)] != 1 || test_times[i] > horizon) continue;
        const double gi = g(test_times[i]);
        if (!(gi > 0.0)) continue; // no usable inverse-probability weight
        const double w = 1.0 / (gi * gi);
        for (long j = 0; j < n; ++j) {
            if (j == i || !(test_times[i] < test_times[j])) continue;
            den += w;
            if (risk[i] > risk[j])
                num += w;
            else if (risk[i] == risk[j])
                num += 0.5 * w;
        }
    }
    if (den == 0.0)
        throw undefined_metric_error("uno_c: no comparable pairs in the test set");
    return num / den;
}

EvalReport evaluate(const IndexMap& map, const SelectionSets& selected, const GroundTruth& truth,
                    const SurvivalDataset& train, const SurvivalDataset& test) {
    EvalReport rep = tp_fp(map, selected, truth);
    std::tie(rep.m_rsse, rep.i_rsse) = rsse(map, selected.coefficients, truth.w0);
    // Higher risk = shorter predicted log-time. Both time scales here are
    // logs; every ingredient of the concordance is rank-based, so the value
    // matches the original-scale computation exactly.
    const Eigen::VectorXd risk = -linear_predictor(test.X, map, selected.coefficients);
    rep.c_statistic = uno_c(train.y_star, train.delta, test.y_star, test.delta, risk);
    return rep;
}

namespace {

SurvivalDataset subset_rows(const SurvivalDataset& data, const std::vector<int>& rows) {
    SurvivalDataset out;
    out.layout = data.layout;
    out.X.resize(static_cast<long>(rows.size()), data.X.cols());
    out.y_star.resize(static_cast<long>(rows.size()));
    out.c.resize(static_cast<long>(rows.size()));
    out.delta.resize(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        out.X.row(static_cast<long>(r)) = data.X.row(rows[r]);
        out.y_star[static_cast<long>(r)] = data.y_star[rows[r]];
        out.c[static_cast<long>(r)] = data.c[rows[r]];
        out.delta[r] = data.delta[static_cast<size_t>(rows[r])];
    }
    return out;
}

} // namespace

OoiReport ooi(const SurvivalDataset& data, long n_coefficients, const FitRunner& fit,
              int n_resamples, double split, std::uint64_t seed) {
    if (n_resamples < 1) throw config_error("ooi: n_resamples must be at least 1");
    if (!(split > 0.0 && split < 1.0))
        throw config_error("ooi: split fraction must lie strictly between 0 and 1");
    const int n = data.n();
    if (n < 2) throw data_error("ooi: need at least two subjects to split");
    const int n_sub = std::max(1, static_cast<int>(split * n));

    Eigen::VectorXd count = Eigen::VectorXd::Zero(n_coefficients);
    std::vector<std::vector<long>> kept;
    int failed = 0;
    for (int r = 0; r < n_resamples; ++r) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
        std::vector<int> idx(static_cast<size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        for (size_t i = idx.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<long>(i) - 1));
            std::swap(idx[i - 1], idx[j]);
        }
        idx.resize(static_cast<size_t>(n_sub));
        std::sort(idx.begin(), idx.end()); // subset in original subject order
        const SurvivalDataset sub = subset_rows(data, idx);
        try {
            SelectionSets sel = fit(sub);
            for (long f : sel.selected_lower) count[f] += 1.0;
            kept.push_back(std::move(sel.selected_lower));
        } catch (const numerical_error&) {
            ++failed;
        }
    }

    OoiReport rep;
    rep.n_failed = failed;
    rep.n_success = n_resamples - failed;
    rep.frequency = rep.n_success > 0 ? Eigen::VectorXd(count / rep.n_success)
                                      : Eigen::VectorXd(Eigen::VectorXd::Zero(n_coefficients));
    double acc = 0.0;
    int runs = 0;
    for (const auto& sel : kept) {
        if (sel.empty()) continue;
        double s = 0.0;
        for (long f : sel) s += rep.frequency[f];
        acc += s / static_cast<double>(sel.size());
        ++runs;
    }
    if (runs > 0) rep.mean_selected_ooi = acc / runs;
    return rep;
}

} // namespace survhier
