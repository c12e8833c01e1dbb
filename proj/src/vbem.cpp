#include "survhier/vbem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "survhier/errors.hpp"
#include "survhier/trunc_normal.hpp"

namespace survhier {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112353;
constexpr double kZetaClamp = 1e-8;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double bernoulli_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -(p * std::log(p) + (1.0 - p) * std::log1p(-p));
}

// Logit-space damping: full replacement at damping = 1 (the exact maximizer),
// otherwise a partial step from the previous value.
double damped_probability(double proposed_logit, double old_p, double damping) {
    if (damping >= 1.0) return sigmoid(proposed_logit);
    const double old_clamped = std::clamp(old_p, 1e-300, 1.0 - 1e-16);
    return sigmoid(logit(old_clamped) + damping * (proposed_logit - logit(old_clamped)));
}

struct KahanSum {
    double sum = 0.0, carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

// x_j' v for the (possibly product) column backing coefficient j.
double column_dot(const Eigen::MatrixXd& X, int a, int b, const double* v) {
    const long n = X.rows();
    const double* xa = X.col(a).data();
    double acc = 0.0;
    if (b < 0) {
        for (long i = 0; i < n; ++i) acc += xa[i] * v[i];
    } else {
        const double* xb = X.col(b).data();
        for (long i = 0; i < n; ++i) acc += xa[i] * xb[i] * v[i];
    }
    return acc;
}

// Events-only statistics for the (possibly product) column backing a
// coefficient: the inner product with `v` and the sum of squares, both
// restricted to rows flagged in `event`.
std::pair<double, double> column_event_stats(const Eigen::MatrixXd& X, int a, int b,
                                             const double* v, const std::uint8_t* event) {
    const long n = X.rows();
    const double* xa = X.col(a).data();
    double dot = 0.0, sumsq = 0.0;
    if (b < 0) {
        for (long i = 0; i < n; ++i) {
            if (!event[i]) continue;
            dot += xa[i] * v[i];
            sumsq += xa[i] * xa[i];
        }
    } else {
        const double* xb = X.col(b).data();
        for (long i = 0; i < n; ++i) {
            if (!event[i]) continue;
            const double x = xa[i] * xb[i];
            dot += x * v[i];
            sumsq += x * x;
        }
    }
    return {dot, sumsq};
}

// v += s * x_j for the (possibly product) column backing coefficient j.
void column_axpy(const Eigen::MatrixXd& X, int a, int b, double s, double* v) {
    if (s == 0.0) return;
    const long n = X.rows();
    const double* xa = X.col(a).data();
    if (b < 0) {
        for (long i = 0; i < n; ++i) v[i] += s * xa[i];
    } else {
        const double* xb = X.col(b).data();
        for (long i = 0; i < n; ++i) v[i] += s * xa[i] * xb[i];
    }
}

// Same as column_axpy restricted to rows flagged in `event`.
void column_event_axpy(const Eigen::MatrixXd& X, int a, int b, double s, double* v,
                       const std::uint8_t* event) {
    if (s == 0.0) return;
    const long n = X.rows();
    const double* xa = X.col(a).data();
    if (b < 0) {
        for (long i = 0; i < n; ++i)
            if (event[i]) v[i] += s * xa[i];
    } else {
        const double* xb = X.col(b).data();
        for (long i = 0; i < n; ++i)
            if (event[i]) v[i] += s * xa[i] * xb[i];
    }
}

} // namespace

MarginalSeedPlan plan_marginal_seeds(const SurvivalDataset& data, const IndexMap& map) {
    MarginalSeedPlan plan;
    const long N = map.n_coefficients();
    const int n = data.n();
    const int n1 = data.n_events();
    if (N == 0 || n1 < 3) return plan;

    double mean = 0.0;
    for (int i = 0; i < n; ++i)
        if (data.delta[static_cast<size_t>(i)]) mean += data.y_star[i];
    mean /= n1;

    // Centered response on the event rows, zero elsewhere, so plain column
    // dots already restrict to events.
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
        if (data.delta[static_cast<size_t>(i)]) r[i] = data.y_star[i] - mean;

    // First scan caches the events-only column norms alongside the scores.
    Eigen::VectorXd gev(N), dots(N);
    for (long j = 0; j < N; ++j) {
        const auto [a, b] = map.columns_of(j);
        const auto [dot, sumsq] =
            column_event_stats(data.X, a, b, r.data(), data.delta.data());
        dots[j] = dot;
        gev[j] = sumsq;
    }

    // A pick must explain at least 2 log N times the residual variance — the
    // universal threshold, under which the largest of N null scores falls with
    // high probability. The first few picks are forced so that signal buried
    // under a large total response variance can ignite the cascade: each pick
    // shrinks the residual scale, which lowers the bar for the next one.
    const double bar = 2.0 * std::log(static_cast<double>(N));
    const int forced = std::min(n1 / 4, 40);
    const int max_picks = n1 / 2;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(N);
    double rss = r.squaredNorm();

    for (int pick = 0; pick < max_picks; ++pick) {
        const double sigma2_hat = rss / (n1 - 1);
        if (sigma2_hat <= 1e-12) break; // events interpolated
        long best = -1;
        double best_gain = 0.0, best_dot = 0.0;
        for (long j = 0; j < N; ++j) {
            if (!(gev[j] > 0.0)) continue;
            double dot;
            if (pick == 0) {
                dot = dots[j];
            } else {
                const auto [a, b] = map.columns_of(j);
                dot = column_dot(data.X, a, b, r.data());
            }
            const double gain = dot * dot / gev[j];
            if (gain > best_gain) {
                best_gain = gain;
                best = j;
                best_dot = dot;
            }
        }
        if (best < 0 || !(best_gain > 0.0)) break;
        if (pick >= forced && best_gain < bar * sigma2_hat) break;
        const double slope = best_dot / gev[best];
        if (!std::isfinite(slope)) break;
        beta[best] += slope;
        const auto [a, b] = map.columns_of(best);
        column_event_axpy(data.X, a, b, -slope, r.data(), data.delta.data());
        rss = r.squaredNorm();
    }

    // Exit filter: keep only support members whose final size still clears the
    // universal threshold against the final residual scale. Forced picks and
    // early composites that later refitted toward zero drop out here.
    const double sigma2_final = std::max(rss / (n1 - 1), 1e-12);
    for (long j = 0; j < N; ++j) {
        if (beta[j] == 0.0) continue;
        if (beta[j] * beta[j] * gev[j] >= bar * sigma2_final) {
            plan.support.push_back(j);
            plan.beta.push_back(beta[j]);
        }
    }
    return plan;
}

void FitConfig::validate() const {
    if (max_iterations < 1) throw config_error("fit config: max_iterations must be >= 1");
    if (!(elbo_rel_tol > 0.0) || !std::isfinite(elbo_rel_tol))
        throw config_error("fit config: elbo_rel_tol must be positive and finite");
    if (!(damping > 0.0) || damping > 1.0)
        throw config_error("fit config: damping must lie in (0, 1]");
    if (residual_refresh_every < 1)
        throw config_error("fit config: residual_refresh_every must be >= 1");
}

VbemEngine::VbemEngine(const SurvivalDataset& data, const IndexMap& map, const Hyperparams& hyper,
                       const Eigen::VectorXd* gram)
    : data_(&data), map_(&map), hyper_(hyper) {
    hyper_.validate();
    if (data.X.cols() != map.layout().p())
        throw structural_error("vbem: dataset covariates and index map disagree on p");
    if (gram != nullptr) {
        if (gram->size() != map.n_coefficients())
            throw structural_error("vbem: provided gram diagonal has the wrong length");
        gram_ = gram;
    } else {
        gram_storage_ = gram_diagonal(data.X, map);
        gram_ = &gram_storage_;
    }
    inv_r1_ = 1.0 / hyper_.r1;
    inv_r2_ = 1.0 / hyper_.r2;
    inv_s1_ = 1.0 / hyper_.s1;
    inv_s2_ = 1.0 / hyper_.s2;
    half_log_lower_ = 0.5 * std::log(hyper_.r2 / hyper_.r1);
    half_log_higher_ = 0.5 * std::log(hyper_.s2 / hyper_.s1);
    half_gap_lower_ = 0.5 * (inv_r2_ - inv_r1_);
    half_gap_higher_ = 0.5 * (inv_s2_ - inv_s1_);
}

// Expected log-density gap E[log N(w|0,r1) - log N(w|0,r2)] at second moment
// `sumsq` = m^2 + sigma^2: positive evidence pushes the indicator toward the
// wide component.
double VbemEngine::occupancy_gap_lower(double sumsq) const {
    return half_log_lower_ + sumsq * half_gap_lower_;
}

double VbemEngine::occupancy_gap_higher(double sumsq) const {
    return half_log_higher_ + sumsq * half_gap_higher_;
}

double VbemEngine::prior_precision(long j, const VariationalState& s) const {
    const double eta = s.eta[j];
    double prec = eta * inv_r1_ + (1.0 - eta) * inv_r2_;
    const double r = s.r_hl[map_->block_of(j)];
    prec += r * inv_s1_ + (1.0 - r) * inv_s2_;
    if (!map_->is_main(j)) {
        const auto [pa, pb] = map_->parents_of(j);
        const double q = s.eta[pa] * s.eta[pb];
        prec += q * inv_r1_ + (1.0 - q) * inv_r2_;
    }
    return prec;
}

void VbemEngine::init_state(const FitConfig& config, VariationalState& state,
                            ModelParams& params) const {
    config.validate();
    const long N = map_->n_coefficients();
    const int n = data_->n();
    const int n1 = data_->n_events();
    if (n1 == 0) throw unsupported_error("vbem: every subject is censored; no events to anchor tau");
    if (config.excise_censoring && data_->n_censored() > 0)
        throw config_error("vbem: censoring machinery excised but the data has censored subjects");

    // Event-time location and spread, used by both schemes.
    double mean = 0.0;
    for (int i = 0; i < n; ++i)
        if (data_->delta[i]) mean += data_->y_star[i];
    mean /= n1;

    // Seeded start: a greedy pursuit on the event rows proposes a sparse,
    // jointly sized support before the first sweep. The fraction of response
    // variance it explains sharpens tau0 accordingly. With an empty plan this
    // reduces to the neutral start's mean prediction.
    Eigen::VectorXd pred = Eigen::VectorXd::Zero(n);
    MarginalSeedPlan local_plan;
    const MarginalSeedPlan* plan = nullptr;
    if (config.init_scheme == InitScheme::marginal) {
        if (config.seed_plan) {
            plan = config.seed_plan.get();
        } else {
            local_plan = plan_marginal_seeds(*data_, *map_);
            plan = &local_plan;
        }
        for (size_t s = 0; s < plan->support.size(); ++s) {
            const auto [a, b] = map_->columns_of(plan->support[s]);
            column_axpy(data_->X, a, b, plan->beta[s], pred.data());
        }
    }

    // tau0 = 1 / sample variance of the event residuals about their own mean
    // (the observed log-times themselves under the neutral start).
    double rmean = 0.0;
    for (int i = 0; i < n; ++i)
        if (data_->delta[i]) rmean += data_->y_star[i] - pred[i];
    rmean /= n1;
    double rss = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!data_->delta[i]) continue;
        const double d = data_->y_star[i] - pred[i] - rmean;
        rss += d * d;
    }
    double var = n1 >= 2 ? rss / (n1 - 1) : 0.0;
    var = std::max(var, 1e-12);
    params.tau = 1.0 / var;

    if (config.init_scheme == InitScheme::marginal) {
        // Seeds start committed (inclusion near one, block switched on,
        // variance at the slab-conditioned value); everything else starts
        // excluded. The first sweeps re-vote each coefficient conditionally, so
        // weak seeds drop back out while the informed scale survives.
        constexpr double kHot = 1.0 - 1e-3;
        constexpr double kCold = 1e-3;
        state.m = Eigen::VectorXd::Zero(N);
        state.eta = Eigen::VectorXd::Constant(N, kCold);
        state.sigma2.resize(N);
        for (long j = 0; j < N; ++j)
            state.sigma2[j] = 1.0 / (params.tau * (*gram_)[j] + inv_r2_ + inv_s2_);
        state.r_hl = Eigen::VectorXd::Constant(map_->n_blocks(), kCold);
        for (size_t s = 0; s < plan->support.size(); ++s) {
            const long j = plan->support[s];
            state.m[j] = plan->beta[s];
            state.eta[j] = kHot;
            state.sigma2[j] = 1.0 / (params.tau * (*gram_)[j] + inv_r1_ + inv_s1_);
            state.r_hl[map_->block_of(j)] = kHot;
        }
        params.zeta1 = std::clamp(state.eta.mean(), kZetaClamp, 1.0 - kZetaClamp);
        params.zeta2 = std::clamp(state.r_hl.mean(), kZetaClamp, 1.0 - kZetaClamp);
    } else {
        params.zeta1 = 0.5;
        params.zeta2 = 0.5;
        state.m = Eigen::VectorXd::Zero(N);
        state.sigma2 = Eigen::VectorXd::Constant(N, hyper_.r1);
        state.eta = Eigen::VectorXd::Constant(N, 0.5);
        state.r_hl = Eigen::VectorXd::Constant(map_->n_blocks(), 0.5);
    }

    state.censored = config.excise_censoring ? std::vector<int>{} : data_->censored_subjects();
    const long n0 = static_cast<long>(state.censored.size());
    state.z_mean.resize(n0);
    state.z_var.resize(n0);
    state.z_log_mass.resize(n0);
    state.z_loc.resize(n0);
    state.z_scale2.resize(n0);

    state.ytilde = data_->y_star;
    const double v0 = 1.0 / params.tau;
    for (long w = 0; w < n0; ++w) {
        const int i = state.censored[static_cast<size_t>(w)];
        const double loc = pred[i]; // current linear prediction X~ m
        const tn::TruncMoments mo = tn::upper_tail_moments(loc, v0, data_->c[i]);
        state.z_mean[w] = mo.mean;
        state.z_var[w] = mo.var;
        state.z_log_mass[w] = mo.log_mass;
        state.z_loc[w] = loc;
        state.z_scale2[w] = v0;
        state.ytilde[i] = mo.mean;
    }
    state.residual = state.ytilde - gamma * pred;
}

void VbemEngine::update_coordinate(long j, VariationalState& state, const ModelParams& params,
                                   double damping) const {
    const auto [a, b] = map_->columns_of(j);
    const double G = (*gram_)[j];
    const double prec = params.tau * G + prior_precision(j, state);
    const double sigma2 = 1.0 / prec;

    const double m_old = state.m[j];
    const double dot = column_dot(data_->X, a, b, state.residual.data());
    const double m_new = sigma2 * params.tau * (dot + G * m_old);

    column_axpy(data_->X, a, b, m_old - m_new, state.residual.data());

    double lg = logit(params.zeta1) + occupancy_gap_lower(m_new * m_new + sigma2);
    if (map_->is_main(j)) {
        for (const auto& [inter, partner] : map_->interactions_of_main(j))
            lg += state.eta[partner] *
                  occupancy_gap_lower(state.m[inter] * state.m[inter] + state.sigma2[inter]);
    }
    const double eta_new = damped_probability(lg, state.eta[j], damping);

    if (!std::isfinite(m_new) || !(sigma2 > 0.0) || !std::isfinite(eta_new))
        throw numerical_error("coordinate update produced a non-finite factor", j);

    state.m[j] = m_new;
    state.sigma2[j] = sigma2;
    state.eta[j] = eta_new;
}

void VbemEngine::update_alpha_block(int block, VariationalState& state, const ModelParams& params,
                                    double damping) const {
    const IndexMap::BlockRange& range = map_->block_range(block);
    KahanSum acc;
    for (long j = range.main_begin; j < range.main_end; ++j)
        acc.add(occupancy_gap_higher(state.m[j] * state.m[j] + state.sigma2[j]));
    for (long j = range.inter_begin; j < range.inter_end; ++j)
        acc.add(occupancy_gap_higher(state.m[j] * state.m[j] + state.sigma2[j]));
    const double lg = logit(params.zeta2) + acc.sum;
    const double r_new = damped_probability(lg, state.r_hl[block], damping);
    if (!std::isfinite(r_new))
        throw numerical_error("block update produced a non-finite inclusion probability",
                              map_->n_coefficients() + block);
    state.r_hl[block] = r_new;
}

void VbemEngine::update_z(int which, VariationalState& state, const ModelParams& params) const {
    const int i = state.censored[static_cast<size_t>(which)];
    const double loc = state.ytilde[i] - state.residual[i]; // current x~_i m
    const double v = 1.0 / params.tau;
    const tn::TruncMoments mo = tn::upper_tail_moments(loc, v, data_->c[i]);
    const double shift = mo.mean - state.z_mean[which];
    state.z_mean[which] = mo.mean;
    state.z_var[which] = mo.var;
    state.z_log_mass[which] = mo.log_mass;
    state.z_loc[which] = loc;
    state.z_scale2[which] = v;
    state.ytilde[i] += shift;
    state.residual[i] += shift;
}

void VbemEngine::update_z_all(VariationalState& state, const ModelParams& params) const {
    const int n0 = static_cast<int>(state.censored.size());
    for (int w = 0; w < n0; ++w) update_z(w, state, params);
}

void VbemEngine::m_step(const VariationalState& state, ModelParams& params) const {
    const int n = data_->n();
    const int n1 = data_->n_events();

    KahanSum denom;
    for (int i = 0; i < n; ++i)
        if (data_->delta[i]) denom.add(state.residual[i] * state.residual[i]);
    const long N = map_->n_coefficients();
    for (long j = 0; j < N; ++j) denom.add(state.sigma2[j] * (*gram_)[j]);

    if (!(denom.sum > 0.0) || !std::isfinite(denom.sum))
        throw numerical_error("parameter update: nonpositive precision denominator");
    params.tau = static_cast<double>(n1) / denom.sum;

    params.zeta1 = std::clamp(state.eta.mean(), kZetaClamp, 1.0 - kZetaClamp);
    params.zeta2 = std::clamp(state.r_hl.mean(), kZetaClamp, 1.0 - kZetaClamp);
}

double VbemEngine::elbo(const VariationalState& state, const ModelParams& params) const {
    const int n = data_->n();
    const long N = map_->n_coefficients();
    const int B = map_->n_blocks();

    const double log_z1 = std::log(params.zeta1);
    const double log_1m_z1 = std::log1p(-params.zeta1);
    const double log_z2 = std::log(params.zeta2);
    const double log_1m_z2 = std::log1p(-params.zeta2);
    const double log_2pi_r1 = kLog2Pi + std::log(hyper_.r1);
    const double log_2pi_r2 = kLog2Pi + std::log(hyper_.r2);
    const double log_2pi_s1 = kLog2Pi + std::log(hyper_.s1);
    const double log_2pi_s2 = kLog2Pi + std::log(hyper_.s2);

    KahanSum quad;      // E || ytilde - X~ w ||^2, all subjects
    KahanSum prior_w;   // all three coefficient-prior layers
    KahanSum prior_bern;
    KahanSum ent_gauss;
    KahanSum ent_bern;
    KahanSum ent_latent;

    for (int i = 0; i < n; ++i) quad.add(state.residual[i] * state.residual[i]);
    const long n0 = static_cast<long>(state.censored.size());
    for (long w = 0; w < n0; ++w) quad.add(state.z_var[w]);

    for (long j = 0; j < N; ++j) {
        const double sumsq = state.m[j] * state.m[j] + state.sigma2[j];
        quad.add(state.sigma2[j] * (*gram_)[j]);

        const double eta = state.eta[j];
        prior_w.add(-0.5 * (eta * (log_2pi_r1 + sumsq * inv_r1_) +
                            (1.0 - eta) * (log_2pi_r2 + sumsq * inv_r2_)));
        const double r = state.r_hl[map_->block_of(j)];
        prior_w.add(-0.5 * (r * (log_2pi_s1 + sumsq * inv_s1_) +
                            (1.0 - r) * (log_2pi_s2 + sumsq * inv_s2_)));
        if (!map_->is_main(j)) {
            const auto [pa, pb] = map_->parents_of(j);
            const double q = state.eta[pa] * state.eta[pb];
            prior_w.add(-0.5 * (q * (log_2pi_r1 + sumsq * inv_r1_) +
                                (1.0 - q) * (log_2pi_r2 + sumsq * inv_r2_)));
        }

        prior_bern.add(eta * log_z1 + (1.0 - eta) * log_1m_z1);
        ent_gauss.add(0.5 * (kLog2Pi + 1.0 + std::log(state.sigma2[j])));
        ent_bern.add(bernoulli_entropy(eta));
    }

    for (int b = 0; b < B; ++b) {
        prior_bern.add(state.r_hl[b] * log_z2 + (1.0 - state.r_hl[b]) * log_1m_z2);
        ent_bern.add(bernoulli_entropy(state.r_hl[b]));
    }

    // Truncated-factor entropy from the stored parameters; the cross moment
    // (bound - loc)(mean - loc) equals scale^2 * xi * hazard(xi).
    for (long w = 0; w < n0; ++w) {
        const int i = state.censored[static_cast<size_t>(w)];
        const double v = state.z_scale2[w];
        const double loc = state.z_loc[w];
        ent_latent.add(0.5 * (kLog2Pi + 1.0 + std::log(v)) + state.z_log_mass[w] +
                       (data_->c[i] - loc) * (state.z_mean[w] - loc) / (2.0 * v));
    }

    const double lik =
        0.5 * n * (std::log(params.tau) - kLog2Pi) - 0.5 * params.tau * quad.sum;

    const struct {
        const char* name;
        double value;
    } terms[] = {
        {"likelihood", lik},          {"coefficient prior", prior_w.sum},
        {"bernoulli prior", prior_bern.sum}, {"gaussian entropy", ent_gauss.sum},
        {"bernoulli entropy", ent_bern.sum}, {"latent entropy", ent_latent.sum},
    };
    double total = 0.0;
    for (const auto& t : terms) {
        if (!std::isfinite(t.value))
            throw numerical_error(std::string("elbo: ") + t.name + " term is non-finite");
        total += t.value;
    }
    return total;
}

void VbemEngine::rebuild_residual(VariationalState& state) const {
    state.residual = state.ytilde;
    const long N = map_->n_coefficients();
    for (long j = 0; j < N; ++j) {
        if (state.m[j] == 0.0) continue;
        const auto [a, b] = map_->columns_of(j);
        column_axpy(data_->X, a, b, -state.m[j], state.residual.data());
    }
}

double VbemEngine::residual_drift(const VariationalState& state) const {
    VariationalState fresh = state;
    rebuild_residual(fresh);
    return (fresh.residual - state.residual).lpNorm<Eigen::Infinity>();
}

FitResult VbemEngine::fit(const FitConfig& config, const UpdateObserver& observer) const {
    config.validate();
    FitResult out;
    init_state(config, out.state, out.params);
    if (observer) observer(UpdateKind::init, -1, out.state, out.params);

    const long N = map_->n_coefficients();
    const int B = map_->n_blocks();
    out.elbo_trace.reserve(static_cast<size_t>(config.max_iterations) + 1);
    out.elbo_trace.push_back(elbo(out.state, out.params));

    try {
        for (int cycle = 0; cycle < config.max_iterations; ++cycle) {
            for (long j = 0; j < N; ++j) {
                update_coordinate(j, out.state, out.params, config.damping);
                if (observer) observer(UpdateKind::coordinate, j, out.state, out.params);
            }
            for (int b = 0; b < B; ++b) {
                update_alpha_block(b, out.state, out.params, config.damping);
                if (observer) observer(UpdateKind::alpha_block, b, out.state, out.params);
            }
            m_step(out.state, out.params);
            update_z_all(out.state, out.params);
            if (observer) observer(UpdateKind::m_step, -1, out.state, out.params);

            if ((cycle + 1) % config.residual_refresh_every == 0) rebuild_residual(out.state);

            const double prev = out.elbo_trace.back();
            const double now = elbo(out.state, out.params);
            out.elbo_trace.push_back(now);
            out.iterations = cycle + 1;
            if (std::abs(now - prev) <= config.elbo_rel_tol * (1.0 + std::abs(now))) {
                out.converged = true;
                break;
            }
        }
    } catch (numerical_error& e) {
        e.partial_elbo_trace = out.elbo_trace;
        throw;
    }
    return out;
}

} // namespace survhier
