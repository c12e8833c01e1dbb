#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "survhier/data.hpp"
#include "survhier/layout.hpp"
#include "survhier/model.hpp"

namespace survhier {

// Mean-field factors over (w, beta, alpha, z) plus the bookkeeping needed to
// run coordinate updates without ever materializing the interaction design.
struct VariationalState {
    Eigen::VectorXd m;      // Gaussian means, one per coefficient
    Eigen::VectorXd sigma2; // Gaussian variances, one per coefficient
    Eigen::VectorXd eta;    // lower-level inclusion probabilities E[beta_j]
    Eigen::VectorXd r_hl;   // higher-level inclusion probabilities E[alpha_kk']

    // Censored-subject latents. `censored` holds subject ids (ascending); the
    // z_* vectors are indexed by position in `censored`. z_loc / z_scale2 are
    // the location/scale^2 the truncated factor was last refreshed with (the
    // entropy of q(z_i) depends on them, not only on the moments).
    std::vector<int> censored;
    Eigen::VectorXd z_mean, z_var, z_log_mass, z_loc, z_scale2;

    // Working response: y* for events, current E[z_i] for censored subjects.
    Eigen::VectorXd ytilde;
    // Incrementally maintained ytilde - X~ m (full linear predictor removed).
    Eigen::VectorXd residual;
};

// Starting point of the ascent. `zeros` is the neutral point (no coefficient
// committed, all inclusion probabilities 1/2). `marginal` seeds the ascent
// from a greedy marginal-score pursuit on the event rows: in wide designs
// (coefficients vastly outnumbering subjects) the neutral start lets the first
// sweep shrink every coefficient under the mixed spike precision before any
// inclusion evidence accumulates, and the ascent then converges to the
// all-excluded optimum regardless of the spike grid; a sparse informed start
// selects the signal-bearing basin instead.
enum class InitScheme { zeros, marginal };

// Seeds for the `marginal` starting point: coefficient indices (ascending)
// with their greedy least-squares sizes. The plan depends only on the data and
// the layout, never on the hyperparameters, so one plan can start the fits of
// an entire tuning grid.
struct MarginalSeedPlan {
    std::vector<long> support;
    std::vector<double> beta;
};

// Greedy pursuit of the response on the event rows: repeatedly move the best
// single coefficient by its current-residual least-squares step, then keep
// the support whose final sizes clear the universal threshold against the
// final residual scale. Deterministic; ties break toward the lower index.
MarginalSeedPlan plan_marginal_seeds(const SurvivalDataset& data, const IndexMap& map);

struct FitConfig {
    int max_iterations = 500;
    double elbo_rel_tol = 1e-6;
    std::uint64_t seed = 0;
    InitScheme init_scheme = InitScheme::zeros;
    // Optional precomputed seeds for the `marginal` scheme (computed on the
    // fly when absent). Tuning shares one plan across the whole grid.
    std::shared_ptr<const MarginalSeedPlan> seed_plan;
    double damping = 1.0; // logit-space step factor for eta / r_hl, 1 = exact
    // Drop the censoring machinery entirely (latent sweeps, latent entropy).
    // Only legal on data with no censored subjects; used to check that the
    // censored model collapses to the plain log-normal regression.
    bool excise_censoring = false;
    // Rebuild the residual cache from scratch every this many cycles.
    int residual_refresh_every = 25;

    void validate() const;
};

struct FitResult {
    VariationalState state;
    ModelParams params;
    std::vector<double> elbo_trace; // entry 0 = after init, then one per cycle
    int iterations = 0;             // full cycles executed
    bool converged = false;
};

// Transition kinds reported to a fit observer. `m_step` fires after the
// parameter update *and* the censoring-latent refresh that completes it; the
// pair forms one compound transition of the ascent.
enum class UpdateKind { init, coordinate, alpha_block, m_step };

// Called after each transition with the kind, the coordinate/block id (or -1),
// and the post-transition state.
using UpdateObserver =
    std::function<void(UpdateKind, long, const VariationalState&, const ModelParams&)>;

// Coordinate-ascent engine for the two-level spike-and-slab survival model.
// Holds references to the dataset and index map; callers keep both alive.
class VbemEngine {
  public:
    // `gram` may point to a precomputed gram_diagonal(X, map) (shared across
    // fits on the same data); if null it is computed here.
    VbemEngine(const SurvivalDataset& data, const IndexMap& map, const Hyperparams& hyper,
               const Eigen::VectorXd* gram = nullptr);

    const Eigen::VectorXd& gram() const { return *gram_; }
    const Hyperparams& hyper() const { return hyper_; }

    // m = 0, sigma2 = r1, eta = r_hl = 1/2, tau = 1 / sample variance of the
    // observed log-times, zeta1 = zeta2 = 1/2, latent moments refreshed at the
    // zero coefficient vector. Throws unsupported_error if there are no events.
    void init_state(const FitConfig& config, VariationalState& state, ModelParams& params) const;

    // Exact coordinate maximizer for (q(w_j), q(beta_j)); maintains residual.
    void update_coordinate(long j, VariationalState& state, const ModelParams& params,
                           double damping = 1.0) const;

    // Exact coordinate maximizer for q(alpha_kk') of one block.
    void update_alpha_block(int block, VariationalState& state, const ModelParams& params,
                            double damping = 1.0) const;

    // Refresh the truncated factor of one censored subject (position `which`
    // in state.censored), or of all of them, at the current (m, tau).
    void update_z(int which, VariationalState& state, const ModelParams& params) const;
    void update_z_all(VariationalState& state, const ModelParams& params) const;

    // Closed-form parameter update: tau from the event residuals plus the
    // full-sample variance load, zeta's as means of the inclusion
    // probabilities, clamped to [1e-8, 1 - 1e-8].
    void m_step(const VariationalState& state, ModelParams& params) const;

    // Evidence lower bound of the full joint (likelihood, all three prior
    // layers, Bernoulli terms, Gaussian / Bernoulli / truncated-normal
    // entropies). Requires a consistent residual cache.
    double elbo(const VariationalState& state, const ModelParams& params) const;

    // residual = ytilde - X~ m, recomputed from scratch.
    void rebuild_residual(VariationalState& state) const;
    // Max-norm gap between the cache and a fresh recomputation.
    double residual_drift(const VariationalState& state) const;

    // Full ascent: repeat [coordinate sweep, block sweep, parameter update +
    // latent refresh] until the ELBO change per cycle is below
    // elbo_rel_tol * (1 + |ELBO|) or max_iterations is hit. The ELBO trace has
    // one entry after init and one after each cycle. Numerical failures abort
    // with the partial trace attached to the exception.
    FitResult fit(const FitConfig& config, const UpdateObserver& observer = {}) const;

  private:
    double prior_precision(long j, const VariationalState& state) const;
    double occupancy_gap_lower(double sumsq) const;
    double occupancy_gap_higher(double sumsq) const;

    const SurvivalDataset* data_;
    const IndexMap* map_;
    Hyperparams hyper_;
    Eigen::VectorXd gram_storage_;
    const Eigen::VectorXd* gram_;

    // Hyperparameter-derived constants.
    double inv_r1_, inv_r2_, inv_s1_, inv_s2_;
    double half_log_lower_;  // log(r2/r1)/2
    double half_log_higher_; // log(s2/s1)/2
    double half_gap_lower_;  // (1/r2 - 1/r1)/2
    double half_gap_higher_; // (1/s2 - 1/s1)/2
};

} // namespace survhier
