#pragma once

#include <Eigen/Dense>
#include <vector>

#include "marlcc/dynamics.hpp"
#include "marlcc/rng.hpp"

namespace marlcc::belief {

/// Weighted particle approximation of one agent's state belief.
/// Particles are stored column-wise (state_dim x n_particles).
struct ParticleBelief {
    Eigen::MatrixXd particles;
    Eigen::VectorXd weights;
    bool degenerate = false;  // set when an update had to reset to uniform

    Eigen::Index size() const { return weights.size(); }
    double effective_sample_size() const { return 1.0 / weights.squaredNorm(); }
};

/// Finite-support belief on a shared grid. Used for the exact Bayes oracle
/// and for consensus fusion, where geometric-mean combination needs
/// comparable densities.
struct DiscreteBelief {
    Eigen::MatrixXd support;  // state_dim x K grid points
    Eigen::VectorXd probs;    // K, nonnegative, sums to 1
};

/// Gaussian measurement model z = h(x) + noise, noise ~ N(0, covariance).
struct ObservationModel {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> output;
    Eigen::MatrixXd covariance;
};

/// Uniform-weight belief with all particles at one point.
ParticleBelief make_particle_belief(const Eigen::VectorXd& center, int n_particles);

/// Gaussian cloud around `center` with per-dimension stddev `stddev`.
ParticleBelief sample_gaussian_belief(const Eigen::VectorXd& center,
                                      const Eigen::VectorXd& stddev, int n_particles,
                                      Rng& rng);

/// Advances every particle by rk4_step with input u, then perturbs by
/// zero-mean Gaussian process noise. Weights are untouched.
/// Throws ModelConfigError when the noise covariance is not SPD
/// (zero covariance is accepted and means a deterministic transition).
ParticleBelief predict(const ParticleBelief& b, const dynamics::AffineSystem& system,
                       const Eigen::VectorXd& u, double dt,
                       const Eigen::MatrixXd& process_noise, Rng& rng);

/// Reweights by the Gaussian likelihood N(z; h(particle), covariance) and
/// renormalizes. If every likelihood underflows the weights reset to
/// uniform and the degenerate flag is set.
ParticleBelief update(const ParticleBelief& b, const Eigen::VectorXd& z,
                      const ObservationModel& model);

/// Systematic resampling to uniform weights when ESS < n/2; otherwise the
/// belief is returned unchanged.
ParticleBelief resample(const ParticleBelief& b, Rng& rng);

/// Weighted mean and per-dimension weighted (population) standard deviation,
/// concatenated: [mean; std].
Eigen::VectorXd belief_features(const ParticleBelief& b);

Eigen::VectorXd weighted_mean(const ParticleBelief& b);

/// Histogram projection of a particle belief onto a shared grid: each
/// particle's weight goes to the nearest grid point.
DiscreteBelief project_to_grid(const ParticleBelief& b, const Eigen::MatrixXd& support);

/// Consensus fusion: log b_new = sum_j w_j log b_j, then log-sum-exp
/// renormalization. Support points assigned zero by any positively weighted
/// component stay zero. Throws FusionSupportError on mismatched supports.
DiscreteBelief fuse(const std::vector<DiscreteBelief>& beliefs, const Eigen::VectorXd& weights);

/// One exact forward-filter step: posterior ∝ likelihood ⊙ (Tᵀ prior).
/// Throws ImpossibleObservationError when the total likelihood is zero.
Eigen::VectorXd forward_filter_step(const Eigen::VectorXd& prior,
                                    const Eigen::MatrixXd& transition,
                                    const Eigen::VectorXd& likelihood);

/// Exact discrete Bayes filter over an observation sequence.
/// transition(i, j) = P(s' = j | s = i) (row stochastic);
/// emission(i, z) = P(z | s = i). Returns the posterior after each step.
std::vector<DiscreteBelief> exact_bayes_filter(const Eigen::MatrixXd& transition,
                                               const Eigen::MatrixXd& emission,
                                               const DiscreteBelief& prior,
                                               const std::vector<int>& observations);

/// Total-variation distance between two probability vectors.
double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// Normalizes log weights with log-sum-exp; resets to uniform (and reports
/// it) when every entry underflows.
Eigen::VectorXd normalize_log_weights(const Eigen::VectorXd& logw, bool* underflow = nullptr);

}  // namespace marlcc::belief
