#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "marlcc/env.hpp"
#include "marlcc/learner.hpp"

namespace marlcc::env {

enum class CreditMethod { Auto, Exact, MonteCarlo, Factorized, Uniform };

std::string credit_method_name(CreditMethod m);
CreditMethod credit_method_from_name(const std::string& name);

struct CreditConfig {
    CreditMethod method = CreditMethod::Auto;  // Auto: exact for N <= 5, else MC
    int mc_permutations = 20;
};

struct LearnerConfig {
    std::vector<int> hidden{64, 64};
    double gamma = 0.98;
    learner::StepSchedule critic_lr = learner::StepSchedule::constant(1e-3);
    learner::StepSchedule actor_lr = learner::StepSchedule::constant(5e-4);
    std::size_t buffer_capacity = 500000;
    int batch_size = 256;
    int update_interval = 1;      // env steps between gradient updates
    int warmup_transitions = 200; // minimum buffer fill before learning
    double grad_clip = 10.0;
    double ou_theta = 0.15;
    double ou_sigma = 0.2;
    double log_std_init = -0.7;
    learner::BootstrapMode bootstrap = learner::BootstrapMode::Mean;
    bool target_network = false;
    double polyak = 0.995;
    bool feedback_linearization = true;
};

/// Everything one run needs besides episode counts and output paths.
struct RunSettings {
    ScenarioConfig scenario;
    BeliefParams belief;
    CreditConfig credit;
    LearnerConfig learner;
};

struct TrainingConfig {
    int episodes = 2000;
    int eval_interval = 10;
    int eval_episodes = 1;
    int checkpoint_interval = 0;  // 0: only the final checkpoint
};

/// Mutable per-agent learning state.
struct AgentRuntime {
    learner::GaussianPolicy policy;
    learner::Critic critic;
    std::optional<learner::Critic> target;
    learner::ReplayBuffer buffer{1};
    learner::OUNoise ou;
    long critic_steps = 0;
    long policy_steps = 0;
    Rng action_rng;
    Rng batch_rng;
};

std::vector<AgentRuntime> make_agents(const RunSettings& settings, std::uint64_t master_seed);

struct StepRecord {
    int tick = 0;
    double global_reward = 0.0;
    std::vector<double> phi;
    int collisions = 0;
    int msgs_sent = 0;
    int msgs_dropped = 0;
    double lambda2 = 0.0;
};

struct EpisodeLog {
    std::vector<StepRecord> steps;
    double cumulative_reward = 0.0;
    int collision_count = 0;
    double control_effort_variance = 0.0;
    std::vector<double> phi_sums;
    long msgs_sent = 0;
    long msgs_dropped = 0;
    long msgs_delivered = 0;
    double mean_entropy = 0.0;
    double mean_lambda2 = 0.0;
    bool credit_fallback = false;  // uniform fallback was used at some step
    int fl_singular_events = 0;    // decoupling fallbacks to the raw action
};

struct EpisodeOptions {
    bool learn = true;
    bool explore = true;
    bool record_steps = true;
    std::vector<MessageLogRow>* message_log = nullptr;
};

/// Runs one episode of the belief-act-credit-update loop on a freshly reset
/// world. Shapley credit is computed per step from one-step counterfactuals
/// on the pre-step snapshot.
EpisodeLog run_episode(WorldState& world, std::vector<AgentRuntime>& agents,
                       const RunSettings& settings, const EpisodeOptions& options);

struct EpisodeRow {
    int episode = 0;            // 1-based training episode count
    bool eval = false;
    int steps = 0;
    double reward = 0.0;
    int collisions = 0;
    long msgs_sent = 0;
    long msgs_dropped = 0;
    long msgs_delivered = 0;
    double mean_entropy = 0.0;
    double mean_lambda2 = 0.0;
    std::vector<double> phi_sums;
};

struct TrainingRecord {
    std::vector<EpisodeRow> rows;
    std::vector<std::string> checkpoints;  // directories written
};

/// Runs `training.episodes` learning episodes with periodic deterministic
/// evaluation episodes (fixed evaluation seeds, exploration and learning
/// off). Fully determined by (settings, master_seed).
TrainingRecord run_training(const RunSettings& settings, const TrainingConfig& training,
                            std::uint64_t master_seed, std::vector<AgentRuntime>& agents,
                            const std::filesystem::path* checkpoint_dir = nullptr,
                            const std::string& config_hash = "");

/// Ablation variants of the full algorithm.
enum class Variant { Full, NoLinearization, RawObservations, UniformCredit };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);
RunSettings apply_variant(RunSettings settings, Variant v);

/// Benettin estimate of the closed-loop expansion rate: twin worlds with
/// common random numbers, the perturbed twin's vehicle states renormalized
/// to delta0 every `renorm_interval` ticks. Returns the mean log expansion
/// per second over `n_steps` ticks.
double closed_loop_stability(const RunSettings& settings, std::vector<AgentRuntime>& agents,
                             std::uint64_t seed, int n_steps, double delta0 = 1e-6,
                             int renorm_interval = 10);

/// Deterministic evaluation rollout reporting per-tick vehicle positions
/// (positions[tick][agent]); used for trajectory metrics.
std::vector<std::vector<Eigen::Vector2d>> eval_positions(const RunSettings& settings,
                                                         std::vector<AgentRuntime>& agents,
                                                         std::uint64_t seed);

}  // namespace marlcc::env
