#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "marlcc/belief.hpp"
#include "marlcc/comms.hpp"
#include "marlcc/credit.hpp"
#include "marlcc/dynamics.hpp"
#include "marlcc/rng.hpp"

namespace marlcc::env {

enum class ScenarioKind { Platoon, Intersection, LaneMerge };

std::string scenario_name(ScenarioKind k);
ScenarioKind scenario_from_name(const std::string& name);

struct VehicleParams {
    double wheelbase = 2.5;
    double v_max = 15.0;
    dynamics::ActuatorBounds bounds{};
};

/// Reward shape shared by all scenarios: fuel rho(v) = c0 + c1 v + c2 v^2
/// integrated per step, safety hinge below d_min per ordered neighbor pair,
/// a scenario task term, and a terminal collision penalty.
struct RewardSpec {
    double fuel_c0 = 0.1;
    double fuel_c1 = 0.0;
    double fuel_c2 = 0.01;
    double safety_distance = 10.0;  // d_min, m
    double safety_weight = 0.5;
    double headway_target = 20.0;   // platoon, m
    double headway_weight = 0.05;
    double throughput_bonus = 5.0;  // intersection crossing bonus
    double merge_bonus = 5.0;       // lane-merge completion bonus
    double collision_radius = 2.0;  // m, episode-terminal
    double collision_penalty = 50.0;

    double fuel_rate(double v) const { return fuel_c0 + fuel_c1 * v + fuel_c2 * v * v; }
};

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::Platoon;
    int n_agents = 3;
    int horizon = 500;
    double dt = 0.1;
    std::uint64_t seed = 1;
    // road geometry
    double initial_spacing = 20.0;  // m between consecutive starts
    double lane_width = 4.0;        // m, lane-merge offset
    double approach_distance = 60.0;  // m to the conflict point (intersection/merge)
    double merge_point = 0.0;         // x coordinate where the ramp joins
    double position_jitter = 1.0;     // m uniform jitter on initial spacing
    // initial condition distribution
    double init_speed_min = 0.0;
    double init_speed_max = 10.0;
    VehicleParams vehicle{};
    RewardSpec reward{};
    Eigen::Vector4d process_noise_std{0.02, 0.02, 0.05, 0.005};
    double comm_radius = 100.0;  // r_c, m
    comms::ChannelModel channel{};
};

/// Particle-filter settings for the per-agent own-state belief.
struct BeliefParams {
    int n_particles = 1000;
    bool use_particles = true;  // false: raw noisy readings feed the policy
    Eigen::Vector4d init_std{1.0, 1.0, 0.5, 0.1};
    Eigen::Vector4d process_noise_std{0.02, 0.02, 0.05, 0.005};
    Eigen::Vector4d obs_noise_std{0.5, 0.5, 0.2, 0.05};
};

/// Latest state estimate heard from one sender.
struct NeighborEstimate {
    bool valid = false;
    double time = 0.0;
    Eigen::VectorXd payload;  // [x_hat(4), model_input(2)]
};

/// Full simulation state. Value semantics: copying a WorldState is the
/// snapshot operation, and stepping a restored copy replays the exact same
/// noise draws as the original (the RNG streams are part of the value).
struct WorldState {
    int tick = 0;
    double time = 0.0;
    bool done = false;
    int collision_count = 0;
    long msgs_sent = 0;
    long msgs_dropped = 0;
    long msgs_delivered = 0;
    std::vector<dynamics::VehicleState> vehicles;
    std::vector<belief::ParticleBelief> beliefs;
    std::vector<Eigen::VectorXd> estimates;  // per agent, broadcast payload basis
    comms::CommGraph graph;
    std::vector<comms::Message> mailbox;
    std::vector<std::vector<NeighborEstimate>> heard;  // [recipient][sender]
    std::vector<char> lane_completed;  // lane-merge: bonus already granted
    std::vector<Rng> process_rngs;  // per agent, world process noise
    std::vector<Rng> obs_rngs;      // per agent, sensor noise
    std::vector<Rng> belief_rngs;   // per agent, filter prediction/resampling
    Rng channel_rng;
};

struct MessageLogRow {
    int tick;
    int sender;
    int recipient;
    comms::PayloadKind kind;
    bool dropped;
};

struct StepOutcome {
    std::vector<double> rewards;  // r_i
    double global_reward = 0.0;   // R = sum r_i
    bool collision = false;
    int msgs_sent = 0;
    int msgs_dropped = 0;
    std::vector<bool> saturated;
};

/// Samples initial states and beliefs. Respawns up to 100 times when a
/// placement violates the safety distance, then throws PlacementError.
/// Beliefs are Gaussian clouds around the true states when particles are
/// enabled.
WorldState reset(const ScenarioConfig& config, const BeliefParams& belief = BeliefParams{});

/// Advances the world one tick under per-agent model inputs (a, tan delta):
/// integrate + process noise + state limits, rebuild the graph, exchange
/// state-estimate messages, deliver due mail, detect collisions, and score
/// rewards on the new state. Beliefs are not touched here.
StepOutcome step(WorldState& world, const std::vector<Eigen::Vector2d>& model_inputs,
                 const ScenarioConfig& config,
                 std::vector<MessageLogRow>* message_log = nullptr);

/// Frozen copy of the world (value copy, including RNG streams).
WorldState snapshot(const WorldState& world);
/// Restores a world from a snapshot (value copy).
WorldState restore(const WorldState& snap);

/// v(S) for per-step credit: re-steps the snapshot with chosen actions for
/// agents in S and the baseline (zero model input: hold velocity and
/// heading) for the rest, returning the resulting global reward.
double counterfactual_value(const WorldState& snap, const ScenarioConfig& config,
                            const std::vector<Eigen::Vector2d>& chosen_inputs,
                            credit::CoalitionMask subset);

/// Safety + task ("spacing") reward restricted to a member set, evaluated on
/// a stepped world. Used by the factorized credit method.
double local_reward(const WorldState& world_after, const ScenarioConfig& config,
                    const std::vector<int>& members);

/// Signed lateral offset of an agent from its route centerline, and the
/// longitudinal coordinate along its route.
double route_longitudinal(const ScenarioConfig& config, int agent,
                          const Eigen::Vector2d& position);
double route_lateral(const ScenarioConfig& config, int agent, const Eigen::Vector2d& position);

/// Per-agent reference neighbor used in features: the predecessor in a
/// platoon, the most recently heard sender otherwise. Returns -1 when none.
int reference_neighbor(const ScenarioConfig& config, const WorldState& world, int agent);

inline constexpr int kFeatureDim = 12;

/// Builds the 12-dim policy feature vector from the agent's own belief and
/// its delivered messages only (the decentralized-execution boundary).
Eigen::VectorXd build_features(const ScenarioConfig& config, const WorldState& world, int agent,
                               const belief::ParticleBelief& belief);

/// Raw-observation variant of the features (belief blocks replaced by the
/// noisy own-state reading); used by the probabilistic-inference ablation.
Eigen::VectorXd build_features_raw(const ScenarioConfig& config, const WorldState& world,
                                   int agent, const Eigen::Vector4d& own_reading);

/// Noisy own-state reading z = x + noise, drawn from the agent's
/// observation stream.
Eigen::Vector4d observe_own_state(const ScenarioConfig& config, WorldState& world, int agent,
                                  const Eigen::Vector4d& obs_noise_std);

/// Fixed-size prediction step for the bicycle own-state filter; numerically
/// matches belief::predict with the bicycle system and a diagonal covariance
/// but avoids the per-particle dynamic dispatch.
void predict_own_belief(belief::ParticleBelief& b, const Eigen::Vector2d& model_input,
                        double dt, double wheelbase, const Eigen::Vector4d& noise_std,
                        Rng& rng);

/// Fixed-size identity-output reweighting matching belief::update with a
/// diagonal covariance.
void update_own_belief(belief::ParticleBelief& b, const Eigen::Vector4d& z,
                       const Eigen::Vector4d& obs_std);

}  // namespace marlcc::env
