#include "marlcc/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "marlcc/error.hpp"

namespace marlcc::env {

namespace {

// Stream ids for deterministic seed derivation from the scenario seed.
constexpr std::uint64_t kStreamProcess = 0;    // + agent
constexpr std::uint64_t kStreamObs = 1000;     // + agent
constexpr std::uint64_t kStreamChannel = 2000;
constexpr std::uint64_t kStreamPlacement = 2001;
constexpr std::uint64_t kStreamBeliefInit = 3000;  // + agent

struct Route {
    Eigen::Vector2d origin;
    Eigen::Vector2d direction;  // unit
};

// Platoon: single straight road along +x. Intersection: even agents drive
// +x through (0,0), odd agents drive +y. Lane merge: even agents on the
// main lane y=0, odd agents on a ramp lane y=lane_width joining at
// merge_point.
Route route_of(const ScenarioConfig& c, int agent) {
    switch (c.kind) {
        case ScenarioKind::Platoon:
            return {{0.0, 0.0}, {1.0, 0.0}};
        case ScenarioKind::Intersection:
            if (agent % 2 == 0) return {{0.0, 0.0}, {1.0, 0.0}};
            return {{0.0, 0.0}, {0.0, 1.0}};
        case ScenarioKind::LaneMerge:
            if (agent % 2 == 0) return {{0.0, 0.0}, {1.0, 0.0}};
            return {{0.0, c.lane_width}, {1.0, 0.0}};
    }
    return {{0.0, 0.0}, {1.0, 0.0}};
}

double initial_longitudinal(const ScenarioConfig& c, int agent) {
    switch (c.kind) {
        case ScenarioKind::Platoon:
            // agent 0 leads from the front
            return (c.n_agents - 1 - agent) * c.initial_spacing;
        case ScenarioKind::Intersection:
        case ScenarioKind::LaneMerge:
            // staggered approach toward the conflict point at s = 0
            return -(c.approach_distance + (agent / 2) * c.initial_spacing);
    }
    return 0.0;
}

double heading_of(const Route& r) { return std::atan2(r.direction.y(), r.direction.x()); }

}  // namespace

std::string scenario_name(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::Platoon: return "platoon";
        case ScenarioKind::Intersection: return "intersection";
        case ScenarioKind::LaneMerge: return "lane-merge";
    }
    return "platoon";
}

ScenarioKind scenario_from_name(const std::string& name) {
    if (name == "platoon") return ScenarioKind::Platoon;
    if (name == "intersection") return ScenarioKind::Intersection;
    if (name == "lane-merge") return ScenarioKind::LaneMerge;
    throw ConfigError("unknown scenario kind '" + name +
                      "' (expected platoon, intersection or lane-merge)");
}

double route_longitudinal(const ScenarioConfig& config, int agent,
                          const Eigen::Vector2d& position) {
    const Route r = route_of(config, agent);
    return (position - r.origin).dot(r.direction);
}

double route_lateral(const ScenarioConfig& config, int agent, const Eigen::Vector2d& position) {
    const Route r = route_of(config, agent);
    const Eigen::Vector2d normal{-r.direction.y(), r.direction.x()};
    return (position - r.origin).dot(normal);
}

WorldState reset(const ScenarioConfig& config, const BeliefParams& belief) {
    if (config.n_agents < 1) throw ConfigError("n_agents must be >= 1");
    if (!(config.dt > 0.0)) throw ConfigError("dt must be positive");
    if (config.horizon < 0) throw ConfigError("horizon must be >= 0");

    Rng placement(derive_seed(config.seed, kStreamPlacement));
    const int n = config.n_agents;

    WorldState w;
    w.vehicles.resize(n);
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        for (int i = 0; i < n; ++i) {
            const Route r = route_of(config, i);
            const double jitter =
                config.position_jitter * (2.0 * placement.uniform() - 1.0);
            const double s = initial_longitudinal(config, i) + jitter;
            dynamics::VehicleState v;
            v.position = r.origin + s * r.direction;
            v.velocity = placement.uniform(config.init_speed_min, config.init_speed_max);
            v.heading = heading_of(r);
            v.yaw_rate = 0.0;
            w.vehicles[i] = v;
        }
        placed = true;
        for (int i = 0; i < n && placed; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if ((w.vehicles[i].position - w.vehicles[j].position).norm() <
                    config.reward.safety_distance) {
                    placed = false;
                    break;
                }
            }
        }
        // single-agent layouts always pass; jitter is resampled otherwise
    }
    if (!placed) {
        throw PlacementError("could not place " + std::to_string(n) +
                             " agents without violating the safety distance");
    }

    w.process_rngs.reserve(n);
    w.obs_rngs.reserve(n);
    w.belief_rngs.reserve(n);
    for (int i = 0; i < n; ++i) {
        w.process_rngs.emplace_back(derive_seed(config.seed, kStreamProcess + i));
        w.obs_rngs.emplace_back(derive_seed(config.seed, kStreamObs + i));
        w.belief_rngs.emplace_back(derive_seed(config.seed, kStreamBeliefInit + i));
    }
    w.channel_rng = Rng(derive_seed(config.seed, kStreamChannel));

    if (belief.use_particles) {
        w.beliefs.reserve(n);
        for (int i = 0; i < n; ++i) {
            w.beliefs.push_back(belief::sample_gaussian_belief(
                w.vehicles[i].to_vector(), belief.init_std, belief.n_particles,
                w.belief_rngs[i]));
        }
    }

    w.estimates.assign(n, Eigen::VectorXd::Zero(6));
    for (int i = 0; i < n; ++i) {
        w.estimates[i].head<4>() =
            belief.use_particles ? Eigen::Vector4d(belief::weighted_mean(w.beliefs[i]))
                                 : w.vehicles[i].to_vector();
    }
    w.heard.assign(n, std::vector<NeighborEstimate>(n));
    w.lane_completed.assign(n, 0);

    std::vector<Eigen::Vector2d> positions;
    for (const auto& v : w.vehicles) positions.push_back(v.position);
    w.graph = comms::build_graph(positions, config.comm_radius);
    return w;
}

StepOutcome step(WorldState& world, const std::vector<Eigen::Vector2d>& model_inputs,
                 const ScenarioConfig& config, std::vector<MessageLogRow>* message_log) {
    const int n = config.n_agents;
    if (static_cast<int>(model_inputs.size()) != n) {
        throw ShapeError("step: expected one action per agent");
    }
    static thread_local dynamics::AffineSystem bicycle;
    static thread_local double bicycle_wheelbase = 0.0;
    if (bicycle_wheelbase != config.vehicle.wheelbase) {
        bicycle = dynamics::bicycle_model(config.vehicle.wheelbase);
        bicycle_wheelbase = config.vehicle.wheelbase;
    }

    StepOutcome out;
    out.rewards.assign(n, 0.0);
    out.saturated.assign(n, false);

    std::vector<double> prev_longitudinal(n);
    for (int i = 0; i < n; ++i) {
        prev_longitudinal[i] = route_longitudinal(config, i, world.vehicles[i].position);
    }

    // 1. integrate vehicles under clamped inputs, then process noise and limits
    const double dt = config.dt;
    for (int i = 0; i < n; ++i) {
        bool sat = false;
        const dynamics::ControlInput cmd =
            dynamics::to_control_input(model_inputs[i], config.vehicle.bounds, &sat);
        out.saturated[i] = sat;
        const Eigen::Vector2d u = dynamics::to_model_input(cmd);
        Eigen::Vector4d x = world.vehicles[i].to_vector();
        Eigen::VectorXd xn = dynamics::rk4_step(bicycle, x, u, dt);
        for (int d = 0; d < 4; ++d) {
            if (config.process_noise_std[d] > 0.0) {
                xn[d] += config.process_noise_std[d] * world.process_rngs[i].normal();
            }
        }
        const Eigen::Vector4d limited = dynamics::apply_state_limits(xn, config.vehicle.v_max);
        const double yaw_rate = limited[2] * std::tan(cmd.steering) / config.vehicle.wheelbase;
        world.vehicles[i] = dynamics::VehicleState::from_vector(limited, yaw_rate);
    }

    // 2. communication graph on the new positions
    std::vector<Eigen::Vector2d> positions;
    positions.reserve(n);
    for (const auto& v : world.vehicles) positions.push_back(v.position);
    world.graph = comms::build_graph(positions, config.comm_radius);

    // 3. broadcast state estimates to neighbors through the lossy channel
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j == i || world.graph.adjacency(i, j) == 0.0) continue;
            comms::Message m;
            m.sender = i;
            m.recipient = j;
            m.kind = comms::PayloadKind::StateEstimate;
            m.payload = world.estimates[i];
            m.send_time = world.time;
            m = comms::transmit(std::move(m), config.channel, world.channel_rng);
            ++out.msgs_sent;
            ++world.msgs_sent;
            const bool dropped = m.dropped;
            if (dropped) {
                ++out.msgs_dropped;
                ++world.msgs_dropped;
            } else {
                // delays land on whole ticks in this discrete-time world
                const int ticks = comms::quantize_delay_ticks(m.deliver_time - m.send_time, dt);
                m.deliver_time = world.time + ticks * dt;
                world.mailbox.push_back(std::move(m));
            }
            if (message_log) {
                message_log->push_back({world.tick, i, j, comms::PayloadKind::StateEstimate,
                                        dropped});
            }
        }
    }

    ++world.tick;
    world.time = world.tick * dt;

    // 4. deliver mail that is due now
    for (auto& m : comms::deliver_due(world.mailbox, world.time)) {
        NeighborEstimate& slot = world.heard[m.recipient][m.sender];
        slot.valid = true;
        slot.time = m.deliver_time;
        slot.payload = m.payload;
        ++world.msgs_delivered;
    }

    // 5. collisions (terminal)
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if ((world.vehicles[i].position - world.vehicles[j].position).norm() <
                config.reward.collision_radius) {
                out.collision = true;
                out.rewards[i] -= config.reward.collision_penalty;
                out.rewards[j] -= config.reward.collision_penalty;
                ++world.collision_count;
            }
        }
    }
    if (out.collision) world.done = true;
    if (world.tick >= config.horizon) world.done = true;

    // 6. fuel, safety and task terms on the new state
    const RewardSpec& rw = config.reward;
    for (int i = 0; i < n; ++i) {
        out.rewards[i] -= rw.fuel_rate(world.vehicles[i].velocity) * dt;
        for (int j = 0; j < n; ++j) {
            if (j == i || world.graph.adjacency(i, j) == 0.0) continue;
            const double d = (world.vehicles[i].position - world.vehicles[j].position).norm();
            out.rewards[i] -= rw.safety_weight * std::max(0.0, rw.safety_distance - d);
        }
        switch (config.kind) {
            case ScenarioKind::Platoon: {
                if (i > 0) {
                    const double gap =
                        route_longitudinal(config, i - 1, world.vehicles[i - 1].position) -
                        route_longitudinal(config, i, world.vehicles[i].position);
                    const double err = gap - rw.headway_target;
                    out.rewards[i] -= rw.headway_weight * err * err;
                }
                break;
            }
            case ScenarioKind::Intersection: {
                const double s = route_longitudinal(config, i, world.vehicles[i].position);
                if (prev_longitudinal[i] <= 0.0 && s > 0.0) {
                    out.rewards[i] += rw.throughput_bonus;
                }
                break;
            }
            case ScenarioKind::LaneMerge: {
                const double s = route_longitudinal(config, i, world.vehicles[i].position);
                if (i % 2 == 1 && !world.lane_completed[i]) {
                    // ramp agents earn the bonus once, when past the merge
                    // point and settled onto the main lane
                    if (s > config.merge_point &&
                        std::abs(world.vehicles[i].position.y()) < 0.5) {
                        out.rewards[i] += rw.merge_bonus;
                        world.lane_completed[i] = 1;
                    }
                }
                break;
            }
        }
    }

    for (double r : out.rewards) out.global_reward += r;
    return out;
}

WorldState snapshot(const WorldState& world) { return world; }

WorldState restore(const WorldState& snap) { return snap; }

double counterfactual_value(const WorldState& snap, const ScenarioConfig& config,
                            const std::vector<Eigen::Vector2d>& chosen_inputs,
                            credit::CoalitionMask subset) {
    const int n = config.n_agents;
    std::vector<Eigen::Vector2d> mixed(n, Eigen::Vector2d::Zero());
    for (int i = 0; i < n; ++i) {
        if ((subset >> i) & 1u) mixed[i] = chosen_inputs[i];
    }
    WorldState scratch = restore(snap);
    return step(scratch, mixed, config).global_reward;
}

double local_reward(const WorldState& world_after, const ScenarioConfig& config,
                    const std::vector<int>& members) {
    const RewardSpec& rw = config.reward;
    double total = 0.0;
    for (int i : members) {
        for (int j : members) {
            if (j == i || world_after.graph.adjacency(i, j) == 0.0) continue;
            const double d =
                (world_after.vehicles[i].position - world_after.vehicles[j].position).norm();
            total -= rw.safety_weight * std::max(0.0, rw.safety_distance - d);
        }
        if (config.kind == ScenarioKind::Platoon && i > 0 &&
            std::find(members.begin(), members.end(), i - 1) != members.end()) {
            const double gap =
                route_longitudinal(config, i - 1, world_after.vehicles[i - 1].position) -
                route_longitudinal(config, i, world_after.vehicles[i].position);
            const double err = gap - rw.headway_target;
            total -= rw.headway_weight * err * err;
        }
    }
    return total;
}

int reference_neighbor(const ScenarioConfig& config, const WorldState& world, int agent) {
    if (config.kind == ScenarioKind::Platoon) return agent > 0 ? agent - 1 : -1;
    int best = -1;
    double best_time = -1.0;
    for (int s = 0; s < config.n_agents; ++s) {
        const auto& h = world.heard[agent][s];
        if (h.valid && h.time > best_time) {
            best_time = h.time;
            best = s;
        }
    }
    return best;
}

namespace {

Eigen::VectorXd assemble_features(const ScenarioConfig& config, const WorldState& world,
                                  int agent, const Eigen::Vector4d& estimate,
                                  const Eigen::Vector4d& spread) {
    const double v_max = config.vehicle.v_max;
    Eigen::VectorXd f = Eigen::VectorXd::Zero(kFeatureDim);
    const Eigen::Vector2d pos{estimate[0], estimate[1]};
    f[0] = estimate[2] / v_max;
    f[1] = std::sin(estimate[3]);
    f[2] = std::cos(estimate[3]);
    f[3] = route_lateral(config, agent, pos) / 5.0;
    f.segment<4>(4) = spread;

    const int ref = reference_neighbor(config, world, agent);
    if (ref >= 0 && world.heard[agent][ref].valid) {
        const auto& h = world.heard[agent][ref];
        const Eigen::Vector2d ref_pos{h.payload[0], h.payload[1]};
        const double d_long = route_longitudinal(config, agent, ref_pos) -
                              route_longitudinal(config, agent, pos);
        const double d_lat = route_lateral(config, agent, ref_pos) -
                             route_lateral(config, agent, pos);
        f[8] = (d_long - config.reward.headway_target) / config.reward.headway_target;
        f[9] = d_lat / 5.0;
        f[10] = (h.payload[2] - estimate[2]) / v_max;
        f[11] = std::max(0.0, 1.0 - (world.time - h.time));  // freshness
    }
    return f;
}

}  // namespace

Eigen::VectorXd build_features(const ScenarioConfig& config, const WorldState& world, int agent,
                               const belief::ParticleBelief& belief) {
    const Eigen::VectorXd bf = belief::belief_features(belief);
    const Eigen::Vector4d mean = bf.head<4>();
    const Eigen::Vector4d spread = bf.tail<4>();
    return assemble_features(config, world, agent, mean, spread);
}

Eigen::VectorXd build_features_raw(const ScenarioConfig& config, const WorldState& world,
                                   int agent, const Eigen::Vector4d& own_reading) {
    return assemble_features(config, world, agent, own_reading, Eigen::Vector4d::Zero());
}

Eigen::Vector4d observe_own_state(const ScenarioConfig& config, WorldState& world, int agent,
                                  const Eigen::Vector4d& obs_noise_std) {
    Eigen::Vector4d z = world.vehicles[agent].to_vector();
    for (int d = 0; d < 4; ++d) z[d] += obs_noise_std[d] * world.obs_rngs[agent].normal();
    (void)config;
    return z;
}

void predict_own_belief(belief::ParticleBelief& b, const Eigen::Vector2d& model_input,
                        double dt, double wheelbase, const Eigen::Vector4d& noise_std,
                        Rng& rng) {
    const double a = model_input[0];
    const double w = model_input[1];
    const bool has_noise = noise_std.maxCoeff() > 0.0;
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        Eigen::Vector4d x = b.particles.col(k);
        Eigen::Vector4d k1, k2, k3, k4;
        auto deriv = [&](const Eigen::Vector4d& s, Eigen::Vector4d& out) {
            const double c = std::cos(s[3]);
            const double sn = std::sin(s[3]);
            out[0] = s[2] * c;
            out[1] = s[2] * sn;
            out[2] = a;
            out[3] = (s[2] / wheelbase) * w;
        };
        deriv(x, k1);
        deriv(x + 0.5 * dt * k1, k2);
        deriv(x + 0.5 * dt * k2, k3);
        deriv(x + dt * k3, k4);
        x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (has_noise) {
            for (int d = 0; d < 4; ++d) {
                if (noise_std[d] > 0.0) x[d] += noise_std[d] * rng.normal();
            }
        }
        b.particles.col(k) = x;
    }
}

void update_own_belief(belief::ParticleBelief& b, const Eigen::Vector4d& z,
                       const Eigen::Vector4d& obs_std) {
    Eigen::VectorXd logw(b.size());
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        double q = 0.0;
        for (int d = 0; d < 4; ++d) {
            const double r = (z[d] - b.particles(d, k)) / obs_std[d];
            q += r * r;
        }
        const double logp = b.weights[k] > 0.0
                                ? std::log(b.weights[k])
                                : -std::numeric_limits<double>::infinity();
        logw[k] = logp - 0.5 * q;
    }
    bool underflow = false;
    b.weights = belief::normalize_log_weights(logw, &underflow);
    b.degenerate = underflow;
}

}  // namespace marlcc::env
