#include "marlcc/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "marlcc/checkpoint.hpp"
#include "marlcc/error.hpp"

namespace marlcc::env {

namespace {

constexpr std::uint64_t kStreamAgentNet = 5000;     // + agent
constexpr std::uint64_t kStreamAgentAction = 6000;  // + agent
constexpr std::uint64_t kStreamAgentBatch = 7000;   // + agent
constexpr std::uint64_t kStreamCredit = 8000;
constexpr std::uint64_t kStreamEpisode = 10000;     // + episode index
constexpr std::uint64_t kStreamEval = 1000000;      // + eval episode index

/// Cached per-channel linearization plumbing for the bicycle model.
struct ControlChannels {
    dynamics::AffineSystem accel;  // output px, input a: relative degree 2
    dynamics::AffineSystem steer;  // output psi, input w: relative degree 1
    int accel_degree = 0;          // cached after the first successful query
    int steer_degree = 0;
};

ControlChannels make_channels(double wheelbase) {
    const dynamics::AffineSystem bicycle = dynamics::bicycle_model(wheelbase);
    ControlChannels ch;
    ch.accel = dynamics::select_channel(bicycle, 0, 0);
    ch.steer = dynamics::select_channel(bicycle, 1, 3);
    return ch;
}

// Maps the policy's virtual control through per-channel input-output
// linearization at the agent's state estimate. Falls back to the raw action
// on a singular decoupling (standstill heading channel, for instance).
Eigen::Vector2d virtual_to_model_input(ControlChannels& ch, const Eigen::Vector4d& estimate,
                                       const Eigen::Vector2d& v, int* singular_events) {
    Eigen::Vector2d u;
    try {
        dynamics::FeedbackControl fc = dynamics::feedback_linearize(
            ch.accel, estimate, Eigen::VectorXd::Constant(1, v[0]));
        u[0] = fc.u[0];
        ch.accel_degree = fc.linearization.relative_degree;
    } catch (const SingularDecouplingError&) {
        u[0] = v[0];
        if (singular_events) ++*singular_events;
    }
    try {
        dynamics::FeedbackControl fc = dynamics::feedback_linearize(
            ch.steer, estimate, Eigen::VectorXd::Constant(1, v[1]));
        u[1] = fc.u[0];
        ch.steer_degree = fc.linearization.relative_degree;
    } catch (const SingularDecouplingError&) {
        u[1] = v[1];
        if (singular_events) ++*singular_events;
    }
    return u;
}

Eigen::Vector2d clamp_to_executed(const Eigen::Vector2d& model_input,
                                  const dynamics::ActuatorBounds& bounds) {
    return dynamics::to_model_input(dynamics::to_control_input(model_input, bounds));
}

std::vector<double> compute_credit(const RunSettings& s, const WorldState& snap,
                                   const std::vector<Eigen::Vector2d>& chosen,
                                   double realized_reward, Rng& credit_rng, bool* fallback) {
    const int n = s.scenario.n_agents;
    CreditMethod method = s.credit.method;
    if (method == CreditMethod::Auto) {
        method = n <= 5 ? CreditMethod::Exact : CreditMethod::MonteCarlo;
    }
    if (method == CreditMethod::Uniform) {
        return std::vector<double>(n, realized_reward / n);
    }
    try {
        if (method == CreditMethod::Factorized) {
            std::vector<credit::LocalGame> games;
            games.reserve(n);
            for (int i = 0; i < n; ++i) {
                credit::LocalGame lg;
                lg.owner = i;
                lg.members.push_back(i);
                for (int j : snap.graph.neighbors(i)) lg.members.push_back(j);
                std::sort(lg.members.begin(), lg.members.end());
                auto members = lg.members;
                lg.value = [&s, &snap, &chosen, members](credit::CoalitionMask local_mask) {
                    const int total = s.scenario.n_agents;
                    std::vector<Eigen::Vector2d> mixed(total, Eigen::Vector2d::Zero());
                    for (int a = 0; a < total; ++a) mixed[a] = chosen[a];
                    for (std::size_t k = 0; k < members.size(); ++k) {
                        if (!((local_mask >> k) & 1u)) mixed[members[k]].setZero();
                    }
                    WorldState scratch = restore(snap);
                    step(scratch, mixed, s.scenario);
                    return local_reward(scratch, s.scenario, members);
                };
                games.push_back(std::move(lg));
            }
            return credit::shapley_factorized(games).phi;
        }
        credit::CoalitionGame game = credit::make_counterfactual_game(
            n, [&s, &snap, &chosen](const std::vector<bool>& use_chosen) {
                credit::CoalitionMask mask = 0;
                for (std::size_t i = 0; i < use_chosen.size(); ++i) {
                    if (use_chosen[i]) mask |= credit::CoalitionMask{1} << i;
                }
                return counterfactual_value(snap, s.scenario, chosen, mask);
            });
        if (method == CreditMethod::Exact) return credit::shapley_exact(game).phi;
        return credit::shapley_mc(game, s.credit.mc_permutations, credit_rng).phi;
    } catch (const CounterfactualUnavailableError&) {
        if (fallback) *fallback = true;
        return std::vector<double>(n, realized_reward / n);
    }
}

}  // namespace

std::string credit_method_name(CreditMethod m) {
    switch (m) {
        case CreditMethod::Auto: return "auto";
        case CreditMethod::Exact: return "exact";
        case CreditMethod::MonteCarlo: return "mc";
        case CreditMethod::Factorized: return "factorized";
        case CreditMethod::Uniform: return "uniform";
    }
    return "auto";
}

CreditMethod credit_method_from_name(const std::string& name) {
    if (name == "auto") return CreditMethod::Auto;
    if (name == "exact") return CreditMethod::Exact;
    if (name == "mc") return CreditMethod::MonteCarlo;
    if (name == "factorized") return CreditMethod::Factorized;
    if (name == "uniform") return CreditMethod::Uniform;
    throw ConfigError("unknown credit method '" + name + "'");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoLinearization: return "no_linearization";
        case Variant::RawObservations: return "raw_observations";
        case Variant::UniformCredit: return "uniform_credit";
    }
    return "full";
}

Variant variant_from_name(const std::string& name) {
    if (name == "full") return Variant::Full;
    if (name == "no_linearization") return Variant::NoLinearization;
    if (name == "raw_observations") return Variant::RawObservations;
    if (name == "uniform_credit") return Variant::UniformCredit;
    throw ConfigError("unknown ablation variant '" + name + "'");
}

RunSettings apply_variant(RunSettings settings, Variant v) {
    switch (v) {
        case Variant::Full: break;
        case Variant::NoLinearization:
            settings.learner.feedback_linearization = false;
            break;
        case Variant::RawObservations:
            settings.belief.use_particles = false;
            break;
        case Variant::UniformCredit:
            settings.credit.method = CreditMethod::Uniform;
            break;
    }
    return settings;
}

std::vector<AgentRuntime> make_agents(const RunSettings& settings, std::uint64_t master_seed) {
    std::vector<AgentRuntime> agents;
    const int n = settings.scenario.n_agents;
    agents.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rng net_rng(derive_seed(master_seed, kStreamAgentNet + i));
        AgentRuntime a;
        a.policy = learner::make_policy(kFeatureDim, settings.learner.hidden, 2, net_rng,
                                        settings.learner.log_std_init);
        a.critic = learner::make_critic(kFeatureDim, settings.learner.hidden, 2, net_rng);
        if (settings.learner.target_network) a.target = a.critic;
        a.buffer = learner::ReplayBuffer(settings.learner.buffer_capacity);
        a.ou.theta = settings.learner.ou_theta;
        a.ou.sigma = settings.learner.ou_sigma;
        a.ou.dt = settings.scenario.dt;
        a.ou.reset(2);
        a.action_rng = Rng(derive_seed(master_seed, kStreamAgentAction + i));
        a.batch_rng = Rng(derive_seed(master_seed, kStreamAgentBatch + i));
        agents.push_back(std::move(a));
    }
    return agents;
}

EpisodeLog run_episode(WorldState& world, std::vector<AgentRuntime>& agents,
                       const RunSettings& settings, const EpisodeOptions& options) {
    const ScenarioConfig& sc = settings.scenario;
    const int n = sc.n_agents;
    EpisodeLog log;
    log.phi_sums.assign(n, 0.0);

    Rng credit_rng(derive_seed(sc.seed, kStreamCredit));
    ControlChannels channels = make_channels(sc.vehicle.wheelbase);

    for (auto& a : agents) a.ou.reset(2);

    // initial features from the freshly reset beliefs (or an initial reading)
    std::vector<Eigen::VectorXd> features(n);
    std::vector<Eigen::Vector4d> readings(n, Eigen::Vector4d::Zero());
    for (int i = 0; i < n; ++i) {
        if (settings.belief.use_particles) {
            features[i] = build_features(sc, world, i, world.beliefs[i]);
        } else {
            readings[i] = observe_own_state(sc, world, i, settings.belief.obs_noise_std);
            features[i] = build_features_raw(sc, world, i, readings[i]);
        }
    }

    double effort_sum = 0.0, effort_sq_sum = 0.0;
    long effort_count = 0;
    double entropy_sum = 0.0, lambda2_sum = 0.0;
    std::vector<Eigen::Vector2d> executed(n);
    std::vector<learner::ActionSample> samples(n);

    int t = 0;
    for (t = 0; t < sc.horizon && !world.done; ++t) {
        // act
        for (int i = 0; i < n; ++i) {
            auto& agent = agents[i];
            samples[i] = learner::policy_act(agent.policy, features[i],
                                             options.explore ? &agent.ou : nullptr,
                                             options.explore ? &agent.action_rng : nullptr,
                                             !options.explore);
            Eigen::Vector2d model_input(samples[i].action[0], samples[i].action[1]);
            if (settings.learner.feedback_linearization) {
                const Eigen::Vector4d estimate =
                    settings.belief.use_particles
                        ? Eigen::Vector4d(belief::weighted_mean(world.beliefs[i]))
                        : readings[i];
                model_input = virtual_to_model_input(channels, estimate, model_input,
                                                     &log.fl_singular_events);
            }
            executed[i] = clamp_to_executed(model_input, sc.vehicle.bounds);
            entropy_sum += learner::entropy(agent.policy, features[i]);
        }

        const WorldState snap = snapshot(world);
        const StepOutcome outcome = step(world, executed, sc, options.message_log);

        // belief propagation for the new tick
        std::vector<Eigen::VectorXd> next_features(n);
        for (int i = 0; i < n; ++i) {
            if (settings.belief.use_particles) {
                auto& b = world.beliefs[i];
                predict_own_belief(b, executed[i], sc.dt, sc.vehicle.wheelbase,
                                   settings.belief.process_noise_std, world.belief_rngs[i]);
                const Eigen::Vector4d z =
                    observe_own_state(sc, world, i, settings.belief.obs_noise_std);
                update_own_belief(b, z, settings.belief.obs_noise_std);
                b = belief::resample(b, world.belief_rngs[i]);
                next_features[i] = build_features(sc, world, i, b);
                world.estimates[i].head<4>() = belief::weighted_mean(b);
            } else {
                readings[i] = observe_own_state(sc, world, i, settings.belief.obs_noise_std);
                next_features[i] = build_features_raw(sc, world, i, readings[i]);
                world.estimates[i].head<4>() = readings[i];
            }
            world.estimates[i].tail<2>() = executed[i];
        }

        const std::vector<double> phi = compute_credit(settings, snap, executed,
                                                       outcome.global_reward, credit_rng,
                                                       &log.credit_fallback);

        // bookkeeping
        log.cumulative_reward += outcome.global_reward;
        log.msgs_sent += outcome.msgs_sent;
        log.msgs_dropped += outcome.msgs_dropped;
        if (outcome.collision) ++log.collision_count;
        const double l2 = comms::algebraic_connectivity(world.graph);
        lambda2_sum += l2;
        for (int i = 0; i < n; ++i) {
            log.phi_sums[i] += phi[i];
            const double effort = executed[i].norm();
            effort_sum += effort;
            effort_sq_sum += effort * effort;
            ++effort_count;
        }
        if (options.record_steps) {
            StepRecord rec;
            rec.tick = world.tick;
            rec.global_reward = outcome.global_reward;
            rec.phi = phi;
            rec.collisions = outcome.collision ? 1 : 0;
            rec.msgs_sent = outcome.msgs_sent;
            rec.msgs_dropped = outcome.msgs_dropped;
            rec.lambda2 = l2;
            log.steps.push_back(std::move(rec));
        }

        // store transitions and learn
        for (int i = 0; i < n; ++i) {
            auto& agent = agents[i];
            if (options.learn) {
                learner::Transition tr;
                tr.features = features[i];
                tr.action = samples[i].action;
                tr.shapley_reward = phi[i];
                tr.next_features = next_features[i];
                tr.done = world.done;
                agent.buffer.push(std::move(tr));

                const bool ready =
                    agent.buffer.size() >=
                        static_cast<std::size_t>(std::max(settings.learner.batch_size,
                                                          settings.learner.warmup_transitions)) &&
                    world.tick % settings.learner.update_interval == 0;
                if (ready) {
                    const auto batch = agent.buffer.sample(settings.learner.batch_size,
                                                           agent.batch_rng);
                    learner::td_update(agent.critic, batch, agent.policy,
                                       settings.learner.critic_lr, agent.critic_steps++,
                                       settings.learner.gamma, settings.learner.grad_clip,
                                       settings.learner.bootstrap,
                                       agent.target ? &*agent.target : nullptr);
                    learner::policy_update(
                        agent.policy,
                        [&agent](const Eigen::VectorXd& f, const Eigen::VectorXd& u) {
                            return learner::critic_value(agent.critic, f, u);
                        },
                        batch, settings.learner.actor_lr, agent.policy_steps++,
                        settings.learner.grad_clip);
                    if (agent.target) {
                        learner::polyak_update(agent.target->net, agent.critic.net,
                                               settings.learner.polyak);
                    }
                }
            }
        }
        features = std::move(next_features);
    }

    log.msgs_delivered = world.msgs_delivered;
    const int agent_steps = static_cast<int>(effort_count);
    if (agent_steps > 0) {
        const double mean = effort_sum / agent_steps;
        log.control_effort_variance =
            std::max(0.0, effort_sq_sum / agent_steps - mean * mean);
        log.mean_entropy = entropy_sum / agent_steps;
        log.mean_lambda2 = lambda2_sum / t;
    }
    return log;
}

TrainingRecord run_training(const RunSettings& settings, const TrainingConfig& training,
                            std::uint64_t master_seed, std::vector<AgentRuntime>& agents,
                            const std::filesystem::path* checkpoint_dir,
                            const std::string& config_hash) {
    TrainingRecord record;
    auto save = [&](const std::string& tag) {
        if (!checkpoint_dir) return;
        std::vector<learner::AgentCheckpoint> ckpts;
        for (const auto& a : agents) {
            ckpts.push_back({a.policy, a.critic, a.critic_steps, a.policy_steps});
        }
        const std::filesystem::path dir = *checkpoint_dir / tag;
        learner::save_checkpoint(dir, ckpts, config_hash);
        record.checkpoints.push_back(dir.string());
    };

    for (int ep = 1; ep <= training.episodes; ++ep) {
        RunSettings epi = settings;
        epi.scenario.seed = derive_seed(master_seed, kStreamEpisode + ep);
        WorldState world = reset(epi.scenario, epi.belief);
        EpisodeOptions opts;
        opts.learn = true;
        opts.explore = true;
        opts.record_steps = false;
        const EpisodeLog log = run_episode(world, agents, epi, opts);
        EpisodeRow row;
        row.episode = ep;
        row.eval = false;
        row.steps = world.tick;
        row.reward = log.cumulative_reward;
        row.collisions = log.collision_count;
        row.msgs_sent = log.msgs_sent;
        row.msgs_dropped = log.msgs_dropped;
        row.msgs_delivered = log.msgs_delivered;
        row.mean_entropy = log.mean_entropy;
        row.mean_lambda2 = log.mean_lambda2;
        row.phi_sums = log.phi_sums;
        record.rows.push_back(std::move(row));

        if (training.eval_interval > 0 && ep % training.eval_interval == 0) {
            for (int j = 0; j < training.eval_episodes; ++j) {
                RunSettings evs = settings;
                evs.scenario.seed = derive_seed(master_seed, kStreamEval + j);
                WorldState eval_world = reset(evs.scenario, evs.belief);
                EpisodeOptions eval_opts;
                eval_opts.learn = false;
                eval_opts.explore = false;
                eval_opts.record_steps = false;
                const EpisodeLog elog = run_episode(eval_world, agents, evs, eval_opts);
                EpisodeRow erow;
                erow.episode = ep;
                erow.eval = true;
                erow.steps = eval_world.tick;
                erow.reward = elog.cumulative_reward;
                erow.collisions = elog.collision_count;
                erow.msgs_sent = elog.msgs_sent;
                erow.msgs_dropped = elog.msgs_dropped;
                erow.msgs_delivered = elog.msgs_delivered;
                erow.mean_entropy = elog.mean_entropy;
                erow.mean_lambda2 = elog.mean_lambda2;
                erow.phi_sums = elog.phi_sums;
                record.rows.push_back(std::move(erow));
            }
        }
        if (checkpoint_dir && training.checkpoint_interval > 0 &&
            ep % training.checkpoint_interval == 0) {
            save("ckpt_" + std::to_string(ep));
        }
    }
    save("ckpt_final");
    return record;
}

namespace {

// One deterministic evaluation tick: features, mean actions, step, filter.
void eval_tick(const RunSettings& s, std::vector<AgentRuntime>& agents,
               ControlChannels& channels, WorldState& w) {
    const int n = s.scenario.n_agents;
    std::vector<Eigen::Vector2d> executed(n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd f;
        Eigen::Vector4d estimate;
        if (s.belief.use_particles) {
            f = build_features(s.scenario, w, i, w.beliefs[i]);
            estimate = belief::weighted_mean(w.beliefs[i]);
        } else {
            estimate = w.estimates[i].head<4>();
            f = build_features_raw(s.scenario, w, i, estimate);
        }
        const auto sample = learner::policy_act(agents[i].policy, f, nullptr, nullptr, true);
        Eigen::Vector2d model_input(sample.action[0], sample.action[1]);
        if (s.learner.feedback_linearization) {
            model_input = virtual_to_model_input(channels, estimate, model_input, nullptr);
        }
        executed[i] = clamp_to_executed(model_input, s.scenario.vehicle.bounds);
    }
    step(w, executed, s.scenario);
    for (int i = 0; i < n; ++i) {
        if (s.belief.use_particles) {
            auto& b = w.beliefs[i];
            predict_own_belief(b, executed[i], s.scenario.dt, s.scenario.vehicle.wheelbase,
                               s.belief.process_noise_std, w.belief_rngs[i]);
            const Eigen::Vector4d z = observe_own_state(s.scenario, w, i, s.belief.obs_noise_std);
            update_own_belief(b, z, s.belief.obs_noise_std);
            b = belief::resample(b, w.belief_rngs[i]);
            w.estimates[i].head<4>() = belief::weighted_mean(b);
        } else {
            w.estimates[i].head<4>() = observe_own_state(s.scenario, w, i, s.belief.obs_noise_std);
        }
        w.estimates[i].tail<2>() = executed[i];
    }
}

}  // namespace

std::vector<std::vector<Eigen::Vector2d>> eval_positions(const RunSettings& settings,
                                                         std::vector<AgentRuntime>& agents,
                                                         std::uint64_t seed) {
    RunSettings s = settings;
    s.scenario.seed = seed;
    ControlChannels channels = make_channels(s.scenario.vehicle.wheelbase);
    WorldState w = reset(s.scenario, s.belief);
    std::vector<std::vector<Eigen::Vector2d>> positions;
    while (!w.done && w.tick < s.scenario.horizon) {
        eval_tick(s, agents, channels, w);
        std::vector<Eigen::Vector2d> row;
        row.reserve(s.scenario.n_agents);
        for (const auto& v : w.vehicles) row.push_back(v.position);
        positions.push_back(std::move(row));
    }
    return positions;
}

double closed_loop_stability(const RunSettings& settings, std::vector<AgentRuntime>& agents,
                             std::uint64_t seed, int n_steps, double delta0,
                             int renorm_interval) {
    RunSettings s = settings;
    s.scenario.seed = seed;
    s.scenario.horizon = n_steps + 1;
    ControlChannels channels = make_channels(s.scenario.vehicle.wheelbase);
    const int n = s.scenario.n_agents;

    WorldState nominal = reset(s.scenario, s.belief);
    WorldState perturbed = nominal;
    perturbed.vehicles[0].position.x() += delta0;

    auto act_and_step = [&](WorldState& w) { eval_tick(s, agents, channels, w); };

    auto stacked = [&](const WorldState& w) {
        Eigen::VectorXd x(4 * n);
        for (int i = 0; i < n; ++i) x.segment<4>(4 * i) = w.vehicles[i].to_vector();
        return x;
    };

    double log_sum = 0.0;
    int k;
    for (k = 0; k < n_steps; ++k) {
        act_and_step(nominal);
        act_and_step(perturbed);
        if ((k + 1) % renorm_interval == 0) {
            const Eigen::VectorXd xn = stacked(nominal);
            const Eigen::VectorXd xp = stacked(perturbed);
            const double d = (xp - xn).norm();
            if (d > 0.0) {
                log_sum += std::log(d / delta0);
                const Eigen::VectorXd renorm = xn + (delta0 / d) * (xp - xn);
                for (int i = 0; i < n; ++i) {
                    const Eigen::Vector4d xi = renorm.segment<4>(4 * i);
                    perturbed.vehicles[i] =
                        dynamics::VehicleState::from_vector(xi, perturbed.vehicles[i].yaw_rate);
                }
            }
        }
    }
    const double time = k * s.scenario.dt;
    return time > 0.0 ? log_sum / time : 0.0;
}

}  // namespace marlcc::env
