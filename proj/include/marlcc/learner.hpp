#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "marlcc/rng.hpp"

namespace marlcc::learner {

/// Fully connected network with rectifier hidden layers and identity output.
struct Mlp {
    std::vector<Eigen::MatrixXd> weights;  // layer l: out_l x in_l
    std::vector<Eigen::VectorXd> biases;

    int input_dim() const { return static_cast<int>(weights.front().cols()); }
    int output_dim() const { return static_cast<int>(weights.back().rows()); }
    std::vector<int> layer_sizes() const;
    Eigen::Index parameter_count() const;
};

struct MlpGrads {
    std::vector<Eigen::MatrixXd> d_weights;
    std::vector<Eigen::VectorXd> d_biases;
};

/// Per-layer activations kept from a forward pass for backprop.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;          // input to each layer (batch columns)
    std::vector<Eigen::MatrixXd> preactivations;  // W x + b per layer
};

Mlp make_mlp(const std::vector<int>& sizes, Rng& rng);

Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::VectorXd& x);
/// Batch forward; columns are samples.
Eigen::MatrixXd mlp_forward_batch(const Mlp& net, const Eigen::MatrixXd& x,
                                  ForwardCache* cache = nullptr);
/// Reverse-mode gradients of sum_b <upstream_b, y_b> wrt parameters and input.
MlpGrads mlp_backward(const Mlp& net, const ForwardCache& cache,
                      const Eigen::MatrixXd& upstream, Eigen::MatrixXd* d_input = nullptr);

MlpGrads zero_grads(const Mlp& net);
void scale_grads(MlpGrads& grads, double factor);
double grad_norm(const MlpGrads& grads);
/// Scales the gradient down when its global norm exceeds max_norm.
void clip_grads(MlpGrads& grads, double max_norm);
void apply_grads(Mlp& net, const MlpGrads& grads, double step);

/// Flattened parameter access, used by checkpoints and finite differences.
Eigen::VectorXd flatten_parameters(const Mlp& net);
void unflatten_parameters(Mlp& net, const Eigen::VectorXd& theta);

/// Step-size schedule: constant or Robbins-Monro a / (b + k).
struct StepSchedule {
    enum class Kind { Constant, RobbinsMonro } kind = Kind::Constant;
    double a = 1e-3;
    double b = 1.0;

    static StepSchedule constant(double value) { return {Kind::Constant, value, 0.0}; }
    static StepSchedule robbins_monro(double a, double b) {
        return {Kind::RobbinsMonro, a, b};
    }
    double value(long k) const {
        return kind == Kind::Constant ? a : a / (b + static_cast<double>(k));
    }
};

/// Ornstein-Uhlenbeck exploration noise (Euler-Maruyama discretization).
struct OUNoise {
    double theta = 0.15;
    double sigma = 0.2;
    double dt = 0.1;
    Eigen::VectorXd state;

    void reset(int dim) { state = Eigen::VectorXd::Zero(dim); }
    Eigen::VectorXd sample(Rng& rng) {
        state += theta * (-state) * dt + sigma * std::sqrt(dt) * rng.normal_vector(state.size());
        return state;
    }
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// Diagonal Gaussian policy over virtual controls.
struct GaussianPolicy {
    Mlp mean_net;
    Eigen::VectorXd log_std;  // clamped to [kLogStdMin, kLogStdMax]

    int action_dim() const { return mean_net.output_dim(); }
};

GaussianPolicy make_policy(int feature_dim, const std::vector<int>& hidden, int action_dim,
                           Rng& rng, double log_std_init = -0.7);

struct ActionSample {
    Eigen::VectorXd action;
    Eigen::VectorXd gaussian_action;  // before OU is added
    double log_prob = 0.0;            // of the Gaussian component
};

/// Stochastic mode: mean + std * eps + OU state. Deterministic mode: mean.
ActionSample policy_act(const GaussianPolicy& policy, const Eigen::VectorXd& features,
                        OUNoise* noise, Rng* rng, bool deterministic);

/// Closed-form diagonal Gaussian entropy: sum_d (0.5 ln(2 pi e) + log_std_d).
/// The feature argument is kept for interface symmetry; the variance is
/// state independent.
double entropy(const GaussianPolicy& policy, const Eigen::VectorXd& features);

/// Q-network on concatenated (features, action).
struct Critic {
    Mlp net;
};

Critic make_critic(int feature_dim, const std::vector<int>& hidden, int action_dim, Rng& rng);

double critic_value(const Critic& critic, const Eigen::VectorXd& features,
                    const Eigen::VectorXd& action);

/// One replay record.
struct Transition {
    Eigen::VectorXd features;
    Eigen::VectorXd action;
    double shapley_reward = 0.0;
    Eigen::VectorXd next_features;
    bool done = false;
};

/// Fixed-capacity FIFO ring with uniform sampling (without replacement
/// within one batch).
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void push(Transition t);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t logical_index) const;  // 0 = oldest
    std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // insertion point once full
    std::vector<Transition> data_;
};

enum class BootstrapMode { Mean, MaxSample };

struct TdResult {
    double mean_abs_td_error = 0.0;
};

/// One gradient step on the mean squared TD error with target
/// y = phi + gamma (1-done) Q(b', u'), u' chosen by the bootstrap mode
/// (policy mean, or max over mean +/- sigma probes). Targets carry no
/// gradient. `step` indexes the schedule.
TdResult td_update(Critic& critic, const std::vector<const Transition*>& batch,
                   const GaussianPolicy& policy, const StepSchedule& alpha, long step,
                   double gamma, double grad_clip = 10.0,
                   BootstrapMode bootstrap = BootstrapMode::Mean,
                   const Critic* target_critic = nullptr);

using QFunction = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Ascent step along grad log pi(u|b) * A with A = Q(b,u) - Q(b, mean(b)).
/// The advantage is a constant during differentiation.
void policy_update(GaussianPolicy& policy, const QFunction& q,
                   const std::vector<const Transition*>& batch, const StepSchedule& beta,
                   long step, double grad_clip = 10.0);

/// Tabular MDP for the contraction oracle. transition[a] is |S| x |S|
/// row stochastic; reward(s, a).
struct TabularMdp {
    std::vector<Eigen::MatrixXd> transition;
    Eigen::MatrixXd reward;
    double gamma = 0.9;
};

/// Exact Bellman optimality backup (TV)(s) = max_a [r(s,a) + gamma sum P V].
Eigen::VectorXd bellman_operator_oracle(const TabularMdp& mdp, const Eigen::VectorXd& v);

/// Polyak-averaged copy: target <- tau * target + (1 - tau) * online.
void polyak_update(Mlp& target, const Mlp& online, double tau);

}  // namespace marlcc::learner
