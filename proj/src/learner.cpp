#include "marlcc/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "marlcc/error.hpp"

namespace marlcc::learner {

namespace {

constexpr double kHalfLog2PiE = 1.4189385332046727;  // 0.5 * ln(2 pi e)

Eigen::VectorXd concat(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd out(a.size() + b.size());
    out << a, b;
    return out;
}

}  // namespace

std::vector<int> Mlp::layer_sizes() const {
    std::vector<int> sizes;
    sizes.push_back(input_dim());
    for (const auto& w : weights) sizes.push_back(static_cast<int>(w.rows()));
    return sizes;
}

Eigen::Index Mlp::parameter_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

Mlp make_mlp(const std::vector<int>& sizes, Rng& rng) {
    if (sizes.size() < 2) throw ShapeError("an MLP needs at least input and output sizes");
    Mlp net;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        const double scale = std::sqrt(2.0 / fan_in);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) w(r, c) = scale * rng.normal();
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return net;
}

Eigen::MatrixXd mlp_forward_batch(const Mlp& net, const Eigen::MatrixXd& x, ForwardCache* cache) {
    if (x.rows() != net.input_dim()) {
        throw ShapeError("mlp_forward: input has " + std::to_string(x.rows()) +
                         " rows, network expects " + std::to_string(net.input_dim()));
    }
    Eigen::MatrixXd h = x;
    if (cache) {
        cache->inputs.clear();
        cache->preactivations.clear();
    }
    const std::size_t last = net.weights.size() - 1;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        if (cache) cache->inputs.push_back(h);
        Eigen::MatrixXd z = (net.weights[l] * h).colwise() + net.biases[l];
        if (cache) cache->preactivations.push_back(z);
        h = (l == last) ? z : z.cwiseMax(0.0);
    }
    return h;
}

Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::VectorXd& x) {
    return mlp_forward_batch(net, x);
}

MlpGrads mlp_backward(const Mlp& net, const ForwardCache& cache, const Eigen::MatrixXd& upstream,
                      Eigen::MatrixXd* d_input) {
    MlpGrads grads = zero_grads(net);
    Eigen::MatrixXd delta = upstream;
    for (int l = static_cast<int>(net.weights.size()) - 1; l >= 0; --l) {
        if (l != static_cast<int>(net.weights.size()) - 1) {
            // rectifier mask: gradient is zero where the preactivation was <= 0
            delta = delta.cwiseProduct(
                (cache.preactivations[l].array() > 0.0).cast<double>().matrix());
        }
        grads.d_weights[l].noalias() = delta * cache.inputs[l].transpose();
        grads.d_biases[l] = delta.rowwise().sum();
        if (l > 0 || d_input) {
            Eigen::MatrixXd next = net.weights[l].transpose() * delta;
            if (l == 0) {
                if (d_input) *d_input = next;
            } else {
                delta = std::move(next);
            }
        }
    }
    return grads;
}

MlpGrads zero_grads(const Mlp& net) {
    MlpGrads g;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.d_weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.d_biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return g;
}

void scale_grads(MlpGrads& grads, double factor) {
    for (auto& w : grads.d_weights) w *= factor;
    for (auto& b : grads.d_biases) b *= factor;
}

double grad_norm(const MlpGrads& grads) {
    double sq = 0.0;
    for (const auto& w : grads.d_weights) sq += w.squaredNorm();
    for (const auto& b : grads.d_biases) sq += b.squaredNorm();
    return std::sqrt(sq);
}

void clip_grads(MlpGrads& grads, double max_norm) {
    const double norm = grad_norm(grads);
    if (norm > max_norm && norm > 0.0) scale_grads(grads, max_norm / norm);
}

void apply_grads(Mlp& net, const MlpGrads& grads, double step) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        net.weights[l] += step * grads.d_weights[l];
        net.biases[l] += step * grads.d_biases[l];
    }
}

Eigen::VectorXd flatten_parameters(const Mlp& net) {
    Eigen::VectorXd theta(net.parameter_count());
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const auto& w = net.weights[l];
        theta.segment(pos, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
        pos += w.size();
        theta.segment(pos, net.biases[l].size()) = net.biases[l];
        pos += net.biases[l].size();
    }
    return theta;
}

void unflatten_parameters(Mlp& net, const Eigen::VectorXd& theta) {
    if (theta.size() != net.parameter_count()) {
        throw ShapeError("parameter vector size does not match the network layout");
    }
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        auto& w = net.weights[l];
        Eigen::Map<Eigen::VectorXd>(w.data(), w.size()) = theta.segment(pos, w.size());
        pos += w.size();
        net.biases[l] = theta.segment(pos, net.biases[l].size());
        pos += net.biases[l].size();
    }
}

GaussianPolicy make_policy(int feature_dim, const std::vector<int>& hidden, int action_dim,
                           Rng& rng, double log_std_init) {
    std::vector<int> sizes{feature_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(action_dim);
    GaussianPolicy p;
    p.mean_net = make_mlp(sizes, rng);
    p.log_std = Eigen::VectorXd::Constant(
        action_dim, std::clamp(log_std_init, kLogStdMin, kLogStdMax));
    return p;
}

ActionSample policy_act(const GaussianPolicy& policy, const Eigen::VectorXd& features,
                        OUNoise* noise, Rng* rng, bool deterministic) {
    ActionSample s;
    const Eigen::VectorXd mean = mlp_forward(policy.mean_net, features);
    const Eigen::VectorXd std_dev = policy.log_std.array().exp();
    if (deterministic || rng == nullptr) {
        s.gaussian_action = mean;
        s.action = mean;
    } else {
        s.gaussian_action = mean + std_dev.cwiseProduct(rng->normal_vector(mean.size()));
        s.action = s.gaussian_action;
        if (noise) {
            if (noise->state.size() != mean.size()) noise->reset(static_cast<int>(mean.size()));
            s.action += noise->sample(*rng);
        }
    }
    double logp = 0.0;
    for (Eigen::Index d = 0; d < mean.size(); ++d) {
        const double z = (s.gaussian_action[d] - mean[d]) / std_dev[d];
        logp += -0.5 * z * z - policy.log_std[d] - 0.5 * std::log(2.0 * M_PI);
    }
    s.log_prob = logp;
    return s;
}

double entropy(const GaussianPolicy& policy, const Eigen::VectorXd&) {
    return policy.log_std.size() * kHalfLog2PiE + policy.log_std.sum();
}

Critic make_critic(int feature_dim, const std::vector<int>& hidden, int action_dim, Rng& rng) {
    std::vector<int> sizes{feature_dim + action_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    return Critic{make_mlp(sizes, rng)};
}

double critic_value(const Critic& critic, const Eigen::VectorXd& features,
                    const Eigen::VectorXd& action) {
    return mlp_forward(critic.net, concat(features, action))[0];
}

void ReplayBuffer::push(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[head_] = std::move(t);
        head_ = (head_ + 1) % capacity_;
    }
}

const Transition& ReplayBuffer::at(std::size_t logical_index) const {
    return data_[(head_ + logical_index) % data_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
    const std::size_t n = data_.size();
    std::vector<const Transition*> out;
    if (n == 0) return out;
    if (batch >= n) {
        out.reserve(n);
        for (const auto& t : data_) out.push_back(&t);
        return out;
    }
    // Floyd's algorithm: `batch` distinct indices out of n.
    std::vector<std::size_t> picked;
    picked.reserve(batch);
    for (std::size_t j = n - batch; j < n; ++j) {
        std::size_t idx = rng.uniform_int(j + 1);
        bool seen = false;
        for (std::size_t p : picked) {
            if (p == idx) {
                seen = true;
                break;
            }
        }
        picked.push_back(seen ? j : idx);
    }
    out.reserve(batch);
    for (std::size_t p : picked) out.push_back(&data_[p]);
    return out;
}

namespace {

Eigen::VectorXd bootstrap_action(const GaussianPolicy& policy, const Critic& critic,
                                 const Eigen::VectorXd& next_features, BootstrapMode mode) {
    const Eigen::VectorXd mean = mlp_forward(policy.mean_net, next_features);
    if (mode == BootstrapMode::Mean) return mean;
    // Max over deterministic sigma probes: mean and mean +/- sigma per dim.
    const Eigen::VectorXd std_dev = policy.log_std.array().exp();
    Eigen::VectorXd best = mean;
    double best_q = critic_value(critic, next_features, mean);
    for (Eigen::Index d = 0; d < mean.size(); ++d) {
        for (double sign : {-1.0, 1.0}) {
            Eigen::VectorXd candidate = mean;
            candidate[d] += sign * std_dev[d];
            const double q = critic_value(critic, next_features, candidate);
            if (q > best_q) {
                best_q = q;
                best = candidate;
            }
        }
    }
    return best;
}

}  // namespace

TdResult td_update(Critic& critic, const std::vector<const Transition*>& batch,
                   const GaussianPolicy& policy, const StepSchedule& alpha, long step,
                   double gamma, double grad_clip, BootstrapMode bootstrap,
                   const Critic* target_critic) {
    if (batch.empty()) throw ShapeError("td_update requires a nonempty batch");
    const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
    const int fdim = static_cast<int>(batch[0]->features.size());
    const int adim = static_cast<int>(batch[0]->action.size());
    const Critic& bootstrap_critic = target_critic ? *target_critic : critic;

    Eigen::MatrixXd inputs(fdim + adim, b);
    Eigen::VectorXd targets(b);
    for (Eigen::Index k = 0; k < b; ++k) {
        const Transition& t = *batch[k];
        inputs.col(k) = concat(t.features, t.action);
        double target = t.shapley_reward;
        if (!t.done) {
            const Eigen::VectorXd u_next =
                bootstrap_action(policy, bootstrap_critic, t.next_features, bootstrap);
            target += gamma * critic_value(bootstrap_critic, t.next_features, u_next);
        }
        targets[k] = target;
    }

    ForwardCache cache;
    const Eigen::MatrixXd q = mlp_forward_batch(critic.net, inputs, &cache);
    const Eigen::VectorXd td_error = targets - q.row(0).transpose();
    // d/dtheta mean((q - y)^2) = mean(2 (q - y) dq/dtheta)
    Eigen::MatrixXd upstream = (2.0 / static_cast<double>(b)) * (-td_error).transpose();
    MlpGrads grads = mlp_backward(critic.net, cache, upstream);
    clip_grads(grads, grad_clip);
    apply_grads(critic.net, grads, -alpha.value(step));

    return TdResult{td_error.cwiseAbs().mean()};
}

void policy_update(GaussianPolicy& policy, const QFunction& q,
                   const std::vector<const Transition*>& batch, const StepSchedule& beta,
                   long step, double grad_clip) {
    if (batch.empty()) throw ShapeError("policy_update requires a nonempty batch");
    const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
    const int fdim = static_cast<int>(batch[0]->features.size());
    const int adim = static_cast<int>(batch[0]->action.size());

    Eigen::MatrixXd features(fdim, b);
    for (Eigen::Index k = 0; k < b; ++k) features.col(k) = batch[k]->features;

    ForwardCache cache;
    const Eigen::MatrixXd means = mlp_forward_batch(policy.mean_net, features, &cache);
    const Eigen::VectorXd variance = (2.0 * policy.log_std).array().exp();

    Eigen::MatrixXd upstream(adim, b);
    Eigen::VectorXd d_log_std = Eigen::VectorXd::Zero(adim);
    for (Eigen::Index k = 0; k < b; ++k) {
        const Transition& t = *batch[k];
        const double advantage = q(t.features, t.action) - q(t.features, means.col(k));
        const Eigen::VectorXd diff = t.action - means.col(k);
        // grad_mean log pi = (u - mu) / sigma^2
        upstream.col(k) = advantage / static_cast<double>(b) * diff.cwiseQuotient(variance);
        // grad_logstd log pi = (u - mu)^2 / sigma^2 - 1
        d_log_std += advantage / static_cast<double>(b) *
                     (diff.array().square() / variance.array() - 1.0).matrix();
    }
    MlpGrads grads = mlp_backward(policy.mean_net, cache, upstream);
    const double total_norm =
        std::sqrt(grad_norm(grads) * grad_norm(grads) + d_log_std.squaredNorm());
    if (total_norm > grad_clip && total_norm > 0.0) {
        scale_grads(grads, grad_clip / total_norm);
        d_log_std *= grad_clip / total_norm;
    }
    apply_grads(policy.mean_net, grads, beta.value(step));
    policy.log_std += beta.value(step) * d_log_std;
    policy.log_std = policy.log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

Eigen::VectorXd bellman_operator_oracle(const TabularMdp& mdp, const Eigen::VectorXd& v) {
    const int n_states = static_cast<int>(mdp.reward.rows());
    const int n_actions = static_cast<int>(mdp.reward.cols());
    if (n_states > 50 || n_actions > 50) {
        throw SizeError("bellman_operator_oracle is for tabular problems (|S|, |A| <= 50)");
    }
    Eigen::VectorXd out(n_states);
    for (int s = 0; s < n_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < n_actions; ++a) {
            const double q = mdp.reward(s, a) + mdp.gamma * mdp.transition[a].row(s).dot(v);
            best = std::max(best, q);
        }
        out[s] = best;
    }
    return out;
}

void polyak_update(Mlp& target, const Mlp& online, double tau) {
    for (std::size_t l = 0; l < target.weights.size(); ++l) {
        target.weights[l] = tau * target.weights[l] + (1.0 - tau) * online.weights[l];
        target.biases[l] = tau * target.biases[l] + (1.0 - tau) * online.biases[l];
    }
}

}  // namespace marlcc::learner
