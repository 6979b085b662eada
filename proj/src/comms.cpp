#include "marlcc/comms.hpp"

#include <algorithm>
#include <cmath>

#include "marlcc/error.hpp"

namespace marlcc::comms {

CommGraph build_graph(const std::vector<Eigen::Vector2d>& positions, double radius) {
    const int n = static_cast<int>(positions.size());
    CommGraph g;
    g.n_agents = n;
    g.adjacency = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if ((positions[i] - positions[j]).norm() <= radius) {
                g.adjacency(i, j) = 1.0;
                g.adjacency(j, i) = 1.0;
            }
        }
    }
    return g;
}

Eigen::MatrixXd metropolis_weights(const CommGraph& graph) {
    const int n = graph.n_agents;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd deg(n);
    for (int i = 0; i < n; ++i) deg[i] = graph.adjacency.row(i).sum();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != j && graph.adjacency(i, j) != 0.0) {
                w(i, j) = 1.0 / (1.0 + std::max(deg[i], deg[j]));
            }
        }
        w(i, i) = 1.0 - w.row(i).sum();
    }
    return w;
}

Message transmit(Message msg, const ChannelModel& channel, Rng& rng) {
    if (rng.uniform() < channel.loss_probability) {
        msg.dropped = true;
        msg.deliver_time = msg.send_time;
        return msg;
    }
    double delay = rng.normal(channel.delay_mean, channel.delay_std);
    while (delay < 0.0 || delay > channel.delay_max) {
        delay = rng.normal(channel.delay_mean, channel.delay_std);
    }
    msg.dropped = false;
    msg.deliver_time = msg.send_time + delay;
    return msg;
}

std::vector<Message> deliver_due(std::vector<Message>& mailbox, double now) {
    auto order = [](const Message& a, const Message& b) {
        if (a.deliver_time != b.deliver_time) return a.deliver_time < b.deliver_time;
        if (a.sender != b.sender) return a.sender < b.sender;
        return a.send_time < b.send_time;
    };
    std::vector<Message> due;
    std::vector<Message> rest;
    rest.reserve(mailbox.size());
    for (auto& m : mailbox) {
        if (!m.dropped && m.deliver_time <= now) {
            due.push_back(std::move(m));
        } else {
            rest.push_back(std::move(m));
        }
    }
    std::sort(due.begin(), due.end(), order);
    mailbox = std::move(rest);
    return due;
}

double algebraic_connectivity(const CommGraph& graph) {
    const int n = graph.n_agents;
    if (n <= 1) return 0.0;
    Eigen::MatrixXd lap = -graph.adjacency;
    for (int i = 0; i < n; ++i) lap(i, i) = graph.adjacency.row(i).sum();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap, Eigen::EigenvaluesOnly);
    const double l2 = es.eigenvalues()[1];
    return l2 > 1e-10 ? l2 : 0.0;
}

int component_count(const CommGraph& graph) {
    const int n = graph.n_agents;
    std::vector<int> label(n, -1);
    int count = 0;
    for (int s = 0; s < n; ++s) {
        if (label[s] >= 0) continue;
        std::vector<int> stack{s};
        label[s] = count;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int j = 0; j < n; ++j) {
                if (label[j] < 0 && graph.adjacency(v, j) != 0.0) {
                    label[j] = count;
                    stack.push_back(j);
                }
            }
        }
        ++count;
    }
    return count;
}

int quantize_delay_ticks(double delay, double dt) {
    if (delay <= 0.0) return 0;
    return static_cast<int>(std::ceil(delay / dt - 1e-12));
}

}  // namespace marlcc::comms
