#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "marlcc/rng.hpp"

namespace marlcc::comms {

/// Time-varying communication graph over the fleet.
struct CommGraph {
    int n_agents = 0;
    Eigen::MatrixXd adjacency;  // symmetric 0/1, zero diagonal
    Eigen::MatrixXd weights;    // row-stochastic fusion weights (may be empty)

    std::vector<int> neighbors(int i) const {
        std::vector<int> out;
        for (int j = 0; j < n_agents; ++j) {
            if (j != i && adjacency(i, j) != 0.0) out.push_back(j);
        }
        return out;
    }
    int degree(int i) const { return static_cast<int>(adjacency.row(i).sum()); }
};

/// Delay/loss model of the V2V channel.
struct ChannelModel {
    double delay_mean = 0.050;      // s
    double delay_std = 0.010;       // s
    double delay_max = 0.100;       // truncation bound; samples outside [0, delay_max] are redrawn
    double loss_probability = 0.05;
};

enum class PayloadKind : std::uint8_t { Observation, StateEstimate, IntendedAction };

struct Message {
    int sender = -1;
    int recipient = -1;
    PayloadKind kind = PayloadKind::StateEstimate;
    Eigen::VectorXd payload;
    double send_time = 0.0;
    double deliver_time = 0.0;
    bool dropped = false;
};

/// Edge (i, j) iff ||p_i - p_j|| <= radius (closed ball), i != j.
CommGraph build_graph(const std::vector<Eigen::Vector2d>& positions, double radius);

/// Metropolis weights: w_ij = 1 / (1 + max(d_i, d_j)) on edges,
/// w_ii = 1 - sum_j w_ij. Symmetric and doubly stochastic.
Eigen::MatrixXd metropolis_weights(const CommGraph& graph);

/// Samples loss and truncated-Gaussian delay; resamples delays outside
/// [0, delay_max] so the truncation does not bias the mean.
Message transmit(Message msg, const ChannelModel& channel, Rng& rng);

/// Removes and returns all messages with deliver_time <= now, ordered by
/// (deliver_time, sender, send_time). Dropped messages are never delivered.
std::vector<Message> deliver_due(std::vector<Message>& mailbox, double now);

/// Second-smallest eigenvalue of the unweighted Laplacian L = D - A.
/// Zero (up to tolerance) for disconnected graphs; defined as 0 for n = 1.
double algebraic_connectivity(const CommGraph& graph);

/// Number of connected components by traversal; the brute-force
/// counterpart of algebraic_connectivity > 0.
int component_count(const CommGraph& graph);

/// Number of whole simulation ticks a delayed message occupies: ceil(delay/dt).
int quantize_delay_ticks(double delay, double dt);

}  // namespace marlcc::comms
