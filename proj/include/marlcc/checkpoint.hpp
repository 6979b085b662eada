#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "marlcc/learner.hpp"

namespace marlcc::learner {

/// Everything one agent needs to resume: policy, critic, update counters.
struct AgentCheckpoint {
    GaussianPolicy policy;
    Critic critic;
    long critic_steps = 0;
    long policy_steps = 0;
};

/// On-disk layout: <dir>/manifest.json plus one flat little-endian f64 blob
/// per network (actor_<i>.bin, log_std_<i>.bin, critic_<i>.bin). Round-trips
/// are bit exact.
void save_checkpoint(const std::filesystem::path& dir,
                     const std::vector<AgentCheckpoint>& agents,
                     const std::string& config_hash);

struct LoadedCheckpoint {
    std::vector<AgentCheckpoint> agents;
    std::string config_hash;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace marlcc::learner
