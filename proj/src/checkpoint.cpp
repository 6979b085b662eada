#include "marlcc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "marlcc/error.hpp"

namespace marlcc::learner {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little endian; byte swapping is not implemented");

void write_blob(const std::filesystem::path& path, const Eigen::VectorXd& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint blob " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
}

Eigen::VectorXd read_blob(const std::filesystem::path& path, Eigen::Index expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read checkpoint blob " + path.string());
    Eigen::VectorXd data(expected);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(expected * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(expected * sizeof(double))) {
        throw ConfigError("checkpoint blob " + path.string() + " is truncated");
    }
    return data;
}

nlohmann::json sizes_json(const Mlp& net) { return net.layer_sizes(); }

Mlp mlp_from_sizes(const std::vector<int>& sizes) {
    Mlp net;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        net.weights.push_back(Eigen::MatrixXd::Zero(sizes[l + 1], sizes[l]));
        net.biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
    }
    return net;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir,
                     const std::vector<AgentCheckpoint>& agents,
                     const std::string& config_hash) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "marlcc-checkpoint";
    manifest["version"] = 1;
    manifest["config_hash"] = config_hash;
    manifest["n_agents"] = agents.size();
    nlohmann::json agents_json = nlohmann::json::array();
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto& a = agents[i];
        nlohmann::json aj;
        aj["actor_sizes"] = sizes_json(a.policy.mean_net);
        aj["critic_sizes"] = sizes_json(a.critic.net);
        aj["action_dim"] = a.policy.log_std.size();
        aj["critic_steps"] = a.critic_steps;
        aj["policy_steps"] = a.policy_steps;
        agents_json.push_back(aj);
        write_blob(dir / ("actor_" + std::to_string(i) + ".bin"),
                   flatten_parameters(a.policy.mean_net));
        write_blob(dir / ("log_std_" + std::to_string(i) + ".bin"), a.policy.log_std);
        write_blob(dir / ("critic_" + std::to_string(i) + ".bin"),
                   flatten_parameters(a.critic.net));
    }
    manifest["agents"] = agents_json;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw ConfigError("cannot write checkpoint manifest in " + dir.string());
    out << manifest.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ConfigError("missing checkpoint manifest " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed checkpoint manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "marlcc-checkpoint") {
        throw ConfigError(dir.string() + " is not a marlcc checkpoint");
    }
    LoadedCheckpoint loaded;
    loaded.config_hash = manifest.value("config_hash", "");
    for (std::size_t i = 0; i < manifest["agents"].size(); ++i) {
        const auto& aj = manifest["agents"][i];
        AgentCheckpoint a;
        a.policy.mean_net = mlp_from_sizes(aj["actor_sizes"].get<std::vector<int>>());
        a.critic.net = mlp_from_sizes(aj["critic_sizes"].get<std::vector<int>>());
        const Eigen::Index adim = aj["action_dim"].get<Eigen::Index>();
        unflatten_parameters(a.policy.mean_net,
                             read_blob(dir / ("actor_" + std::to_string(i) + ".bin"),
                                       a.policy.mean_net.parameter_count()));
        a.policy.log_std = read_blob(dir / ("log_std_" + std::to_string(i) + ".bin"), adim);
        unflatten_parameters(a.critic.net,
                             read_blob(dir / ("critic_" + std::to_string(i) + ".bin"),
                                       a.critic.net.parameter_count()));
        a.critic_steps = aj["critic_steps"].get<long>();
        a.policy_steps = aj["policy_steps"].get<long>();
        loaded.agents.push_back(std::move(a));
    }
    return loaded;
}

}  // namespace marlcc::learner
