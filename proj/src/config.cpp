#include "marlcc/config.hpp"

#include <fstream>
#include <set>

#include "marlcc/error.hpp"

namespace marlcc::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config key '" + path + "': " + what);
}

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

void reject_unknown(const json& j, const std::string& path,
                    const std::set<std::string>& known) {
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) fail(path + "." + key, "unknown key");
    }
}

double get_number(const json& j, const std::string& path, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) fail(path + "." + key, "expected a number");
    return j[key].get<double>();
}

int get_int(const json& j, const std::string& path, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) fail(path + "." + key, "expected an integer");
    return j[key].get<int>();
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) fail(path + "." + key, "expected a boolean");
    return j[key].get<bool>();
}

std::string get_string(const json& j, const std::string& path, const char* key,
                       const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) fail(path + "." + key, "expected a string");
    return j[key].get<std::string>();
}

Eigen::Vector4d get_vec4(const json& j, const std::string& path, const char* key,
                         const Eigen::Vector4d& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_array() || j[key].size() != 4) {
        fail(path + "." + key, "expected an array of 4 numbers");
    }
    Eigen::Vector4d out;
    for (int d = 0; d < 4; ++d) {
        if (!j[key][d].is_number()) fail(path + "." + key, "expected an array of 4 numbers");
        out[d] = j[key][d].get<double>();
    }
    return out;
}

learner::StepSchedule parse_schedule(const json& j, const std::string& path,
                                     const learner::StepSchedule& fallback) {
    if (j.is_null()) return fallback;
    expect_object(j, path);
    reject_unknown(j, path, {"kind", "value", "a", "b"});
    const std::string kind = get_string(j, path, "kind", "constant");
    if (kind == "constant") {
        return learner::StepSchedule::constant(get_number(j, path, "value", fallback.a));
    }
    if (kind == "robbins-monro") {
        const double a = get_number(j, path, "a", 1.0);
        const double b = get_number(j, path, "b", 1.0);
        if (!(a > 0.0) || !(b > 0.0)) fail(path, "robbins-monro requires a > 0 and b > 0");
        return learner::StepSchedule::robbins_monro(a, b);
    }
    fail(path + ".kind", "expected 'constant' or 'robbins-monro'");
}

json schedule_json(const learner::StepSchedule& s) {
    json j;
    if (s.kind == learner::StepSchedule::Kind::Constant) {
        j["kind"] = "constant";
        j["value"] = s.a;
    } else {
        j["kind"] = "robbins-monro";
        j["a"] = s.a;
        j["b"] = s.b;
    }
    return j;
}

json vec4_json(const Eigen::Vector4d& v) { return json::array({v[0], v[1], v[2], v[3]}); }

}  // namespace

ExperimentConfig parse(const json& doc) {
    expect_object(doc, "$");
    reject_unknown(doc, "$",
                   {"schema_version", "scenario", "channel", "belief", "credit", "learner",
                    "training", "seeds", "output_dir"});
    ExperimentConfig c;
    const int version = get_int(doc, "$", "schema_version", kSchemaVersion);
    if (version != kSchemaVersion) {
        fail("$.schema_version", "unsupported version " + std::to_string(version));
    }

    if (doc.contains("scenario")) {
        const json& s = doc["scenario"];
        const std::string path = "$.scenario";
        expect_object(s, path);
        reject_unknown(s, path,
                       {"kind", "n_agents", "horizon", "dt", "initial_spacing", "lane_width",
                        "approach_distance", "merge_point", "position_jitter", "init_speed_min",
                        "init_speed_max", "comm_radius", "process_noise_std", "vehicle",
                        "reward"});
        auto& sc = c.run.scenario;
        sc.kind = env::scenario_from_name(get_string(s, path, "kind", "platoon"));
        sc.n_agents = get_int(s, path, "n_agents", sc.n_agents);
        sc.horizon = get_int(s, path, "horizon", sc.horizon);
        sc.dt = get_number(s, path, "dt", sc.dt);
        sc.initial_spacing = get_number(s, path, "initial_spacing", sc.initial_spacing);
        sc.lane_width = get_number(s, path, "lane_width", sc.lane_width);
        sc.approach_distance = get_number(s, path, "approach_distance", sc.approach_distance);
        sc.merge_point = get_number(s, path, "merge_point", sc.merge_point);
        sc.position_jitter = get_number(s, path, "position_jitter", sc.position_jitter);
        sc.init_speed_min = get_number(s, path, "init_speed_min", sc.init_speed_min);
        sc.init_speed_max = get_number(s, path, "init_speed_max", sc.init_speed_max);
        sc.comm_radius = get_number(s, path, "comm_radius", sc.comm_radius);
        sc.process_noise_std = get_vec4(s, path, "process_noise_std", sc.process_noise_std);
        if (sc.n_agents < 1) fail(path + ".n_agents", "must be >= 1");
        if (sc.n_agents > 31) fail(path + ".n_agents", "must be <= 31");
        if (!(sc.dt > 0.0)) fail(path + ".dt", "must be positive");
        if (sc.horizon < 0) fail(path + ".horizon", "must be >= 0");
        if (!(sc.comm_radius > 0.0)) fail(path + ".comm_radius", "must be positive");
        if (sc.init_speed_max < sc.init_speed_min) {
            fail(path + ".init_speed_max", "must be >= init_speed_min");
        }
        if (s.contains("vehicle")) {
            const json& v = s["vehicle"];
            const std::string vp = path + ".vehicle";
            expect_object(v, vp);
            reject_unknown(v, vp, {"wheelbase", "v_max", "accel_min", "accel_max", "steer_max"});
            sc.vehicle.wheelbase = get_number(v, vp, "wheelbase", sc.vehicle.wheelbase);
            sc.vehicle.v_max = get_number(v, vp, "v_max", sc.vehicle.v_max);
            sc.vehicle.bounds.accel_min = get_number(v, vp, "accel_min",
                                                     sc.vehicle.bounds.accel_min);
            sc.vehicle.bounds.accel_max = get_number(v, vp, "accel_max",
                                                     sc.vehicle.bounds.accel_max);
            sc.vehicle.bounds.steer_max = get_number(v, vp, "steer_max",
                                                     sc.vehicle.bounds.steer_max);
            if (!(sc.vehicle.wheelbase > 0.0)) fail(vp + ".wheelbase", "must be positive");
            if (!(sc.vehicle.v_max > 0.0)) fail(vp + ".v_max", "must be positive");
            if (sc.vehicle.bounds.accel_min > sc.vehicle.bounds.accel_max) {
                fail(vp + ".accel_min", "must be <= accel_max");
            }
            if (!(sc.vehicle.bounds.steer_max > 0.0)) fail(vp + ".steer_max", "must be positive");
        }
        if (s.contains("reward")) {
            const json& r = s["reward"];
            const std::string rp = path + ".reward";
            expect_object(r, rp);
            reject_unknown(r, rp,
                           {"fuel_c0", "fuel_c1", "fuel_c2", "safety_distance", "safety_weight",
                            "headway_target", "headway_weight", "throughput_bonus", "merge_bonus",
                            "collision_radius", "collision_penalty"});
            auto& rw = sc.reward;
            rw.fuel_c0 = get_number(r, rp, "fuel_c0", rw.fuel_c0);
            rw.fuel_c1 = get_number(r, rp, "fuel_c1", rw.fuel_c1);
            rw.fuel_c2 = get_number(r, rp, "fuel_c2", rw.fuel_c2);
            rw.safety_distance = get_number(r, rp, "safety_distance", rw.safety_distance);
            rw.safety_weight = get_number(r, rp, "safety_weight", rw.safety_weight);
            rw.headway_target = get_number(r, rp, "headway_target", rw.headway_target);
            rw.headway_weight = get_number(r, rp, "headway_weight", rw.headway_weight);
            rw.throughput_bonus = get_number(r, rp, "throughput_bonus", rw.throughput_bonus);
            rw.merge_bonus = get_number(r, rp, "merge_bonus", rw.merge_bonus);
            rw.collision_radius = get_number(r, rp, "collision_radius", rw.collision_radius);
            rw.collision_penalty = get_number(r, rp, "collision_penalty", rw.collision_penalty);
            if (!(rw.safety_distance > 0.0)) fail(rp + ".safety_distance", "must be positive");
        }
    }

    if (doc.contains("channel")) {
        const json& ch = doc["channel"];
        const std::string path = "$.channel";
        expect_object(ch, path);
        reject_unknown(ch, path, {"delay_mean", "delay_std", "delay_max", "loss_probability"});
        auto& cm = c.run.scenario.channel;
        cm.delay_mean = get_number(ch, path, "delay_mean", cm.delay_mean);
        cm.delay_std = get_number(ch, path, "delay_std", cm.delay_std);
        cm.delay_max = get_number(ch, path, "delay_max", cm.delay_max);
        cm.loss_probability = get_number(ch, path, "loss_probability", cm.loss_probability);
        if (cm.delay_mean < 0.0) fail(path + ".delay_mean", "must be >= 0");
        if (cm.delay_std < 0.0) fail(path + ".delay_std", "must be >= 0");
        if (!(cm.delay_max >= 0.0)) fail(path + ".delay_max", "must be >= 0");
        if (cm.loss_probability < 0.0 || cm.loss_probability >= 1.0) {
            fail(path + ".loss_probability", "must be in [0, 1)");
        }
    }

    if (doc.contains("belief")) {
        const json& b = doc["belief"];
        const std::string path = "$.belief";
        expect_object(b, path);
        reject_unknown(b, path,
                       {"n_particles", "mode", "init_std", "process_noise_std", "obs_noise_std"});
        auto& bp = c.run.belief;
        bp.n_particles = get_int(b, path, "n_particles", bp.n_particles);
        const std::string mode = get_string(b, path, "mode", "particle");
        if (mode == "particle") {
            bp.use_particles = true;
        } else if (mode == "raw") {
            bp.use_particles = false;
        } else {
            fail(path + ".mode", "expected 'particle' or 'raw'");
        }
        bp.init_std = get_vec4(b, path, "init_std", bp.init_std);
        bp.process_noise_std = get_vec4(b, path, "process_noise_std", bp.process_noise_std);
        bp.obs_noise_std = get_vec4(b, path, "obs_noise_std", bp.obs_noise_std);
        if (bp.n_particles < 1) fail(path + ".n_particles", "must be >= 1");
        if (bp.obs_noise_std.minCoeff() <= 0.0) {
            fail(path + ".obs_noise_std", "entries must be positive");
        }
    }

    if (doc.contains("credit")) {
        const json& cr = doc["credit"];
        const std::string path = "$.credit";
        expect_object(cr, path);
        reject_unknown(cr, path, {"method", "mc_permutations"});
        c.run.credit.method =
            env::credit_method_from_name(get_string(cr, path, "method", "auto"));
        c.run.credit.mc_permutations =
            get_int(cr, path, "mc_permutations", c.run.credit.mc_permutations);
        if (c.run.credit.mc_permutations < 1) fail(path + ".mc_permutations", "must be >= 1");
    }

    if (doc.contains("learner")) {
        const json& l = doc["learner"];
        const std::string path = "$.learner";
        expect_object(l, path);
        reject_unknown(l, path,
                       {"hidden", "gamma", "critic_lr", "actor_lr", "buffer_capacity",
                        "batch_size", "update_interval", "warmup_transitions", "grad_clip",
                        "ou_theta", "ou_sigma", "log_std_init", "bootstrap", "target_network",
                        "polyak", "feedback_linearization"});
        auto& lc = c.run.learner;
        if (l.contains("hidden")) {
            if (!l["hidden"].is_array()) fail(path + ".hidden", "expected an array of integers");
            lc.hidden.clear();
            for (const auto& h : l["hidden"]) {
                if (!h.is_number_integer() || h.get<int>() < 1) {
                    fail(path + ".hidden", "expected positive integers");
                }
                lc.hidden.push_back(h.get<int>());
            }
        }
        lc.gamma = get_number(l, path, "gamma", lc.gamma);
        if (!(lc.gamma > 0.0) || !(lc.gamma < 1.0)) fail(path + ".gamma", "must be in (0, 1)");
        lc.critic_lr = parse_schedule(l.contains("critic_lr") ? l["critic_lr"] : json(),
                                      path + ".critic_lr", lc.critic_lr);
        lc.actor_lr = parse_schedule(l.contains("actor_lr") ? l["actor_lr"] : json(),
                                     path + ".actor_lr", lc.actor_lr);
        lc.buffer_capacity = static_cast<std::size_t>(
            get_int(l, path, "buffer_capacity", static_cast<int>(lc.buffer_capacity)));
        lc.batch_size = get_int(l, path, "batch_size", lc.batch_size);
        lc.update_interval = get_int(l, path, "update_interval", lc.update_interval);
        lc.warmup_transitions = get_int(l, path, "warmup_transitions", lc.warmup_transitions);
        lc.grad_clip = get_number(l, path, "grad_clip", lc.grad_clip);
        lc.ou_theta = get_number(l, path, "ou_theta", lc.ou_theta);
        lc.ou_sigma = get_number(l, path, "ou_sigma", lc.ou_sigma);
        lc.log_std_init = get_number(l, path, "log_std_init", lc.log_std_init);
        const std::string bs = get_string(l, path, "bootstrap", "mean");
        if (bs == "mean") {
            lc.bootstrap = learner::BootstrapMode::Mean;
        } else if (bs == "max-sample") {
            lc.bootstrap = learner::BootstrapMode::MaxSample;
        } else {
            fail(path + ".bootstrap", "expected 'mean' or 'max-sample'");
        }
        lc.target_network = get_bool(l, path, "target_network", lc.target_network);
        lc.polyak = get_number(l, path, "polyak", lc.polyak);
        lc.feedback_linearization =
            get_bool(l, path, "feedback_linearization", lc.feedback_linearization);
        if (lc.batch_size < 1) fail(path + ".batch_size", "must be >= 1");
        if (lc.update_interval < 1) fail(path + ".update_interval", "must be >= 1");
        if (lc.buffer_capacity < 1) fail(path + ".buffer_capacity", "must be >= 1");
        if (!(lc.grad_clip > 0.0)) fail(path + ".grad_clip", "must be positive");
        if (lc.polyak < 0.0 || lc.polyak >= 1.0) fail(path + ".polyak", "must be in [0, 1)");
    }

    if (doc.contains("training")) {
        const json& t = doc["training"];
        const std::string path = "$.training";
        expect_object(t, path);
        reject_unknown(t, path,
                       {"episodes", "eval_interval", "eval_episodes", "checkpoint_interval"});
        c.training.episodes = get_int(t, path, "episodes", c.training.episodes);
        c.training.eval_interval = get_int(t, path, "eval_interval", c.training.eval_interval);
        c.training.eval_episodes = get_int(t, path, "eval_episodes", c.training.eval_episodes);
        c.training.checkpoint_interval =
            get_int(t, path, "checkpoint_interval", c.training.checkpoint_interval);
        if (c.training.episodes < 0) fail(path + ".episodes", "must be >= 0");
        if (c.training.eval_interval < 0) fail(path + ".eval_interval", "must be >= 0");
        if (c.training.eval_episodes < 0) fail(path + ".eval_episodes", "must be >= 0");
        if (c.training.checkpoint_interval < 0) {
            fail(path + ".checkpoint_interval", "must be >= 0");
        }
    }

    if (doc.contains("seeds")) {
        if (!doc["seeds"].is_array() || doc["seeds"].empty()) {
            fail("$.seeds", "expected a nonempty array of integers");
        }
        c.seeds.clear();
        for (const auto& s : doc["seeds"]) {
            if (!s.is_number_integer() || s.get<long long>() < 0) {
                fail("$.seeds", "expected nonnegative integers");
            }
            c.seeds.push_back(s.get<std::uint64_t>());
        }
    }
    c.output_dir = get_string(doc, "$", "output_dir", c.output_dir);
    return c;
}

ExperimentConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse(doc);
}

nlohmann::json serialize(const ExperimentConfig& c) {
    const auto& sc = c.run.scenario;
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["scenario"] = {
        {"kind", env::scenario_name(sc.kind)},
        {"n_agents", sc.n_agents},
        {"horizon", sc.horizon},
        {"dt", sc.dt},
        {"initial_spacing", sc.initial_spacing},
        {"lane_width", sc.lane_width},
        {"approach_distance", sc.approach_distance},
        {"merge_point", sc.merge_point},
        {"position_jitter", sc.position_jitter},
        {"init_speed_min", sc.init_speed_min},
        {"init_speed_max", sc.init_speed_max},
        {"comm_radius", sc.comm_radius},
        {"process_noise_std", vec4_json(sc.process_noise_std)},
        {"vehicle",
         {{"wheelbase", sc.vehicle.wheelbase},
          {"v_max", sc.vehicle.v_max},
          {"accel_min", sc.vehicle.bounds.accel_min},
          {"accel_max", sc.vehicle.bounds.accel_max},
          {"steer_max", sc.vehicle.bounds.steer_max}}},
        {"reward",
         {{"fuel_c0", sc.reward.fuel_c0},
          {"fuel_c1", sc.reward.fuel_c1},
          {"fuel_c2", sc.reward.fuel_c2},
          {"safety_distance", sc.reward.safety_distance},
          {"safety_weight", sc.reward.safety_weight},
          {"headway_target", sc.reward.headway_target},
          {"headway_weight", sc.reward.headway_weight},
          {"throughput_bonus", sc.reward.throughput_bonus},
          {"merge_bonus", sc.reward.merge_bonus},
          {"collision_radius", sc.reward.collision_radius},
          {"collision_penalty", sc.reward.collision_penalty}}}};
    doc["channel"] = {{"delay_mean", sc.channel.delay_mean},
                      {"delay_std", sc.channel.delay_std},
                      {"delay_max", sc.channel.delay_max},
                      {"loss_probability", sc.channel.loss_probability}};
    const auto& bp = c.run.belief;
    doc["belief"] = {{"n_particles", bp.n_particles},
                     {"mode", bp.use_particles ? "particle" : "raw"},
                     {"init_std", vec4_json(bp.init_std)},
                     {"process_noise_std", vec4_json(bp.process_noise_std)},
                     {"obs_noise_std", vec4_json(bp.obs_noise_std)}};
    doc["credit"] = {{"method", env::credit_method_name(c.run.credit.method)},
                     {"mc_permutations", c.run.credit.mc_permutations}};
    const auto& lc = c.run.learner;
    doc["learner"] = {{"hidden", lc.hidden},
                      {"gamma", lc.gamma},
                      {"critic_lr", schedule_json(lc.critic_lr)},
                      {"actor_lr", schedule_json(lc.actor_lr)},
                      {"buffer_capacity", lc.buffer_capacity},
                      {"batch_size", lc.batch_size},
                      {"update_interval", lc.update_interval},
                      {"warmup_transitions", lc.warmup_transitions},
                      {"grad_clip", lc.grad_clip},
                      {"ou_theta", lc.ou_theta},
                      {"ou_sigma", lc.ou_sigma},
                      {"log_std_init", lc.log_std_init},
                      {"bootstrap",
                       lc.bootstrap == learner::BootstrapMode::Mean ? "mean" : "max-sample"},
                      {"target_network", lc.target_network},
                      {"polyak", lc.polyak},
                      {"feedback_linearization", lc.feedback_linearization}};
    doc["training"] = {{"episodes", c.training.episodes},
                       {"eval_interval", c.training.eval_interval},
                       {"eval_episodes", c.training.eval_episodes},
                       {"checkpoint_interval", c.training.checkpoint_interval}};
    doc["seeds"] = c.seeds;
    doc["output_dir"] = c.output_dir;
    return doc;
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string dump = serialize(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace marlcc::config
