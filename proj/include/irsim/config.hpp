#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "irsim/agent.hpp"
#include "irsim/presets.hpp"

namespace irsim {

/// Full description of a reproducible experiment campaign.
struct ExperimentConfig {
    EnvConfig env;
    AgentConfig agent;
    std::vector<Variant> variants{Variant::D3qn, Variant::DoubleOnly, Variant::DuelingOnly};
    std::vector<int> scheme_elements{8, 4};  // IRS sizes compared under d3qn
    bool include_no_irs = true;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int episodes = 500;
    int eval_episodes = 12;  // greedy episodes averaged into the reported sum-rate
    std::string output_dir = "out";

    void validate() const {
        env.validate();
        agent.validate();
        if (seeds.empty()) throw std::invalid_argument("config: need at least one seed");
        if (episodes < 1) throw std::invalid_argument("config: need at least one episode");
        if (eval_episodes < 1) throw std::invalid_argument("config: need at least one eval episode");
        for (int k : scheme_elements) {
            if (k < 1 || env.irs.subsurfaces < 1 || k % env.irs.subsurfaces != 0)
                throw std::invalid_argument(
                    "config: scheme element counts must be positive multiples of the "
                    "sub-surface count");
        }
    }
};

/// Small fast-running campaign; channel numbers are tuned so a handful of IRS
/// elements moves the needle at room scale.
inline ExperimentConfig desk_preset() {
    ExperimentConfig cfg;
    cfg.env.world = desk_world();
    cfg.env.channel.ref_loss = 1.0;      // reflections carry real power at arm's length
    cfg.env.channel.exp_ap_robot = 4.5;  // heavily cluttered direct link
    cfg.env.channel.exp_irs_robot = 2.0;
    cfg.env.channel.exp_ap_irs = 2.0;
    cfg.env.channel.noise_power = dbm_to_watts(-10.0);  // scaled so rates sit in single digits
    cfg.env.channel.wavelength = 0.125;
    cfg.env.irs = {8, 2, 2, 2, 0.03125};  // two 2x2 sub-surfaces, quarter-wave pitch
    cfg.env.robots = 2;
    cfg.env.power_budget = 0.1;            // 20 dBm
    cfg.env.qos_rate = 0.2;
    cfg.env.phase_bits = 2;
    cfg.env.power_levels = 4;
    cfg.env.max_steps = 70;

    cfg.agent.hidden = {64, 64};
    cfg.agent.minibatch = 32;
    cfg.agent.train_every = 2;
    cfg.agent.replay_capacity = 10000;  // a recent-experience window learns faster here
    cfg.agent.td_clip = 2000.0;
    cfg.scheme_elements = {8, 4};
    cfg.episodes = 800;
    return cfg;
}

/// Room-scale setup mirroring the published scenario; expect hours, not
/// minutes.
inline ExperimentConfig paper_preset() {
    ExperimentConfig cfg;
    cfg.env.world = paper_world();
    cfg.env.channel.ref_loss = 1e-3;       // -30 dB at 1 m
    cfg.env.channel.exp_ap_robot = 3.0;
    cfg.env.channel.exp_irs_robot = 2.4;
    cfg.env.channel.exp_ap_irs = 2.2;
    cfg.env.channel.noise_power = 1e-11;   // -80 dBm
    cfg.env.channel.wavelength = 0.125;
    cfg.env.irs = {30, 10, 3, 1, 0.0625};
    cfg.env.robots = 3;
    cfg.env.power_budget = 0.1;
    cfg.env.qos_rate = 0.1;
    cfg.env.phase_bits = 2;
    cfg.env.power_levels = 4;
    cfg.env.max_steps = 120;

    cfg.agent.hidden = {128, 128};
    cfg.agent.minibatch = 64;
    cfg.agent.train_every = 1;
    cfg.agent.td_clip = 2000.0;
    cfg.scheme_elements = {30, 10};
    cfg.episodes = 2000;
    return cfg;
}

inline ExperimentConfig preset_by_name(const std::string& name) {
    if (name == "desk") return desk_preset();
    if (name == "paper") return paper_preset();
    throw std::invalid_argument("unknown preset: " + name);
}

namespace cfgdetail {

using nlohmann::json;

inline Variant variant_from_string(const std::string& s) {
    if (s == "d3qn") return Variant::D3qn;
    if (s == "double") return Variant::DoubleOnly;
    if (s == "dueling") return Variant::DuelingOnly;
    throw std::invalid_argument("unknown variant: " + s);
}

inline Vec3 vec3_from(const json& j) {
    if (!j.is_array() || j.size() != 3)
        throw std::invalid_argument("config: expected [x, y, z] triple");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline void apply_world(const json& j, WorldModel& w) {
    if (j.contains("room")) w.room = vec3_from(j["room"]);
    if (j.contains("ap")) w.ap_pos = vec3_from(j["ap"]);
    if (j.contains("irs")) w.irs_pos = vec3_from(j["irs"]);
    if (j.contains("robot_height")) w.robot_height = j["robot_height"].get<double>();
    if (j.contains("resolution")) w.grid_resolution = j["resolution"].get<double>();
    if (j.contains("velocity")) w.robot_velocity = j["velocity"].get<double>();
    if (j.contains("obstacles")) {
        w.obstacles.clear();
        for (const auto& ob : j["obstacles"])
            w.obstacles.push_back({vec3_from(ob.at("min")), vec3_from(ob.at("max"))});
    }
}

inline void apply_channel(const json& j, ChannelParams& c) {
    if (j.contains("ref_loss")) c.ref_loss = j["ref_loss"].get<double>();
    if (j.contains("ref_loss_db")) c.ref_loss = db_to_linear(j["ref_loss_db"].get<double>());
    if (j.contains("exp_ap_robot")) c.exp_ap_robot = j["exp_ap_robot"].get<double>();
    if (j.contains("exp_irs_robot")) c.exp_irs_robot = j["exp_irs_robot"].get<double>();
    if (j.contains("exp_ap_irs")) c.exp_ap_irs = j["exp_ap_irs"].get<double>();
    if (j.contains("noise")) c.noise_power = j["noise"].get<double>();
    if (j.contains("noise_dbm")) c.noise_power = dbm_to_watts(j["noise_dbm"].get<double>());
    if (j.contains("wavelength")) c.wavelength = j["wavelength"].get<double>();
    double los = c.rician_ap_robot.los;
    double blocked = c.rician_ap_robot.blocked;
    if (j.contains("rician_los_db")) los = db_to_linear(j["rician_los_db"].get<double>());
    if (j.contains("rician_los")) los = j["rician_los"].get<double>();
    if (j.contains("rician_blocked")) blocked = j["rician_blocked"].get<double>();
    c.rician_ap_robot = c.rician_irs_robot = c.rician_ap_irs = {los, blocked};
}

inline void apply_irs(const json& j, IrsConfig& irs) {
    if (j.contains("elements")) irs.elements = j["elements"].get<int>();
    if (j.contains("subsurfaces")) irs.subsurfaces = j["subsurfaces"].get<int>();
    if (j.contains("sub_h")) irs.sub_h = j["sub_h"].get<int>();
    if (j.contains("sub_v")) irs.sub_v = j["sub_v"].get<int>();
    if (j.contains("spacing")) irs.spacing = j["spacing"].get<double>();
}

inline void apply_agent(const json& j, AgentConfig& a) {
    if (j.contains("discount")) a.discount = j["discount"].get<double>();
    if (j.contains("learning_rate")) a.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("eps_start")) a.eps_start = j["eps_start"].get<double>();
    if (j.contains("eps_end")) a.eps_end = j["eps_end"].get<double>();
    if (j.contains("eps_decay")) a.eps_decay = j["eps_decay"].get<double>();
    if (j.contains("target_sync")) a.target_sync_period = j["target_sync"].get<int>();
    if (j.contains("replay_capacity")) a.replay_capacity = j["replay_capacity"].get<int>();
    if (j.contains("minibatch")) a.minibatch = j["minibatch"].get<int>();
    if (j.contains("train_every")) a.train_every = j["train_every"].get<int>();
    if (j.contains("td_clip")) a.td_clip = j["td_clip"].get<double>();
    if (j.contains("hidden")) a.hidden = j["hidden"].get<std::vector<int>>();
    if (j.contains("reward_scale")) a.reward.scale = j["reward_scale"].get<double>();
    if (j.contains("qos_penalty")) a.reward.qos_penalty = j["qos_penalty"].get<double>();
    if (j.contains("invalid_move_penalty"))
        a.reward.invalid_move_penalty = j["invalid_move_penalty"].get<double>();
    if (j.contains("flat_actions")) a.flat_actions = j["flat_actions"].get<bool>();
}

inline void apply_run(const json& j, ExperimentConfig& cfg) {
    if (j.contains("robots")) cfg.env.robots = j["robots"].get<int>();
    if (j.contains("power")) cfg.env.power_budget = j["power"].get<double>();
    if (j.contains("power_dbm")) cfg.env.power_budget = dbm_to_watts(j["power_dbm"].get<double>());
    if (j.contains("qos_rate")) cfg.env.qos_rate = j["qos_rate"].get<double>();
    if (j.contains("phase_bits")) cfg.env.phase_bits = j["phase_bits"].get<int>();
    if (j.contains("power_levels")) cfg.env.power_levels = j["power_levels"].get<int>();
    if (j.contains("power_steps")) cfg.env.power_steps = j["power_steps"].get<int>();
    if (j.contains("power_order"))
        cfg.env.power_order = j["power_order"].get<std::string>() == "conventional"
                                  ? PowerOrderMode::Conventional
                                  : PowerOrderMode::AsPaper;
    if (j.contains("max_steps")) cfg.env.max_steps = j["max_steps"].get<int>();
    if (j.contains("freeze_channel")) cfg.env.freeze_channel = j["freeze_channel"].get<bool>();
    if (j.contains("episodes")) cfg.episodes = j["episodes"].get<int>();
    if (j.contains("eval_episodes")) cfg.eval_episodes = j["eval_episodes"].get<int>();
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("variants")) {
        cfg.variants.clear();
        for (const auto& v : j["variants"])
            cfg.variants.push_back(variant_from_string(v.get<std::string>()));
    }
    if (j.contains("scheme_elements"))
        cfg.scheme_elements = j["scheme_elements"].get<std::vector<int>>();
    if (j.contains("include_no_irs")) cfg.include_no_irs = j["include_no_irs"].get<bool>();
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
}

}  // namespace cfgdetail

/// Overlay a JSON document on top of a base config (usually a preset).
inline ExperimentConfig apply_json(ExperimentConfig cfg, const nlohmann::json& j) {
    using namespace cfgdetail;
    if (j.contains("world")) apply_world(j["world"], cfg.env.world);
    if (j.contains("channel")) apply_channel(j["channel"], cfg.env.channel);
    if (j.contains("irs")) apply_irs(j["irs"], cfg.env.irs);
    if (j.contains("agent")) apply_agent(j["agent"], cfg.agent);
    if (j.contains("run")) apply_run(j["run"], cfg);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return apply_json(std::move(base), j);
}

}  // namespace irsim
