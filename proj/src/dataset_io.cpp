#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "sad/dataset.hpp"
#include "sad/error.hpp"

namespace sad {

using nlohmann::json;

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::SAD: return "SAD";
        case Method::AD: return "AD";
        case Method::DPT_random: return "DPT_random";
        case Method::DIT: return "DIT";
    }
    return "?";
}

Method parse_method(std::string_view s) {
    for (Method m : {Method::SAD, Method::AD, Method::DPT_random, Method::DIT}) {
        if (s == to_string(m)) {
            return m;
        }
    }
    throw Error(Errc::config_invalid, "unknown method '" + std::string(s) + "'");
}

namespace {

json state_json(const StateVec& s) { return json(std::vector<double>(s.begin(), s.end())); }

StateVec state_from(const json& j) {
    StateVec s(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        s[i] = j[i].get<double>();
    }
    return s;
}

RewardKind parse_reward_kind(const std::string& s) {
    for (RewardKind k : {RewardKind::dense, RewardKind::sparse, RewardKind::bandit}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw Error(Errc::io, "unknown reward kind '" + s + "'");
}

json header_json(const Dataset& d) {
    const DatagenConfig& c = d.config;
    json cfg = {{"method", to_string(c.method)},
                {"trust_horizon", c.trust_horizon},
                {"context_len", c.context_len},
                {"gamma", c.gamma},
                {"dataset_size", c.dataset_size},
                {"dit_temperature", c.dit_temperature},
                {"ad_episodes", c.ad_episodes},
                {"max_resamples", c.max_resamples}};
    const EnvSpec& e = d.env_spec;
    json spec = {{"state_dim", e.state_dim},
                 {"num_actions", e.num_actions},
                 {"horizon", e.horizon},
                 {"reward_kind", to_string(e.reward_kind)},
                 {"env_family", e.env_family},
                 {"state_scale", e.state_scale}};
    return json{{"record", "header"},
                {"datagen_config", cfg},
                {"env_spec", spec},
                {"split", to_string(d.split)},
                {"master_seed", d.master_seed},
                {"config_hash", d.config_hash},
                {"num_samples", d.samples.size()}};
}

json sample_json(const PretrainSample& s) {
    json ctx = json::array();
    for (const Transition& t : s.context.transitions) {
        ctx.push_back(json::array({state_json(t.state), t.action.index, t.reward, state_json(t.next_state)}));
    }
    return json{{"context", std::move(ctx)},
                {"query_state", state_json(s.query_state)},
                {"action_label", s.action_label.index},
                {"weight", s.weight},
                {"env_tag", s.env_tag},
                {"method", to_string(s.method)},
                {"seed", s.seed}};
}

void read_header(const json& h, Dataset& d) {
    if (h.value("record", "") != "header") {
        throw Error(Errc::io, "dataset does not start with a header record");
    }
    const json& c = h.at("datagen_config");
    d.config.method = parse_method(c.at("method").get<std::string>());
    d.config.trust_horizon = c.at("trust_horizon").get<int>();
    d.config.context_len = c.at("context_len").get<int>();
    d.config.gamma = c.at("gamma").get<double>();
    d.config.dataset_size = c.at("dataset_size").get<std::int64_t>();
    d.config.dit_temperature = c.at("dit_temperature").get<double>();
    d.config.ad_episodes = c.at("ad_episodes").get<int>();
    d.config.max_resamples = c.at("max_resamples").get<std::int64_t>();
    const json& e = h.at("env_spec");
    d.env_spec.state_dim = e.at("state_dim").get<int>();
    d.env_spec.num_actions = e.at("num_actions").get<int>();
    d.env_spec.horizon = e.at("horizon").get<int>();
    d.env_spec.reward_kind = parse_reward_kind(e.at("reward_kind").get<std::string>());
    d.env_spec.env_family = e.at("env_family").get<std::string>();
    d.env_spec.state_scale = e.at("state_scale").get<std::vector<double>>();
    d.split = parse_split(h.at("split").get<std::string>());
    d.master_seed = h.at("master_seed").get<std::uint64_t>();
    d.config_hash = h.at("config_hash").get<std::string>();
}

PretrainSample read_sample(const json& j) {
    PretrainSample s;
    for (const json& t : j.at("context")) {
        s.context.transitions.push_back(
            Transition{state_from(t.at(0)), ActionId{t.at(1).get<int>()}, t.at(2).get<double>(), state_from(t.at(3))});
    }
    s.query_state = state_from(j.at("query_state"));
    s.action_label = ActionId{j.at("action_label").get<int>()};
    s.weight = j.at("weight").get<double>();
    s.env_tag = j.at("env_tag").get<std::string>();
    s.method = parse_method(j.at("method").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

void write_lines(const Dataset& d, std::ostream& out) {
    out << header_json(d).dump() << '\n';
    for (const PretrainSample& s : d.samples) {
        out << sample_json(s).dump() << '\n';
    }
}

Dataset read_lines(std::istream& in) {
    Dataset d;
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(Errc::io, "empty dataset file");
    }
    try {
        read_header(json::parse(line), d);
        while (std::getline(in, line)) {
            if (!line.empty()) {
                d.samples.push_back(read_sample(json::parse(line)));
            }
        }
    } catch (const json::exception& e) {
        throw Error(Errc::io, std::string("malformed dataset record: ") + e.what());
    }
    return d;
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Errc::io, "cannot write " + path.string());
    }
    write_lines(dataset, out);
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::missing_artifact, path.string());
    }
    return read_lines(in);
}

std::string dataset_to_string(const Dataset& dataset) {
    std::ostringstream out;
    write_lines(dataset, out);
    return out.str();
}

Dataset dataset_from_string(std::string_view text) {
    std::istringstream in{std::string(text)};
    return read_lines(in);
}

}  // namespace sad
