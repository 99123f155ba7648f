#include "sad/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "sad/checkpoint.hpp"
#include "sad/datagen.hpp"
#include "sad/error.hpp"
#include "sad/hash.hpp"
#include "sad/oracle.hpp"

namespace sad {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
    if (!is_registered(family)) {
        throw Error(Errc::unknown_family, family);
    }
    if (!eval_family.empty() && !is_registered(eval_family)) {
        throw Error(Errc::unknown_family, eval_family);
    }
    if (runs < 1) {
        throw Error(Errc::config_invalid, "runs must be >= 1");
    }
    model.validate();
    if (model.max_context < datagen.context_len) {
        throw Error(Errc::config_invalid, "model.max_context must be >= datagen.context_len");
    }
    train.validate();
    eval.validate();
}

ExperimentConfig default_config(std::string_view family) {
    ExperimentConfig c;
    c.family = std::string(family);
    const EnvSpec spec = family_spec(family);
    switch (spec.reward_kind) {
        case RewardKind::bandit:
            c.datagen.trust_horizon = 1000;
            c.datagen.context_len = 100;
            c.datagen.dataset_size = 20000;
            break;
        case RewardKind::sparse:
            c.datagen.trust_horizon = spec.horizon;
            c.datagen.context_len = spec.horizon;
            c.datagen.dataset_size = 10000;
            break;
        case RewardKind::dense:
            c.datagen.trust_horizon = 10;
            c.datagen.context_len = spec.horizon;
            c.datagen.dataset_size = 10000;
            break;
    }
    c.model = model::make_model_config(spec, c.datagen.context_len);
    // Desk-scale budget: a few epochs over a 20k bandit set, more passes over
    // the smaller grid sets. Grids need the larger step to leave the initial
    // loss plateau in time.
    c.train.lr = spec.reward_kind == RewardKind::bandit ? 1e-3 : 2e-3;
    c.train.epochs = spec.reward_kind == RewardKind::bandit ? 3 : 20;
    if (spec.reward_kind == RewardKind::sparse) {
        c.ablate_values = {2, spec.horizon / 5, spec.horizon / 2, spec.horizon};
    } else if (spec.reward_kind == RewardKind::bandit) {
        c.ablate_values = {10, 100, 1000};
    } else {
        c.ablate_values = {0, 5, 10, spec.horizon};
    }
    return c;
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(Errc::config_invalid, what); }

template <typename T>
T as(const json& j, const std::string& key) {
    try {
        if constexpr (std::is_integral_v<T>) {
            if (!j.is_number_integer()) {
                bad("'" + key + "' must be an integer");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!j.is_number()) {
                bad("'" + key + "' must be a number");
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!j.is_string()) {
                bad("'" + key + "' must be a string");
            }
        }
        return j.get<T>();
    } catch (const json::exception&) {
        bad("'" + key + "' has the wrong type");
    }
}

std::vector<int> int_list(const json& j, const std::string& key) {
    if (!j.is_array()) {
        bad("'" + key + "' must be a list of integers");
    }
    std::vector<int> out;
    for (const json& v : j) {
        out.push_back(as<int>(v, key));
    }
    return out;
}

template <typename F>
void each_key(const json& obj, const std::string& section, F&& apply) {
    if (!obj.is_object()) {
        bad("'" + section + "' must be an object");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!apply(it.key(), it.value())) {
            bad("unknown key '" + (section.empty() ? "" : section + ".") + it.key() + "'");
        }
    }
}

json to_json(const ExperimentConfig& c, bool for_hash) {
    const DatagenConfig& d = c.datagen;
    json methods = json::array();
    for (Method m : c.compare_methods) {
        methods.push_back(to_string(m));
    }
    json train = {{"lr", c.train.lr},
                  {"beta1", c.train.beta1},
                  {"beta2", c.train.beta2},
                  {"eps", c.train.eps},
                  {"batch_size", c.train.batch_size},
                  {"epochs", c.train.epochs},
                  {"shuffle_seed", c.train.shuffle_seed},
                  {"init_seed", c.train.init_seed},
                  {"grad_clip", c.train.grad_clip}};
    json eval = {{"num_test_envs", c.eval.num_test_envs},
                 {"horizons", c.eval.horizons},
                 {"online_steps", c.eval.online_steps},
                 {"online_episodes", c.eval.online_episodes},
                 {"online_context_cap", c.eval.online_context_cap}};
    json j = {{"family", c.family},
              {"method", to_string(c.method)},
              {"master_seed", c.master_seed},
              {"runs", c.runs},
              {"eval_family", c.eval_family},
              {"datagen",
               {{"trust_horizon", d.trust_horizon},
                {"context_len", d.context_len},
                {"gamma", d.gamma},
                {"dataset_size", d.dataset_size},
                {"dit_temperature", d.dit_temperature},
                {"ad_episodes", d.ad_episodes},
                {"max_resamples", d.max_resamples}}},
              {"model",
               {{"n_layers", c.model.n_layers},
                {"n_heads", c.model.n_heads},
                {"d_embed", c.model.d_embed},
                {"max_context", c.model.max_context}}},
              {"train", train},
              {"eval", eval},
              {"ablate", {{"axis", c.ablate_axis}, {"values", c.ablate_values}}},
              {"compare", {{"methods", methods}}}};
    if (!for_hash) {
        j["output_dir"] = c.output_dir;
        j["train"]["threads"] = c.train.threads;
        j["eval"]["threads"] = c.eval.threads;
    }
    return j;
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        bad(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        bad("config must be a JSON object");
    }
    const std::string family = j.contains("family") ? as<std::string>(j.at("family"), "family") : "gaussian_bandit";
    if (!is_registered(family)) {
        throw Error(Errc::unknown_family, family);
    }
    ExperimentConfig c = default_config(family);
    bool max_context_set = false;
    each_key(j, "", [&](const std::string& k, const json& v) {
        if (k == "family") {
            return true;
        }
        if (k == "method") {
            c.method = parse_method(as<std::string>(v, k));
        } else if (k == "master_seed") {
            c.master_seed = as<std::uint64_t>(v, k);
        } else if (k == "output_dir") {
            c.output_dir = as<std::string>(v, k);
        } else if (k == "eval_family") {
            c.eval_family = as<std::string>(v, k);
        } else if (k == "runs") {
            c.runs = as<int>(v, k);
        } else if (k == "datagen") {
            each_key(v, k, [&](const std::string& kk, const json& vv) {
                DatagenConfig& d = c.datagen;
                if (kk == "trust_horizon") {
                    d.trust_horizon = as<int>(vv, kk);
                } else if (kk == "context_len") {
                    d.context_len = as<int>(vv, kk);
                } else if (kk == "gamma") {
                    d.gamma = as<double>(vv, kk);
                } else if (kk == "dataset_size") {
                    d.dataset_size = as<std::int64_t>(vv, kk);
                } else if (kk == "dit_temperature") {
                    d.dit_temperature = as<double>(vv, kk);
                } else if (kk == "ad_episodes") {
                    d.ad_episodes = as<int>(vv, kk);
                } else if (kk == "max_resamples") {
                    d.max_resamples = as<std::int64_t>(vv, kk);
                } else {
                    return false;
                }
                return true;
            });
        } else if (k == "model") {
            each_key(v, k, [&](const std::string& kk, const json& vv) {
                if (kk == "n_layers") {
                    c.model.n_layers = as<int>(vv, kk);
                } else if (kk == "n_heads") {
                    c.model.n_heads = as<int>(vv, kk);
                } else if (kk == "d_embed") {
                    c.model.d_embed = as<int>(vv, kk);
                } else if (kk == "max_context") {
                    c.model.max_context = as<int>(vv, kk);
                    max_context_set = true;
                } else {
                    return false;
                }
                return true;
            });
        } else if (k == "train") {
            each_key(v, k, [&](const std::string& kk, const json& vv) {
                TrainConfig& t = c.train;
                if (kk == "lr") {
                    t.lr = as<double>(vv, kk);
                } else if (kk == "beta1") {
                    t.beta1 = as<double>(vv, kk);
                } else if (kk == "beta2") {
                    t.beta2 = as<double>(vv, kk);
                } else if (kk == "eps") {
                    t.eps = as<double>(vv, kk);
                } else if (kk == "batch_size") {
                    t.batch_size = as<int>(vv, kk);
                } else if (kk == "epochs") {
                    t.epochs = as<int>(vv, kk);
                } else if (kk == "shuffle_seed") {
                    t.shuffle_seed = as<std::uint64_t>(vv, kk);
                } else if (kk == "init_seed") {
                    t.init_seed = as<std::uint64_t>(vv, kk);
                } else if (kk == "grad_clip") {
                    t.grad_clip = as<double>(vv, kk);
                } else if (kk == "threads") {
                    t.threads = as<int>(vv, kk);
                } else {
                    return false;
                }
                return true;
            });
        } else if (k == "eval") {
            each_key(v, k, [&](const std::string& kk, const json& vv) {
                EvalConfig& e = c.eval;
                if (kk == "num_test_envs") {
                    e.num_test_envs = as<int>(vv, kk);
                } else if (kk == "horizons") {
                    e.horizons = int_list(vv, kk);
                } else if (kk == "online_steps") {
                    e.online_steps = as<int>(vv, kk);
                } else if (kk == "online_episodes") {
                    e.online_episodes = as<int>(vv, kk);
                } else if (kk == "online_context_cap") {
                    e.online_context_cap = as<int>(vv, kk);
                } else if (kk == "threads") {
                    e.threads = as<int>(vv, kk);
                } else {
                    return false;
                }
                return true;
            });
        } else if (k == "ablate") {
            each_key(v, k, [&](const std::string& kk, const json& vv) {
                if (kk == "axis") {
                    c.ablate_axis = as<std::string>(vv, kk);
                } else if (kk == "values") {
                    c.ablate_values = int_list(vv, kk);
                } else {
                    return false;
                }
                return true;
            });
        } else if (k == "compare") {
            each_key(v, k, [&](const std::string& kk, const json& vv) {
                if (kk != "methods") {
                    return false;
                }
                if (!vv.is_array()) {
                    bad("'methods' must be a list");
                }
                c.compare_methods.clear();
                for (const json& m : vv) {
                    c.compare_methods.push_back(parse_method(as<std::string>(m, kk)));
                }
                return true;
            });
        } else {
            return false;
        }
        return true;
    });
    if (!max_context_set) {
        c.model.max_context = c.datagen.context_len;
    }
    c.datagen.method = c.method;
    c.validate();
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::config_invalid, "cannot read config " + path.string());
    }
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

std::string config_to_json(const ExperimentConfig& config) { return to_json(config, false).dump(2); }

std::string config_hash(const ExperimentConfig& config) { return hex64(fnv1a64(to_json(config, true).dump())); }

// ---------------------------------------------------------------- improvements

double improvement_lower_better(double baseline, double reference) {
    if (reference == 0.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return (baseline - reference) / reference;
}

double improvement_higher_better(double reference, double baseline) {
    if (baseline == 0.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return (reference - baseline) / baseline;
}

void write_improvement_table(const std::vector<ImprovementRow>& rows, const fs::path& path,
                             const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Errc::io, "cannot write " + path.string());
    }
    if (!config_hash.empty()) {
        out << "# config_hash=" << config_hash << '\n';
    }
    out << "family,reference,baseline,setting,metric,reference_value,baseline_value,improvement\n";
    char buf[128];
    for (const ImprovementRow& r : rows) {
        out << r.family << ',' << r.reference << ',' << r.baseline << ',' << r.setting << ',' << r.metric << ',';
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r.reference_value, r.baseline_value, r.improvement);
        out << buf;
    }
}

double headline(const MetricSeries& s) {
    if (s.x.empty()) {
        throw Error(Errc::invalid_argument, "empty series");
    }
    if (s.kind == MetricKind::return_vs_episode) {
        return mean_over(s, s.x.back() - 9, s.x.back());
    }
    return s.mean.back();
}

// ---------------------------------------------------------------- pipeline

namespace {

fs::path out_dir(const ExperimentConfig& c) {
    fs::path p(c.output_dir);
    fs::create_directories(p);
    return p;
}

std::vector<MetricSeries> eval_runs(const ExperimentConfig& c, const model::ModelParams<float>& params,
                                    bool online) {
    std::vector<MetricSeries> out;
    for (int r = 0; r < c.runs; ++r) {
        const std::uint64_t seed = c.master_seed + static_cast<std::uint64_t>(r);
        MetricSeries s = online ? eval_online(params, c.evaluation_family(), c.eval, seed)
                                : eval_offline(params, c.evaluation_family(), c.eval, seed);
        s.method = std::string(to_string(c.method));
        out.push_back(std::move(s));
    }
    return out;
}

MetricSeries random_series(const ExperimentConfig& c, bool online, const std::vector<int>& horizons) {
    EvalConfig e = c.eval;
    if (!online) {
        e.horizons = horizons;
    }
    RandomAgent agent;
    MetricSeries s = online ? eval_online(agent, c.evaluation_family(), e, c.master_seed)
                            : eval_offline(agent, c.evaluation_family(), e, c.master_seed);
    s.method = "random";
    return s;
}

model::ModelParams<float> load_model(const ExperimentConfig& c) {
    return load_checkpoint<float>(fs::path(c.output_dir) / "checkpoint");
}

fs::path write_eval(const ExperimentConfig& c, bool online) {
    const model::ModelParams<float> params = load_model(c);
    std::vector<MetricSeries> series = eval_runs(c, params, online);
    const std::string stem = online ? "online" : "offline";
    const fs::path csv = out_dir(c) / (stem + ".csv");
    const std::string hash = config_hash(c);
    write_metric_csv(series, csv, hash);
    series.push_back(random_series(c, online, series.front().x));
    write_metric_svg(series, out_dir(c) / (stem + ".svg"), c.evaluation_family() + " " + stem, hash);
    return csv;
}

}  // namespace

fs::path cmd_generate(const ExperimentConfig& c) {
    c.validate();
    DatagenConfig d = c.datagen;
    d.method = c.method;
    Dataset ds = generate_dataset(c.family, Split::train, d, c.master_seed, c.train.threads);
    ds.config_hash = config_hash(c);
    const fs::path path = out_dir(c) / "dataset.jsonl";
    write_dataset(ds, path);
    return path;
}

fs::path cmd_train(const ExperimentConfig& c) {
    c.validate();
    const fs::path data = fs::path(c.output_dir) / "dataset.jsonl";
    if (!fs::exists(data)) {
        throw Error(Errc::missing_artifact, data.string() + " (run generate first)");
    }
    const Dataset ds = read_dataset(data);
    model::ModelConfig mc = c.model;
    mc.state_dim = ds.env_spec.state_dim;
    mc.num_actions = ds.env_spec.num_actions;
    mc.state_scale = ds.env_spec.state_scale;
    const TrainResult r = train(ds, mc, c.train);
    const std::string hash = config_hash(c);
    CheckpointMeta meta;
    meta.config_hash = hash;
    meta.family = c.family;
    meta.method = std::string(to_string(c.method));
    meta.epochs = c.train.epochs;
    meta.final_loss = r.report.epoch_loss.empty() ? 0.0 : r.report.epoch_loss.back();
    meta.params_checksum = r.report.params_checksum;
    const fs::path ckpt = out_dir(c) / "checkpoint";
    save_checkpoint(r.params, ckpt, meta);
    write_train_report(r.report, out_dir(c) / "train_report.csv", hash);
    return ckpt;
}

fs::path cmd_eval_offline(const ExperimentConfig& c) {
    c.validate();
    return write_eval(c, false);
}

fs::path cmd_eval_online(const ExperimentConfig& c) {
    c.validate();
    return write_eval(c, true);
}

fs::path cmd_ablate(const ExperimentConfig& c, const std::string& axis, const std::vector<int>& values) {
    c.validate();
    if (axis != "trust_horizon" && axis != "n_heads" && axis != "n_layers") {
        throw Error(Errc::config_invalid, "ablation axis must be trust_horizon, n_heads or n_layers");
    }
    if (values.empty()) {
        throw Error(Errc::config_invalid, "ablation needs at least one value");
    }
    const std::string hash = config_hash(c);
    const fs::path root = out_dir(c);
    std::vector<MetricSeries> stacked;
    std::ostringstream oracle;
    oracle << "# config_hash=" << hash << "\n"
           << "value,label_accuracy,random_label_density,distinct_pairs,near_goal_fraction,mean_distance\n";
    const bool grid = family_spec(c.family).reward_kind != RewardKind::bandit;
    for (int v : values) {
        ExperimentConfig sub = c;
        sub.output_dir = (root / ("ablate_" + axis) / std::to_string(v)).string();
        if (axis == "trust_horizon") {
            sub.datagen.trust_horizon = v;
        } else if (axis == "n_heads") {
            sub.model.n_heads = v;
        } else {
            sub.model.n_layers = v;
        }
        cmd_generate(sub);
        cmd_train(sub);
        cmd_eval_offline(sub);
        for (MetricSeries s : read_metric_csv(fs::path(sub.output_dir) / "offline.csv")) {
            s.method += "[" + axis + "=" + std::to_string(v) + "]";
            stacked.push_back(std::move(s));
        }
        if (axis == "trust_horizon") {
            const Dataset ds = read_dataset(fs::path(sub.output_dir) / "dataset.jsonl");
            const OracleReport rep = label_accuracy(ds);
            char buf[256];
            if (grid) {
                const CoverageReport cov = query_coverage(ds);
                std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%lld,%.17g,%.17g\n", v, rep.agreement_rate,
                              random_label_density(ds), static_cast<long long>(cov.distinct_pairs),
                              cov.near_goal_fraction, cov.mean_distance);
            } else {
                std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,,,\n", v, rep.agreement_rate,
                              random_label_density(ds));
            }
            oracle << buf;
        }
    }
    const fs::path csv = root / ("ablate_" + axis + ".csv");
    write_metric_csv(stacked, csv, hash);
    write_metric_svg(stacked, root / ("ablate_" + axis + ".svg"), c.family + " ablation: " + axis, hash);
    if (axis == "trust_horizon") {
        std::ofstream out(root / "ablate_trust_horizon_oracle.csv", std::ios::binary);
        out << oracle.str();
    }
    return csv;
}

fs::path cmd_compare(const ExperimentConfig& c) {
    c.validate();
    if (c.compare_methods.size() < 2) {
        throw Error(Errc::config_invalid, "compare needs at least two methods");
    }
    const fs::path root = out_dir(c);
    const std::string hash = config_hash(c);
    const bool bandit = family_spec(c.family).reward_kind == RewardKind::bandit;
    std::vector<double> offline;
    std::vector<double> online;
    std::vector<MetricSeries> off_all;
    std::vector<MetricSeries> on_all;
    for (Method m : c.compare_methods) {
        ExperimentConfig sub = c;
        sub.method = m;
        sub.datagen.method = m;
        sub.output_dir = (root / "compare" / std::string(to_string(m))).string();
        // identical methods share one directory, so reruns are cheap and consistent
        if (!fs::exists(fs::path(sub.output_dir) / "offline.csv")) {
            cmd_generate(sub);
            cmd_train(sub);
            cmd_eval_offline(sub);
            cmd_eval_online(sub);
        }
        double off = 0.0;
        double on = 0.0;
        const auto offs = read_metric_csv(fs::path(sub.output_dir) / "offline.csv");
        const auto ons = read_metric_csv(fs::path(sub.output_dir) / "online.csv");
        for (const MetricSeries& s : offs) {
            off += headline(s) / static_cast<double>(offs.size());
            off_all.push_back(s);
        }
        for (const MetricSeries& s : ons) {
            on += headline(s) / static_cast<double>(ons.size());
            on_all.push_back(s);
        }
        offline.push_back(off);
        online.push_back(on);
    }
    std::vector<ImprovementRow> rows;
    const std::string ref(to_string(c.compare_methods[0]));
    for (std::size_t i = 1; i < c.compare_methods.size(); ++i) {
        const std::string base(to_string(c.compare_methods[i]));
        ImprovementRow off{c.family, ref, base, "offline", bandit ? "suboptimality" : "return", offline[0], offline[i],
                           0.0};
        ImprovementRow on{c.family, ref, base, "online", bandit ? "cumulative_regret" : "return", online[0], online[i],
                          0.0};
        if (bandit) {
            off.improvement = improvement_lower_better(offline[i], offline[0]);
            on.improvement = improvement_lower_better(online[i], online[0]);
        } else {
            off.improvement = improvement_higher_better(offline[0], offline[i]);
            on.improvement = improvement_higher_better(online[0], online[i]);
        }
        rows.push_back(off);
        rows.push_back(on);
    }
    const fs::path table = root / "improvement.csv";
    write_improvement_table(rows, table, hash);
    write_metric_svg(off_all, root / "compare_offline.svg", c.family + " offline", hash);
    write_metric_svg(on_all, root / "compare_online.svg", c.family + " online", hash);
    return table;
}

int exit_code_for(const std::exception& e) noexcept {
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        switch (err->code()) {
            case Errc::config_invalid:
            case Errc::unknown_family:
            case Errc::invalid_trust_horizon:
            case Errc::method_env_mismatch:
                return 2;
            case Errc::missing_artifact:
                return 3;
            default:
                return 1;
        }
    }
    return 1;
}

}  // namespace sad
