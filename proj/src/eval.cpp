#include "sad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sad/datagen.hpp"
#include "sad/envs.hpp"
#include "sad/error.hpp"
#include "sad/oracle.hpp"

namespace sad {

using model::PredictMode;

namespace {

// Separates evaluation streams from dataset streams under the same master seed.
constexpr std::uint64_t kEvalDomain = 0xE7A1000000000000ULL;

constexpr std::string_view kKindNames[] = {"suboptimality_vs_horizon", "cumulative_regret_vs_step",
                                           "return_vs_episode", "return_vs_horizon"};

}  // namespace

std::string_view to_string(MetricKind k) noexcept { return kKindNames[static_cast<int>(k)]; }

MetricKind parse_metric_kind(std::string_view s) {
    for (int i = 0; i < 4; ++i) {
        if (s == kKindNames[i]) {
            return static_cast<MetricKind>(i);
        }
    }
    throw Error(Errc::io, "unknown metric kind '" + std::string(s) + "'");
}

void EvalConfig::validate() const {
    if (num_test_envs < 1 || online_steps < 1 || online_episodes < 1 || online_context_cap < 0 || threads < 1) {
        throw Error(Errc::config_invalid, "eval sizes must be positive");
    }
    for (int h : horizons) {
        if (h < 0) {
            throw Error(Errc::config_invalid, "eval horizons must be >= 0");
        }
    }
}

// ---------------------------------------------------------------- agents

std::vector<ActionId> Agent::act_prefixes(const Environment& env, const Context& context, const StateVec& query,
                                          const std::vector<int>& horizons, PredictMode mode,
                                          RngStream& rng) const {
    std::vector<ActionId> out;
    out.reserve(horizons.size());
    for (int h : horizons) {
        Context prefix;
        prefix.transitions.assign(context.transitions.begin(), context.transitions.begin() + h);
        out.push_back(act(env, prefix, query, mode, rng));
    }
    return out;
}

ActionId ModelAgent::act(const Environment&, const Context& context, const StateVec& query, PredictMode mode,
                         RngStream& rng) const {
    return model::predict(params_, context, query, mode, rng);
}

std::vector<ActionId> ModelAgent::act_prefixes(const Environment&, const Context& context, const StateVec& query,
                                               const std::vector<int>& horizons, PredictMode mode,
                                               RngStream& rng) const {
    const ad::Tensor<float> logits = model::forward(params_, context, query);
    const std::size_t m = logits.cols();
    std::vector<ActionId> out;
    out.reserve(horizons.size());
    for (int h : horizons) {
        const auto row = static_cast<std::size_t>(h);
        out.push_back(model::choose_action<float>(std::span<const float>(logits.data() + row * m, m), mode, rng));
    }
    return out;
}

ActionId RandomAgent::act(const Environment& env, const Context&, const StateVec&, PredictMode,
                          RngStream& rng) const {
    return ActionId{rng.uniform_int(env.spec().num_actions)};
}

ActionId OracleAgent::act(const Environment& env, const Context&, const StateVec& query, PredictMode,
                          RngStream&) const {
    if (const auto* b = dynamic_cast<const BanditEnv*>(&env)) {
        return optimal_arm(b->means());
    }
    if (const auto* g = dynamic_cast<const GridEnv*>(&env)) {
        return grid_optimal_actions(g->params(), g->to_cell(query)).front();
    }
    throw Error(Errc::unsupported, "no oracle for " + env.spec().env_family);
}

// ---------------------------------------------------------------- protocol

EnvInstance test_env(std::string_view family, std::uint64_t master_seed, int j) {
    RngStream rng = RngStream(master_seed, kEvalDomain).child(static_cast<std::uint64_t>(j));
    RngStream env_rng = rng.child(0);
    return sample_env(family, Split::test, env_rng);
}

namespace {

RngStream env_stream(std::uint64_t master_seed, int j, std::uint64_t purpose) {
    return RngStream(master_seed, kEvalDomain).child(static_cast<std::uint64_t>(j)).child(purpose);
}

double suboptimality(const Environment& env, ActionId a) {
    const auto& b = dynamic_cast<const BanditEnv&>(env);
    return *std::max_element(b.means().begin(), b.means().end()) - b.means()[static_cast<std::size_t>(a.index)];
}

MetricSeries summarize(MetricKind kind, std::vector<int> xs, const std::vector<std::vector<double>>& per_env,
                       std::string_view family, std::uint64_t seed) {
    MetricSeries s;
    s.kind = kind;
    s.family = std::string(family);
    s.seed = seed;
    s.x = std::move(xs);
    const std::size_t n = per_env.size();
    for (std::size_t k = 0; k < s.x.size(); ++k) {
        double sum = 0.0;
        for (const auto& row : per_env) {
            sum += row[k];
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& row : per_env) {
            ss += (row[k] - mean) * (row[k] - mean);
        }
        const double se = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
        s.mean.push_back(mean);
        s.std_err.push_back(se);
    }
    return s;
}

std::vector<int> default_horizons(const EnvSpec& spec, int max_context) {
    std::vector<int> h;
    if (spec.reward_kind == RewardKind::bandit) {
        for (int i = 0; i <= max_context; ++i) {
            h.push_back(i);
        }
        return h;
    }
    for (int i = 0; i < max_context; i += 10) {
        h.push_back(i);
    }
    h.push_back(max_context);
    return h;
}

void push_capped(Context& ctx, const Transition& t, std::size_t cap) {
    if (cap == 0) {
        return;
    }
    if (ctx.transitions.size() >= cap) {
        ctx.transitions.erase(ctx.transitions.begin());
    }
    ctx.transitions.push_back(t);
}

void check_family(const model::ModelParams<float>& params, std::string_view family) {
    const EnvSpec spec = family_spec(family);
    const model::ModelConfig& c = params.config;
    if (spec.num_actions != c.num_actions || spec.state_dim != c.state_dim || spec.state_scale != c.state_scale) {
        throw Error(Errc::family_mismatch, "model shape does not fit family " + std::string(family));
    }
}

}  // namespace

MetricSeries eval_offline(const Agent& agent, std::string_view family, const EvalConfig& config,
                          std::uint64_t master_seed) {
    config.validate();
    const EnvSpec spec = family_spec(family);
    const int default_len = spec.reward_kind == RewardKind::bandit ? 100 : spec.horizon;
    std::vector<int> horizons = config.horizons.empty()
                                    ? default_horizons(spec, std::min(agent.max_context(), default_len))
                                    : config.horizons;
    const int max_h = *std::max_element(horizons.begin(), horizons.end());
    const Policy policy = Policy::uniform(spec.num_actions);
    std::vector<std::vector<double>> per_env(static_cast<std::size_t>(config.num_test_envs));
    parallel_for(per_env.size(), config.threads, [&](std::size_t j) {
        const int jj = static_cast<int>(j);
        EnvInstance env = test_env(family, master_seed, jj);
        RngStream ctx_rng = env_stream(master_seed, jj, 1);
        RngStream act_rng = env_stream(master_seed, jj, 2);
        const Context ctx = collect_context(*env, policy, max_h, ctx_rng);
        std::vector<double>& row = per_env[j];
        if (spec.reward_kind == RewardKind::bandit) {
            const std::vector<ActionId> acts =
                agent.act_prefixes(*env, ctx, env->state_at(0), horizons, PredictMode::greedy, act_rng);
            for (ActionId a : acts) {
                row.push_back(suboptimality(*env, a));
            }
            return;
        }
        for (int h : horizons) {
            Context prefix;
            prefix.transitions.assign(ctx.transitions.begin(), ctx.transitions.begin() + h);
            StateVec s = env->reset();
            double ret = 0.0;
            for (int t = 0; t < spec.horizon; ++t) {
                const ActionId a = agent.act(*env, prefix, s, PredictMode::greedy, act_rng);
                const StepResult r = env->step(a, act_rng);
                ret += r.reward;
                s = r.next_state;
            }
            row.push_back(ret);
        }
    });
    const MetricKind kind = spec.reward_kind == RewardKind::bandit ? MetricKind::suboptimality_vs_horizon
                                                                   : MetricKind::return_vs_horizon;
    return summarize(kind, horizons, per_env, family, master_seed);
}

MetricSeries eval_online(const Agent& agent, std::string_view family, const EvalConfig& config,
                         std::uint64_t master_seed) {
    config.validate();
    const EnvSpec spec = family_spec(family);
    const bool bandit = spec.reward_kind == RewardKind::bandit;
    const int cap_cfg = config.online_context_cap > 0 ? config.online_context_cap : agent.max_context();
    const auto cap = static_cast<std::size_t>(std::min(cap_cfg, agent.max_context()));
    const int points = bandit ? config.online_steps : config.online_episodes;
    std::vector<std::vector<double>> per_env(static_cast<std::size_t>(config.num_test_envs));
    parallel_for(per_env.size(), config.threads, [&](std::size_t j) {
        const int jj = static_cast<int>(j);
        EnvInstance env = test_env(family, master_seed, jj);
        RngStream rng = env_stream(master_seed, jj, 3);
        std::vector<double>& row = per_env[j];
        Context ctx;
        if (bandit) {
            const StateVec s = env->reset();
            double regret = 0.0;
            for (int t = 0; t < config.online_steps; ++t) {
                const ActionId a = agent.act(*env, ctx, s, PredictMode::sample, rng);
                const StepResult r = env->step(a, rng);
                push_capped(ctx, Transition{s, a, r.reward, r.next_state}, cap);
                regret += suboptimality(*env, a);
                row.push_back(regret);
            }
            return;
        }
        for (int ep = 0; ep < config.online_episodes; ++ep) {
            StateVec s = env->reset();
            double ret = 0.0;
            for (int t = 0; t < spec.horizon; ++t) {
                const ActionId a = agent.act(*env, ctx, s, PredictMode::sample, rng);
                const StepResult r = env->step(a, rng);
                push_capped(ctx, Transition{s, a, r.reward, r.next_state}, cap);
                ret += r.reward;
                s = r.next_state;
            }
            row.push_back(ret);
        }
    });
    std::vector<int> xs(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        xs[static_cast<std::size_t>(i)] = i + 1;
    }
    return summarize(bandit ? MetricKind::cumulative_regret_vs_step : MetricKind::return_vs_episode, xs, per_env,
                     family, master_seed);
}

MetricSeries eval_offline(const model::ModelParams<float>& params, std::string_view family,
                          const EvalConfig& config, std::uint64_t master_seed) {
    check_family(params, family);
    return eval_offline(ModelAgent(params), family, config, master_seed);
}

MetricSeries eval_online(const model::ModelParams<float>& params, std::string_view family,
                         const EvalConfig& config, std::uint64_t master_seed) {
    check_family(params, family);
    return eval_online(ModelAgent(params), family, config, master_seed);
}

double random_suboptimality(const std::vector<double>& means) {
    double sum = 0.0;
    for (double m : means) {
        sum += m;
    }
    return *std::max_element(means.begin(), means.end()) - sum / static_cast<double>(means.size());
}

double mean_over(const MetricSeries& series, int lo, int hi) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < series.x.size(); ++i) {
        if (series.x[i] >= lo && series.x[i] <= hi) {
            sum += series.mean[i];
            ++n;
        }
    }
    if (n == 0) {
        throw Error(Errc::invalid_argument, "no series points in range");
    }
    return sum / n;
}

double value_at(const MetricSeries& series, int x) {
    for (std::size_t i = 0; i < series.x.size(); ++i) {
        if (series.x[i] == x) {
            return series.mean[i];
        }
    }
    throw Error(Errc::invalid_argument, "series has no point at x=" + std::to_string(x));
}

// ---------------------------------------------------------------- CSV / SVG

std::string metric_csv(const std::vector<MetricSeries>& series, const std::string& config_hash) {
    std::string out;
    if (!config_hash.empty()) {
        out += "# config_hash=" + config_hash + "\n";
    }
    out += "kind,x,mean,std_err,method,family,seed\n";
    char buf[160];
    for (const MetricSeries& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g,", std::string(to_string(s.kind)).c_str(), s.x[i],
                          s.mean[i], s.std_err[i]);
            out += buf;
            out += s.method + "," + s.family + "," + std::to_string(s.seed) + "\n";
        }
    }
    return out;
}

void write_metric_csv(const std::vector<MetricSeries>& series, const std::filesystem::path& path,
                      const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Errc::io, "cannot write " + path.string());
    }
    out << metric_csv(series, config_hash);
}

std::vector<MetricSeries> read_metric_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::missing_artifact, path.string());
    }
    std::vector<MetricSeries> out;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (!header) {
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            f.push_back(cell);
        }
        if (f.size() != 7) {
            throw Error(Errc::io, "malformed metric row: " + line);
        }
        const MetricKind kind = parse_metric_kind(f[0]);
        const std::uint64_t seed = std::stoull(f[6]);
        if (out.empty() || out.back().kind != kind || out.back().method != f[4] || out.back().family != f[5] ||
            out.back().seed != seed) {
            MetricSeries s;
            s.kind = kind;
            s.method = f[4];
            s.family = f[5];
            s.seed = seed;
            out.push_back(std::move(s));
        }
        out.back().x.push_back(std::stoi(f[1]));
        out.back().mean.push_back(std::stod(f[2]));
        out.back().std_err.push_back(std::stod(f[3]));
    }
    return out;
}

void write_metric_svg(const std::vector<MetricSeries>& series, const std::filesystem::path& path,
                      const std::string& title, const std::string& config_hash) {
    constexpr double W = 720, H = 440, L = 70, R = 180, T = 40, B = 50;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const MetricSeries& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, static_cast<double>(s.x[i]));
            x1 = std::max(x1, static_cast<double>(s.x[i]));
            y0 = std::min(y0, s.mean[i] - s.std_err[i]);
            y1 = std::max(y1, s.mean[i] + s.std_err[i]);
        }
    }
    if (x0 > x1) {
        x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    }
    if (x1 == x0) {
        x1 = x0 + 1;
    }
    if (y1 == y0) {
        y1 = y0 + 1;
    }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Errc::io, "cannot write " + path.string());
    }
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                  "font-family=\"sans-serif\" font-size=\"12\">\n",
                  W, H);
    out << buf;
    if (!config_hash.empty()) {
        out << "<!-- config_hash=" << config_hash << " -->\n";
    }
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"24\" font-size=\"14\">", L);
    out << buf << title << "</text>\n";
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"black\"/>\n", L,
                  T, W - L - R, H - T - B);
    out << buf;
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0;
        const double yv = y0 + (y1 - y0) * k / 4.0;
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.4g</text>\n", px(xv),
                      H - B + 18, xv);
        out << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.4g</text>\n", L - 6,
                      py(yv) + 4, yv);
        out << buf;
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        const MetricSeries& s = series[k];
        const char* c = colors[k % 10];
        std::string band, line;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[i]), py(s.mean[i] + s.std_err[i]));
            band += buf;
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[i]), py(s.mean[i]));
            line += buf;
        }
        for (std::size_t i = s.x.size(); i-- > 0;) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[i]), py(s.mean[i] - s.std_err[i]));
            band += buf;
        }
        out << "<polygon points=\"" << band << "\" fill=\"" << c << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        out << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\"/>\n";
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" fill=\"%s\">", W - R + 10, T + 16.0 * (k + 1),
                      c);
        out << buf << s.method << " seed " << s.seed << "</text>\n";
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">", (L + W - R) / 2, H - 12);
    out << buf << (series.empty() ? "" : std::string(to_string(series[0].kind))) << "</text>\n";
    out << "</svg>\n";
}

}  // namespace sad
