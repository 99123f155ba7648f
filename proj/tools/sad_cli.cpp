// Command-line driver for the SAD pipeline.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <optional>
#include <sstream>

#include "sad/error.hpp"
#include "sad/harness.hpp"

namespace {

struct Options {
    std::string config_path;
    std::string family;
    std::string method;
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 1;
    bool reference_path = false;
    std::string axis;
    std::string values;
};

sad::ExperimentConfig resolve(const Options& o) {
    sad::ExperimentConfig c;
    if (!o.config_path.empty()) {
        c = sad::load_config(o.config_path);
    } else {
        c = sad::parse_config(o.family.empty() ? "{}" : "{\"family\": \"" + o.family + "\"}");
    }
    if (!o.config_path.empty() && !o.family.empty() && o.family != c.family) {
        throw sad::Error(sad::Errc::config_invalid, "--family disagrees with the config file");
    }
    if (!o.method.empty()) {
        c.method = sad::parse_method(o.method);
        c.datagen.method = c.method;
    }
    if (o.seed) {
        c.master_seed = *o.seed;
    }
    if (!o.out.empty()) {
        c.output_dir = o.out;
    }
    const int threads = o.reference_path ? 1 : o.threads;
    if (threads < 1) {
        throw sad::Error(sad::Errc::config_invalid, "--threads must be >= 1");
    }
    c.train.threads = threads;
    c.eval.threads = threads;
    c.validate();
    return c;
}

std::vector<int> parse_values(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw sad::Error(sad::Errc::config_invalid, "bad --values entry '" + item + "'");
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"State-action distillation workbench"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "JSON experiment config");
        sub->add_option("--family", o.family, "environment family when no config is given");
        sub->add_option("--method", o.method, "SAD, AD, DPT_random or DIT");
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--threads", o.threads, "worker threads")->default_val(1);
        sub->add_flag("--reference-path", o.reference_path, "deterministic single-thread execution");
    };
    CLI::App* gen = app.add_subcommand("generate", "build the pretraining dataset");
    CLI::App* train = app.add_subcommand("train", "pretrain on the generated dataset");
    CLI::App* off = app.add_subcommand("eval-offline", "suboptimality or return vs context length");
    CLI::App* on = app.add_subcommand("eval-online", "regret or return over online interaction");
    CLI::App* abl = app.add_subcommand("ablate", "sweep one setting end to end");
    CLI::App* cmp = app.add_subcommand("compare", "run every method and tabulate improvements");
    for (CLI::App* sub : {gen, train, off, on, abl, cmp}) {
        common(sub);
    }
    abl->add_option("--axis", o.axis, "trust_horizon, n_heads or n_layers");
    abl->add_option("--values", o.values, "comma-separated integers");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const sad::ExperimentConfig c = resolve(o);
        std::filesystem::path result;
        if (gen->parsed()) {
            result = sad::cmd_generate(c);
        } else if (train->parsed()) {
            result = sad::cmd_train(c);
        } else if (off->parsed()) {
            result = sad::cmd_eval_offline(c);
        } else if (on->parsed()) {
            result = sad::cmd_eval_online(c);
        } else if (abl->parsed()) {
            const std::string axis = o.axis.empty() ? c.ablate_axis : o.axis;
            const std::vector<int> values = o.values.empty() ? c.ablate_values : parse_values(o.values);
            result = sad::cmd_ablate(c, axis, values);
        } else {
            result = sad::cmd_compare(c);
        }
        std::printf("%s\n", result.string().c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return sad::exit_code_for(e);
    }
}
