#include "sad/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "sad/datagen.hpp"
#include "sad/error.hpp"
#include "sad/hash.hpp"

namespace sad {

using model::ModelParams;

void TrainConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw Error(Errc::config_invalid, "lr must be a finite non-negative number");
    }
    if (batch_size < 1) {
        throw Error(Errc::config_invalid, "batch_size must be >= 1");
    }
    if (epochs < 0) {
        throw Error(Errc::config_invalid, "epochs must be >= 0");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
        throw Error(Errc::config_invalid, "Adam betas must lie in [0, 1) and eps must be positive");
    }
}

namespace {

void check_compatible(const ModelParams<float>& params, const Dataset& dataset) {
    if (dataset.samples.empty()) {
        throw Error(Errc::empty_dataset, "dataset has no samples");
    }
    const model::ModelConfig& c = params.config;
    if (dataset.env_spec.num_actions != c.num_actions || dataset.env_spec.state_dim != c.state_dim) {
        throw Error(Errc::shape_mismatch, "dataset family " + dataset.env_spec.env_family +
                                              " does not match the model's state/action shape");
    }
    for (const PretrainSample& s : dataset.samples) {
        if (static_cast<int>(s.context.size()) > c.max_context) {
            throw Error(Errc::context_too_long, "sample context " + std::to_string(s.context.size()) +
                                                    " exceeds max_context " + std::to_string(c.max_context));
        }
    }
}

void zero(ModelParams<float>& g) {
    for (auto& nt : g.tensors) {
        nt.tensor.fill(0.0f);
    }
}

void add_into(ModelParams<float>& dst, const ModelParams<float>& src) {
    for (std::size_t t = 0; t < dst.tensors.size(); ++t) {
        float* d = dst.tensors[t].tensor.data();
        const float* s = src.tensors[t].tensor.data();
        const std::size_t n = dst.tensors[t].tensor.size();
        for (std::size_t i = 0; i < n; ++i) {
            d[i] += s[i];
        }
    }
}

// Sums slots[0..n) into slots[0] by a fixed binary tree.
void tree_reduce(std::vector<ModelParams<float>>& slots, std::size_t n) {
    for (std::size_t stride = 1; stride < n; stride *= 2) {
        for (std::size_t i = 0; i + stride < n; i += 2 * stride) {
            add_into(slots[i], slots[i + stride]);
        }
    }
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng(seed, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

struct Adam {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long step = 0;

    explicit Adam(const ModelParams<float>& p) {
        for (const auto& nt : p.tensors) {
            m.emplace_back(nt.tensor.size(), 0.0);
            v.emplace_back(nt.tensor.size(), 0.0);
        }
    }

    void update(ModelParams<float>& p, const ModelParams<float>& g, double scale, const TrainConfig& c) {
        ++step;
        const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
        for (std::size_t t = 0; t < p.tensors.size(); ++t) {
            float* w = p.tensors[t].tensor.data();
            const float* gr = g.tensors[t].tensor.data();
            std::vector<double>& mt = m[t];
            std::vector<double>& vt = v[t];
            for (std::size_t i = 0; i < mt.size(); ++i) {
                const double gi = scale * static_cast<double>(gr[i]);
                mt[i] = c.beta1 * mt[i] + (1.0 - c.beta1) * gi;
                vt[i] = c.beta2 * vt[i] + (1.0 - c.beta2) * gi * gi;
                const double mh = mt[i] / bc1;
                const double vh = vt[i] / bc2;
                w[i] = static_cast<float>(static_cast<double>(w[i]) - c.lr * mh / (std::sqrt(vh) + c.eps));
            }
        }
    }
};

}  // namespace

TrainResult train(const Dataset& dataset, const model::ModelConfig& model_config, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    return train_from(model::init_params<float>(model_config, config.init_seed), dataset, config, on_epoch);
}

TrainResult train_from(ModelParams<float> params, const Dataset& dataset, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
    config.validate();
    check_compatible(params, dataset);
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = dataset.samples.size();
    const auto bs = static_cast<std::size_t>(config.batch_size);
    std::vector<ModelParams<float>> slots(std::min(bs, n), model::zeros_like(params));
    std::vector<double> losses(slots.size());
    Adam adam(params);
    TrainResult out;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const std::vector<std::size_t> order = shuffled(n, config.shuffle_seed, epoch);
        double total = 0.0;
        for (std::size_t lo = 0; lo < n; lo += bs) {
            const std::size_t b = std::min(bs, n - lo);
            parallel_for(b, config.threads, [&](std::size_t k) {
                zero(slots[k]);
                losses[k] = model::loss_and_grad(params, dataset.samples[order[lo + k]], slots[k]);
            });
            tree_reduce(slots, b);
            for (std::size_t k = 0; k < b; ++k) {
                total += losses[k];
            }
            // mean over the batch, then global-norm clipping
            double scale = 1.0 / static_cast<double>(b);
            double sq = 0.0;
            for (const auto& nt : slots[0].tensors) {
                for (float g : nt.tensor.values()) {
                    sq += static_cast<double>(g) * static_cast<double>(g);
                }
            }
            const double norm = std::sqrt(sq) * scale;
            if (config.grad_clip > 0.0 && norm > config.grad_clip) {
                scale *= config.grad_clip / norm;
            }
            adam.update(params, slots[0], scale, config);
        }
        const double mean = total / static_cast<double>(n);
        if (!std::isfinite(mean)) {
            throw Error(Errc::invalid_argument, "training loss diverged at epoch " + std::to_string(epoch + 1));
        }
        out.report.epoch_loss.push_back(mean);
        if (on_epoch) {
            on_epoch(epoch + 1, mean);
        }
    }
    out.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.report.params_checksum = params_checksum(params);
    out.params = std::move(params);
    return out;
}

double evaluate_loss(const ModelParams<float>& params, const Dataset& dataset, int threads) {
    check_compatible(params, dataset);
    std::vector<double> losses(dataset.samples.size());
    parallel_for(losses.size(), threads, [&](std::size_t i) {
        const PretrainSample& s = dataset.samples[i];
        losses[i] = model::loss(model::forward(params, s.context, s.query_state), s.action_label, s.weight);
    });
    double total = 0.0;
    for (double l : losses) {
        total += l;
    }
    return total / static_cast<double>(losses.size());
}

std::string params_checksum(const ModelParams<float>& params) {
    std::uint64_t h = kFnvOffset;
    for (const auto& nt : params.tensors) {
        h = fnv1a64(nt.name, h);
        for (std::size_t d : nt.tensor.shape()) {
            h = fnv1a64(std::to_string(d) + ",", h);
        }
        for (float v : nt.tensor.values()) {
            std::uint32_t bits = 0;
            std::memcpy(&bits, &v, sizeof bits);
            const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                                   static_cast<char>((bits >> 16) & 0xff), static_cast<char>(bits >> 24)};
            h = fnv1a64(std::string_view(bytes, 4), h);
        }
    }
    return hex64(h);
}

void write_train_report(const TrainReport& report, const std::filesystem::path& path,
                        const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Errc::io, "cannot write " + path.string());
    }
    if (!config_hash.empty()) {
        out << "# config_hash=" << config_hash << '\n';
    }
    out << "epoch,mean_loss\n";
    char buf[64];
    for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e + 1, report.epoch_loss[e]);
        out << buf;
    }
}

}  // namespace sad
