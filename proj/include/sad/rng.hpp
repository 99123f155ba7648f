#pragma once

#include <cstdint>
#include <random>

namespace sad {

/// Reproducible random stream keyed by (master_seed, stream_id).
///
/// Two streams built from the same pair yield identical draws regardless of
/// what other streams exist or which thread consumes them. Sub-streams are
/// derived with child(), which mixes the key instead of consuming draws.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    RngStream child(std::uint64_t index) const;

    /// Uniform in [0, 1).
    double uniform();
    /// Uniform integer in [0, n). Requires n > 0.
    int uniform_int(int n);
    double normal(double mean, double stddev);
    bool bernoulli(double p);
    double beta(double a, double b);
    std::uint64_t next_u64();

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace sad
