#include "sad/rng.hpp"

#include "sad/error.hpp"

namespace sad {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed),
      stream_id_(stream_id),
      engine_(splitmix64(splitmix64(master_seed) ^ splitmix64(stream_id + 0x632BE59BD9B4E019ULL))) {}

RngStream RngStream::child(std::uint64_t index) const {
    return RngStream(master_seed_, splitmix64(stream_id_ * 0x9E3779B97F4A7C15ULL + index + 1));
}

double RngStream::uniform() {
    // 53 random bits -> exactly representable double in [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int RngStream::uniform_int(int n) {
    if (n <= 0) {
        throw Error(Errc::invalid_argument, "uniform_int needs n > 0");
    }
    std::uniform_int_distribution<int> dist(0, n - 1);
    return dist(engine_);
}

double RngStream::normal(double mean, double stddev) {
    if (stddev == 0.0) {
        return mean;
    }
    std::normal_distribution<double> dist(mean, stddev);
    return dist(engine_);
}

bool RngStream::bernoulli(double p) {
    if (p <= 0.0) {
        return false;
    }
    if (p >= 1.0) {
        return true;
    }
    return uniform() < p;
}

double RngStream::beta(double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(engine_);
    const double y = gb(engine_);
    return x / (x + y);
}

std::uint64_t RngStream::next_u64() { return engine_(); }

}  // namespace sad
