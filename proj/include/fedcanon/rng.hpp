#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fedcanon {

// splitmix64 step; used to derive independent seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream purposes; keeps per-component streams decoupled so e.g. the partition
// draw does not depend on how many gradient samples an algorithm consumed.
enum class StreamKind : std::uint64_t {
    Partition = 1,
    Client = 2,
    Problem = 3,
    Coin = 4,
    Init = 5,
    Eval = 6,
};

inline std::uint64_t derive_seed(std::uint64_t master, StreamKind kind, std::uint64_t index = 0) {
    std::uint64_t s = master;
    splitmix64(s);
    s ^= static_cast<std::uint64_t>(kind) * 0xd1342543de82ef95ULL;
    splitmix64(s);
    s ^= index * 0xaf251af3b0f025b5ULL;
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::mt19937_64& engine() { return eng_; }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(eng_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(eng_);
    }
    int uniform_int(int lo, int hi) {  // inclusive bounds
        return std::uniform_int_distribution<int>(lo, hi)(eng_);
    }
    bool bernoulli(double p) { return std::bernoulli_distribution(p)(eng_); }

    // Proportions on the simplex from N independent Gamma(eta, 1) draws.
    std::vector<double> dirichlet(double eta, int n) {
        std::gamma_distribution<double> g(eta, 1.0);
        std::vector<double> p(n);
        double sum = 0.0;
        for (auto& v : p) {
            v = g(eng_);
            sum += v;
        }
        if (sum <= 0.0) {  // all-zero draw is possible for tiny eta; retry via uniform fallback
            for (auto& v : p) v = 1.0;
            sum = static_cast<double>(n);
        }
        for (auto& v : p) v /= sum;
        return p;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace fedcanon
