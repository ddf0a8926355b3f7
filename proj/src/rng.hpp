#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mg {

// Deterministic generator (xoshiro256++ seeded via splitmix64). All randomness
// in the library flows through this class so that a seed fully determines a
// run; standard-library distributions are avoided because their output is
// implementation defined.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double uniform01();
    float uniform(float lo, float hi);
    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi);
    // Standard normal via Box-Muller; the spare value is cached.
    float normal();
    float normal(float mean, float stddev);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent substream for a named role ("init.gen", "shuffle", ...) so
    // that consumers cannot perturb each other's draws.
    static Rng derive(uint64_t seed, std::string_view role);

private:
    uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mg
