#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace psl {

// One block of the Philox4x64 counter-based generator, 10 rounds.
std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> counter,
                                        std::array<std::uint64_t, 2> key);

// Deterministic stream of draws addressed by (key, counter). Independent
// child streams for parallel work come from derive(), which rekeys through
// the block function itself, so replicate results never depend on scheduling.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();
    double uniform();                      // [0, 1)
    double uniform(double a, double b);
    double normal();                       // standard normal, Box-Muller
    double normal(double mu, double sd);
    double weibull(double scale, double shape);
    double exponential(double scale);
    std::uint64_t below(std::uint64_t n);  // unbiased draw from {0..n-1}

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[below(i)]);
    }

    Rng derive(std::uint64_t index) const;

private:
    std::array<std::uint64_t, 2> key_;
    std::array<std::uint64_t, 4> counter_{};
    std::array<std::uint64_t, 4> buffer_{};
    int pos_ = 4;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;

    void refill();
};

}  // namespace psl
