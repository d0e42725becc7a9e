#include "psl/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace psl {

namespace {

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    unsigned __int128 prod = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(prod >> 64);
    lo = static_cast<std::uint64_t>(prod);
}

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ull;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ull;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73Bull;

}  // namespace

std::array<std::uint64_t, 4> philox4x64(std::array<std::uint64_t, 4> c,
                                        std::array<std::uint64_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        std::uint64_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : key_{seed, stream} {}

void Rng::refill() {
    buffer_ = philox4x64(counter_, key_);
    pos_ = 0;
    for (int w = 0; w < 4; ++w) {
        if (++counter_[w] != 0) break;  // carry into the next word
    }
}

std::uint64_t Rng::next_u64() {
    if (pos_ == 4) refill();
    return buffer_[pos_++];
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) {
    return a + (b - a) * uniform();
}

double Rng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    // u1 in (0,1] so the log is finite
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
}

double Rng::normal(double mu, double sd) {
    return mu + sd * normal();
}

double Rng::weibull(double scale, double shape) {
    if (scale <= 0.0 || shape <= 0.0)
        throw std::invalid_argument("weibull: scale and shape must be positive");
    double u = uniform();
    return scale * std::pow(-std::log(1.0 - u), 1.0 / shape);
}

double Rng::exponential(double scale) {
    if (scale <= 0.0) throw std::invalid_argument("exponential: scale must be positive");
    return -scale * std::log(1.0 - uniform());
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("below: n must be positive");
    std::uint64_t bound = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= bound);
    return x % n;
}

Rng Rng::derive(std::uint64_t index) const {
    auto words = philox4x64({index, 0x5851F42D4C957F2Dull, 0, 0}, key_);
    Rng child(words[0], words[1]);
    return child;
}

}  // namespace psl
