#include "coalsim/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace coalsim {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    return mix64(mix64(mix64(master) ^ stream) ^ index);
}

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_index bound must be positive");
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(engine_()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double Rng::exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential rate must be positive");
    return -std::log1p(-uniform01()) / rate;
}

double Rng::normal() {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace coalsim
