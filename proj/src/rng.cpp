// SPDX-License-Identifier: Apache-2.0
#include "dni/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dni {

std::uint64_t RngState::next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double RngState::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

double RngState::next_gaussian() {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngState::next_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("next_below: bound must be nonzero");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(bound)) >> 64);
}

RngState RngState::split() { return RngState(next_u64()); }

void RngState::fill_gaussian(Tensor& t, double stddev) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * next_gaussian();
}

void RngState::fill_uniform(Tensor& t, double lo, double hi) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = next_uniform(lo, hi);
}

std::vector<std::size_t> RngState::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = next_below(i);
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

}  // namespace dni
