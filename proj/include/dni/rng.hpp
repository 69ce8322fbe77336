// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "dni/tensor.hpp"

namespace dni {

/// SplitMix64 stream. Chosen over std::mt19937 because the stream is a single
/// u64 counter: identical on every platform, trivially checkpointable, and
/// splittable into independent per-component streams.
class RngState {
  public:
    RngState() : state_(0) {}
    explicit RngState(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 bits of precision.
    double next_double();
    /// Uniform in [lo, hi).
    double next_uniform(double lo, double hi);
    /// Standard normal via Box-Muller. Two u64 draws per call, no cached
    /// spare, so the stream position is a pure function of the call count.
    double next_gaussian();
    /// Uniform integer in [0, bound). bound must be nonzero.
    std::uint64_t next_below(std::uint64_t bound);

    /// Derives an independent stream; advances this stream by one draw.
    RngState split();

    void fill_gaussian(Tensor& t, double stddev);
    void fill_uniform(Tensor& t, double lo, double hi);
    /// Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

    std::uint64_t raw_state() const { return state_; }
    void set_raw_state(std::uint64_t s) { state_ = s; }

  private:
    std::uint64_t state_;
};

}  // namespace dni
