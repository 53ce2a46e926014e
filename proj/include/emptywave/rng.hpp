#pragma once

#include <cstdint>

namespace ew {

// Counter-based generator: output k of stream (seed, stream_id) is a fixed
// mix of (seed, stream_id, k), so parallel samples can draw independently
// and aggregation order cannot change the numbers.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_(mix(seed ^ mix(stream_id + 0x9e3779b97f4a7c15ULL))), counter_(0) {}

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // index in [0, n) chosen with the given (unnormalized) weights
    template <class Weights>
    int pick_weighted(const Weights& w) {
        double total = 0.0;
        for (double x : w) total += x;
        double u = uniform() * total;
        int n = static_cast<int>(w.size());
        for (int i = 0; i < n; ++i) {
            u -= w[i];
            if (u < 0.0) return i;
        }
        return n - 1;
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        // splitmix64 finalizer
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace ew
