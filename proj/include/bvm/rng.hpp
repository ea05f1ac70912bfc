#pragma once

#include <cmath>
#include <cstdint>

namespace bvm {

// Deterministic seeded stream: xoshiro256++ with SplitMix64 state setup.
//
// The generator is fixed by contract: for a given (seed, stream_id) the draw
// sequence is identical across runs and platforms (pure 64-bit integer
// arithmetic; doubles are derived from the top 53 bits).  Stream separation
// mixes stream_id into the SplitMix64 starting point, so nearby ids give
// unrelated sequences.  Parallel replications derive child streams as
// stream_id = master_id + replication_index; a master that spawns children
// must not draw from itself.
//
// normal() uses the Marsaglia polar method with one cached spare; the spare
// is part of the stream state, so determinism covers it.
class RngStream {
  public:
    RngStream() : RngStream(0, 0) {}

    RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
        std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * (stream_id + 0x632BE59BD9B4E019ULL));
        for (auto& s : state_) s = splitmix64(x);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    RngStream child(std::uint64_t index) const { return RngStream(seed_, stream_id_ + index); }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * scale;
        has_spare_ = true;
        return u * scale;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_[4];
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace bvm
