#ifndef RELACTRL_RNG_HPP
#define RELACTRL_RNG_HPP

#include <cstdint>
#include <vector>

namespace relactrl {

// splitmix64 finalizer. Used both as the stream generator and to derive
// independent child seeds from (root, stream_id) pairs, so every draw in the
// project is a pure function of the user-visible seed.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t root, uint64_t stream_id) {
    return mix64(root ^ mix64(stream_id + 0x51a2b3c4d5e6f708ULL));
}

// Deterministic cross-platform generator. std::shuffle / std::normal_distribution
// are implementation-defined, so sampling is done by hand here.
class Stream {
  public:
    explicit Stream(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        if (n == 0) return 0;
        uint64_t threshold = (~uint64_t(0) - n + 1) % n;  // 2^64 mod n
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller.
    double next_normal();

    // In-place Fisher-Yates over [0, n).
    void shuffle_indices(std::vector<size_t>& idx);

    // Random permutation of [0, n).
    std::vector<size_t> permutation(size_t n);

  private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace relactrl

#endif
