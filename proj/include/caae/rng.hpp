#ifndef CAAE_RNG_HPP
#define CAAE_RNG_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "caae/tensor.hpp"

namespace caae {

// Deterministic RNG. The engine is std::mt19937_64 (bit-exact across
// platforms); all distributions are implemented here so draws do not
// depend on the standard library's unspecified distribution algorithms.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform on [0, 1) with 53 random mantissa bits.
    Real unit() { return static_cast<Real>(eng_() >> 11) * 0x1.0p-53; }

    Real uniform(Real lo, Real hi) { return lo + (hi - lo) * unit(); }

    // Uniform integer in [0, n), unbiased (rejection sampling).
    uint64_t below(uint64_t n);

    void fill_uniform(Tensor& t, Real lo, Real hi);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Exact textual round trip of the engine state.
    std::string serialize() const;
    void restore(const std::string& state);

    bool operator==(const Rng& o) const { return eng_ == o.eng_; }

  private:
    std::mt19937_64 eng_;
};

// Stable 64-bit mix for deriving per-(seed, epoch) stream seeds.
uint64_t mix_seed(uint64_t a, uint64_t b);

}  // namespace caae

#endif
