#include "caae/rng.hpp"

#include <sstream>

namespace caae {

uint64_t Rng::below(uint64_t n) {
    if (n == 0) throw ValidationError("Rng::below(0)");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = eng_();
    } while (x >= limit);
    return x % n;
}

void Rng::fill_uniform(Tensor& t, Real lo, Real hi) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = uniform(lo, hi);
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream is(state);
    is >> eng_;
    if (is.fail()) throw IoError("invalid rng state string");
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
    // splitmix64 finalizer over the combined words
    uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

}  // namespace caae
