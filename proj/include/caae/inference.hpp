#ifndef CAAE_INFERENCE_HPP
#define CAAE_INFERENCE_HPP

#include <vector>

#include "caae/image_io.hpp"
#include "caae/networks.hpp"

namespace caae {

// Ten outputs sharing one latent code, ordered by age bin.
struct SweepResult {
    Tensor source;                // (H,W,C)
    Tensor code;                  // (n), encoded exactly once
    std::vector<Tensor> outputs;  // 10 x (H,W,C)
};

struct MorphSequence {
    std::vector<Tensor> frames;  // steps x (H,W,C)
    Tensor z1, z2;               // endpoint codes
    Tensor label;
};

// G(E(x), l) for a single image.
Tensor reconstruct(Model& m, const Tensor& x, const Tensor& label);

// Encodes once, then generates one output per age bin. No age input:
// the query image's true age is never used.
SweepResult age_sweep(Model& m, const Tensor& x);

// Linear latent path z(t) = (1-t) z1 + t z2, t = k/(steps-1), fixed label.
MorphSequence interpolate(Model& m, const Tensor& x1, const Tensor& x2, const Tensor& label,
                          int steps);

// Mean per-step RMS distance between consecutive frames.
Real morph_smoothness(const MorphSequence& seq);

// R x 10 tile grid (row = age sweep of one face), 2-pixel black borders,
// denormalized to 8-bit.
RawImage manifold_grid(Model& m, const std::vector<Tensor>& faces);

}  // namespace caae

#endif
