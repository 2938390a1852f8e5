#include "caae/inference.hpp"

#include <cmath>

#include "caae/data_pipeline.hpp"

namespace caae {

namespace {

Tensor as_batch1(const Tensor& x) {
    if (x.ndim() != 3) throw ValidationError("expected a single (H,W,C) image");
    return x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)});
}

Tensor from_batch1(const Tensor& x) {
    return x.reshaped({x.dim(1), x.dim(2), x.dim(3)});
}

}  // namespace

Tensor reconstruct(Model& m, const Tensor& x, const Tensor& label) {
    Tensor z = encode(m, as_batch1(x));
    return from_batch1(generate(m, z, label.reshaped({1, kNumAgeBins})));
}

SweepResult age_sweep(Model& m, const Tensor& x) {
    SweepResult r;
    r.source = x;
    Tensor z = encode(m, as_batch1(x));  // single encode, shared by all bins
    r.code = z.reshaped({m.config().latent_dim});
    // One generator pass over all ten bins with the same code.
    Tensor zs({kNumAgeBins, m.config().latent_dim});
    Tensor labels({kNumAgeBins, kNumAgeBins});
    for (int b = 0; b < kNumAgeBins; ++b) {
        for (int j = 0; j < m.config().latent_dim; ++j) zs.at(b, j) = r.code[j];
        Tensor l = bin_to_label(b);
        for (int j = 0; j < kNumAgeBins; ++j) labels.at(b, j) = l[j];
    }
    Tensor out = generate(m, zs, labels);
    const int h = out.dim(1), w = out.dim(2), c = out.dim(3);
    const int64_t per = static_cast<int64_t>(h) * w * c;
    for (int b = 0; b < kNumAgeBins; ++b) {
        Tensor img({h, w, c});
        std::copy(out.data() + b * per, out.data() + (b + 1) * per, img.data());
        r.outputs.push_back(std::move(img));
    }
    return r;
}

MorphSequence interpolate(Model& m, const Tensor& x1, const Tensor& x2, const Tensor& label,
                          int steps) {
    if (steps < 2) throw ValidationError("interpolate: steps must be >= 2");
    if (!is_valid_label(label.reshaped({kNumAgeBins})))
        throw ValidationError("interpolate: invalid age label");
    MorphSequence seq;
    seq.label = label.reshaped({kNumAgeBins});
    seq.z1 = encode(m, as_batch1(x1)).reshaped({m.config().latent_dim});
    seq.z2 = encode(m, as_batch1(x2)).reshaped({m.config().latent_dim});
    const int n = m.config().latent_dim;
    Tensor zs({steps, n});
    Tensor labels({steps, kNumAgeBins});
    for (int k = 0; k < steps; ++k) {
        const Real t = static_cast<Real>(k) / static_cast<Real>(steps - 1);
        for (int j = 0; j < n; ++j) zs.at(k, j) = (1.0 - t) * seq.z1[j] + t * seq.z2[j];
        for (int j = 0; j < kNumAgeBins; ++j) labels.at(k, j) = seq.label[j];
    }
    Tensor out = generate(m, zs, labels);
    const int h = out.dim(1), w = out.dim(2), c = out.dim(3);
    const int64_t per = static_cast<int64_t>(h) * w * c;
    for (int k = 0; k < steps; ++k) {
        Tensor img({h, w, c});
        std::copy(out.data() + k * per, out.data() + (k + 1) * per, img.data());
        seq.frames.push_back(std::move(img));
    }
    return seq;
}

Real morph_smoothness(const MorphSequence& seq) {
    if (seq.frames.size() < 2) return 0.0;
    Real total = 0.0;
    for (size_t k = 0; k + 1 < seq.frames.size(); ++k) {
        const Tensor& a = seq.frames[k];
        const Tensor& b = seq.frames[k + 1];
        Real s = 0.0;
        for (int64_t i = 0; i < a.numel(); ++i) {
            const Real d = a[i] - b[i];
            s += d * d;
        }
        total += std::sqrt(s / static_cast<Real>(a.numel()));
    }
    return total / static_cast<Real>(seq.frames.size() - 1);
}

RawImage manifold_grid(Model& m, const std::vector<Tensor>& faces) {
    if (faces.empty()) throw ValidationError("manifold_grid: empty face list");
    constexpr int kBorder = 2;
    const int s = m.config().image_size, c = m.config().channels;
    const int rows = static_cast<int>(faces.size());
    RawImage grid;
    grid.h = rows * s + (rows + 1) * kBorder;
    grid.w = kNumAgeBins * s + (kNumAgeBins + 1) * kBorder;
    grid.c = c;
    grid.px.assign(static_cast<size_t>(grid.h) * grid.w * c, 0);
    for (int r = 0; r < rows; ++r) {
        SweepResult sweep = age_sweep(m, faces[static_cast<size_t>(r)]);
        for (int b = 0; b < kNumAgeBins; ++b) {
            RawImage tile = denormalize_image(sweep.outputs[static_cast<size_t>(b)]);
            const int oy = kBorder + r * (s + kBorder);
            const int ox = kBorder + b * (s + kBorder);
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x)
                    for (int ci = 0; ci < c; ++ci)
                        grid.at(oy + y, ox + x, ci) = tile.at(y, x, ci);
        }
    }
    return grid;
}

}  // namespace caae
