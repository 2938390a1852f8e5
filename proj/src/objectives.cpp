#include "caae/objectives.hpp"

#include <cmath>

#include "caae/networks.hpp"

namespace caae {

void LossWeights::validate() const {
    if (!(std::isfinite(lambda) && lambda >= 0.0))
        throw ValidationError("lambda must be finite and >= 0");
    if (!(std::isfinite(gamma) && gamma >= 0.0))
        throw ValidationError("gamma must be finite and >= 0");
}

Real softplus(Real x) {
    return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

Real recon_loss(const Tensor& x, const Tensor& x_hat) {
    if (!x.same_shape(x_hat))
        throw ValidationError("recon_loss: shape mismatch " + x.shape_str() + " vs " +
                              x_hat.shape_str());
    Real s = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
        const Real d = x[i] - x_hat[i];
        s += d * d;
    }
    return s / static_cast<Real>(x.numel());
}

Tensor recon_loss_grad(const Tensor& x, const Tensor& x_hat) {
    if (!x.same_shape(x_hat)) throw ValidationError("recon_loss_grad: shape mismatch");
    Tensor g = Tensor::uninitialized(x.shape());
    const Real scale = 2.0 / static_cast<Real>(x.numel());
    for (int64_t i = 0; i < x.numel(); ++i) g[i] = scale * (x_hat[i] - x[i]);
    return g;
}

static void tv_check(const Tensor& t) {
    if (t.ndim() != 4) throw ValidationError("tv_loss: expected (B,H,W,C)");
    if (t.dim(1) < 2 || t.dim(2) < 2)
        throw ValidationError("tv_loss: image must be at least 2x2");
}

// Each direction is averaged over its own valid-difference grid:
// vertical over B*C*(H-1)*W terms, horizontal over B*C*H*(W-1).
Real tv_loss(const Tensor& x) {
    tv_check(x);
    const int b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    Real sv = 0.0, sh = 0.0;
    for (int bi = 0; bi < b; ++bi)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
                for (int ci = 0; ci < c; ++ci) {
                    if (i + 1 < h)
                        sv += std::fabs(x.at(bi, i + 1, j, ci) - x.at(bi, i, j, ci));
                    if (j + 1 < w)
                        sh += std::fabs(x.at(bi, i, j + 1, ci) - x.at(bi, i, j, ci));
                }
    const Real nv = static_cast<Real>(static_cast<int64_t>(b) * c * (h - 1) * w);
    const Real nh = static_cast<Real>(static_cast<int64_t>(b) * c * h * (w - 1));
    return sv / nv + sh / nh;
}

Tensor tv_loss_grad(const Tensor& x) {
    tv_check(x);
    const int b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    const Real iv = 1.0 / static_cast<Real>(static_cast<int64_t>(b) * c * (h - 1) * w);
    const Real ih = 1.0 / static_cast<Real>(static_cast<int64_t>(b) * c * h * (w - 1));
    Tensor g(x.shape());
    auto sgn = [](Real v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    for (int bi = 0; bi < b; ++bi)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
                for (int ci = 0; ci < c; ++ci) {
                    if (i + 1 < h) {
                        const Real s = sgn(x.at(bi, i + 1, j, ci) - x.at(bi, i, j, ci)) * iv;
                        g.at(bi, i + 1, j, ci) += s;
                        g.at(bi, i, j, ci) -= s;
                    }
                    if (j + 1 < w) {
                        const Real s = sgn(x.at(bi, i, j + 1, ci) - x.at(bi, i, j, ci)) * ih;
                        g.at(bi, i, j + 1, ci) += s;
                        g.at(bi, i, j, ci) -= s;
                    }
                }
    return g;
}

Real adversarial_d_loss(const Tensor& real_logits, const Tensor& fake_logits) {
    if (real_logits.numel() == 0 || fake_logits.numel() == 0)
        throw ValidationError("adversarial_d_loss: empty logit batch");
    Real s = 0.0;
    for (int64_t i = 0; i < real_logits.numel(); ++i) s += softplus(-real_logits[i]);
    Real loss = s / static_cast<Real>(real_logits.numel());
    s = 0.0;
    for (int64_t i = 0; i < fake_logits.numel(); ++i) s += softplus(fake_logits[i]);
    return loss + s / static_cast<Real>(fake_logits.numel());
}

void adversarial_d_loss_grads(const Tensor& real_logits, const Tensor& fake_logits,
                              Tensor* d_real, Tensor* d_fake) {
    if (d_real) {
        *d_real = Tensor(real_logits.shape());
        const Real inv = 1.0 / static_cast<Real>(real_logits.numel());
        for (int64_t i = 0; i < real_logits.numel(); ++i)
            (*d_real)[i] = -sigmoid(-real_logits[i]) * inv;
    }
    if (d_fake) {
        *d_fake = Tensor(fake_logits.shape());
        const Real inv = 1.0 / static_cast<Real>(fake_logits.numel());
        for (int64_t i = 0; i < fake_logits.numel(); ++i)
            (*d_fake)[i] = sigmoid(fake_logits[i]) * inv;
    }
}

Real adversarial_g_loss(const Tensor& fake_logits, bool saturating) {
    if (fake_logits.numel() == 0)
        throw ValidationError("adversarial_g_loss: empty logit batch");
    Real s = 0.0;
    for (int64_t i = 0; i < fake_logits.numel(); ++i)
        s += saturating ? -softplus(fake_logits[i]) : softplus(-fake_logits[i]);
    return s / static_cast<Real>(fake_logits.numel());
}

Tensor adversarial_g_loss_grad(const Tensor& fake_logits, bool saturating) {
    Tensor g(fake_logits.shape());
    const Real inv = 1.0 / static_cast<Real>(fake_logits.numel());
    for (int64_t i = 0; i < fake_logits.numel(); ++i)
        g[i] = (saturating ? -sigmoid(fake_logits[i]) : -sigmoid(-fake_logits[i])) * inv;
    return g;
}

std::pair<Real, LossReport> eg_total_loss(const Tensor& x, const Tensor& x_hat,
                                          const Tensor& dz_fake_logits,
                                          const Tensor& dimg_fake_logits,
                                          const LossWeights& weights, bool saturating_g) {
    weights.validate();
    LossReport r;
    r.recon = recon_loss(x, x_hat);
    r.tv = tv_loss(x_hat);
    r.e_adv = dz_fake_logits.numel() ? adversarial_g_loss(dz_fake_logits, saturating_g) : 0.0;
    r.g_adv =
        dimg_fake_logits.numel() ? adversarial_g_loss(dimg_fake_logits, saturating_g) : 0.0;
    r.eg_total = weights.lambda * r.recon + weights.gamma * r.tv + r.e_adv + r.g_adv;
    return {r.eg_total, r};
}

}  // namespace caae
