#ifndef CAAE_OBJECTIVES_HPP
#define CAAE_OBJECTIVES_HPP

#include <utility>

#include "caae/tensor.hpp"

namespace caae {

struct LossWeights {
    Real lambda = 100.0;  // reconstruction weight
    Real gamma = 10.0;    // total-variation weight
    void validate() const;
};

struct LossReport {
    Real recon = 0.0;
    Real tv = 0.0;
    Real e_adv = 0.0;      // encoder's term against Dz
    Real g_adv = 0.0;      // generator's term against Dimg
    Real dz_loss = 0.0;
    Real dimg_loss = 0.0;
    Real eg_total = 0.0;
};

// Mean over batch and pixels of squared differences.
Real recon_loss(const Tensor& x, const Tensor& x_hat);
Tensor recon_loss_grad(const Tensor& x, const Tensor& x_hat);  // d/dx_hat

// Anisotropic total variation: mean over batch, channels and the
// (H-1)x(W-1) valid grid of |x[i+1,j]-x[i,j]| + |x[i,j+1]-x[i,j]|.
Real tv_loss(const Tensor& x_hat);
Tensor tv_loss_grad(const Tensor& x_hat);

// -mean log sigma(real) - mean log(1 - sigma(fake)), in logit space.
Real adversarial_d_loss(const Tensor& real_logits, const Tensor& fake_logits);
void adversarial_d_loss_grads(const Tensor& real_logits, const Tensor& fake_logits,
                              Tensor* d_real, Tensor* d_fake);

// Non-saturating form -mean log sigma(fake); the literal saturating
// form mean log(1 - sigma(fake)) is available behind the flag.
Real adversarial_g_loss(const Tensor& fake_logits, bool saturating = false);
Tensor adversarial_g_loss_grad(const Tensor& fake_logits, bool saturating = false);

// lambda*recon + gamma*tv + g-loss against Dz + g-loss against Dimg.
// Empty logit tensors stand for an ablated discriminator and contribute
// zero. dz_loss/dimg_loss in the report are left for the trainer.
std::pair<Real, LossReport> eg_total_loss(const Tensor& x, const Tensor& x_hat,
                                          const Tensor& dz_fake_logits,
                                          const Tensor& dimg_fake_logits,
                                          const LossWeights& weights,
                                          bool saturating_g = false);

Real softplus(Real x);

}  // namespace caae

#endif
