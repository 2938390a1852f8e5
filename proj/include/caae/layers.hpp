#ifndef CAAE_LAYERS_HPP
#define CAAE_LAYERS_HPP

#include <any>
#include <memory>
#include <string>
#include <vector>

#include "caae/rng.hpp"
#include "caae/tensor.hpp"

namespace caae {

struct ParamRef {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

// Non-trainable persistent state (batch-norm running statistics).
struct StateRef {
    std::string name;
    Tensor* value;
};

// A differentiable layer. forward with tape != nullptr runs in training
// mode and records what backward needs; with tape == nullptr it runs in
// inference mode and performs no writes, so concurrent calls sharing
// read-only parameters are safe. backward accumulates parameter
// gradients (+=) and returns the gradient w.r.t. the layer input.
class Layer {
  public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, std::any* tape) = 0;
    virtual Tensor backward(const Tensor& dy, const std::any& tape) = 0;
    virtual void init(Rng& rng) {}
    virtual void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {}
    virtual void collect_state(const std::string& prefix, std::vector<StateRef>& out) {}
    virtual void zero_grads() {}
};

class Dense : public Layer {
  public:
    Dense(int in, int out);
    Tensor forward(const Tensor& x, std::any* tape) override;
    Tensor backward(const Tensor& dy, const std::any& tape) override;
    void init(Rng& rng) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void zero_grads() override;

  private:
    int in_, out_;
    Tensor w_, b_, dw_, db_;  // w: (out, in)
};

// 5x5 convolution, stride 2, padding 2: (B,H,W,Cin) -> (B,H/2,W/2,Cout).
class Conv2d : public Layer {
  public:
    Conv2d(int cin, int cout);
    Tensor forward(const Tensor& x, std::any* tape) override;
    Tensor backward(const Tensor& dy, const std::any& tape) override;
    void init(Rng& rng) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void zero_grads() override;

  private:
    int cin_, cout_;
    Tensor w_, b_, dw_, db_;  // w: (cout, k*k*cin)
};

// Exact adjoint of Conv2d: (B,h,w,Cin) -> (B,2h,2w,Cout).
class ConvTranspose2d : public Layer {
  public:
    ConvTranspose2d(int cin, int cout);
    Tensor forward(const Tensor& x, std::any* tape) override;
    Tensor backward(const Tensor& dy, const std::any& tape) override;
    void init(Rng& rng) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void zero_grads() override;

  private:
    int cin_, cout_;
    Tensor w_, b_, dw_, db_;  // w: (cin, k*k*cout)
};

class Relu : public Layer {
  public:
    Tensor forward(const Tensor& x, std::any* tape) override;
    Tensor backward(const Tensor& dy, const std::any& tape) override;
};

class Tanh : public Layer {
  public:
    Tensor forward(const Tensor& x, std::any* tape) override;
    Tensor backward(const Tensor& dy, const std::any& tape) override;
};

// Per-channel batch normalization over NHWC activations. Training mode
// normalizes with batch statistics and updates the running estimates;
// inference mode uses the running estimates.
class BatchNorm2d : public Layer {
  public:
    explicit BatchNorm2d(int channels);
    Tensor forward(const Tensor& x, std::any* tape) override;
    Tensor backward(const Tensor& dy, const std::any& tape) override;
    void init(Rng& rng) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
    void zero_grads() override;

  private:
    int c_;
    Tensor gamma_, beta_, dgamma_, dbeta_;
    Tensor running_mean_, running_var_;
    static constexpr Real kEps = 1e-5;
    static constexpr Real kMomentum = 0.9;
};

// Metadata-only shape change between conv and dense stages.
class Reshape : public Layer {
  public:
    explicit Reshape(std::vector<int> out_shape_tail) : tail_(std::move(out_shape_tail)) {}
    Tensor forward(const Tensor& x, std::any* tape) override;
    Tensor backward(const Tensor& dy, const std::any& tape) override;

  private:
    std::vector<int> tail_;  // shape after the batch dimension
};

class Sequential {
  public:
    Sequential() = default;
    Sequential(Sequential&&) = default;
    Sequential& operator=(Sequential&&) = default;

    void add(std::unique_ptr<Layer> layer, std::string name);
    Tensor forward(const Tensor& x, std::vector<std::any>* tape);
    Tensor backward(Tensor dy, const std::vector<std::any>& tape);
    void init(Rng& rng);
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
    void collect_state(const std::string& prefix, std::vector<StateRef>& out);
    void zero_grads();

  private:
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<std::string> names_;
};

// Two-input concatenations used by the generator ([z, l]) and the image
// discriminator (label tiled into constant feature maps).
Tensor concat_cols(const Tensor& a, const Tensor& b);
void split_cols(const Tensor& ab, int na, Tensor* da, Tensor* db);
Tensor concat_label_maps(const Tensor& fm, const Tensor& labels);
Tensor drop_label_maps(const Tensor& dfm, int channels);

}  // namespace caae

#endif
