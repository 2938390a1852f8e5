#ifndef CAAE_NETWORKS_HPP
#define CAAE_NETWORKS_HPP

#include <any>
#include <cstdint>
#include <string>
#include <vector>

#include "caae/layers.hpp"

namespace caae {

inline constexpr int kNumAgeBins = 10;

struct NetworkConfig {
    int image_size = 64;
    int channels = 3;
    int latent_dim = 64;
    int base_filters = 16;
    int num_scales = 4;
    bool use_batchnorm_dimg = true;

    // Collects every violated invariant; throws ValidationError listing all.
    void validate() const;
    std::vector<std::string> validation_errors() const;
    int bottleneck_size() const { return image_size >> num_scales; }
};

// Encoder E: num_scales stride-2 5x5 convolutions (ReLU), then a dense
// layer to the latent dimension, tanh-bounded.
class Encoder {
  public:
    explicit Encoder(const NetworkConfig& cfg);
    Tensor forward(const Tensor& x, std::vector<std::any>* tape = nullptr);
    Tensor backward(const Tensor& dz, const std::vector<std::any>& tape);
    void init(Rng& rng) { seq_.init(rng); }
    void collect_params(std::vector<ParamRef>& out) { seq_.collect_params("enc", out); }
    void zero_grads() { seq_.zero_grads(); }

  private:
    NetworkConfig cfg_;
    Sequential seq_;
};

// Generator G: dense from [z, l] to the bottleneck volume, then
// num_scales stride-2 transposed convolutions, tanh output.
class Generator {
  public:
    explicit Generator(const NetworkConfig& cfg);
    Tensor forward(const Tensor& z, const Tensor& labels, std::vector<std::any>* tape = nullptr);
    // Returns d/dz; the label is an input constant, its gradient is dropped.
    Tensor backward(const Tensor& dy, const std::vector<std::any>& tape);
    void init(Rng& rng) { seq_.init(rng); }
    void collect_params(std::vector<ParamRef>& out) { seq_.collect_params("gen", out); }
    void zero_grads() { seq_.zero_grads(); }

  private:
    NetworkConfig cfg_;
    Sequential seq_;
};

// Latent discriminator Dz: dense 64-32-1 with ReLU intermediates.
// Outputs logits (B,1); probabilities via sigmoid_prob().
class DiscriminatorZ {
  public:
    explicit DiscriminatorZ(const NetworkConfig& cfg);
    Tensor forward(const Tensor& z, std::vector<std::any>* tape = nullptr);
    Tensor backward(const Tensor& dlogits, const std::vector<std::any>& tape);
    void init(Rng& rng) { seq_.init(rng); }
    void collect_params(std::vector<ParamRef>& out) { seq_.collect_params("dz", out); }
    void zero_grads() { seq_.zero_grads(); }

  private:
    NetworkConfig cfg_;
    Sequential seq_;
};

// Image discriminator Dimg: mirrors the encoder's conv stack; the age
// label is tiled into ten constant feature maps and concatenated after
// the first convolution. Batch norm on intermediate convs when enabled.
class DiscriminatorImg {
  public:
    struct Tape {
        std::vector<std::any> pre, post;
    };

    explicit DiscriminatorImg(const NetworkConfig& cfg);
    Tensor forward(const Tensor& x, const Tensor& labels, Tape* tape = nullptr);
    Tensor backward(const Tensor& dlogits, const Tape& tape);
    void init(Rng& rng);
    void collect_params(std::vector<ParamRef>& out);
    void collect_state(std::vector<StateRef>& out) { post_.collect_state("dimg", out); }
    void zero_grads();

  private:
    NetworkConfig cfg_;
    Sequential pre_, post_;
};

// The four parameter blocks of the CAAE.
class Model {
  public:
    explicit Model(const NetworkConfig& cfg);

    const NetworkConfig& config() const { return cfg_; }
    Encoder& enc() { return enc_; }
    Generator& gen() { return gen_; }
    DiscriminatorZ& dz() { return dz_; }
    DiscriminatorImg& dimg() { return dimg_; }

    // Deterministic in seed: fan-in-scaled uniform weights, zero biases.
    void init(uint64_t seed);

    static const std::vector<std::string>& group_names();  // enc, gen, dz, dimg
    std::vector<ParamRef> group_params(const std::string& group);
    std::vector<ParamRef> all_params();
    std::vector<StateRef> all_state();

  private:
    NetworkConfig cfg_;
    Encoder enc_;
    Generator gen_;
    DiscriminatorZ dz_;
    DiscriminatorImg dimg_;
};

Model init_params(const NetworkConfig& cfg, uint64_t seed);

struct DiscriminatorOutput {
    Tensor prob;    // (B), strictly inside (0,1)
    Tensor logits;  // (B)
};

// Inference-mode forward passes (pure given fixed parameters).
Tensor encode(Model& m, const Tensor& x);
Tensor generate(Model& m, const Tensor& z, const Tensor& labels);
DiscriminatorOutput discriminate_z(Model& m, const Tensor& z);
DiscriminatorOutput discriminate_img(Model& m, const Tensor& x, const Tensor& labels);

Real sigmoid(Real x);

}  // namespace caae

#endif
