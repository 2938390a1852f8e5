#include "caae/networks.hpp"

#include <cmath>
#include <sstream>

namespace caae {

std::vector<std::string> NetworkConfig::validation_errors() const {
    std::vector<std::string> errs;
    if (num_scales < 1) errs.push_back("num_scales must be >= 1");
    if (channels != 1 && channels != 3) errs.push_back("channels must be 1 or 3");
    if (latent_dim < 2) errs.push_back("latent_dim must be >= 2");
    if (base_filters < 8) errs.push_back("base_filters must be >= 8");
    if (num_scales >= 1) {
        const int s = image_size >> num_scales;
        if (s < 4 || (s << num_scales) != image_size)
            errs.push_back("image_size must be 2^num_scales * s with integer s >= 4");
    }
    return errs;
}

void NetworkConfig::validate() const {
    auto errs = validation_errors();
    if (errs.empty()) return;
    std::ostringstream os;
    os << "invalid NetworkConfig:";
    for (const auto& e : errs) os << "\n  - " << e;
    throw ValidationError(os.str());
}

// ----------------------------------------------------------------- Encoder

Encoder::Encoder(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    int c = cfg.channels;
    for (int k = 0; k < cfg.num_scales; ++k) {
        const int f = cfg.base_filters << k;
        seq_.add(std::make_unique<Conv2d>(c, f), "conv" + std::to_string(k + 1));
        seq_.add(std::make_unique<Relu>(), "relu" + std::to_string(k + 1));
        c = f;
    }
    const int s = cfg.bottleneck_size();
    seq_.add(std::make_unique<Reshape>(std::vector<int>{s * s * c}), "flatten");
    seq_.add(std::make_unique<Dense>(s * s * c, cfg.latent_dim), "fc");
    seq_.add(std::make_unique<Tanh>(), "tanh");
}

Tensor Encoder::forward(const Tensor& x, std::vector<std::any>* tape) {
    if (x.ndim() != 4 || x.dim(1) != cfg_.image_size || x.dim(2) != cfg_.image_size ||
        x.dim(3) != cfg_.channels)
        throw ValidationError("encode: bad image shape " + x.shape_str());
    return seq_.forward(x, tape);
}

Tensor Encoder::backward(const Tensor& dz, const std::vector<std::any>& tape) {
    return seq_.backward(dz, tape);
}

// --------------------------------------------------------------- Generator

Generator::Generator(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const int s = cfg.bottleneck_size();
    int c = cfg.base_filters << (cfg.num_scales - 1);
    seq_.add(std::make_unique<Dense>(cfg.latent_dim + kNumAgeBins, s * s * c), "fc");
    seq_.add(std::make_unique<Relu>(), "relu0");
    seq_.add(std::make_unique<Reshape>(std::vector<int>{s, s, c}), "unflatten");
    for (int k = 0; k < cfg.num_scales; ++k) {
        const bool last = (k == cfg.num_scales - 1);
        const int cout = last ? cfg.channels : c / 2;
        seq_.add(std::make_unique<ConvTranspose2d>(c, cout), "deconv" + std::to_string(k + 1));
        if (last)
            seq_.add(std::make_unique<Tanh>(), "tanh");
        else
            seq_.add(std::make_unique<Relu>(), "relu" + std::to_string(k + 1));
        c = cout;
    }
}

Tensor Generator::forward(const Tensor& z, const Tensor& labels, std::vector<std::any>* tape) {
    if (z.ndim() != 2 || z.dim(1) != cfg_.latent_dim)
        throw ValidationError("generate: latent batch must be (B," +
                              std::to_string(cfg_.latent_dim) + "), got " + z.shape_str());
    if (labels.ndim() != 2 || labels.dim(1) != kNumAgeBins || labels.dim(0) != z.dim(0))
        throw ValidationError("generate: label batch must be (" + std::to_string(z.dim(0)) +
                              "," + std::to_string(kNumAgeBins) + "), got " +
                              labels.shape_str());
    return seq_.forward(concat_cols(z, labels), tape);
}

Tensor Generator::backward(const Tensor& dy, const std::vector<std::any>& tape) {
    Tensor din = seq_.backward(dy, tape);
    Tensor dz;
    split_cols(din, cfg_.latent_dim, &dz, nullptr);
    return dz;
}

// ----------------------------------------------------------- DiscriminatorZ

DiscriminatorZ::DiscriminatorZ(const NetworkConfig& cfg) : cfg_(cfg) {
    seq_.add(std::make_unique<Dense>(cfg.latent_dim, 64), "fc1");
    seq_.add(std::make_unique<Relu>(), "relu1");
    seq_.add(std::make_unique<Dense>(64, 32), "fc2");
    seq_.add(std::make_unique<Relu>(), "relu2");
    seq_.add(std::make_unique<Dense>(32, 1), "fc3");
}

Tensor DiscriminatorZ::forward(const Tensor& z, std::vector<std::any>* tape) {
    if (z.ndim() != 2 || z.dim(1) != cfg_.latent_dim)
        throw ValidationError("discriminate_z: bad latent shape " + z.shape_str());
    return seq_.forward(z, tape);
}

Tensor DiscriminatorZ::backward(const Tensor& dlogits, const std::vector<std::any>& tape) {
    return seq_.backward(dlogits, tape);
}

// --------------------------------------------------------- DiscriminatorImg

DiscriminatorImg::DiscriminatorImg(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    pre_.add(std::make_unique<Conv2d>(cfg.channels, cfg.base_filters), "conv1");
    pre_.add(std::make_unique<Relu>(), "relu1");
    int c = cfg.base_filters + kNumAgeBins;  // label maps enter here
    for (int k = 1; k < cfg.num_scales; ++k) {
        const int f = cfg.base_filters << k;
        post_.add(std::make_unique<Conv2d>(c, f), "conv" + std::to_string(k + 1));
        if (cfg.use_batchnorm_dimg)
            post_.add(std::make_unique<BatchNorm2d>(f), "bn" + std::to_string(k + 1));
        post_.add(std::make_unique<Relu>(), "relu" + std::to_string(k + 1));
        c = f;
    }
    const int s = cfg.bottleneck_size();
    post_.add(std::make_unique<Reshape>(std::vector<int>{s * s * c}), "flatten");
    post_.add(std::make_unique<Dense>(s * s * c, 1), "fc");
}

Tensor DiscriminatorImg::forward(const Tensor& x, const Tensor& labels, Tape* tape) {
    if (x.ndim() != 4 || x.dim(1) != cfg_.image_size || x.dim(2) != cfg_.image_size ||
        x.dim(3) != cfg_.channels)
        throw ValidationError("discriminate_img: bad image shape " + x.shape_str());
    if (labels.ndim() != 2 || labels.dim(1) != kNumAgeBins || labels.dim(0) != x.dim(0))
        throw ValidationError("discriminate_img: bad label shape " + labels.shape_str());
    Tensor a = pre_.forward(x, tape ? &tape->pre : nullptr);
    Tensor cat = concat_label_maps(a, labels);
    return post_.forward(cat, tape ? &tape->post : nullptr);
}

Tensor DiscriminatorImg::backward(const Tensor& dlogits, const Tape& tape) {
    Tensor dcat = post_.backward(dlogits, tape.post);
    Tensor da = drop_label_maps(dcat, cfg_.base_filters);
    return pre_.backward(da, tape.pre);
}

void DiscriminatorImg::init(Rng& rng) {
    pre_.init(rng);
    post_.init(rng);
}

void DiscriminatorImg::collect_params(std::vector<ParamRef>& out) {
    pre_.collect_params("dimg", out);
    post_.collect_params("dimg", out);
}

void DiscriminatorImg::zero_grads() {
    pre_.zero_grads();
    post_.zero_grads();
}

// ------------------------------------------------------------------- Model

Model::Model(const NetworkConfig& cfg)
    : cfg_(cfg), enc_(cfg), gen_(cfg), dz_(cfg), dimg_(cfg) {}

void Model::init(uint64_t seed) {
    Rng rng(mix_seed(seed, 0x6361616564696e69ULL));
    enc_.init(rng);
    gen_.init(rng);
    dz_.init(rng);
    dimg_.init(rng);
}

const std::vector<std::string>& Model::group_names() {
    static const std::vector<std::string> names{"enc", "gen", "dz", "dimg"};
    return names;
}

std::vector<ParamRef> Model::group_params(const std::string& group) {
    std::vector<ParamRef> out;
    if (group == "enc")
        enc_.collect_params(out);
    else if (group == "gen")
        gen_.collect_params(out);
    else if (group == "dz")
        dz_.collect_params(out);
    else if (group == "dimg")
        dimg_.collect_params(out);
    else
        throw ValidationError("unknown parameter group: " + group);
    return out;
}

std::vector<ParamRef> Model::all_params() {
    std::vector<ParamRef> out;
    for (const auto& g : group_names()) {
        auto p = group_params(g);
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::vector<StateRef> Model::all_state() {
    std::vector<StateRef> out;
    dimg_.collect_state(out);
    return out;
}

Model init_params(const NetworkConfig& cfg, uint64_t seed) {
    Model m(cfg);
    m.init(seed);
    return m;
}

Real sigmoid(Real x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const Real e = std::exp(x);
    return e / (1.0 + e);
}

static DiscriminatorOutput squeeze_logits(Tensor logits) {
    const int b = logits.dim(0);
    DiscriminatorOutput out;
    out.logits = logits.reshaped({b});
    out.prob = Tensor({b});
    for (int i = 0; i < b; ++i) out.prob[i] = sigmoid(out.logits[i]);
    return out;
}

Tensor encode(Model& m, const Tensor& x) { return m.enc().forward(x); }

Tensor generate(Model& m, const Tensor& z, const Tensor& labels) {
    return m.gen().forward(z, labels);
}

DiscriminatorOutput discriminate_z(Model& m, const Tensor& z) {
    return squeeze_logits(m.dz().forward(z));
}

DiscriminatorOutput discriminate_img(Model& m, const Tensor& x, const Tensor& labels) {
    return squeeze_logits(m.dimg().forward(x, labels));
}

}  // namespace caae
