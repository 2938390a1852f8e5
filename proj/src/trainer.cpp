#include "caae/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "caae/checkpoint.hpp"

namespace fs = std::filesystem;

namespace caae {

std::vector<std::string> TrainConfig::validation_errors() const {
    std::vector<std::string> errs = network.validation_errors();
    if (!(std::isfinite(weights.lambda) && weights.lambda >= 0.0))
        errs.push_back("lambda must be finite and >= 0");
    if (!(std::isfinite(weights.gamma) && weights.gamma >= 0.0))
        errs.push_back("gamma must be finite and >= 0");
    if (!(learning_rate > 0.0)) errs.push_back("learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) errs.push_back("beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) errs.push_back("beta2 must be in [0,1)");
    if (batch_size < 1) errs.push_back("batch_size must be >= 1");
    if (epochs < 1) errs.push_back("epochs must be >= 1");
    if (checkpoint_every < 1) errs.push_back("checkpoint_every must be >= 1");
    return errs;
}

void TrainConfig::validate() const {
    auto errs = validation_errors();
    if (errs.empty()) return;
    std::ostringstream os;
    os << "invalid TrainConfig:";
    for (const auto& e : errs) os << "\n  - " << e;
    throw ValidationError(os.str());
}

Tensor sample_prior(const PriorSpec& spec, int batch, Rng& rng) {
    if (batch < 1) throw ValidationError("sample_prior: batch must be >= 1");
    if (!(spec.low < spec.high)) throw ValidationError("sample_prior: low must be < high");
    Tensor z({batch, spec.dim});
    rng.fill_uniform(z, spec.low, spec.high);
    return z;
}

void adam_step(std::vector<ParamRef>& params, AdamGroup& adam, Real alpha, Real beta1,
               Real beta2, Real eps) {
    if (params.size() != adam.slots.size())
        throw ValidationError("adam_step: moment slots do not match parameter list");
    adam.t += 1;
    const Real bc1 = 1.0 - std::pow(beta1, static_cast<Real>(adam.t));
    const Real bc2 = 1.0 - std::pow(beta2, static_cast<Real>(adam.t));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& w = *params[i].value;
        const Tensor& g = *params[i].grad;
        Tensor& m = adam.slots[i].m;
        Tensor& v = adam.slots[i].v;
        for (int64_t k = 0; k < w.numel(); ++k) {
            m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
            const Real mhat = m[k] / bc1;
            const Real vhat = v[k] / bc2;
            w[k] -= alpha * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

TrainState::TrainState(const NetworkConfig& net, uint64_t seed)
    : model_(std::make_unique<Model>(net)), rng_(mix_seed(seed, 0x747261696e726e67ULL)) {
    model_->init(seed);
    for (const auto& gname : Model::group_names()) {
        AdamGroup grp;
        for (const auto& p : model_->group_params(gname))
            grp.slots.push_back({Tensor(p.value->shape()), Tensor(p.value->shape())});
        adam_[gname] = std::move(grp);
    }
}

namespace {

void ensure_finite(Real value, const char* term) {
    if (!std::isfinite(value))
        throw TrainingError(std::string("non-finite loss term: ") + term);
}

}  // namespace

LossReport train_step(TrainState& state, const Batch& batch, const TrainConfig& config) {
    Model& m = state.model();
    const NetworkConfig& net = m.config();
    const int b = batch.images.dim(0);
    if (batch.labels.dim(0) != b)
        throw ValidationError("train_step: image/label batch size mismatch");

    LossReport report;

    // E and G forward once; their parameters do not change until the
    // joint update, so these activations stay valid for all sub-steps.
    std::vector<std::any> tape_e, tape_g;
    Tensor z = m.enc().forward(batch.images, &tape_e);
    Tensor x_hat = m.gen().forward(z, batch.labels, &tape_g);

    // (1) Dimg: real pairs (x, l) against generated (G(E(x), l), l).
    if (!config.ablate_dimg) {
        m.dimg().zero_grads();
        DiscriminatorImg::Tape tr, tf;
        Tensor real_logits = m.dimg().forward(batch.images, batch.labels, &tr);
        Tensor fake_logits = m.dimg().forward(x_hat, batch.labels, &tf);
        report.dimg_loss = adversarial_d_loss(real_logits, fake_logits);
        ensure_finite(report.dimg_loss, "dimg_loss");
        Tensor d_real, d_fake;
        adversarial_d_loss_grads(real_logits, fake_logits, &d_real, &d_fake);
        m.dimg().backward(d_real, tr);
        m.dimg().backward(d_fake, tf);
        auto params = m.group_params("dimg");
        adam_step(params, state.adam()["dimg"], config.learning_rate, config.beta1,
                  config.beta2);
    }

    // (2) Dz: prior samples against encoded codes.
    if (!config.ablate_dz) {
        m.dz().zero_grads();
        Tensor z_star = sample_prior({net.latent_dim}, b, state.rng());
        std::vector<std::any> tzr, tzf;
        Tensor real_logits = m.dz().forward(z_star, &tzr);
        Tensor fake_logits = m.dz().forward(z, &tzf);
        report.dz_loss = adversarial_d_loss(real_logits, fake_logits);
        ensure_finite(report.dz_loss, "dz_loss");
        Tensor d_real, d_fake;
        adversarial_d_loss_grads(real_logits, fake_logits, &d_real, &d_fake);
        m.dz().backward(d_real, tzr);
        m.dz().backward(d_fake, tzf);
        auto params = m.group_params("dz");
        adam_step(params, state.adam()["dz"], config.learning_rate, config.beta1,
                  config.beta2);
    }

    // (3) Joint E,G step on the total objective, against the freshly
    // updated discriminators.
    m.enc().zero_grads();
    m.gen().zero_grads();
    m.dz().zero_grads();
    m.dimg().zero_grads();

    Tensor dz_fake_logits, dimg_fake_logits;
    std::vector<std::any> tz_eg;
    DiscriminatorImg::Tape td_eg;
    if (!config.ablate_dz) dz_fake_logits = m.dz().forward(z, &tz_eg);
    if (!config.ablate_dimg) dimg_fake_logits = m.dimg().forward(x_hat, batch.labels, &td_eg);

    auto [total, eg_report] = eg_total_loss(batch.images, x_hat, dz_fake_logits,
                                            dimg_fake_logits, config.weights,
                                            config.saturating_g);
    report.recon = eg_report.recon;
    report.tv = eg_report.tv;
    report.e_adv = eg_report.e_adv;
    report.g_adv = eg_report.g_adv;
    report.eg_total = eg_report.eg_total;
    ensure_finite(report.recon, "recon");
    ensure_finite(report.tv, "tv");
    ensure_finite(report.e_adv, "e_adv");
    ensure_finite(report.g_adv, "g_adv");
    ensure_finite(report.eg_total, "eg_total");

    Tensor d_xhat(x_hat.shape());
    axpy(config.weights.lambda, recon_loss_grad(batch.images, x_hat), d_xhat);
    axpy(config.weights.gamma, tv_loss_grad(x_hat), d_xhat);
    if (!config.ablate_dimg) {
        Tensor dlog = adversarial_g_loss_grad(dimg_fake_logits, config.saturating_g);
        Tensor dx = m.dimg().backward(dlog, td_eg);
        axpy(1.0, dx, d_xhat);
    }
    Tensor d_z = m.gen().backward(d_xhat, tape_g);
    if (!config.ablate_dz) {
        Tensor dlog = adversarial_g_loss_grad(dz_fake_logits, config.saturating_g);
        Tensor dz_from_dz = m.dz().backward(dlog, tz_eg);
        axpy(1.0, dz_from_dz, d_z);
    }
    m.enc().backward(d_z, tape_e);

    auto enc_params = m.group_params("enc");
    adam_step(enc_params, state.adam()["enc"], config.learning_rate, config.beta1,
              config.beta2);
    auto gen_params = m.group_params("gen");
    adam_step(gen_params, state.adam()["gen"], config.learning_rate, config.beta1,
              config.beta2);

    state.step() += 1;
    return report;
}

std::string loss_csv_header() {
    return "step,epoch,recon,tv,e_adv,g_adv,dz_loss,dimg_loss,eg_total,wall_time";
}

std::string loss_csv_row(int64_t step, int64_t epoch, const LossReport& r, double wall_time) {
    std::ostringstream os;
    os.precision(17);
    os << step << "," << epoch << "," << r.recon << "," << r.tv << "," << r.e_adv << ","
       << r.g_adv << "," << r.dz_loss << "," << r.dimg_loss << "," << r.eg_total << ",";
    os.precision(3);
    os << std::fixed << wall_time;
    return os.str();
}

TrainResult train(const Dataset& ds, const TrainConfig& config, const std::string& run_dir,
                  const TrainOptions& options) {
    config.validate();
    if (ds.size() < config.batch_size)
        throw ValidationError("dataset smaller than one batch (" + std::to_string(ds.size()) +
                              " < " + std::to_string(config.batch_size) + ")");
    if (ds.image_size() != config.network.image_size || ds.channels() != config.network.channels)
        throw ValidationError("dataset geometry does not match network config");

    const fs::path dir(run_dir);
    if (options.resume_from.empty() && fs::exists(dir / "config.json") && !options.force)
        throw ValidationError("run directory already contains a run: " + run_dir +
                              " (pass force/--force to overwrite)");
    fs::create_directories(dir / "checkpoints");
    {
        std::ofstream cfg(dir / "config.json");
        cfg << train_config_to_json(config) << "\n";
    }

    TrainResult result;
    if (!options.resume_from.empty()) {
        LoadedCheckpoint loaded = load_checkpoint_expecting(options.resume_from, config.network);
        result.state = std::move(loaded.state);
    } else {
        result.state = std::make_unique<TrainState>(config.network, config.seed);
    }
    TrainState& state = *result.state;

    const int64_t steps_per_epoch = ds.size() / config.batch_size;
    const int64_t total_steps = steps_per_epoch * config.epochs;

    const bool fresh_log = !fs::exists(dir / "log.csv") || options.resume_from.empty();
    std::ofstream log(dir / "log.csv", fresh_log ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot open log: " + (dir / "log.csv").string());
    if (fresh_log) log << loss_csv_header() << "\n";

    const auto t0 = std::chrono::steady_clock::now();
    int64_t cur_epoch = -1;
    std::unique_ptr<BatchStream> stream;
    std::string last_ckpt;
    while (state.step() < total_steps) {
        const int64_t epoch = state.step() / steps_per_epoch;
        if (epoch != cur_epoch) {
            stream = std::make_unique<BatchStream>(ds, config.batch_size, config.seed, epoch);
            cur_epoch = epoch;
        }
        const int bi = static_cast<int>(state.step() % steps_per_epoch);
        Batch batch = stream->batch(bi);
        result.last = train_step(state, batch, config);
        result.steps_run += 1;
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log << loss_csv_row(state.step(), epoch, result.last, wall) << "\n";
        if (state.step() % config.checkpoint_every == 0 || state.step() == total_steps) {
            std::ostringstream name;
            name << "step_" << std::setw(8) << std::setfill('0') << state.step() << ".ckpt";
            last_ckpt = (dir / "checkpoints" / name.str()).string();
            save_checkpoint(state, config, last_ckpt);
        }
        if (!options.quiet && state.step() % 10 == 0)
            std::cout << "step " << state.step() << "/" << total_steps
                      << " eg_total=" << result.last.eg_total << "\n";
    }
    log.flush();
    result.last_checkpoint = last_ckpt;
    return result;
}

}  // namespace caae
