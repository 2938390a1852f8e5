// Acceptance suite: one pass/fail line per criterion, nonzero exit on
// any failure. The toy runs (criteria 3-5) share three trainings of the
// same seeded configuration with different ablation switches.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "caae/checkpoint.hpp"
#include "caae/data_pipeline.hpp"
#include "caae/evaluation.hpp"
#include "caae/inference.hpp"
#include "caae/trainer.hpp"

namespace fs = std::filesystem;
using namespace caae;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Harness {
    int failures = 0;
    void criterion(int number, const std::string& name, const std::function<std::string()>& fn) {
        const auto t0 = Clock::now();
        std::string msg;
        try {
            msg = fn();
        } catch (const std::exception& e) {
            msg = std::string("exception: ") + e.what();
        }
        const double dt = seconds_since(t0);
        if (msg.empty()) {
            std::printf("[PASS] criterion %d (%s) [%.1fs]\n", number, name.c_str(), dt);
        } else {
            std::printf("[FAIL] criterion %d (%s): %s [%.1fs]\n", number, name.c_str(),
                        msg.c_str(), dt);
            ++failures;
        }
        std::fflush(stdout);
    }
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// ---------------------------------------------------------- toy runs

struct ToyRuns {
    fs::path root;
    TrainConfig config;           // the full (with-Dz, with-Dimg) configuration
    std::string ckpt_full, ckpt_no_dz, ckpt_no_dimg;
    Tensor probes;                // fresh synthetic probe images
    int probe_count = 1000;
};

TrainConfig toy_config() {
    TrainConfig cfg;
    cfg.network.image_size = 64;
    cfg.network.channels = 1;
    cfg.network.latent_dim = 64;
    cfg.network.base_filters = 8;
    cfg.network.num_scales = 4;
    cfg.weights = {100.0, 10.0};
    cfg.batch_size = 50;
    cfg.learning_rate = 0.0005;
    cfg.epochs = 20;
    cfg.seed = 12;
    cfg.checkpoint_every = 100000;  // final checkpoint only
    return cfg;
}

ToyRuns train_toy_runs(const fs::path& root) {
    ToyRuns toy;
    toy.root = root;
    toy.config = toy_config();
    Dataset ds = Dataset::from_synth(2000, toy.config.network.image_size, toy.config.seed,
                                     toy.config.network.channels);

    auto one = [&](const std::string& name, bool no_dz, bool no_dimg) {
        TrainConfig cfg = toy.config;
        cfg.ablate_dz = no_dz;
        cfg.ablate_dimg = no_dimg;
        const auto t0 = Clock::now();
        TrainResult res = train(ds, cfg, (root / name).string());
        std::printf("  toy run %-8s: %lld steps, recon=%.4f eg_total=%.3f [%.0fs]\n",
                    name.c_str(), static_cast<long long>(res.steps_run), res.last.recon,
                    res.last.eg_total, seconds_since(t0));
        std::fflush(stdout);
        return res.last_checkpoint;
    };
    toy.ckpt_full = one("full", false, false);
    toy.ckpt_no_dz = one("no_dz", true, false);
    toy.ckpt_no_dimg = one("no_dimg", false, true);

    auto faces = synth_faces(toy.probe_count, toy.config.network.image_size, 777,
                             toy.config.network.channels);
    const int s = toy.config.network.image_size, c = toy.config.network.channels;
    toy.probes = Tensor({toy.probe_count, s, s, c});
    const int64_t per = static_cast<int64_t>(s) * s * c;
    for (int i = 0; i < toy.probe_count; ++i)
        std::copy(faces[static_cast<size_t>(i)].first.data(),
                  faces[static_cast<size_t>(i)].first.data() + per,
                  toy.probes.data() + i * per);
    return toy;
}

Tensor probe_subset(const Tensor& probes, int count) {
    const int h = probes.dim(1), w = probes.dim(2), c = probes.dim(3);
    const int64_t per = static_cast<int64_t>(h) * w * c;
    Tensor sub({count, h, w, c});
    std::copy(probes.data(), probes.data() + count * per, sub.data());
    return sub;
}

}  // namespace

int main() {
    const fs::path work =
        fs::temp_directory_path() / ("caae_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(work);
    Harness h;
    std::printf("acceptance work directory: %s\n", work.c_str());

    // 1. Gradient fidelity on the miniature CAAE (8x8, n=4, base_filters=8).
    h.criterion(1, "gradient fidelity < 1e-3 on 8x8 miniature", [&]() -> std::string {
        const auto t0 = Clock::now();
        NetworkConfig net;
        net.image_size = 8;
        net.channels = 3;
        net.latent_dim = 4;
        net.base_filters = 8;
        net.num_scales = 1;
        Model m = init_params(net, 1);
        Rng rng(2);
        Tensor x({4, 8, 8, 3});
        rng.fill_uniform(x, -0.9, 0.9);
        Tensor labels({4, kNumAgeBins});
        for (int i = 0; i < 4; ++i) {
            Tensor l = bin_to_label(static_cast<int>(rng.below(10)));
            for (int j = 0; j < kNumAgeBins; ++j) labels.at(i, j) = l[j];
        }
        GradCheckReport rep = gradcheck(m, x, labels, LossWeights{100.0, 10.0}, 1e-5, 200, 3);
        const double dt = seconds_since(t0);
        for (const auto& t : rep.terms)
            std::printf("  %-10s max_rel_err=%.3e\n", t.term.c_str(), t.max_rel_err);
        if (!(rep.max_rel_err < 1e-3))
            return fmt("max relative error %.3e >= 1e-3 (worst %s)", rep.max_rel_err,
                       rep.worst_param.c_str());
        if (dt >= 120.0) return fmt("runtime %.1fs exceeds 2 minutes", dt);
        return "";
    });

    // 2. Autoencoder reduction: both ablations, gamma=0, 500 steps on a
    //    fixed 16-image synthetic batch.
    h.criterion(2, "autoencoder reduction >= 90% in 500 steps", [&]() -> std::string {
        const auto t0 = Clock::now();
        TrainConfig cfg;
        cfg.network.image_size = 16;
        cfg.network.channels = 3;
        cfg.network.latent_dim = 16;
        cfg.network.base_filters = 8;
        cfg.network.num_scales = 2;
        cfg.weights = {1.0, 0.0};
        cfg.ablate_dz = cfg.ablate_dimg = true;
        cfg.batch_size = 16;
        cfg.learning_rate = 0.001;
        cfg.seed = 4;
        Dataset ds = Dataset::from_synth(16, 16, 5, 3);
        Batch batch = make_batches(ds, 16, 5, 0).batch(0);
        TrainState state(cfg.network, cfg.seed);
        Real initial = 0.0, final = 0.0;
        for (int i = 0; i < 500; ++i) {
            LossReport rep = train_step(state, batch, cfg);
            if (rep.e_adv != 0.0 || rep.g_adv != 0.0) return "adversarial terms not zero";
            if (i == 0) initial = rep.recon;
            final = rep.recon;
        }
        const double dt = seconds_since(t0);
        std::printf("  recon: initial=%.6f final=%.6f (%.1f%% reduction)\n", initial, final,
                    100.0 * (1.0 - final / initial));
        if (!(final <= 0.1 * initial))
            return fmt("reduction %.1f%% < 90%%", 100.0 * (1.0 - final / initial));
        if (dt >= 300.0) return fmt("runtime %.1fs exceeds 5 minutes", dt);
        return "";
    });

    // Toy runs shared by criteria 3-5.
    std::printf("training toy runs (2000 synthetic faces, 64x64, n=64, 20 epochs)...\n");
    std::fflush(stdout);
    const auto toy_t0 = Clock::now();
    ToyRuns toy = train_toy_runs(work / "toy");
    std::printf("toy runs total: %.0fs\n", seconds_since(toy_t0));

    LoadedCheckpoint full = load_checkpoint(toy.ckpt_full);
    LoadedCheckpoint no_dz = load_checkpoint(toy.ckpt_no_dz);
    LoadedCheckpoint no_dimg = load_checkpoint(toy.ckpt_no_dimg);

    // 3. Dz uniformity: strictly lower mean KS with Dz than without.
    h.criterion(3, "Dz lowers mean KS distance to U[-1,1]", [&]() -> std::string {
        UniformityReport with_dz = z_uniformity(full.state->model(), toy.probes);
        UniformityReport without = z_uniformity(no_dz.state->model(), toy.probes);
        std::printf("  mean KS with Dz=%.4f, without Dz=%.4f\n", with_dz.mean_ks,
                    without.mean_ks);
        if (!(with_dz.mean_ks < without.mean_ks))
            return fmt("mean KS with Dz (%.4f) not below without (%.4f)", with_dz.mean_ks,
                       without.mean_ks);
        return "";
    });

    // 4. Age conditioning on the with-Dz run; fresh-init control must be
    //    statistically indistinguishable from zero.
    h.criterion(4, "conditioning Spearman rho > 0.8; fresh control null", [&]() -> std::string {
        Tensor sub = probe_subset(toy.probes, 50);
        ConditioningReport trained = conditioning_score(full.state->model(), sub);
        Model fresh = init_params(toy.config.network, 99);
        ConditioningReport control = conditioning_score(fresh, sub);
        std::printf("  trained rho=%.3f (significant=%d), fresh rho=%.3f (significant=%d)\n",
                    trained.rho, trained.significant ? 1 : 0, control.rho,
                    control.significant ? 1 : 0);
        for (int b = 0; b < 10; ++b)
            std::printf("  bin %d mean wrinkle score %.2f\n", b,
                        trained.mean_scores[static_cast<size_t>(b)]);
        if (!(trained.rho > 0.8)) return fmt("trained rho %.3f <= 0.8", trained.rho);
        if (control.significant && !control.degenerate)
            return fmt("fresh-init rho %.3f is significant at 5%%", control.rho);
        return "";
    });

    // 5. Dimg texture effect: higher old-age high-frequency energy with Dimg.
    h.criterion(5, "Dimg raises old-age TV energy", [&]() -> std::string {
        Tensor sub = probe_subset(toy.probes, 50);
        Tensor z_with = encode(full.state->model(), sub);
        Tensor z_without = encode(no_dimg.state->model(), sub);
        Real tv_with = 0.0, tv_without = 0.0;
        for (int bin = 7; bin <= 9; ++bin) {
            Tensor l = bin_to_label(bin);
            Tensor labels({50, kNumAgeBins});
            for (int i = 0; i < 50; ++i)
                for (int j = 0; j < kNumAgeBins; ++j) labels.at(i, j) = l[j];
            tv_with += tv_loss(generate(full.state->model(), z_with, labels));
            tv_without += tv_loss(generate(no_dimg.state->model(), z_without, labels));
        }
        tv_with /= 3.0;
        tv_without /= 3.0;
        std::printf("  old-age TV with Dimg=%.4f, without Dimg=%.4f\n", tv_with, tv_without);
        if (!(tv_with > tv_without))
            return fmt("TV with Dimg (%.4f) not above without (%.4f)", tv_with, tv_without);
        return "";
    });

    // 6. Contract suite at paper scale: 128x128x3 one train_step + sweep.
    h.criterion(6, "paper-scale contracts (128x128x3)", [&]() -> std::string {
        TrainConfig cfg;
        cfg.network.image_size = 128;
        cfg.network.channels = 3;
        cfg.network.latent_dim = 64;
        cfg.network.base_filters = 16;
        cfg.network.num_scales = 4;
        cfg.batch_size = 2;
        cfg.seed = 6;
        Dataset ds = Dataset::from_synth(2, 128, 7, 3);
        Batch batch = make_batches(ds, 2, 7, 0).batch(0);
        TrainState state(cfg.network, cfg.seed);
        LossReport rep = train_step(state, batch, cfg);
        if (!std::isfinite(rep.eg_total)) return "non-finite loss at paper scale";
        Tensor z = encode(state.model(), batch.images);
        if (z.shape() != std::vector<int>{2, 64})
            return "encoder output shape mismatch at paper scale";
        if (!(z.min() > -1.0 && z.max() < 1.0)) return "latent out of (-1,1)";
        Tensor out = generate(state.model(), z, batch.labels);
        if (out.shape() != std::vector<int>{2, 128, 128, 3})
            return "generator output shape mismatch";
        if (!(out.min() > -1.0 && out.max() < 1.0)) return "image out of (-1,1)";
        // sweep: exactly 10 frames from an unlabeled query image
        Tensor face = synth_faces(1, 128, 8, 3)[0].first;
        SweepResult sweep = age_sweep(state.model(), face);
        if (sweep.outputs.size() != 10) return "sweep did not emit 10 frames";
        return "";
    });

    // 7. Determinism and resumability.
    h.criterion(7, "determinism + bit-exact resume", [&]() -> std::string {
        TrainConfig cfg;
        cfg.network.image_size = 16;
        cfg.network.channels = 3;
        cfg.network.latent_dim = 8;
        cfg.network.base_filters = 8;
        cfg.network.num_scales = 2;
        cfg.batch_size = 4;
        cfg.epochs = 1;
        cfg.seed = 21;
        cfg.checkpoint_every = 5;
        Dataset ds = Dataset::from_synth(40, 16, 9, 3);  // 10 steps per epoch

        auto strip_wall = [](const std::string& path) {
            std::ifstream in(path);
            std::string line, all;
            while (std::getline(in, line)) all += line.substr(0, line.rfind(',')) + "\n";
            return all;
        };
        train(ds, cfg, (work / "det_a").string());
        train(ds, cfg, (work / "det_b").string());
        const std::string log_a = strip_wall((work / "det_a" / "log.csv").string());
        if (log_a != strip_wall((work / "det_b" / "log.csv").string()))
            return "equal seeds produced different 10-step logs";

        TrainOptions opt;
        opt.resume_from = (work / "det_a" / "checkpoints" / "step_00000005.ckpt").string();
        train(ds, cfg, (work / "det_c").string(), opt);
        std::istringstream full_log(log_a);
        std::string line, expect;
        for (int i = 0; std::getline(full_log, line); ++i)
            if (i == 0 || i >= 6) expect += line + "\n";  // header + steps 6..10
        if (strip_wall((work / "det_c" / "log.csv").string()) != expect)
            return "resumed run diverged from the uninterrupted log";
        return "";
    });

    // 8. Unit identities (closed-form values to 1e-9).
    h.criterion(8, "closed-form unit identities", [&]() -> std::string {
        const Real ln2 = std::log(2.0);
        Tensor zeros({4});
        if (std::fabs(adversarial_d_loss(zeros, zeros) - 2 * ln2) > 1e-9)
            return "d-loss at logits 0 != 2 ln 2";
        if (std::fabs(adversarial_g_loss(zeros) - ln2) > 1e-9)
            return "g-loss at logits 0 != ln 2";
        if (tv_loss(Tensor::full({1, 4, 4, 3}, 0.3)) != 0.0) return "TV of constant != 0";
        const int upper[] = {5, 10, 15, 20, 30, 40, 50, 60, 70, 80};
        int bin = 0;
        for (int age = 0; age <= 80; ++age) {
            while (age > upper[bin]) ++bin;
            if (age_to_bin(age) != bin) return fmt("age_to_bin(%d) != %d", age, bin);
        }
        if (age_to_bin(95) != 9) return "age 95 does not clamp to bin 9";
        for (int b = 0; b < 10; ++b) {
            Tensor l = bin_to_label(b);
            Real sum = 0.0;
            for (int j = 0; j < 10; ++j) sum += l[j];
            if (l[b] != 1.0 || sum != -8.0) return "label encoding broken";
        }
        Tensor raw({3});
        raw[0] = 0.0;
        raw[1] = 255.0;
        raw[2] = 127.5;
        Tensor norm = normalize_image(raw);
        if (std::fabs(norm[0] + 1.0) > 1e-9 || std::fabs(norm[1] - 1.0) > 1e-9 ||
            std::fabs(norm[2]) > 1e-9)
            return "normalization endpoints off";
        Tensor mid({1, 1, 1});
        mid[0] = 0.0;
        if (denormalize_image(mid).px[0] != 128) return "round-half-up convention broken";
        return "";
    });

    std::printf("%s: %d criterion failure(s)\n",
                h.failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL", h.failures);
    std::error_code ec;
    fs::remove_all(work, ec);
    return h.failures == 0 ? 0 : 1;
}
