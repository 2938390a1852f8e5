// caae: conditional adversarial autoencoder for age progression and
// regression. Subcommands: synth, train, sweep, interp, grid, eval,
// gradcheck. Exit codes: 0 success, 1 contract/validation failure,
// 2 I/O failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "caae/checkpoint.hpp"
#include "caae/data_pipeline.hpp"
#include "caae/evaluation.hpp"
#include "caae/inference.hpp"
#include "caae/trainer.hpp"

namespace fs = std::filesystem;
using namespace caae;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct SynthArgs {
    int count = 100;
    int size = 64;
    int channels = 3;
    uint64_t seed = 0;
    std::string out;
};

int run_synth(const SynthArgs& a) {
    fs::create_directories(a.out);
    auto faces = synth_faces(a.count, a.size, a.seed, a.channels);
    std::ofstream manifest(fs::path(a.out) / "manifest.jsonl");
    if (!manifest) throw IoError("cannot write manifest in " + a.out);
    for (size_t i = 0; i < faces.size(); ++i) {
        std::ostringstream name;
        name << "img_" << std::setw(6) << std::setfill('0') << i << ".png";
        write_png((fs::path(a.out) / name.str()).string(),
                  denormalize_image(faces[i].first));
        nlohmann::json line{{"path", name.str()}, {"age", faces[i].second}};
        manifest << line.dump() << "\n";
    }
    std::cout << "wrote " << faces.size() << " images + manifest.jsonl to " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string config_path;
    std::string out;
    std::string resume;
    bool no_dz = false;
    bool no_dimg = false;
    bool force = false;
    bool verbose = false;
    std::optional<uint64_t> seed;
    std::optional<int> epochs, batch_size, image_size, channels, latent_dim, base_filters,
        num_scales, checkpoint_every, synth_count;
    std::optional<double> lr, lambda, gamma;
    std::optional<std::string> manifest;
};

// Precedence for every setting: command-line flag > CAAE_SEED (seed
// only) > config file > built-in default.
int run_train(const TrainArgs& a) {
    nlohmann::json file = nlohmann::json::object();
    if (!a.config_path.empty()) {
        std::ifstream in(a.config_path);
        if (!in) throw IoError("cannot open config: " + a.config_path);
        std::stringstream ss;
        ss << in.rdbuf();
        file = nlohmann::json::parse(ss.str(), nullptr, false);
        if (file.is_discarded() || !file.is_object())
            throw ValidationError("config is not a JSON object: " + a.config_path);
        static const std::vector<std::string> known{
            "image_size",   "channels",   "latent_dim", "base_filters",
            "num_scales",   "use_batchnorm_dimg", "lambda", "gamma",
            "batch_size",   "learning_rate", "beta1", "beta2", "epochs",
            "seed",         "ablate_dz",  "ablate_dimg", "saturating_g",
            "checkpoint_every", "manifest", "synth_count", "out_dir"};
        std::vector<std::string> unknown;
        for (const auto& [k, v] : file.items())
            if (std::find(known.begin(), known.end(), k) == known.end()) unknown.push_back(k);
        if (!unknown.empty()) {
            std::ostringstream os;
            os << "unknown config key(s):";
            for (const auto& k : unknown) os << " \"" << k << "\"";
            throw ValidationError(os.str());
        }
    }
    TrainConfig cfg = train_config_from_json(file.dump());
    if (const char* env = std::getenv("CAAE_SEED")) cfg.seed = std::strtoull(env, nullptr, 10);
    if (a.seed) cfg.seed = *a.seed;
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.batch_size) cfg.batch_size = *a.batch_size;
    if (a.image_size) cfg.network.image_size = *a.image_size;
    if (a.channels) cfg.network.channels = *a.channels;
    if (a.latent_dim) cfg.network.latent_dim = *a.latent_dim;
    if (a.base_filters) cfg.network.base_filters = *a.base_filters;
    if (a.num_scales) cfg.network.num_scales = *a.num_scales;
    if (a.checkpoint_every) cfg.checkpoint_every = *a.checkpoint_every;
    if (a.lr) cfg.learning_rate = *a.lr;
    if (a.lambda) cfg.weights.lambda = *a.lambda;
    if (a.gamma) cfg.weights.gamma = *a.gamma;
    if (a.no_dz) cfg.ablate_dz = true;
    if (a.no_dimg) cfg.ablate_dimg = true;
    cfg.validate();  // reports every violated invariant at once

    std::string manifest = file.value("manifest", std::string{});
    int synth_count = file.value("synth_count", 0);
    if (a.manifest) manifest = *a.manifest;
    if (a.synth_count) synth_count = *a.synth_count;
    if (manifest.empty() == (synth_count <= 0))
        throw ValidationError(
            "exactly one dataset source required: \"manifest\" or \"synth_count\"");

    std::string out = a.out.empty() ? file.value("out_dir", std::string{}) : a.out;
    if (out.empty()) throw ValidationError("no output run directory (--out or \"out_dir\")");

    Dataset ds = manifest.empty()
                     ? Dataset::from_synth(synth_count, cfg.network.image_size, cfg.seed,
                                           cfg.network.channels)
                     : Dataset::from_manifest(manifest, cfg.network.image_size,
                                              cfg.network.channels);
    TrainOptions opt;
    opt.force = a.force;
    opt.resume_from = a.resume;
    opt.quiet = !a.verbose;
    TrainResult res = train(ds, cfg, out, opt);
    std::cout << "trained " << res.steps_run << " step(s); final losses:"
              << " recon=" << res.last.recon << " tv=" << res.last.tv
              << " e_adv=" << res.last.e_adv << " g_adv=" << res.last.g_adv
              << " dz=" << res.last.dz_loss << " dimg=" << res.last.dimg_loss
              << " eg_total=" << res.last.eg_total << "\n";
    std::cout << "run directory: " << out << "\n";
    return 0;
}

Tensor load_face(const std::string& path, const NetworkConfig& net) {
    RawImage raw = read_image(path, net.channels);
    if (raw.h != net.image_size || raw.w != net.image_size)
        throw ValidationError("image " + path + " is " + std::to_string(raw.w) + "x" +
                              std::to_string(raw.h) + ", checkpoint expects " +
                              std::to_string(net.image_size) + "x" +
                              std::to_string(net.image_size));
    return normalize_image(raw);
}

int run_sweep(const std::string& ckpt, const std::string& image, const std::string& out) {
    LoadedCheckpoint loaded = load_checkpoint(ckpt);
    Model& m = loaded.state->model();
    Tensor face = load_face(image, m.config());
    SweepResult sweep = age_sweep(m, face);  // no age input: query age is never asked
    fs::create_directories(out);
    for (int b = 0; b < kNumAgeBins; ++b) {
        std::ostringstream name;
        name << "frame_" << std::setw(2) << std::setfill('0') << b << ".png";
        write_png((fs::path(out) / name.str()).string(),
                  denormalize_image(sweep.outputs[static_cast<size_t>(b)]));
    }
    write_png((fs::path(out) / "strip.png").string(), manifold_grid(m, {face}));
    std::cout << "wrote 10 frames + strip.png to " << out << "\n";
    return 0;
}

int run_interp(const std::string& ckpt, const std::string& img1, const std::string& img2,
               int label_bin, int steps, const std::string& out) {
    LoadedCheckpoint loaded = load_checkpoint(ckpt);
    Model& m = loaded.state->model();
    MorphSequence seq = interpolate(m, load_face(img1, m.config()), load_face(img2, m.config()),
                                    bin_to_label(label_bin), steps);
    fs::create_directories(out);
    for (size_t k = 0; k < seq.frames.size(); ++k) {
        std::ostringstream name;
        name << "frame_" << std::setw(3) << std::setfill('0') << k << ".png";
        write_png((fs::path(out) / name.str()).string(), denormalize_image(seq.frames[k]));
    }
    std::cout << "wrote " << seq.frames.size() << " frames to " << out
              << " (smoothness " << morph_smoothness(seq) << ")\n";
    return 0;
}

int run_grid(const std::string& ckpt, const std::vector<std::string>& images,
             const std::string& out) {
    LoadedCheckpoint loaded = load_checkpoint(ckpt);
    Model& m = loaded.state->model();
    std::vector<Tensor> faces;
    for (const auto& p : images) faces.push_back(load_face(p, m.config()));
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    write_png(out, manifold_grid(m, faces));
    std::cout << "wrote " << faces.size() << "x10 grid to " << out << "\n";
    return 0;
}

Tensor load_probes(const std::string& manifest, const NetworkConfig& net) {
    auto records = load_manifest(manifest);
    if (records.empty()) throw ValidationError("probe manifest is empty: " + manifest);
    const int n = static_cast<int>(records.size());
    Tensor probes({n, net.image_size, net.image_size, net.channels});
    const int64_t per =
        static_cast<int64_t>(net.image_size) * net.image_size * net.channels;
    for (int i = 0; i < n; ++i) {
        Tensor img = load_face(records[static_cast<size_t>(i)].image_path, net);
        std::copy(img.data(), img.data() + per, probes.data() + i * per);
    }
    return probes;
}

int run_eval(const std::string& ckpt, const std::string& compare, const std::string& probes_path,
             const std::string& out, int conditioning_probes) {
    LoadedCheckpoint a = load_checkpoint(ckpt);
    Tensor probes = load_probes(probes_path, a.state->model().config());
    fs::create_directories(out);
    if (compare.empty()) {
        RunMetrics metrics = evaluate_model(a.state->model(), probes, conditioning_probes);
        std::ofstream(fs::path(out) / "report.json") << metrics_to_json(metrics) << "\n";
        std::cout << "mean KS distance to U[-1,1]: " << metrics.uniformity.mean_ks << "\n"
                  << "conditioning Spearman rho:  " << metrics.conditioning.rho
                  << (metrics.conditioning.degenerate ? " (degenerate variance)" : "")
                  << (metrics.conditioning.significant ? "" : " (not significant at 5%)")
                  << "\n"
                  << "reconstruction error:       " << metrics.recon_error << "\n"
                  << "interpolation smoothness:   " << metrics.interp_smoothness << "\n"
                  << "old-age TV energy:          " << metrics.old_age_tv << "\n";
        return 0;
    }
    LoadedCheckpoint b = load_checkpoint(compare);
    AblationComparison cmp;
    cmp.run_a = ckpt;
    cmp.run_b = compare;
    cmp.a = evaluate_model(a.state->model(), probes, conditioning_probes);
    cmp.b = evaluate_model(b.state->model(), probes, conditioning_probes);
    std::ofstream(fs::path(out) / "report.json") << comparison_to_json(cmp) << "\n";
    std::ofstream(fs::path(out) / "report.txt") << comparison_to_text(cmp);
    const int h = probes.dim(1), w = probes.dim(2), c = probes.dim(3);
    const int64_t per = static_cast<int64_t>(h) * w * c;
    std::vector<Tensor> faces;
    for (int i = 0; i < std::min(3, probes.dim(0)); ++i) {
        Tensor img({h, w, c});
        std::copy(probes.data() + i * per, probes.data() + (i + 1) * per, img.data());
        faces.push_back(std::move(img));
    }
    write_png((fs::path(out) / "grid_a.png").string(), manifold_grid(a.state->model(), faces));
    write_png((fs::path(out) / "grid_b.png").string(), manifold_grid(b.state->model(), faces));
    std::cout << comparison_to_text(cmp);
    return 0;
}

int run_gradcheck(int size, int latent, int base_filters, double epsilon, int samples,
                  uint64_t seed, bool full) {
    NetworkConfig net;
    net.image_size = size;
    net.channels = 3;
    net.latent_dim = latent;
    net.base_filters = base_filters;
    net.num_scales = 1;
    while ((size >> (net.num_scales + 1)) >= 4) ++net.num_scales;
    net.validate();
    Model m = init_params(net, seed);
    Rng rng(mix_seed(seed, 0x6763696eULL));
    Tensor x({4, size, size, net.channels});
    rng.fill_uniform(x, -0.9, 0.9);
    Tensor labels({4, kNumAgeBins});
    for (int i = 0; i < 4; ++i) {
        Tensor l = bin_to_label(static_cast<int>(rng.below(kNumAgeBins)));
        for (int j = 0; j < kNumAgeBins; ++j) labels.at(i, j) = l[j];
    }
    GradCheckReport rep = gradcheck(m, x, labels, LossWeights{}, epsilon, samples, seed, full);
    std::cout << "gradcheck: " << size << "x" << size << " latent=" << latent
              << " base_filters=" << base_filters << " epsilon=" << epsilon << "\n";
    for (const auto& t : rep.terms) {
        std::cout << "  " << std::left << std::setw(10) << t.term
                  << " max_rel_err=" << std::scientific << std::setprecision(3)
                  << t.max_rel_err << std::defaultfloat;
        if (!t.worst_param.empty()) std::cout << "  worst=" << t.worst_param;
        std::cout << "\n";
    }
    std::cout << "overall max_rel_err=" << std::scientific << std::setprecision(3)
              << rep.max_rel_err << std::defaultfloat << " ("
              << (rep.passes(1e-3) ? "PASS" : "FAIL") << " at 1e-3)\n";
    return rep.passes(1e-3) ? 0 : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional adversarial autoencoder for age progression/regression"};
    app.name("caae");
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic face dataset + manifest");
    synth->add_option("--count", synth_args.count, "number of images")->required();
    synth->add_option("--size", synth_args.size, "image size (multiple of 16)");
    synth->add_option("--channels", synth_args.channels, "1 (gray) or 3 (rgb)");
    synth->add_option("--seed", synth_args.seed, "rng seed");
    synth->add_option("--out", synth_args.out, "output directory")->required();

    TrainArgs train_args;
    auto* tr = app.add_subcommand("train", "train a CAAE (config file + flag overrides)");
    tr->add_option("--config", train_args.config_path, "JSON config file");
    tr->add_option("--out", train_args.out, "run directory (overrides \"out_dir\")");
    tr->add_flag("--no-dz", train_args.no_dz, "ablate the latent discriminator");
    tr->add_flag("--no-dimg", train_args.no_dimg, "ablate the image discriminator");
    tr->add_option("--resume", train_args.resume, "resume from a checkpoint");
    tr->add_flag("--force", train_args.force, "allow writing into an existing run directory");
    tr->add_flag("--verbose", train_args.verbose, "print progress every 10 steps");
    tr->add_option("--seed", train_args.seed, "rng seed (beats CAAE_SEED and config)");
    tr->add_option("--epochs", train_args.epochs, "training epochs");
    tr->add_option("--batch-size", train_args.batch_size, "mini-batch size");
    tr->add_option("--lr", train_args.lr, "ADAM alpha");
    tr->add_option("--lambda", train_args.lambda, "reconstruction weight");
    tr->add_option("--gamma", train_args.gamma, "total-variation weight");
    tr->add_option("--image-size", train_args.image_size, "square image size");
    tr->add_option("--channels", train_args.channels, "1 or 3");
    tr->add_option("--latent-dim", train_args.latent_dim, "latent dimension n");
    tr->add_option("--base-filters", train_args.base_filters, "first conv filter count");
    tr->add_option("--num-scales", train_args.num_scales, "stride-2 stages");
    tr->add_option("--checkpoint-every", train_args.checkpoint_every, "checkpoint stride");
    tr->add_option("--manifest", train_args.manifest, "dataset manifest (JSON lines)");
    tr->add_option("--synth-count", train_args.synth_count, "synthetic dataset size");

    std::string ckpt, image, img1, img2, out, compare, probes;
    int label_bin = 0, steps = 8, conditioning_probes = 50;
    std::vector<std::string> grid_images;

    auto* sw = app.add_subcommand("sweep", "age sweep: 10 outputs from one unlabeled image");
    sw->add_option("--ckpt", ckpt, "checkpoint file")->required();
    sw->add_option("--image", image, "query image (its age is not required)")->required();
    sw->add_option("--out", out, "output directory")->required();

    auto* ip = app.add_subcommand("interp", "latent interpolation between two faces");
    ip->add_option("--ckpt", ckpt, "checkpoint file")->required();
    ip->add_option("--img1", img1, "first image")->required();
    ip->add_option("--img2", img2, "second image")->required();
    ip->add_option("--label", label_bin, "age bin for all frames (0-9)")->required();
    ip->add_option("--steps", steps, "number of frames (>= 2)");
    ip->add_option("--out", out, "output directory")->required();

    auto* gr = app.add_subcommand("grid", "manifold grid: rows = faces, columns = age bins");
    gr->add_option("--ckpt", ckpt, "checkpoint file")->required();
    gr->add_option("--images", grid_images, "face images")->required()->expected(-1);
    gr->add_option("--out", out, "output PNG path")->required();

    auto* ev = app.add_subcommand("eval", "quantitative evaluation of a checkpoint");
    ev->add_option("--ckpt", ckpt, "checkpoint file")->required();
    ev->add_option("--compare", compare, "second checkpoint for side-by-side comparison");
    ev->add_option("--probes", probes, "probe manifest (>= 500 images for the KS test)")
        ->required();
    ev->add_option("--out", out, "output directory")->required();
    ev->add_option("--conditioning-probes", conditioning_probes,
                   "probes used for conditioning metrics");

    int gc_size = 8, gc_latent = 4, gc_bf = 8, gc_samples = 200;
    double gc_eps = 1e-5;
    uint64_t gc_seed = 0;
    bool gc_full = false;
    auto* gc = app.add_subcommand(
        "gradcheck", "finite-difference check of every loss gradient (exit 0 iff < 1e-3)");
    gc->add_option("--size", gc_size, "image size of the miniature model");
    gc->add_option("--latent", gc_latent, "latent dimension");
    gc->add_option("--base-filters", gc_bf, "first conv filter count");
    gc->add_option("--epsilon", gc_eps, "central-difference step");
    gc->add_option("--samples", gc_samples, "sampled parameters per group");
    gc->add_option("--seed", gc_seed, "rng seed");
    gc->add_flag("--full", gc_full, "check every parameter");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_synth(synth_args);
        if (tr->parsed()) return run_train(train_args);
        if (sw->parsed()) return run_sweep(ckpt, image, out);
        if (ip->parsed()) return run_interp(ckpt, img1, img2, label_bin, steps, out);
        if (gr->parsed()) return run_grid(ckpt, grid_images, out);
        if (ev->parsed())
            return run_eval(ckpt, compare, probes, out, conditioning_probes);
        if (gc->parsed())
            return run_gradcheck(gc_size, gc_latent, gc_bf, gc_eps, gc_samples, gc_seed,
                                 gc_full);
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const TrainingError& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
