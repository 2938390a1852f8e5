#include "caae/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <sstream>

#include "caae/checkpoint.hpp"
#include "caae/data_pipeline.hpp"
#include "caae/inference.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace caae {

// ------------------------------------------------------- gradient checking

namespace {

struct TermSpec {
    const char* name;
    std::vector<std::string> groups;
};

const std::vector<TermSpec>& term_specs() {
    static const std::vector<TermSpec> specs{
        {"recon", {"enc", "gen"}},
        {"tv", {"enc", "gen"}},
        {"adv_d_z", {"dz"}},
        {"adv_d_img", {"dimg"}},
        {"adv_g", {"enc", "gen", "dz", "dimg"}},
        {"eg_total", {"enc", "gen", "dz", "dimg"}},
    };
    return specs;
}

// Holds the fixed inputs of the check; every term is a deterministic
// scalar function of the model parameters.
class GradCheckContext {
  public:
    GradCheckContext(Model& m, const Tensor& x, const Tensor& l, const LossWeights& w,
                     uint64_t seed)
        : m_(m), x_(x), l_(l), w_(w) {
        Rng rng(mix_seed(seed, 0x67726164636865ULL));
        const int b = x.dim(0), n = m.config().latent_dim;
        z_real_ = Tensor({b, n});
        rng.fill_uniform(z_real_, -1.0, 1.0);
        z_other_ = Tensor({b, n});
        rng.fill_uniform(z_other_, -1.0, 1.0);
        x_fake_ = Tensor(x.shape());
        rng.fill_uniform(x_fake_, -0.9, 0.9);
    }

    Real value(const std::string& term) {
        if (term == "recon") {
            Tensor x_hat = m_.gen().forward(m_.enc().forward(x_), l_);
            return recon_loss(x_, x_hat);
        }
        if (term == "tv") {
            Tensor x_hat = m_.gen().forward(m_.enc().forward(x_), l_);
            return tv_loss(x_hat);
        }
        if (term == "adv_d_z")
            return adversarial_d_loss(m_.dz().forward(z_real_), m_.dz().forward(z_other_));
        if (term == "adv_d_img") {
            // training-mode forwards so batch-norm uses batch statistics,
            // matching the analytic path
            DiscriminatorImg::Tape tr, tf;
            return adversarial_d_loss(m_.dimg().forward(x_, l_, &tr),
                                      m_.dimg().forward(x_fake_, l_, &tf));
        }
        if (term == "adv_g" || term == "eg_total") {
            Tensor z = m_.enc().forward(x_);
            Tensor x_hat = m_.gen().forward(z, l_);
            DiscriminatorImg::Tape td;
            Real v = adversarial_g_loss(m_.dz().forward(z)) +
                     adversarial_g_loss(m_.dimg().forward(x_hat, l_, &td));
            if (term == "eg_total")
                v += w_.lambda * recon_loss(x_, x_hat) + w_.gamma * tv_loss(x_hat);
            return v;
        }
        throw ValidationError("unknown gradcheck term: " + term);
    }

    void backward(const std::string& term) {
        m_.enc().zero_grads();
        m_.gen().zero_grads();
        m_.dz().zero_grads();
        m_.dimg().zero_grads();
        if (term == "recon" || term == "tv") {
            std::vector<std::any> te, tg;
            Tensor z = m_.enc().forward(x_, &te);
            Tensor x_hat = m_.gen().forward(z, l_, &tg);
            Tensor d = term == "recon" ? recon_loss_grad(x_, x_hat) : tv_loss_grad(x_hat);
            m_.enc().backward(m_.gen().backward(d, tg), te);
            return;
        }
        if (term == "adv_d_z") {
            std::vector<std::any> tr, tf;
            Tensor rl = m_.dz().forward(z_real_, &tr);
            Tensor fl = m_.dz().forward(z_other_, &tf);
            Tensor dr, df;
            adversarial_d_loss_grads(rl, fl, &dr, &df);
            m_.dz().backward(dr, tr);
            m_.dz().backward(df, tf);
            return;
        }
        if (term == "adv_d_img") {
            DiscriminatorImg::Tape tr, tf;
            Tensor rl = m_.dimg().forward(x_, l_, &tr);
            Tensor fl = m_.dimg().forward(x_fake_, l_, &tf);
            Tensor dr, df;
            adversarial_d_loss_grads(rl, fl, &dr, &df);
            m_.dimg().backward(dr, tr);
            m_.dimg().backward(df, tf);
            return;
        }
        if (term == "adv_g" || term == "eg_total") {
            std::vector<std::any> te, tg, tz;
            DiscriminatorImg::Tape td;
            Tensor z = m_.enc().forward(x_, &te);
            Tensor x_hat = m_.gen().forward(z, l_, &tg);
            Tensor dz_logits = m_.dz().forward(z, &tz);
            Tensor dimg_logits = m_.dimg().forward(x_hat, l_, &td);
            Tensor d_xhat(x_hat.shape());
            if (term == "eg_total") {
                axpy(w_.lambda, recon_loss_grad(x_, x_hat), d_xhat);
                axpy(w_.gamma, tv_loss_grad(x_hat), d_xhat);
            }
            axpy(1.0, m_.dimg().backward(adversarial_g_loss_grad(dimg_logits), td), d_xhat);
            Tensor d_z = m_.gen().backward(d_xhat, tg);
            axpy(1.0, m_.dz().backward(adversarial_g_loss_grad(dz_logits), tz), d_z);
            m_.enc().backward(d_z, te);
            return;
        }
        throw ValidationError("unknown gradcheck term: " + term);
    }

    Model& model() { return m_; }

  private:
    Model& m_;
    Tensor x_, l_;
    LossWeights w_;
    Tensor z_real_, z_other_, x_fake_;
};

Real rel_err(Real a, Real n) {
    const Real mag = std::max(std::fabs(a), std::fabs(n));
    if (mag < 1e-8) return 0.0;  // absolute fallback for disconnected weights
    return std::fabs(a - n) / mag;
}

}  // namespace

GradCheckReport gradcheck(Model& m, const Tensor& images, const Tensor& labels,
                          const LossWeights& weights, Real epsilon, int samples_per_group,
                          uint64_t seed, bool full) {
    if (!(epsilon >= 1e-6 && epsilon <= 1e-4))
        throw ValidationError("gradcheck: epsilon must be in [1e-6, 1e-4]");
    if (m.config().image_size > 16 || m.config().latent_dim > 8)
        throw ValidationError(
            "gradcheck: miniature configs only (image_size <= 16, latent_dim <= 8)");
    GradCheckContext ctx(m, images, labels, weights, seed);
    Rng pick(mix_seed(seed, 0x7069636bULL));
    GradCheckReport report;
    report.epsilon = epsilon;
    for (const auto& spec : term_specs()) {
        GradCheckTerm tr;
        tr.term = spec.name;
        ctx.backward(spec.name);
        // snapshot analytic gradients before finite differences disturb state
        std::map<std::string, std::vector<std::pair<std::string, Tensor>>> analytic;
        for (const auto& g : spec.groups) {
            for (const auto& p : m.group_params(g)) {
                if (!p.grad->all_finite())
                    throw ValidationError("gradcheck: non-finite analytic gradient in " +
                                          p.name);
                analytic[g].push_back({p.name, *p.grad});
            }
        }
        for (const auto& g : spec.groups) {
            auto params = m.group_params(g);
            int64_t total = 0;
            for (const auto& p : params) total += p.value->numel();
            const int64_t want = full ? total
                                      : std::min<int64_t>(total, samples_per_group);
            Real worst = 0.0;
            std::string worst_name;
            for (int64_t s = 0; s < want; ++s) {
                int64_t flat = full ? s : static_cast<int64_t>(
                                              pick.below(static_cast<uint64_t>(total)));
                size_t pi = 0;
                while (flat >= params[pi].value->numel()) {
                    flat -= params[pi].value->numel();
                    ++pi;
                }
                Tensor& w = *params[pi].value;
                const Real keep = w[flat];
                w[flat] = keep + epsilon;
                const Real up = ctx.value(spec.name);
                w[flat] = keep - epsilon;
                const Real dn = ctx.value(spec.name);
                w[flat] = keep;
                const Real numeric = (up - dn) / (2.0 * epsilon);
                const Real a = analytic[g][pi].second[flat];
                const Real e = rel_err(a, numeric);
                if (e > worst) {
                    worst = e;
                    worst_name =
                        analytic[g][pi].first + "[" + std::to_string(flat) + "]";
                }
            }
            tr.group_max_rel_err[g] = worst;
            if (worst > tr.max_rel_err) {
                tr.max_rel_err = worst;
                tr.worst_param = worst_name;
            }
        }
        if (tr.max_rel_err > report.max_rel_err) {
            report.max_rel_err = tr.max_rel_err;
            report.worst_param = tr.worst_param;
        }
        report.terms.push_back(std::move(tr));
    }
    return report;
}

// ------------------------------------------------------- latent uniformity

Real ks_statistic_uniform(std::vector<Real> samples, Real lo, Real hi) {
    if (samples.empty()) throw ValidationError("ks_statistic_uniform: no samples");
    std::sort(samples.begin(), samples.end());
    const Real n = static_cast<Real>(samples.size());
    Real d = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const Real f = std::clamp((samples[i] - lo) / (hi - lo), 0.0, 1.0);
        d = std::max(d, std::max(f - static_cast<Real>(i) / n,
                                 static_cast<Real>(i + 1) / n - f));
    }
    return d;
}

Real ks_critical_value(int n, Real alpha) {
    if (n < 1 || !(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("ks_critical_value: bad arguments");
    return std::sqrt(-std::log(alpha / 2.0) / 2.0) / std::sqrt(static_cast<Real>(n));
}

UniformityReport z_uniformity(Model& m, const Tensor& images) {
    if (images.ndim() != 4 || images.dim(0) < 500)
        throw ValidationError("z_uniformity: need at least 500 images");
    const int b = images.dim(0), n = m.config().latent_dim;
    const int h = images.dim(1), w = images.dim(2), c = images.dim(3);
    const int64_t per = static_cast<int64_t>(h) * w * c;
    UniformityReport rep;
    rep.sample_count = b;
    std::vector<std::vector<Real>> codes(static_cast<size_t>(n));
    constexpr int kChunk = 100;
    for (int off = 0; off < b; off += kChunk) {
        const int cur = std::min(kChunk, b - off);
        Tensor chunk({cur, h, w, c});
        std::copy(images.data() + off * per, images.data() + (off + cur) * per, chunk.data());
        Tensor z = encode(m, chunk);
        for (int i = 0; i < cur; ++i)
            for (int j = 0; j < n; ++j) codes[static_cast<size_t>(j)].push_back(z.at(i, j));
    }
    rep.ks_per_dim.resize(static_cast<size_t>(n));
    Real sum = 0.0;
    for (int j = 0; j < n; ++j) {
        rep.ks_per_dim[static_cast<size_t>(j)] =
            ks_statistic_uniform(codes[static_cast<size_t>(j)], -1.0, 1.0);
        sum += rep.ks_per_dim[static_cast<size_t>(j)];
    }
    rep.mean_ks = sum / static_cast<Real>(n);
    return rep;
}

// --------------------------------------------------------- age conditioning

namespace {

// Mean luminance per pixel; bright/dark threshold halfway between the
// border (background) estimate and the brightest value.
struct LumImage {
    int h, w;
    std::vector<Real> v;
    Real at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};

LumImage luminance(const Tensor& img) {
    const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
    LumImage lum{h, w, std::vector<Real>(static_cast<size_t>(h) * w)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Real s = 0.0;
            for (int ci = 0; ci < c; ++ci)
                s += img[(static_cast<int64_t>(y) * w + x) * c + ci];
            lum.v[static_cast<size_t>(y) * w + x] = s / static_cast<Real>(c);
        }
    return lum;
}

}  // namespace

Real wrinkle_score(const Tensor& img) {
    if (img.ndim() != 3) throw ValidationError("wrinkle_score: expected (H,W,C)");
    const LumImage lum = luminance(img);
    const int h = lum.h, w = lum.w;
    Real border = 0.0;
    int nb = 0;
    for (int x = 0; x < w; ++x) {
        border += lum.at(0, x) + lum.at(h - 1, x);
        nb += 2;
    }
    for (int y = 1; y < h - 1; ++y) {
        border += lum.at(y, 0) + lum.at(y, w - 1);
        nb += 2;
    }
    border /= static_cast<Real>(nb);
    Real brightest = -2.0;
    for (Real v : lum.v) brightest = std::max(brightest, v);
    const Real thr = 0.5 * (border + brightest);
    if (brightest - border < 0.2) return 0.0;  // no head found

    // bounding box of bright pixels (the head)
    int r0 = h, r1 = -1, c0 = w, c1 = -1;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (lum.at(y, x) > thr) {
                r0 = std::min(r0, y);
                r1 = std::max(r1, y);
                c0 = std::min(c0, x);
                c1 = std::max(c1, x);
            }
    if (r1 < 0) return 0.0;
    const Real cx = 0.5 * (c0 + c1);
    const Real hw = 0.5 * (c1 - c0);
    if (hw < 2.0) return 0.0;

    // scan vertical lines through the head flanks, clear of eyes/mouth
    Real total = 0.0;
    int lines = 0;
    for (int x = c0; x <= c1; ++x) {
        const Real f = std::fabs(static_cast<Real>(x) - cx) / hw;
        if (f < 0.50 || f > 0.72) continue;
        int fy = -1, ly = -1;
        for (int y = r0; y <= r1; ++y)
            if (lum.at(y, x) > thr) {
                if (fy < 0) fy = y;
                ly = y;
            }
        if (fy < 0 || ly <= fy) continue;
        int runs = 0;
        bool in_dark = false;
        for (int y = fy; y <= ly; ++y) {
            const bool dark = lum.at(y, x) <= thr;
            if (dark && !in_dark) ++runs;
            in_dark = dark;
        }
        total += static_cast<Real>(runs);
        ++lines;
    }
    return lines > 0 ? total / static_cast<Real>(lines) : 0.0;
}

namespace {

std::vector<Real> ranks(const std::vector<Real>& v) {
    const size_t n = v.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<Real> r(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const Real avg = 0.5 * static_cast<Real>(i + j) + 1.0;  // average rank, 1-based
        for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

Real spearman(const std::vector<Real>& a, const std::vector<Real>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ValidationError("spearman: need two equal-length series of size >= 2");
    const std::vector<Real> ra = ranks(a), rb = ranks(b);
    const Real n = static_cast<Real>(a.size());
    Real ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    Real num = 0.0, va = 0.0, vb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va <= 0.0 || vb <= 0.0) return 0.0;  // degenerate series
    return num / std::sqrt(va * vb);
}

namespace {

// Two-sided 5% critical t values, df = 1..10, then the normal limit.
Real t_critical_5pct(int df) {
    static const Real table[] = {12.706, 4.303, 3.182, 2.776, 2.571,
                                 2.447,  2.365, 2.306, 2.262, 2.228};
    if (df < 1) return std::numeric_limits<Real>::infinity();
    if (df <= 10) return table[df - 1];
    return 1.96 + 4.0 / static_cast<Real>(df);  // mild df correction
}

}  // namespace

ConditioningReport conditioning_score(Model& m, const Tensor& probes) {
    if (probes.ndim() != 4 || probes.dim(0) < 50)
        throw ValidationError("conditioning_score: need at least 50 probe images");
    const int b = probes.dim(0);
    Tensor z = encode(m, probes);
    ConditioningReport rep;
    std::vector<Real> bins, means;
    for (int bin = 0; bin < kNumAgeBins; ++bin) {
        Tensor label = bin_to_label(bin);
        Tensor labels({b, kNumAgeBins});
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < kNumAgeBins; ++j) labels.at(i, j) = label[j];
        Tensor out = generate(m, z, labels);
        const int h = out.dim(1), w = out.dim(2), c = out.dim(3);
        const int64_t per = static_cast<int64_t>(h) * w * c;
        Real sum = 0.0;
        for (int i = 0; i < b; ++i) {
            Tensor img({h, w, c});
            std::copy(out.data() + i * per, out.data() + (i + 1) * per, img.data());
            sum += wrinkle_score(img);
        }
        rep.mean_scores[static_cast<size_t>(bin)] = sum / static_cast<Real>(b);
        bins.push_back(static_cast<Real>(bin));
        means.push_back(rep.mean_scores[static_cast<size_t>(bin)]);
    }
    Real var = 0.0, mean = 0.0;
    for (Real v : means) mean += v;
    mean /= static_cast<Real>(means.size());
    for (Real v : means) var += (v - mean) * (v - mean);
    if (var < 1e-18) {
        rep.degenerate = true;
        rep.rho = 0.0;
        rep.significant = false;
        return rep;
    }
    rep.rho = spearman(bins, means);
    const int df = kNumAgeBins - 2;
    const Real r2 = std::min(rep.rho * rep.rho, 1.0 - 1e-12);
    const Real t = std::fabs(rep.rho) * std::sqrt(static_cast<Real>(df) / (1.0 - r2));
    rep.significant = t > t_critical_5pct(df);
    return rep;
}

// ----------------------------------------------------------------- ablation

RunMetrics evaluate_model(Model& m, const Tensor& probes, int conditioning_probes) {
    RunMetrics out;
    out.uniformity = z_uniformity(m, probes);
    const int b = probes.dim(0);
    const int k = std::min(conditioning_probes, b);
    const int h = probes.dim(1), w = probes.dim(2), c = probes.dim(3);
    const int64_t per = static_cast<int64_t>(h) * w * c;
    Tensor sub({k, h, w, c});
    std::copy(probes.data(), probes.data() + k * per, sub.data());
    out.conditioning = conditioning_score(m, sub);

    // reconstruction with a fixed mid-age label (probe ages are unknown
    // here, matching inference-time use)
    Tensor mid = bin_to_label(4);
    Tensor labels({k, kNumAgeBins});
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < kNumAgeBins; ++j) labels.at(i, j) = mid[j];
    Tensor z = encode(m, sub);
    Tensor rec = generate(m, z, labels);
    out.recon_error = recon_loss(sub, rec);

    // interpolation smoothness over consecutive probe pairs
    Real smooth = 0.0;
    int pairs = 0;
    for (int i = 0; i + 1 < k && pairs < 8; i += 2, ++pairs) {
        Tensor a({h, w, c}), bimg({h, w, c});
        std::copy(sub.data() + i * per, sub.data() + (i + 1) * per, a.data());
        std::copy(sub.data() + (i + 1) * per, sub.data() + (i + 2) * per, bimg.data());
        smooth += morph_smoothness(interpolate(m, a, bimg, mid, 8));
    }
    out.interp_smoothness = pairs > 0 ? smooth / static_cast<Real>(pairs) : 0.0;

    // high-frequency energy of outputs at old-age bins
    Real tv_sum = 0.0;
    for (int bin = 7; bin <= 9; ++bin) {
        Tensor l = bin_to_label(bin);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < kNumAgeBins; ++j) labels.at(i, j) = l[j];
        tv_sum += tv_loss(generate(m, z, labels));
    }
    out.old_age_tv = tv_sum / 3.0;
    return out;
}

namespace {

std::string latest_checkpoint(const std::string& run_dir) {
    const fs::path dir = fs::path(run_dir) / "checkpoints";
    if (!fs::is_directory(dir)) throw IoError("no checkpoints directory in " + run_dir);
    std::string best;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.starts_with("step_") && name.ends_with(".ckpt") && name > best) best = name;
    }
    if (best.empty()) throw IoError("no checkpoints found in " + run_dir);
    return (dir / best).string();
}

json uniformity_json(const UniformityReport& u) {
    return json{{"mean_ks", u.mean_ks},
                {"sample_count", u.sample_count},
                {"ks_per_dim", u.ks_per_dim}};
}

json metrics_json(const RunMetrics& m) {
    return json{{"uniformity", uniformity_json(m.uniformity)},
                {"conditioning",
                 {{"rho", m.conditioning.rho},
                  {"degenerate", m.conditioning.degenerate},
                  {"significant", m.conditioning.significant},
                  {"mean_scores", m.conditioning.mean_scores}}},
                {"recon_error", m.recon_error},
                {"interp_smoothness", m.interp_smoothness},
                {"old_age_tv", m.old_age_tv}};
}

}  // namespace

std::string metrics_to_json(const RunMetrics& m) { return metrics_json(m).dump(2); }

std::string comparison_to_json(const AblationComparison& c) {
    json j{{"run_a", c.run_a},
           {"run_b", c.run_b},
           {"metrics_a", metrics_json(c.a)},
           {"metrics_b", metrics_json(c.b)},
           {"delta",
            {{"mean_ks", c.a.uniformity.mean_ks - c.b.uniformity.mean_ks},
             {"rho", c.a.conditioning.rho - c.b.conditioning.rho},
             {"recon_error", c.a.recon_error - c.b.recon_error},
             {"interp_smoothness", c.a.interp_smoothness - c.b.interp_smoothness},
             {"old_age_tv", c.a.old_age_tv - c.b.old_age_tv}}}};
    return j.dump(2);
}

std::string comparison_to_text(const AblationComparison& c) {
    std::ostringstream os;
    os.precision(6);
    auto row = [&](const char* name, Real a, Real b) {
        os << "  " << name << ": " << a << " vs " << b << " (delta " << a - b << ")\n";
    };
    os << "ablation comparison\n";
    os << "  run A: " << c.run_a << "\n  run B: " << c.run_b << "\n";
    row("mean KS distance to U[-1,1]", c.a.uniformity.mean_ks, c.b.uniformity.mean_ks);
    row("conditioning Spearman rho", c.a.conditioning.rho, c.b.conditioning.rho);
    row("reconstruction error", c.a.recon_error, c.b.recon_error);
    row("interpolation smoothness", c.a.interp_smoothness, c.b.interp_smoothness);
    row("old-age TV energy", c.a.old_age_tv, c.b.old_age_tv);
    return os.str();
}

AblationComparison ablation_compare(const std::string& run_a_dir, const std::string& run_b_dir,
                                    const Tensor& probes, const std::string& out_dir) {
    auto read_config = [](const std::string& dir) {
        std::ifstream in(fs::path(dir) / "config.json");
        if (!in) throw IoError("missing config.json in " + dir);
        std::stringstream ss;
        ss << in.rdbuf();
        return train_config_from_json(ss.str());
    };
    TrainConfig ca = read_config(run_a_dir), cb = read_config(run_b_dir);
    // configs must agree apart from the ablation switches
    TrainConfig cb_masked = cb;
    cb_masked.ablate_dz = ca.ablate_dz;
    cb_masked.ablate_dimg = ca.ablate_dimg;
    if (train_config_to_json(ca) != train_config_to_json(cb_masked))
        throw ValidationError("run configs differ beyond the ablation flags");

    LoadedCheckpoint a = load_checkpoint(latest_checkpoint(run_a_dir));
    LoadedCheckpoint b = load_checkpoint(latest_checkpoint(run_b_dir));
    AblationComparison cmp;
    cmp.run_a = run_a_dir;
    cmp.run_b = run_b_dir;
    cmp.a = evaluate_model(a.state->model(), probes);
    cmp.b = evaluate_model(b.state->model(), probes);

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "report.json") << comparison_to_json(cmp) << "\n";
        std::ofstream(fs::path(out_dir) / "report.txt") << comparison_to_text(cmp);
        const int h = probes.dim(1), w = probes.dim(2), c = probes.dim(3);
        const int64_t per = static_cast<int64_t>(h) * w * c;
        std::vector<Tensor> faces;
        for (int i = 0; i < std::min(3, probes.dim(0)); ++i) {
            Tensor img({h, w, c});
            std::copy(probes.data() + i * per, probes.data() + (i + 1) * per, img.data());
            faces.push_back(std::move(img));
        }
        write_png((fs::path(out_dir) / "grid_a.png").string(),
                  manifold_grid(a.state->model(), faces));
        write_png((fs::path(out_dir) / "grid_b.png").string(),
                  manifold_grid(b.state->model(), faces));
    }
    return cmp;
}

}  // namespace caae
