#ifndef CAAE_EVALUATION_HPP
#define CAAE_EVALUATION_HPP

#include <array>
#include <map>
#include <string>
#include <vector>

#include "caae/networks.hpp"
#include "caae/objectives.hpp"

namespace caae {

// ------------------------------------------------------- gradient checking

struct GradCheckTerm {
    std::string term;  // recon, tv, adv_d_z, adv_d_img, adv_g, eg_total
    std::map<std::string, Real> group_max_rel_err;
    Real max_rel_err = 0.0;
    std::string worst_param;
};

struct GradCheckReport {
    std::vector<GradCheckTerm> terms;
    Real max_rel_err = 0.0;
    std::string worst_param;
    Real epsilon = 0.0;

    bool passes(Real tol) const { return max_rel_err < tol; }
};

// Compares analytic gradients of every loss term against central finite
// differences on a random parameter subsample (>=200 per group, or all
// of them when full is set). Intended for miniature double-precision
// configs.
GradCheckReport gradcheck(Model& m, const Tensor& images, const Tensor& labels,
                          const LossWeights& weights, Real epsilon = 1e-5,
                          int samples_per_group = 200, uint64_t seed = 0, bool full = false);

// ------------------------------------------------------- latent uniformity

struct UniformityReport {
    std::vector<Real> ks_per_dim;
    Real mean_ks = 0.0;
    int sample_count = 0;
};

// One-sample KS statistic against the uniform CDF on [lo, hi].
Real ks_statistic_uniform(std::vector<Real> samples, Real lo, Real hi);

// Asymptotic critical value c(alpha)/sqrt(n), c = sqrt(-ln(alpha/2)/2).
Real ks_critical_value(int n, Real alpha);

// Encodes >=500 images and runs a per-dimension KS test against U[-1,1].
UniformityReport z_uniformity(Model& m, const Tensor& images);

// --------------------------------------------------------- age conditioning

// Stripe-count estimate for a synthetic face: average number of dark
// runs along vertical scanlines through the head's outer flanks.
Real wrinkle_score(const Tensor& img);

Real spearman(const std::vector<Real>& a, const std::vector<Real>& b);

struct ConditioningReport {
    Real rho = 0.0;                    // Spearman(requested bin, mean wrinkle score)
    bool degenerate = false;           // zero score variance; rho reported as 0
    bool significant = false;          // |rho| above the two-sided 5% critical value
    std::array<Real, 10> mean_scores{};
};

// Requires >=50 probe images; generates every (probe, bin) pair.
ConditioningReport conditioning_score(Model& m, const Tensor& probes);

// --------------------------------------------------------------- ablations

struct RunMetrics {
    UniformityReport uniformity;
    ConditioningReport conditioning;
    Real recon_error = 0.0;        // mean reconstruction loss over probes
    Real interp_smoothness = 0.0;  // mean per-step RMS over probe pairs
    Real old_age_tv = 0.0;         // mean TV of outputs at bins 7-9
};

// probes: (B,H,W,C) with B >= 500; the first `conditioning_probes` rows
// feed the conditioning/reconstruction/interpolation metrics.
RunMetrics evaluate_model(Model& m, const Tensor& probes, int conditioning_probes = 50);

struct AblationComparison {
    RunMetrics a, b;
    std::string run_a, run_b;
};

// Loads the latest checkpoint of two completed run directories (configs
// must match apart from the ablation flags) and evaluates both on the
// same probe set. When out_dir is non-empty, writes report.json,
// report.txt and side-by-side sweep grids.
AblationComparison ablation_compare(const std::string& run_a_dir, const std::string& run_b_dir,
                                    const Tensor& probes, const std::string& out_dir = "");

std::string metrics_to_json(const RunMetrics& m);
std::string comparison_to_json(const AblationComparison& c);
std::string comparison_to_text(const AblationComparison& c);

}  // namespace caae

#endif
