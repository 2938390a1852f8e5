#ifndef CAAE_TRAINER_HPP
#define CAAE_TRAINER_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "caae/data_pipeline.hpp"
#include "caae/networks.hpp"
#include "caae/objectives.hpp"

namespace caae {

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    NetworkConfig network;
    LossWeights weights;        // lambda=100, gamma=10
    int batch_size = 100;
    Real learning_rate = 0.0002;  // ADAM alpha
    Real beta1 = 0.5;
    Real beta2 = 0.999;
    int epochs = 50;
    uint64_t seed = 0;
    bool ablate_dz = false;
    bool ablate_dimg = false;
    bool saturating_g = false;  // literal log(1-D) generator loss
    int checkpoint_every = 500;

    std::vector<std::string> validation_errors() const;
    void validate() const;  // throws listing every violation
};

// Uniform prior on the latent box.
struct PriorSpec {
    int dim = 0;
    Real low = -1.0;
    Real high = 1.0;
};

Tensor sample_prior(const PriorSpec& spec, int batch, Rng& rng);

struct AdamSlot {
    Tensor m, v;
};

struct AdamGroup {
    std::vector<AdamSlot> slots;  // aligned with Model::group_params order
    int64_t t = 0;
};

// One bias-corrected ADAM update over a parameter group.
void adam_step(std::vector<ParamRef>& params, AdamGroup& adam, Real alpha, Real beta1,
               Real beta2, Real eps = 1e-8);

// Everything needed to stop and resume training bit-exactly.
class TrainState {
  public:
    TrainState(const NetworkConfig& net, uint64_t seed);

    Model& model() { return *model_; }
    const Model& model() const { return *model_; }
    std::map<std::string, AdamGroup>& adam() { return adam_; }
    int64_t& step() { return step_; }
    int64_t step() const { return step_; }
    Rng& rng() { return rng_; }
    const Rng& rng() const { return rng_; }

  private:
    std::unique_ptr<Model> model_;
    std::map<std::string, AdamGroup> adam_;
    int64_t step_ = 0;
    Rng rng_;
};

// One alternating update: Dimg, then Dz, then the joint E,G step on the
// total objective. Ablated discriminators are skipped and contribute
// zero adversarial terms. Throws TrainingError naming the first
// non-finite loss term.
LossReport train_step(TrainState& state, const Batch& batch, const TrainConfig& config);

struct TrainOptions {
    bool force = false;            // allow writing into an existing run directory
    std::string resume_from;       // checkpoint path, empty for a fresh run
    bool quiet = true;
};

struct TrainResult {
    std::unique_ptr<TrainState> state;
    LossReport last;
    int64_t steps_run = 0;
    std::string last_checkpoint;
};

// Runs epochs x floor(N/batch) steps; writes config.json, log.csv and
// periodic checkpoints under run_dir.
TrainResult train(const Dataset& ds, const TrainConfig& config, const std::string& run_dir,
                  const TrainOptions& options = {});

std::string loss_csv_header();
std::string loss_csv_row(int64_t step, int64_t epoch, const LossReport& r, double wall_time);

}  // namespace caae

#endif
