#ifndef CAAE_CHECKPOINT_HPP
#define CAAE_CHECKPOINT_HPP

#include <string>
#include <utility>

#include "caae/trainer.hpp"

namespace caae {

inline constexpr uint32_t kCheckpointVersion = 1;

// Binary checkpoint: versioned header with the full TrainConfig, every
// parameter / ADAM moment / running statistic as a named float64 array,
// the serialized RNG state, and a trailing CRC-32. Written atomically
// (temp file + rename). state is not modified; the reference is mutable
// only because the parameter registry hands out mutable views.
void save_checkpoint(TrainState& state, const TrainConfig& config, const std::string& path);

struct LoadedCheckpoint {
    std::unique_ptr<TrainState> state;
    TrainConfig config;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Loads and verifies the stored network config against an expected one;
// throws ValidationError naming the first mismatched field.
LoadedCheckpoint load_checkpoint_expecting(const std::string& path,
                                           const NetworkConfig& expected);

// JSON round trip for configs (also used for config files and run dirs).
std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

}  // namespace caae

#endif
