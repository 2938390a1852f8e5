#ifndef CAAE_DATA_PIPELINE_HPP
#define CAAE_DATA_PIPELINE_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "caae/image_io.hpp"
#include "caae/rng.hpp"
#include "caae/tensor.hpp"

namespace caae {

enum class Split { kTrain, kEval };

struct DatasetRecord {
    std::string image_path;
    Real age_years = 0.0;
    Split split = Split::kTrain;
};

// Age bins 0-5, 6-10, 11-15, 16-20, 21-30, 31-40, 41-50, 51-60, 61-70,
// 71-80; inclusive endpoints, floor-of-age binning, >80 clamps to 9.
int age_to_bin(Real age_years);

// One-hot over ten bins encoded in {-1,+1}: +1 at the bin, -1 elsewhere.
Tensor bin_to_label(int bin_index);
bool is_valid_label(const Tensor& label);

// raw/127.5 - 1, elementwise; raw values must lie in [0,255].
Tensor normalize_image(const Tensor& raw);
Tensor normalize_image(const RawImage& raw);

// round((img+1)*127.5), round half up, clamped to [0,255].
RawImage denormalize_image(const Tensor& img);

// JSON-lines manifest: {"path": ..., "age": ..., "split": "train"|"eval"}.
// Paths are resolved relative to the manifest's directory. All invalid
// lines are reported together, with line numbers.
std::vector<DatasetRecord> load_manifest(const std::string& path);

// Procedural "face": dark background, one bright ellipse head, two eye
// dots, a mouth bar, and exactly age_bin horizontal wrinkle stripes.
// Deterministic in seed, with per-sample jitter of head position/size.
std::vector<std::pair<Tensor, Real>> synth_faces(int count, int image_size, uint64_t seed,
                                                 int channels = 3);

// In-memory dataset: images kept at 8-bit, normalized per batch.
class Dataset {
  public:
    Dataset(int image_size, int channels);

    static Dataset from_manifest(const std::string& manifest_path, int image_size,
                                 int channels, Split split = Split::kTrain);
    static Dataset from_synth(int count, int image_size, uint64_t seed, int channels = 3);

    void add(const RawImage& img, Real age_years);
    int size() const { return static_cast<int>(ages_.size()); }
    int image_size() const { return image_size_; }
    int channels() const { return channels_; }
    Real age(int i) const { return ages_[static_cast<size_t>(i)]; }
    Tensor image(int i) const;  // normalized (H,W,C)

  private:
    int image_size_, channels_;
    std::vector<std::vector<uint8_t>> pixels_;
    std::vector<Real> ages_;
};

struct Batch {
    Tensor images;  // (B,H,W,C) in [-1,1]
    Tensor labels;  // (B,10) rows in {-1,+1}
};

// Deterministic epoch plan: a (seed, epoch)-keyed shuffle, short final
// batch dropped. Batches pair each image with its true-age label.
class BatchStream {
  public:
    BatchStream(const Dataset& ds, int batch_size, uint64_t seed, int64_t epoch);
    int count() const { return count_; }
    Batch batch(int i) const;
    const std::vector<int>& order() const { return order_; }

  private:
    const Dataset& ds_;
    int batch_size_, count_;
    std::vector<int> order_;
};

BatchStream make_batches(const Dataset& ds, int batch_size, uint64_t seed, int64_t epoch);

}  // namespace caae

#endif
