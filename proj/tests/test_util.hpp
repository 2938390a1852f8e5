#ifndef CAAE_TEST_UTIL_HPP
#define CAAE_TEST_UTIL_HPP

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "caae/data_pipeline.hpp"
#include "caae/networks.hpp"
#include "caae/rng.hpp"
#include "caae/tensor.hpp"

namespace caae::test {

// Scratch directory removed at scope exit.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("caae_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& sub = "") const {
        return sub.empty() ? path_.string() : (path_ / sub).string();
    }

  private:
    std::filesystem::path path_;
};

inline NetworkConfig tiny_net(int latent = 4) {
    NetworkConfig net;
    net.image_size = 16;
    net.channels = 3;
    net.latent_dim = latent;
    net.base_filters = 8;
    net.num_scales = 2;
    return net;
}

inline Tensor random_tensor(std::vector<int> shape, uint64_t seed, Real lo = -0.9,
                            Real hi = 0.9) {
    Tensor t(std::move(shape));
    Rng rng(seed);
    rng.fill_uniform(t, lo, hi);
    return t;
}

inline Tensor label_rows(const std::vector<int>& bins) {
    Tensor l({static_cast<int>(bins.size()), kNumAgeBins});
    for (size_t i = 0; i < bins.size(); ++i) {
        Tensor row = bin_to_label(bins[i]);
        for (int j = 0; j < kNumAgeBins; ++j) l.at(static_cast<int>(i), j) = row[j];
    }
    return l;
}

inline bool tensors_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (int64_t i = 0; i < a.numel(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

inline Real max_abs_diff(const Tensor& a, const Tensor& b) {
    Real d = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
    return d;
}

}  // namespace caae::test

#endif
