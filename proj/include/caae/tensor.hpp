#ifndef CAAE_TENSOR_HPP
#define CAAE_TENSOR_HPP

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace caae {

using Real = double;

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major tensor, last dimension fastest. Images use NHWC,
// matrices (rows, cols), vectors (n).
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);  // zero-filled
    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    Tensor(const Tensor& o);
    Tensor& operator=(const Tensor& o);
    Tensor(Tensor&&) noexcept = default;
    Tensor& operator=(Tensor&&) noexcept = default;

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, Real value);
    // Scratch allocation for buffers that are fully overwritten.
    static Tensor uninitialized(std::vector<int> shape);

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int64_t numel() const { return n_; }
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    Real* data() { return v_.get(); }
    const Real* data() const { return v_.get(); }
    Real& operator[](int64_t i) { return v_[static_cast<size_t>(i)]; }
    Real operator[](int64_t i) const { return v_[static_cast<size_t>(i)]; }

    // 2-d and 4-d indexing; no bounds checks in release builds.
    Real& at(int i, int j) { return v_[static_cast<size_t>(i) * shape_[1] + j]; }
    Real at(int i, int j) const { return v_[static_cast<size_t>(i) * shape_[1] + j]; }
    Real& at(int b, int y, int x, int c) {
        return v_[((static_cast<size_t>(b) * shape_[1] + y) * shape_[2] + x) * shape_[3] + c];
    }
    Real at(int b, int y, int x, int c) const {
        return v_[((static_cast<size_t>(b) * shape_[1] + y) * shape_[2] + x) * shape_[3] + c];
    }

    void fill(Real value);
    void set_zero() { fill(0.0); }

    // Same data, new shape metadata; numel must match.
    Tensor reshaped(std::vector<int> shape) const;

    Real min() const;
    Real max() const;
    bool all_finite() const;

    std::string shape_str() const;

  private:
    struct Uninit {};
    Tensor(std::vector<int> shape, Uninit);

    std::vector<int> shape_;
    int64_t n_ = 0;
    std::unique_ptr<Real[]> v_;
};

// Elementwise helpers used across modules.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(Real s, const Tensor& a);
void axpy(Real s, const Tensor& x, Tensor& y);  // y += s*x

void require_shape(const Tensor& t, const std::vector<int>& shape, const std::string& what);

}  // namespace caae

#endif
