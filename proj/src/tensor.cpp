#include "caae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace caae {

static int64_t checked_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ValidationError("tensor dimension must be positive");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape, Uninit)
    : shape_(std::move(shape)), n_(checked_numel(shape_)) {
    v_ = std::make_unique_for_overwrite<Real[]>(static_cast<size_t>(n_));
}

Tensor::Tensor(std::vector<int> shape) : Tensor(std::move(shape), Uninit{}) { set_zero(); }

Tensor::Tensor(const Tensor& o) : shape_(o.shape_), n_(o.n_) {
    if (n_ > 0) {
        v_ = std::make_unique_for_overwrite<Real[]>(static_cast<size_t>(n_));
        std::copy(o.v_.get(), o.v_.get() + n_, v_.get());
    }
}

Tensor& Tensor::operator=(const Tensor& o) {
    if (this == &o) return *this;
    shape_ = o.shape_;
    if (n_ != o.n_) v_ = std::make_unique_for_overwrite<Real[]>(static_cast<size_t>(o.n_));
    n_ = o.n_;
    if (n_ > 0) std::copy(o.v_.get(), o.v_.get() + n_, v_.get());
    return *this;
}

Tensor Tensor::uninitialized(std::vector<int> shape) { return Tensor(std::move(shape), Uninit{}); }

Tensor Tensor::full(std::vector<int> shape, Real value) {
    Tensor t = uninitialized(std::move(shape));
    t.fill(value);
    return t;
}

void Tensor::fill(Real value) { std::fill(v_.get(), v_.get() + n_, value); }

Tensor Tensor::reshaped(std::vector<int> shape) const {
    Tensor t = uninitialized(std::move(shape));
    if (t.numel() != numel())
        throw ValidationError("reshape numel mismatch: " + shape_str() + " -> " + t.shape_str());
    std::copy(v_.get(), v_.get() + n_, t.v_.get());
    return t;
}

Real Tensor::min() const {
    return n_ == 0 ? 0.0 : *std::min_element(v_.get(), v_.get() + n_);
}

Real Tensor::max() const {
    return n_ == 0 ? 0.0 : *std::max_element(v_.get(), v_.get() + n_);
}

bool Tensor::all_finite() const {
    for (int64_t i = 0; i < n_; ++i)
        if (!std::isfinite(v_[static_cast<size_t>(i)])) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
}

Tensor operator+(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ValidationError("tensor shape mismatch in +");
    Tensor r = Tensor::uninitialized(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) r[i] = a[i] + b[i];
    return r;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ValidationError("tensor shape mismatch in -");
    Tensor r = Tensor::uninitialized(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) r[i] = a[i] - b[i];
    return r;
}

Tensor operator*(Real s, const Tensor& a) {
    Tensor r = Tensor::uninitialized(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) r[i] = s * a[i];
    return r;
}

void axpy(Real s, const Tensor& x, Tensor& y) {
    if (!x.same_shape(y)) throw ValidationError("tensor shape mismatch in axpy");
    for (int64_t i = 0; i < x.numel(); ++i) y[i] += s * x[i];
}

void require_shape(const Tensor& t, const std::vector<int>& shape, const std::string& what) {
    if (t.shape() != shape) {
        std::ostringstream os;
        os << what << ": expected shape (";
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << "), got " << t.shape_str();
        throw ValidationError(os.str());
    }
}

}  // namespace caae
