#include "caae/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace caae {

namespace {

constexpr int kK = 5;    // kernel
constexpr int kS = 2;    // stride
constexpr int kPad = 2;  // symmetric padding; halves even spatial sizes

using MatRM = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

// Patch matrix of x (B,H,W,C): row (b,oy,ox), column (ky,kx,c).
Tensor im2col(const Tensor& x) {
    const int b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    const int oh = (h + 2 * kPad - kK) / kS + 1;
    const int ow = (w + 2 * kPad - kK) / kS + 1;
    Tensor patches = Tensor::uninitialized({b * oh * ow, kK * kK * c});
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                Real* row = patches.data() +
                            (static_cast<int64_t>(bi) * oh * ow + oy * ow + ox) * (kK * kK * c);
                for (int ky = 0; ky < kK; ++ky) {
                    const int iy = oy * kS + ky - kPad;
                    for (int kx = 0; kx < kK; ++kx) {
                        const int ix = ox * kS + kx - kPad;
                        Real* dst = row + (ky * kK + kx) * c;
                        if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                            for (int ci = 0; ci < c; ++ci) dst[ci] = 0.0;
                        } else {
                            const Real* src = x.data() +
                                              ((static_cast<int64_t>(bi) * h + iy) * w + ix) * c;
                            for (int ci = 0; ci < c; ++ci) dst[ci] = src[ci];
                        }
                    }
                }
            }
        }
    }
    return patches;
}

// Adjoint of im2col: scatter-add patch rows back into an image tensor.
void col2im_add(const Tensor& patches, Tensor& dx) {
    const int b = dx.dim(0), h = dx.dim(1), w = dx.dim(2), c = dx.dim(3);
    const int oh = (h + 2 * kPad - kK) / kS + 1;
    const int ow = (w + 2 * kPad - kK) / kS + 1;
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const Real* row = patches.data() +
                                  (static_cast<int64_t>(bi) * oh * ow + oy * ow + ox) *
                                      (kK * kK * c);
                for (int ky = 0; ky < kK; ++ky) {
                    const int iy = oy * kS + ky - kPad;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kK; ++kx) {
                        const int ix = ox * kS + kx - kPad;
                        if (ix < 0 || ix >= w) continue;
                        const Real* src = row + (ky * kK + kx) * c;
                        Real* dst = dx.data() + ((static_cast<int64_t>(bi) * h + iy) * w + ix) * c;
                        for (int ci = 0; ci < c; ++ci) dst[ci] += src[ci];
                    }
                }
            }
        }
    }
}

void uniform_fan_in(Tensor& w, int fan_in, Rng& rng) {
    const Real s = 1.0 / std::sqrt(static_cast<Real>(fan_in));
    rng.fill_uniform(w, -s, s);
}

}  // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(int in, int out)
    : in_(in), out_(out), w_({out, in}), b_({out}), dw_({out, in}), db_({out}) {}

void Dense::init(Rng& rng) {
    uniform_fan_in(w_, in_, rng);
    b_.set_zero();
}

Tensor Dense::forward(const Tensor& x, std::any* tape) {
    if (x.ndim() != 2 || x.dim(1) != in_)
        throw ValidationError("Dense: bad input shape " + x.shape_str());
    const int b = x.dim(0);
    Tensor y = Tensor::uninitialized({b, out_});
    CMapRM xm(x.data(), b, in_), wm(w_.data(), out_, in_);
    MapRM ym(y.data(), b, out_);
    ym.noalias() = xm * wm.transpose();
    Eigen::Map<const Eigen::VectorXd> bv(b_.data(), out_);
    ym.rowwise() += bv.transpose();
    if (tape) *tape = x;
    return y;
}

Tensor Dense::backward(const Tensor& dy, const std::any& tape) {
    const Tensor& x = std::any_cast<const Tensor&>(tape);
    const int b = x.dim(0);
    CMapRM dym(dy.data(), b, out_), xm(x.data(), b, in_), wm(w_.data(), out_, in_);
    MapRM dwm(dw_.data(), out_, in_);
    dwm.noalias() += dym.transpose() * xm;
    Eigen::Map<Eigen::VectorXd> dbv(db_.data(), out_);
    dbv.noalias() += dym.colwise().sum().transpose();
    Tensor dx = Tensor::uninitialized({b, in_});
    MapRM dxm(dx.data(), b, in_);
    dxm.noalias() = dym * wm;
    return dx;
}

void Dense::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w_, &dw_});
    out.push_back({prefix + ".b", &b_, &db_});
}

void Dense::zero_grads() {
    dw_.set_zero();
    db_.set_zero();
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int cin, int cout)
    : cin_(cin),
      cout_(cout),
      w_({cout, kK * kK * cin}),
      b_({cout}),
      dw_({cout, kK * kK * cin}),
      db_({cout}) {}

void Conv2d::init(Rng& rng) {
    uniform_fan_in(w_, kK * kK * cin_, rng);
    b_.set_zero();
}

Tensor Conv2d::forward(const Tensor& x, std::any* tape) {
    if (x.ndim() != 4 || x.dim(3) != cin_)
        throw ValidationError("Conv2d: bad input shape " + x.shape_str());
    const int b = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int oh = (h + 2 * kPad - kK) / kS + 1, ow = (w + 2 * kPad - kK) / kS + 1;
    Tensor patches = im2col(x);
    Tensor y = Tensor::uninitialized({b, oh, ow, cout_});
    CMapRM pm(patches.data(), static_cast<int64_t>(b) * oh * ow, kK * kK * cin_);
    CMapRM wm(w_.data(), cout_, kK * kK * cin_);
    MapRM ym(y.data(), static_cast<int64_t>(b) * oh * ow, cout_);
    ym.noalias() = pm * wm.transpose();
    Eigen::Map<const Eigen::VectorXd> bv(b_.data(), cout_);
    ym.rowwise() += bv.transpose();
    if (tape) *tape = x;
    return y;
}

Tensor Conv2d::backward(const Tensor& dy, const std::any& tape) {
    const Tensor& x = std::any_cast<const Tensor&>(tape);
    const int b = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int oh = dy.dim(1), ow = dy.dim(2);
    const int64_t rows = static_cast<int64_t>(b) * oh * ow;
    Tensor patches = im2col(x);
    CMapRM dym(dy.data(), rows, cout_), pm(patches.data(), rows, kK * kK * cin_),
        wm(w_.data(), cout_, kK * kK * cin_);
    MapRM dwm(dw_.data(), cout_, kK * kK * cin_);
    dwm.noalias() += dym.transpose() * pm;
    Eigen::Map<Eigen::VectorXd> dbv(db_.data(), cout_);
    dbv.noalias() += dym.colwise().sum().transpose();
    Tensor dpatches = Tensor::uninitialized({static_cast<int>(rows), kK * kK * cin_});
    MapRM dpm(dpatches.data(), rows, kK * kK * cin_);
    dpm.noalias() = dym * wm;
    Tensor dx({b, h, w, cin_});
    col2im_add(dpatches, dx);
    return dx;
}

void Conv2d::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w_, &dw_});
    out.push_back({prefix + ".b", &b_, &db_});
}

void Conv2d::zero_grads() {
    dw_.set_zero();
    db_.set_zero();
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int cin, int cout)
    : cin_(cin),
      cout_(cout),
      w_({cin, kK * kK * cout}),
      b_({cout}),
      dw_({cin, kK * kK * cout}),
      db_({cout}) {}

void ConvTranspose2d::init(Rng& rng) {
    // Each output unit receives ~k^2/s^2 taps from cin input channels.
    uniform_fan_in(w_, kK * kK * cin_ / (kS * kS), rng);
    b_.set_zero();
}

Tensor ConvTranspose2d::forward(const Tensor& x, std::any* tape) {
    if (x.ndim() != 4 || x.dim(3) != cin_)
        throw ValidationError("ConvTranspose2d: bad input shape " + x.shape_str());
    const int b = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int64_t rows = static_cast<int64_t>(b) * h * w;
    Tensor dpatches = Tensor::uninitialized({static_cast<int>(rows), kK * kK * cout_});
    CMapRM xm(x.data(), rows, cin_), wm(w_.data(), cin_, kK * kK * cout_);
    MapRM dpm(dpatches.data(), rows, kK * kK * cout_);
    dpm.noalias() = xm * wm;
    Tensor y({b, h * kS, w * kS, cout_});
    col2im_add(dpatches, y);
    const int64_t pixels = y.numel() / cout_;
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < pixels; ++p) {
        Real* row = y.data() + p * cout_;
        for (int ci = 0; ci < cout_; ++ci) row[ci] += b_[ci];
    }
    if (tape) *tape = x;
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy, const std::any& tape) {
    const Tensor& x = std::any_cast<const Tensor&>(tape);
    const int b = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int64_t rows = static_cast<int64_t>(b) * h * w;
    Tensor patches = im2col(dy);  // (b*h*w, k*k*cout)
    CMapRM pm(patches.data(), rows, kK * kK * cout_), xm(x.data(), rows, cin_),
        wm(w_.data(), cin_, kK * kK * cout_);
    MapRM dwm(dw_.data(), cin_, kK * kK * cout_);
    dwm.noalias() += xm.transpose() * pm;
    CMapRM dym(dy.data(), dy.numel() / cout_, cout_);
    Eigen::Map<Eigen::VectorXd> dbv(db_.data(), cout_);
    dbv.noalias() += dym.colwise().sum().transpose();
    Tensor dx = Tensor::uninitialized({b, h, w, cin_});
    MapRM dxm(dx.data(), rows, cin_);
    dxm.noalias() = pm * wm.transpose();
    return dx;
}

void ConvTranspose2d::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w_, &dw_});
    out.push_back({prefix + ".b", &b_, &db_});
}

void ConvTranspose2d::zero_grads() {
    dw_.set_zero();
    db_.set_zero();
}

// ----------------------------------------------------------- activations

Tensor Relu::forward(const Tensor& x, std::any* tape) {
    Tensor y = Tensor::uninitialized(x.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    if (tape) *tape = y;
    return y;
}

Tensor Relu::backward(const Tensor& dy, const std::any& tape) {
    const Tensor& y = std::any_cast<const Tensor&>(tape);
    Tensor dx = Tensor::uninitialized(dy.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < dy.numel(); ++i) dx[i] = y[i] > 0.0 ? dy[i] : 0.0;
    return dx;
}

Tensor Tanh::forward(const Tensor& x, std::any* tape) {
    Tensor y = Tensor::uninitialized(x.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
    if (tape) *tape = y;
    return y;
}

Tensor Tanh::backward(const Tensor& dy, const std::any& tape) {
    const Tensor& y = std::any_cast<const Tensor&>(tape);
    Tensor dx = Tensor::uninitialized(dy.shape());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
    return dx;
}

// ------------------------------------------------------------ BatchNorm2d

namespace {
struct BnTape {
    Tensor xhat;
    Tensor ivar;  // per channel
};
}  // namespace

BatchNorm2d::BatchNorm2d(int channels)
    : c_(channels),
      gamma_({channels}),
      beta_({channels}),
      dgamma_({channels}),
      dbeta_({channels}),
      running_mean_({channels}),
      running_var_({channels}) {
    gamma_.fill(1.0);
    running_var_.fill(1.0);
}

void BatchNorm2d::init(Rng&) {
    gamma_.fill(1.0);
    beta_.set_zero();
    running_mean_.set_zero();
    running_var_.fill(1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, std::any* tape) {
    if (x.ndim() != 4 || x.dim(3) != c_)
        throw ValidationError("BatchNorm2d: bad input shape " + x.shape_str());
    const int64_t n = x.numel() / c_;
    Tensor y = Tensor::uninitialized(x.shape());
    if (!tape) {
        std::vector<Real> scale(static_cast<size_t>(c_)), shift(static_cast<size_t>(c_));
        for (int ci = 0; ci < c_; ++ci) {
            scale[static_cast<size_t>(ci)] = gamma_[ci] / std::sqrt(running_var_[ci] + kEps);
            shift[static_cast<size_t>(ci)] =
                beta_[ci] - scale[static_cast<size_t>(ci)] * running_mean_[ci];
        }
#pragma omp parallel for schedule(static)
        for (int64_t p = 0; p < n; ++p) {
            const Real* xr = x.data() + p * c_;
            Real* yr = y.data() + p * c_;
            for (int ci = 0; ci < c_; ++ci)
                yr[ci] = scale[static_cast<size_t>(ci)] * xr[ci] +
                         shift[static_cast<size_t>(ci)];
        }
        return y;
    }
    Tensor mean({c_}), var({c_});
    for (int64_t p = 0; p < n; ++p) {
        const Real* xr = x.data() + p * c_;
        for (int ci = 0; ci < c_; ++ci) mean[ci] += xr[ci];
    }
    for (int ci = 0; ci < c_; ++ci) mean[ci] /= static_cast<Real>(n);
    for (int64_t p = 0; p < n; ++p) {
        const Real* xr = x.data() + p * c_;
        for (int ci = 0; ci < c_; ++ci) {
            const Real d = xr[ci] - mean[ci];
            var[ci] += d * d;
        }
    }
    for (int ci = 0; ci < c_; ++ci) var[ci] /= static_cast<Real>(n);
    BnTape t;
    t.ivar = Tensor({c_});
    for (int ci = 0; ci < c_; ++ci) t.ivar[ci] = 1.0 / std::sqrt(var[ci] + kEps);
    t.xhat = Tensor::uninitialized(x.shape());
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < n; ++p) {
        const Real* xr = x.data() + p * c_;
        Real* hr = t.xhat.data() + p * c_;
        Real* yr = y.data() + p * c_;
        for (int ci = 0; ci < c_; ++ci) {
            hr[ci] = (xr[ci] - mean[ci]) * t.ivar[ci];
            yr[ci] = gamma_[ci] * hr[ci] + beta_[ci];
        }
    }
    for (int ci = 0; ci < c_; ++ci) {
        running_mean_[ci] = kMomentum * running_mean_[ci] + (1.0 - kMomentum) * mean[ci];
        running_var_[ci] = kMomentum * running_var_[ci] + (1.0 - kMomentum) * var[ci];
    }
    *tape = std::move(t);
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy, const std::any& tape) {
    const BnTape& t = std::any_cast<const BnTape&>(tape);
    const int64_t n = dy.numel() / c_;
    Tensor sum_dy({c_}), sum_dy_xhat({c_});
    for (int64_t p = 0; p < n; ++p) {
        const Real* dr = dy.data() + p * c_;
        const Real* hr = t.xhat.data() + p * c_;
        for (int ci = 0; ci < c_; ++ci) {
            sum_dy[ci] += dr[ci];
            sum_dy_xhat[ci] += dr[ci] * hr[ci];
        }
    }
    for (int ci = 0; ci < c_; ++ci) {
        dbeta_[ci] += sum_dy[ci];
        dgamma_[ci] += sum_dy_xhat[ci];
    }
    Tensor dx = Tensor::uninitialized(dy.shape());
    const Real invn = 1.0 / static_cast<Real>(n);
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < n; ++p) {
        const Real* dr = dy.data() + p * c_;
        const Real* hr = t.xhat.data() + p * c_;
        Real* xr = dx.data() + p * c_;
        for (int ci = 0; ci < c_; ++ci)
            xr[ci] = gamma_[ci] * t.ivar[ci] *
                     (dr[ci] - invn * sum_dy[ci] - invn * hr[ci] * sum_dy_xhat[ci]);
    }
    return dx;
}

void BatchNorm2d::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".gamma", &gamma_, &dgamma_});
    out.push_back({prefix + ".beta", &beta_, &dbeta_});
}

void BatchNorm2d::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
    out.push_back({prefix + ".running_mean", &running_mean_});
    out.push_back({prefix + ".running_var", &running_var_});
}

void BatchNorm2d::zero_grads() {
    dgamma_.set_zero();
    dbeta_.set_zero();
}

// --------------------------------------------------------------- Reshape

Tensor Reshape::forward(const Tensor& x, std::any* tape) {
    std::vector<int> s{x.dim(0)};
    s.insert(s.end(), tail_.begin(), tail_.end());
    if (tape) *tape = x.shape();
    return x.reshaped(s);
}

Tensor Reshape::backward(const Tensor& dy, const std::any& tape) {
    return dy.reshaped(std::any_cast<const std::vector<int>&>(tape));
}

// ------------------------------------------------------------ Sequential

void Sequential::add(std::unique_ptr<Layer> layer, std::string name) {
    layers_.push_back(std::move(layer));
    names_.push_back(std::move(name));
}

Tensor Sequential::forward(const Tensor& x, std::vector<std::any>* tape) {
    if (tape) tape->assign(layers_.size(), std::any{});
    Tensor cur = x;
    for (size_t i = 0; i < layers_.size(); ++i)
        cur = layers_[i]->forward(cur, tape ? &(*tape)[i] : nullptr);
    return cur;
}

Tensor Sequential::backward(Tensor dy, const std::vector<std::any>& tape) {
    if (tape.size() != layers_.size())
        throw ValidationError("Sequential::backward: tape/layer count mismatch");
    for (size_t i = layers_.size(); i-- > 0;) dy = layers_[i]->backward(dy, tape[i]);
    return dy;
}

void Sequential::init(Rng& rng) {
    for (auto& l : layers_) l->init(rng);
}

void Sequential::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    for (size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->collect_params(prefix + "." + names_[i], out);
}

void Sequential::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
    for (size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->collect_state(prefix + "." + names_[i], out);
}

void Sequential::zero_grads() {
    for (auto& l : layers_) l->zero_grads();
}

// --------------------------------------------------------- concatenation

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(0) != b.dim(0))
        throw ValidationError("concat_cols: incompatible shapes " + a.shape_str() + " and " +
                              b.shape_str());
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    Tensor r({n, ca + cb});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < ca; ++j) r.at(i, j) = a.at(i, j);
        for (int j = 0; j < cb; ++j) r.at(i, ca + j) = b.at(i, j);
    }
    return r;
}

void split_cols(const Tensor& ab, int na, Tensor* da, Tensor* db) {
    const int n = ab.dim(0), c = ab.dim(1);
    if (da) {
        *da = Tensor({n, na});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < na; ++j) da->at(i, j) = ab.at(i, j);
    }
    if (db) {
        *db = Tensor({n, c - na});
        for (int i = 0; i < n; ++i)
            for (int j = na; j < c; ++j) db->at(i, j - na) = ab.at(i, j);
    }
}

Tensor concat_label_maps(const Tensor& fm, const Tensor& labels) {
    if (fm.ndim() != 4 || labels.ndim() != 2 || fm.dim(0) != labels.dim(0))
        throw ValidationError("concat_label_maps: incompatible shapes");
    const int b = fm.dim(0), h = fm.dim(1), w = fm.dim(2), c = fm.dim(3), lc = labels.dim(1);
    Tensor r = Tensor::uninitialized({b, h, w, c + lc});
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        const Real* lrow = labels.data() + static_cast<int64_t>(bi) * lc;
        for (int64_t p = 0; p < static_cast<int64_t>(h) * w; ++p) {
            const Real* src = fm.data() + (static_cast<int64_t>(bi) * h * w + p) * c;
            Real* dst = r.data() + (static_cast<int64_t>(bi) * h * w + p) * (c + lc);
            for (int ci = 0; ci < c; ++ci) dst[ci] = src[ci];
            for (int ci = 0; ci < lc; ++ci) dst[c + ci] = lrow[ci];
        }
    }
    return r;
}

Tensor drop_label_maps(const Tensor& dfm, int channels) {
    const int b = dfm.dim(0), h = dfm.dim(1), w = dfm.dim(2), cfull = dfm.dim(3);
    Tensor r = Tensor::uninitialized({b, h, w, channels});
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < static_cast<int64_t>(b) * h * w; ++p) {
        const Real* src = dfm.data() + p * cfull;
        Real* dst = r.data() + p * channels;
        for (int ci = 0; ci < channels; ++ci) dst[ci] = src[ci];
    }
    return r;
}

}  // namespace caae
