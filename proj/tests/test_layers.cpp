#include <doctest.h>

#include <any>
#include <cmath>
#include <functional>

#include "caae/layers.hpp"
#include "test_util.hpp"

using namespace caae;
using caae::test::random_tensor;

namespace {

// Finite-difference oracle: projects the layer output onto a fixed
// random direction and checks d(projection)/d(input) and
// d(projection)/d(params) against central differences.
void check_layer(Layer& layer, const Tensor& input, uint64_t seed, Real tol = 1e-6) {
    const Real eps = 1e-6;
    Tensor x = input;

    auto value = [&](const Tensor& probe_dir) {
        std::any tape;
        Tensor y = layer.forward(x, &tape);
        Real v = 0.0;
        for (int64_t i = 0; i < y.numel(); ++i) v += probe_dir[i] * y[i];
        return v;
    };

    std::any tape;
    Tensor y0 = layer.forward(x, &tape);
    Tensor dir = random_tensor(y0.shape(), seed ^ 0xd1f, -1.0, 1.0);

    layer.zero_grads();
    Tensor dx = layer.backward(dir, tape);

    // input gradient
    Rng pick(seed ^ 0xabc);
    for (int s = 0; s < 40; ++s) {
        const int64_t i = static_cast<int64_t>(pick.below(static_cast<uint64_t>(x.numel())));
        const Real keep = x[i];
        x[i] = keep + eps;
        const Real up = value(dir);
        x[i] = keep - eps;
        const Real dn = value(dir);
        x[i] = keep;
        const Real numeric = (up - dn) / (2 * eps);
        CHECK(std::fabs(dx[i] - numeric) <=
              tol * std::max({std::fabs(dx[i]), std::fabs(numeric), 1.0}));
    }

    // parameter gradients
    std::vector<ParamRef> params;
    layer.collect_params("p", params);
    for (const auto& p : params) {
        for (int s = 0; s < 25 && s < p.value->numel(); ++s) {
            const int64_t i =
                static_cast<int64_t>(pick.below(static_cast<uint64_t>(p.value->numel())));
            const Real keep = (*p.value)[i];
            (*p.value)[i] = keep + eps;
            const Real up = value(dir);
            (*p.value)[i] = keep - eps;
            const Real dn = value(dir);
            (*p.value)[i] = keep;
            const Real numeric = (up - dn) / (2 * eps);
            const Real analytic = (*p.grad)[i];
            CHECK(std::fabs(analytic - numeric) <=
                  tol * std::max({std::fabs(analytic), std::fabs(numeric), 1.0}));
        }
    }
}

}  // namespace

TEST_CASE("dense layer gradients match finite differences") {
    Dense layer(7, 5);
    Rng rng(11);
    layer.init(rng);
    check_layer(layer, random_tensor({3, 7}, 21), 1);
}

TEST_CASE("conv layer halves spatial size and matches finite differences") {
    Conv2d layer(3, 4);
    Rng rng(12);
    layer.init(rng);
    Tensor x = random_tensor({2, 8, 8, 3}, 22);
    std::any tape;
    Tensor y = layer.forward(x, &tape);
    CHECK(y.shape() == std::vector<int>{2, 4, 4, 4});
    check_layer(layer, x, 2);
}

TEST_CASE("transposed conv doubles spatial size and matches finite differences") {
    ConvTranspose2d layer(4, 3);
    Rng rng(13);
    layer.init(rng);
    Tensor x = random_tensor({2, 4, 4, 4}, 23);
    std::any tape;
    Tensor y = layer.forward(x, &tape);
    CHECK(y.shape() == std::vector<int>{2, 8, 8, 3});
    check_layer(layer, x, 3);
}

TEST_CASE("conv and transposed conv are exact adjoints") {
    // <conv(x), y> == <x, deconv(y)> when they share the weight matrix
    Conv2d conv(2, 3);
    ConvTranspose2d deconv(3, 2);
    Rng rng(14);
    conv.init(rng);
    std::vector<ParamRef> pc, pd;
    conv.collect_params("c", pc);
    deconv.collect_params("d", pd);
    *pd[0].value = *pc[0].value;  // both are (3, k*k*2) in their own layouts
    pd[1].value->set_zero();
    pc[1].value->set_zero();

    Tensor x = random_tensor({1, 8, 8, 2}, 24);
    Tensor y = random_tensor({1, 4, 4, 3}, 25);
    Tensor cx = conv.forward(x, nullptr);
    Tensor dy = deconv.forward(y, nullptr);
    Real lhs = 0.0, rhs = 0.0;
    for (int64_t i = 0; i < cx.numel(); ++i) lhs += cx[i] * y[i];
    for (int64_t i = 0; i < x.numel(); ++i) rhs += x[i] * dy[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("relu and tanh gradients match finite differences") {
    Relu relu;
    Tanh tanh_layer;
    // keep inputs away from the relu kink
    Tensor x = random_tensor({4, 9}, 26, 0.2, 1.5);
    for (int64_t i = 0; i < x.numel(); ++i)
        if (i % 2) x[i] = -x[i];
    check_layer(relu, x, 4);
    check_layer(tanh_layer, x, 5);
}

TEST_CASE("batch norm normalizes and matches finite differences") {
    BatchNorm2d bn(3);
    Rng rng(15);
    bn.init(rng);
    Tensor x = random_tensor({4, 4, 4, 3}, 27, -2.0, 2.0);
    std::any tape;
    Tensor y = bn.forward(x, &tape);
    // per-channel batch statistics of the output: mean 0, variance ~1
    for (int c = 0; c < 3; ++c) {
        Real mean = 0.0, var = 0.0;
        const int64_t n = y.numel() / 3;
        for (int64_t i = c; i < y.numel(); i += 3) mean += y[i];
        mean /= static_cast<Real>(n);
        for (int64_t i = c; i < y.numel(); i += 3) var += (y[i] - mean) * (y[i] - mean);
        var /= static_cast<Real>(n);
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
    check_layer(bn, x, 6, 1e-5);
}

TEST_CASE("batch norm inference uses running statistics and is write-free") {
    BatchNorm2d bn(2);
    Rng rng(16);
    bn.init(rng);
    // train a few batches to move the running stats
    for (int it = 0; it < 20; ++it) {
        std::any tape;
        bn.forward(random_tensor({8, 2, 2, 2}, 100 + static_cast<uint64_t>(it), -1.0, 3.0),
                   &tape);
    }
    std::vector<StateRef> state;
    bn.collect_state("bn", state);
    const Tensor rm = *state[0].value, rv = *state[1].value;
    Tensor x = random_tensor({4, 2, 2, 2}, 28);
    Tensor y1 = bn.forward(x, nullptr);
    Tensor y2 = bn.forward(x, nullptr);
    CHECK(caae::test::tensors_equal(y1, y2));
    CHECK(caae::test::tensors_equal(rm, *state[0].value));  // inference left stats alone
    CHECK(caae::test::tensors_equal(rv, *state[1].value));
}

TEST_CASE("sequential backward reverses layer order") {
    Sequential seq;
    seq.add(std::make_unique<Dense>(6, 10), "fc1");
    seq.add(std::make_unique<Relu>(), "relu");
    seq.add(std::make_unique<Dense>(10, 2), "fc2");
    Rng rng(17);
    seq.init(rng);
    Tensor x = random_tensor({3, 6}, 29);
    std::vector<std::any> tape;
    Tensor y = seq.forward(x, &tape);
    CHECK(y.shape() == std::vector<int>{3, 2});
    Tensor dx = seq.backward(Tensor::full({3, 2}, 1.0), tape);
    CHECK(dx.shape() == x.shape());
    std::vector<ParamRef> params;
    seq.collect_params("s", params);
    CHECK(params.size() == 4);
    CHECK(params[0].name == "s.fc1.w");
}

TEST_CASE("label map concatenation tiles constants and drops their gradient") {
    Tensor fm = random_tensor({2, 4, 4, 3}, 30);
    Tensor labels = caae::test::label_rows({2, 7});
    Tensor cat = concat_label_maps(fm, labels);
    CHECK(cat.shape() == std::vector<int>{2, 4, 4, 13});
    CHECK(cat.at(0, 1, 2, 3 + 2) == labels.at(0, 2));
    CHECK(cat.at(1, 3, 0, 3 + 7) == labels.at(1, 7));
    Tensor back = drop_label_maps(cat, 3);
    CHECK(caae::test::tensors_equal(back, fm));
}
