#include <doctest.h>

#include <cmath>
#include <set>

#include "caae/networks.hpp"
#include "test_util.hpp"

using namespace caae;
using caae::test::label_rows;
using caae::test::random_tensor;
using caae::test::tensors_equal;
using caae::test::tiny_net;

TEST_CASE("network config invariants are all reported") {
    NetworkConfig bad;
    bad.image_size = 50;  // not 2^k * s
    bad.latent_dim = 1;
    bad.base_filters = 4;
    auto errs = bad.validation_errors();
    CHECK(errs.size() == 3);
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    NetworkConfig ok = tiny_net();
    CHECK(ok.validation_errors().empty());
    NetworkConfig paper;
    paper.image_size = 128;
    paper.num_scales = 4;
    CHECK(paper.validation_errors().empty());
}

TEST_CASE("encoder output shape, range and determinism") {
    Model m = init_params(tiny_net(8), 1);
    Tensor x = random_tensor({4, 16, 16, 3}, 2);
    Tensor z1 = encode(m, x);
    CHECK(z1.shape() == std::vector<int>{4, 8});
    for (int64_t i = 0; i < z1.numel(); ++i) {
        CHECK(z1[i] > -1.0);
        CHECK(z1[i] < 1.0);
    }
    Tensor z2 = encode(m, x);
    CHECK(tensors_equal(z1, z2));

    // all-zero input through fresh parameters: finite, never exactly +-1
    Tensor zeros({2, 16, 16, 3});
    Tensor z0 = encode(m, zeros);
    CHECK(z0.all_finite());
    for (int64_t i = 0; i < z0.numel(); ++i) CHECK(std::fabs(z0[i]) < 1.0);

    CHECK_THROWS_AS(encode(m, Tensor({2, 8, 8, 3})), ValidationError);
}

TEST_CASE("generator output shape, range and label sensitivity") {
    Model m = init_params(tiny_net(8), 3);
    Tensor z = random_tensor({4, 8}, 4, -0.99, 0.99);
    Tensor l = label_rows({0, 3, 7, 9});
    Tensor y1 = generate(m, z, l);
    CHECK(y1.shape() == std::vector<int>{4, 16, 16, 3});
    for (int64_t i = 0; i < y1.numel(); ++i) {
        CHECK(y1[i] > -1.0);
        CHECK(y1[i] < 1.0);
    }
    CHECK(tensors_equal(y1, generate(m, z, l)));

    // same z, different label: outputs differ at random initialization
    Tensor l2 = label_rows({9, 0, 3, 7});
    CHECK_FALSE(tensors_equal(y1, generate(m, z, l2)));

    CHECK_THROWS_AS(generate(m, z, label_rows({1, 2})), ValidationError);
}

TEST_CASE("latent discriminator probabilities, logits and row independence") {
    Model m = init_params(tiny_net(8), 5);
    Tensor z = random_tensor({8, 8}, 6, -1.0, 1.0);
    DiscriminatorOutput out = discriminate_z(m, z);
    CHECK(out.prob.shape() == std::vector<int>{8});
    CHECK(out.logits.shape() == std::vector<int>{8});
    for (int i = 0; i < 8; ++i) {
        CHECK(out.prob[i] > 0.0);
        CHECK(out.prob[i] < 1.0);
        CHECK(std::isfinite(out.logits[i]));
    }
    CHECK(sigmoid(0.0) == doctest::Approx(0.5).epsilon(1e-15));

    // duplicated rows give duplicated outputs (no cross-sample coupling)
    Tensor dup({2, 8});
    for (int j = 0; j < 8; ++j) dup.at(0, j) = dup.at(1, j) = z.at(3, j);
    DiscriminatorOutput out_dup = discriminate_z(m, dup);
    CHECK(out_dup.logits[0] == out_dup.logits[1]);
}

TEST_CASE("image discriminator label injection widens stage one by ten channels") {
    NetworkConfig net = tiny_net(8);
    Model m = init_params(net, 7);
    Tensor x = random_tensor({4, 16, 16, 3}, 8);
    Tensor l = label_rows({0, 1, 2, 3});
    DiscriminatorOutput out = discriminate_img(m, x, l);
    CHECK(out.prob.shape() == std::vector<int>{4});
    for (int i = 0; i < 4; ++i) {
        CHECK(out.prob[i] > 0.0);
        CHECK(out.prob[i] < 1.0);
    }
    // stated injection rule, checked structurally on the concat helper
    Tensor fm({4, 8, 8, net.base_filters});
    Tensor cat = concat_label_maps(fm, l);
    CHECK(cat.dim(3) == net.base_filters + 10);

    // same image, different labels -> different logits at random init
    Tensor l2 = label_rows({9, 8, 7, 6});
    DiscriminatorOutput out2 = discriminate_img(m, x, l2);
    bool any_diff = false;
    for (int i = 0; i < 4; ++i) any_diff |= out.logits[i] != out2.logits[i];
    CHECK(any_diff);
}

TEST_CASE("permuting batch rows permutes encoder and generator outputs identically") {
    Model m = init_params(tiny_net(4), 9);
    Tensor x = random_tensor({3, 16, 16, 3}, 10);
    Tensor perm({3, 16, 16, 3});
    const int order[3] = {2, 0, 1};
    const int64_t per = 16 * 16 * 3;
    for (int i = 0; i < 3; ++i)
        std::copy(x.data() + order[i] * per, x.data() + (order[i] + 1) * per,
                  perm.data() + i * per);
    Tensor z = encode(m, x), zp = encode(m, perm);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) CHECK(zp.at(i, j) == z.at(order[i], j));
}

TEST_CASE("initialization is seed-deterministic with fan-in-bounded weights") {
    NetworkConfig net = tiny_net(8);
    Model a = init_params(net, 42), b = init_params(net, 42), c = init_params(net, 43);
    auto pa = a.all_params(), pb = b.all_params(), pc = c.all_params();
    REQUIRE(pa.size() == pb.size());
    bool all_equal_ab = true, any_diff_ac = false;
    Real max_abs = 0.0;
    for (size_t i = 0; i < pa.size(); ++i) {
        all_equal_ab &= tensors_equal(*pa[i].value, *pb[i].value);
        any_diff_ac |= !tensors_equal(*pa[i].value, *pc[i].value);
        CHECK(pa[i].value->all_finite());
        if (pa[i].name.ends_with(".w"))
            max_abs = std::max(max_abs, std::max(std::fabs(pa[i].value->min()),
                                                 std::fabs(pa[i].value->max())));
        if (pa[i].name.ends_with(".b")) {
            CHECK(pa[i].value->min() == 0.0);
            CHECK(pa[i].value->max() == 0.0);
        }
    }
    CHECK(all_equal_ab);
    CHECK(any_diff_ac);
    CHECK(max_abs < 1.0);

    // parameter names are unique within the model
    std::set<std::string> names;
    for (const auto& p : pa) names.insert(p.name);
    CHECK(names.size() == pa.size());
}

TEST_CASE("batch norm placement: only Dimg couples samples, and only when enabled") {
    NetworkConfig net = tiny_net(4);
    net.use_batchnorm_dimg = true;
    Model m = init_params(net, 11);
    // training-mode forward couples rows through batch statistics
    Tensor x = random_tensor({4, 16, 16, 3}, 12);
    Tensor l = label_rows({0, 1, 2, 3});
    DiscriminatorImg::Tape tape;
    Tensor logits_a = m.dimg().forward(x, l, &tape);
    Tensor x2 = x;
    const int64_t per = 16 * 16 * 3;
    for (int64_t i = 0; i < per; ++i) x2[i] = -x2[i];  // perturb row 0 only
    DiscriminatorImg::Tape tape2;
    Tensor logits_b = m.dimg().forward(x2, l, &tape2);
    CHECK(logits_a.at(1, 0) != logits_b.at(1, 0));

    NetworkConfig net_nobn = net;
    net_nobn.use_batchnorm_dimg = false;
    Model m2 = init_params(net_nobn, 11);
    DiscriminatorImg::Tape t3, t4;
    Tensor la = m2.dimg().forward(x, l, &t3);
    Tensor lb = m2.dimg().forward(x2, l, &t4);
    CHECK(la.at(1, 0) == lb.at(1, 0));
}
