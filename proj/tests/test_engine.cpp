#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "gnom/params.hpp"
#include "gnom/tensor.hpp"

using namespace gnom;
using namespace gnom::engine;

namespace {

Tensor random_param(int r, int c, Rng& rng, double scale = 0.5) {
    Tensor t = Tensor::zeros(r, c, true);
    for (auto& v : t.values()) v = rng.uniform(-scale, scale);
    return t;
}

}  // namespace

TEST_CASE("softmax of a constant row is uniform") {
    Tensor x = Tensor::row({0.0, 0.0, 0.0});
    Tensor y = softmax_rows(x);
    for (double v : y.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and stay positive") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = random_param(4, 7, rng, 8.0);
        Tensor y = softmax_rows(x);
        for (int i = 0; i < 4; ++i) {
            double s = 0.0;
            for (int j = 0; j < 7; ++j) {
                double v = y.at(i, j);
                CHECK(v > 0.0);
                s += v;
            }
            CHECK(std::fabs(s - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("masked softmax zeroes dropped positions exactly; empty mask gives zeros") {
    Tensor x = Tensor::row({5.0, -2.0, 3.0, 100.0});
    std::vector<uint8_t> keep{1, 0, 1, 0};
    Tensor y = masked_softmax_rows(x, keep);
    CHECK(y.values()[1] == 0.0);
    CHECK(y.values()[3] == 0.0);
    CHECK(y.values()[0] + y.values()[2] == doctest::Approx(1.0).epsilon(1e-12));

    Tensor z = masked_softmax_rows(x, {0, 0, 0, 0});
    for (double v : z.values()) CHECK(v == 0.0);
}

TEST_CASE("matmul with identity returns the input") {
    Tensor id = Tensor::from({1, 0, 0, 1}, {2, 2});
    Tensor x = Tensor::from({3, 4, 5, 6}, {2, 2});
    Tensor y = matmul(id, x);
    CHECK(y.values() == x.values());
}

TEST_CASE("concat_cols shape arithmetic") {
    Tensor a = Tensor::zeros(3, 4);
    Tensor b = Tensor::zeros(3, 6);
    Tensor c = concat_cols({a, b});
    CHECK(c.rows() == 3);
    CHECK(c.cols() == 10);
}

TEST_CASE("shape mismatch names the op") {
    Tensor a = Tensor::zeros(2, 3);
    Tensor b = Tensor::zeros(2, 3);
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("matmul"), Error);
}

TEST_CASE("non-finite values are rejected") {
    Tensor x = Tensor::row({1e308, 1e308});
    CHECK_THROWS_AS(mul(x, x), Error);  // overflows to inf
}

TEST_CASE("backward on linear and quadratic losses") {
    Tensor w = Tensor::from({1, 2, 3, 4}, {2, 2}, true);
    SUBCASE("sum(W) gives all-ones gradient") {
        backward(reduce_sum(w));
        for (double g : w.grads()) CHECK(g == 1.0);
    }
    SUBCASE("sum(W*W) gives 2W") {
        backward(reduce_sum(mul(w, w)));
        for (size_t i = 0; i < w.size(); ++i) CHECK(w.grads()[i] == doctest::Approx(2.0 * w.values()[i]));
    }
    SUBCASE("backward requires a scalar") { CHECK_THROWS_AS(backward(w), Error); }
}

TEST_CASE("finite differences: linear function is near-exact") {
    Tensor w = Tensor::from({0.3, -0.2, 0.9}, {1, 3}, true);
    Tensor coef = Tensor::from({2.0, -1.0, 0.5}, {1, 3});
    auto f = [&]() {
        Tensor loss = reduce_sum(mul(w, coef));
        backward(loss);
        return loss.item();
    };
    CHECK(finite_difference_check(f, {w}) < 1e-10);
}

TEST_CASE("finite differences: softmax cross-entropy head") {
    Rng rng(17);
    Tensor w = random_param(4, 6, rng);
    Tensor x = Tensor::from({0.2, -0.4, 0.6, 0.1}, {1, 4});
    auto f = [&]() {
        Tensor logits = matmul(x, w);
        Tensor loss = softmax_cross_entropy(logits, 2);
        backward(loss);
        return loss.item();
    };
    CHECK(finite_difference_check(f, {w}) < 1e-6);
}

TEST_CASE("finite differences across the op set") {
    Rng rng(23);
    Tensor w2 = random_param(5, 3, rng);
    Tensor gain = Tensor::from({1.0, 0.9, 1.1, 1.2, 0.8}, {1, 5}, true);
    Tensor bias = random_param(1, 5, rng);
    Tensor table = random_param(6, 3, rng);
    std::vector<uint8_t> keep{1, 1, 0, 1};

    auto f = [&]() {
        Tensor x = rows(table, {0, 4, 2, 5});                  // [4,3]
        Tensor a = matmul_nt(x, w2);                           // [4,5]
        Tensor b = layer_norm(a, gain, bias);                  // [4,5]
        Tensor c = gelu(b);
        Tensor d = sigmoid(slice_cols(c, 0, 2));
        Tensor e = mul(d, d);
        Tensor s = masked_softmax_rows(matmul_nt(c, c), keep);  // [4,4]
        Tensor fz = scale_rows(c, slice_rows(s, 0, 1));
        Tensor loss = add(reduce_mean(e), reduce_sum(fz));
        Tensor total = reduce_sum(concat_cols({loss, reduce_mean(c)}));
        backward(total);
        return total.item();
    };
    CHECK(finite_difference_check(f, {w2, gain, bias, table}) < 1e-6);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    ParamStore ps;
    Tensor w = ps.create("w", 2, 2);
    w.values() = {1, 2, 3, 4};
    auto before = w.values();
    ps.adam_step({});
    CHECK(w.values() == before);
}

TEST_CASE("adam: first bias-corrected step moves by about lr") {
    ParamStore ps;
    Tensor w = ps.create("w", 1, 1);
    w.values()[0] = 0.0;
    w.grads()[0] = 1.0;
    AdamConfig cfg;
    cfg.lr = 0.1;
    ps.adam_step(cfg);
    // m-hat = 1, v-hat = 1 at t=1, so the step is lr/(1+eps)
    CHECK(w.values()[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(w.grads()[0] == 0.0);  // grads zeroed after the step
}

TEST_CASE("adam runs are bit-identical") {
    auto run = [] {
        ParamStore ps;
        Tensor w = ps.create("w", 4, 4);
        Rng rng(5);
        for (auto& v : w.values()) v = rng.normal();
        AdamConfig cfg;
        cfg.lr = 0.01;
        for (int step = 0; step < 10; ++step) {
            Tensor loss = reduce_sum(mul(w, w));
            backward(loss);
            ps.adam_step(cfg);
        }
        return w.values();
    };
    CHECK(run() == run());
}

TEST_CASE("checkpoint round-trips values and optimizer state bit for bit") {
    ParamStore ps;
    Rng rng(31);
    Tensor a = ps.create("layer.w", 3, 5);
    Tensor b = ps.create("layer.b", 1, 5);
    for (auto& v : a.values()) v = rng.normal();
    for (auto& v : b.values()) v = rng.normal();
    for (int step = 0; step < 3; ++step) {
        backward(reduce_sum(mul(a, a)));
        backward(reduce_sum(b));
        ps.adam_step({});
    }
    std::string path = "/tmp/gnom_test_ckpt.bin";
    ps.save(path, "cafef00dcafef00d");

    ParamStore loaded;
    std::string hash = loaded.load(path);
    CHECK(hash == "cafef00dcafef00d");
    CHECK(loaded.step_count() == ps.step_count());
    CHECK(loaded.names() == ps.names());
    CHECK(loaded.get("layer.w").values() == a.values());
    CHECK(loaded.get("layer.b").values() == b.values());

    // one more identical step on both stores stays in lockstep (same m/v state)
    auto advance = [](ParamStore& store) {
        Tensor w = store.get("layer.w");
        backward(reduce_sum(mul(w, w)));
        store.adam_step({});
        return w.values();
    };
    CHECK(advance(ps) == advance(loaded));
    std::remove(path.c_str());
}

TEST_CASE("rows op: negative ids give zero rows and no gradient flow") {
    Tensor table = Tensor::from({1, 2, 3, 4}, {2, 2}, true);
    Tensor picked = rows(table, {1, -1, 0});
    CHECK(picked.at(0, 0) == 3.0);
    CHECK(picked.at(1, 0) == 0.0);
    CHECK(picked.at(1, 1) == 0.0);
    backward(reduce_sum(picked));
    CHECK(table.grads() == std::vector<double>{1, 1, 1, 1});
}

TEST_CASE("dropout is identity at rate 0 and scales kept values") {
    Rng rng(9);
    Tensor x = Tensor::from({1, 2, 3, 4}, {2, 2}, true);
    Tensor same = dropout(x, 0.0, rng);
    CHECK(same.node() == x.node());
    Tensor dropped = dropout(x, 0.5, rng);
    for (size_t i = 0; i < dropped.size(); ++i) {
        double v = dropped.values()[i];
        CHECK((v == 0.0 || v == doctest::Approx(2.0 * x.values()[i])));
    }
}

TEST_CASE("NoGradScope suppresses graph recording") {
    Tensor w = Tensor::from({1, 2}, {1, 2}, true);
    NoGradScope ng;
    Tensor y = mul(w, w);
    CHECK_FALSE(y.requires_grad());
}
