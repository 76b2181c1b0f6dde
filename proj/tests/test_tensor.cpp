#include <doctest.h>

#include "support/checks.hpp"
#include "zsscl/ops.hpp"
#include "zsscl/tape.hpp"

using namespace zsscl;
using zsscl::testing::max_grad_error;
using zsscl::testing::random_tensor;
using Var = Tape<double>::Var;

TEST_CASE("conv2d output shape follows the stride arithmetic") {
    Tensor<float> x{Shape{1, 64, 64}};
    Tensor<float> w{Shape{8, 1, 4, 4}};
    Tensor<float> b{Shape{8}};
    auto y = conv2d(x, w, b, 2, 1);
    CHECK(y.shape() == Shape{8, 32, 32});
}

TEST_CASE("conv2d with zero weights broadcasts the bias") {
    SplitRng rng(1);
    Tensor<float> x = zsscl::testing::random_tensor_f(Shape{3, 8, 8}, rng);
    Tensor<float> w{Shape{2, 3, 4, 4}};
    Tensor<float> b{Shape{2}, 3.0f};
    auto y = conv2d(x, w, b, 2, 1);
    for (std::int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == 3.0f);
}

TEST_CASE("conv2d rejects channel mismatch") {
    Tensor<float> x{Shape{3, 8, 8}};
    Tensor<float> w{Shape{2, 4, 4, 4}};
    Tensor<float> b{Shape{2}};
    CHECK_THROWS_AS(conv2d(x, w, b, 2, 1), DimensionError);
}

TEST_CASE("conv2d rejects inputs smaller than the kernel") {
    Tensor<float> x{Shape{1, 1, 1}};
    Tensor<float> w{Shape{2, 1, 4, 4}};
    Tensor<float> b{Shape{2}};
    CHECK_THROWS_AS(conv2d(x, w, b, 2, 1), DimensionError);
}

TEST_CASE("conv2d gradients match finite differences") {
    SplitRng rng(7);
    auto x = random_tensor(Shape{2, 6, 6}, rng);
    auto w = random_tensor(Shape{3, 2, 4, 4}, rng);
    auto b = random_tensor(Shape{3}, rng);
    auto target = random_tensor(Shape{3, 3, 3}, rng);
    double err = max_grad_error({x, w, b}, [&](Tape<double>& t, const std::vector<Var>& v) {
        return t.sq_norm_diff(t.conv2d(v[0], v[1], v[2], 2, 1), t.leaf(target));
    });
    CHECK(err < 1e-4);
}

TEST_CASE("conv2d is linear in its input for zero bias") {
    SplitRng rng(11);
    auto x = random_tensor(Shape{2, 8, 8}, rng);
    auto y = random_tensor(Shape{2, 8, 8}, rng);
    auto w = random_tensor(Shape{4, 2, 4, 4}, rng);
    Tensor<double> zb{Shape{4}};
    const double alpha = 0.7, beta = -1.3;
    Tensor<double> mix{Shape{2, 8, 8}};
    for (std::int64_t i = 0; i < mix.size(); ++i) mix[i] = alpha * x[i] + beta * y[i];
    auto lhs = conv2d(mix, w, zb, 2, 1);
    auto cx = conv2d(x, w, zb, 2, 1);
    auto cy = conv2d(y, w, zb, 2, 1);
    for (std::int64_t i = 0; i < lhs.size(); ++i)
        CHECK(zsscl::testing::rel_diff(lhs[i], alpha * cx[i] + beta * cy[i], 1e-9) < 1e-6);
}

TEST_CASE("conv2d forward is deterministic") {
    SplitRng rng(3);
    auto x = random_tensor(Shape{2, 8, 8}, rng);
    auto w = random_tensor(Shape{4, 2, 4, 4}, rng);
    auto b = random_tensor(Shape{4}, rng);
    auto y1 = conv2d(x, w, b, 2, 1);
    auto y2 = conv2d(x, w, b, 2, 1);
    for (std::int64_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("conv2d_transpose output shape doubles the extents") {
    Tensor<float> x{Shape{64, 4, 4}};
    Tensor<float> w{Shape{64, 32, 4, 4}};
    Tensor<float> b{Shape{32}};
    auto y = conv2d_transpose(x, w, b, 2, 1);
    CHECK(y.shape() == Shape{32, 8, 8});
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
    SplitRng rng(13);
    auto x = random_tensor(Shape{3, 8, 10}, rng);
    auto w = random_tensor(Shape{5, 3, 4, 4}, rng);
    Tensor<double> zb_out{Shape{5}};
    Tensor<double> zb_in{Shape{3}};
    auto cx = conv2d(x, w, zb_out, 2, 1);
    auto y = random_tensor(cx.shape(), rng);
    auto ty = conv2d_transpose(y, w, zb_in, 2, 1);
    REQUIRE(ty.shape() == x.shape());
    double lhs = 0.0, rhs = 0.0;
    for (std::int64_t i = 0; i < cx.size(); ++i) lhs += cx[i] * y[i];
    for (std::int64_t i = 0; i < x.size(); ++i) rhs += x[i] * ty[i];
    CHECK(zsscl::testing::rel_diff(lhs, rhs) < 1e-6);
}

TEST_CASE("conv2d_transpose gradients match finite differences") {
    SplitRng rng(17);
    auto x = random_tensor(Shape{3, 4, 5}, rng);
    auto w = random_tensor(Shape{3, 2, 4, 4}, rng);
    auto b = random_tensor(Shape{2}, rng);
    auto target = random_tensor(Shape{2, 8, 10}, rng);
    double err = max_grad_error({x, w, b}, [&](Tape<double>& t, const std::vector<Var>& v) {
        return t.sq_norm_diff(t.conv2d_transpose(v[0], v[1], v[2], 2, 1), t.leaf(target));
    });
    CHECK(err < 1e-4);
}

TEST_CASE("channel_linear with identity weight is the identity") {
    SplitRng rng(19);
    auto x = random_tensor(Shape{4, 5, 6}, rng);
    Tensor<double> w{Shape{4, 4}};
    for (int i = 0; i < 4; ++i) w[i * 4 + i] = 1.0;
    Tensor<double> b{Shape{4}};
    auto y = channel_linear(x, w, b);
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("channel_linear gradients match finite differences") {
    SplitRng rng(23);
    auto x = random_tensor(Shape{3, 4, 4}, rng);
    auto w = random_tensor(Shape{5, 3}, rng);
    auto b = random_tensor(Shape{5}, rng);
    auto target = random_tensor(Shape{5, 4, 4}, rng);
    double err = max_grad_error({x, w, b}, [&](Tape<double>& t, const std::vector<Var>& v) {
        return t.sq_norm_diff(t.channel_linear(v[0], v[1], v[2]), t.leaf(target));
    });
    CHECK(err < 1e-4);
}

TEST_CASE("leaky_rect slope one is the identity") {
    SplitRng rng(29);
    auto x = random_tensor(Shape{3, 4, 4}, rng);
    auto y = leaky_rect(x, 1.0);
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("leaky_rect scales negative values by the slope") {
    Tensor<double> x{Shape{1, 1, 1}};
    x[0] = -2.0;
    auto y = leaky_rect(x, 0.2);
    CHECK(y[0] == doctest::Approx(-0.4));
    CHECK_THROWS_AS(leaky_rect(x, 1.5), UsageError);
    CHECK_THROWS_AS(leaky_rect(x, -0.1), UsageError);
}

TEST_CASE("leaky_rect gradient matches finite differences away from zero") {
    SplitRng rng(31);
    Tensor<double> x{Shape{2, 3, 3}};
    for (std::int64_t i = 0; i < x.size(); ++i) {
        double v = rng.uniform(0.2, 1.0);
        x[i] = rng.uniform() < 0.5 ? -v : v;  // keep away from the kink
    }
    auto target = random_tensor(Shape{2, 3, 3}, rng);
    double err = max_grad_error({x},
                                [&](Tape<double>& t, const std::vector<Var>& v) {
                                    return t.sq_norm_diff(t.leaky_rect(v[0], 0.2), t.leaf(target));
                                },
                                1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("sq_norm_diff basics") {
    SplitRng rng(37);
    auto a = random_tensor(Shape{3, 5, 5}, rng);
    CHECK(sq_norm_diff(a, a) == 0.0);

    Tensor<double> u{Shape{2}};
    u[0] = 1.0;
    u[1] = 2.0;
    Tensor<double> z{Shape{2}};
    CHECK(sq_norm_diff(u, z) == doctest::Approx(5.0));

    Tensor<double> wrong{Shape{3}};
    CHECK_THROWS_AS(sq_norm_diff(u, wrong), DimensionError);
}

TEST_CASE("sq_norm_diff gradient is 2(a-b)") {
    SplitRng rng(41);
    auto a = random_tensor(Shape{2, 3, 4}, rng);
    auto b = random_tensor(Shape{2, 3, 4}, rng);

    Tape<double> tape;
    auto va = tape.leaf(a);
    auto vb = tape.leaf(b);
    tape.backward(tape.sq_norm_diff(va, vb));
    for (std::int64_t i = 0; i < a.size(); ++i) {
        CHECK(tape.grad(va)[i] == doctest::Approx(2.0 * (a[i] - b[i])));
        CHECK(tape.grad(vb)[i] == doctest::Approx(-2.0 * (a[i] - b[i])));
    }

    double err = max_grad_error({a, b}, [&](Tape<double>& t, const std::vector<Var>& v) {
        return t.sq_norm_diff(v[0], v[1]);
    });
    CHECK(err < 1e-4);
}

TEST_CASE("backward on theta squared gives 2*theta") {
    Tape<double> tape;
    Tensor<double> theta{Shape{1}};
    theta[0] = 3.0;
    auto v = tape.leaf(theta);
    auto loss = tape.sq_norm_diff(v, tape.leaf(Tensor<double>{Shape{1}}));
    tape.backward(loss);
    CHECK(tape.grad(v)[0] == doctest::Approx(6.0));
}

TEST_CASE("backward requires a scalar loss") {
    Tape<double> tape;
    auto v = tape.leaf(Tensor<double>{Shape{2, 2, 2}, 1.0});
    CHECK_THROWS_AS(tape.backward(v), UsageError);
}

TEST_CASE("consecutive backward passes produce identical gradients") {
    SplitRng rng(43);
    auto x = random_tensor(Shape{2, 4, 4}, rng);
    auto w = random_tensor(Shape{3, 2, 4, 4}, rng);
    auto b = random_tensor(Shape{3}, rng);

    Tape<double> tape;
    auto vx = tape.leaf(x), vw = tape.leaf(w), vb = tape.leaf(b);
    auto loss = tape.sq_norm_diff(tape.conv2d(vx, vw, vb, 2, 1),
                                  tape.leaf(Tensor<double>{Shape{3, 2, 2}}));
    tape.backward(loss);
    Tensor<double> g1 = tape.grad(vw);
    tape.zero_grad();
    tape.backward(loss);
    for (std::int64_t i = 0; i < g1.size(); ++i) CHECK(tape.grad(vw)[i] == g1[i]);
}

TEST_CASE("unreachable leaves keep zero gradients") {
    Tape<double> tape;
    auto used = tape.leaf(Tensor<double>{Shape{2}, 1.0});
    auto unused = tape.leaf(Tensor<double>{Shape{2}, 5.0});
    tape.backward(tape.sq_norm_diff(used, tape.leaf(Tensor<double>{Shape{2}})));
    CHECK(tape.grad(unused)[0] == 0.0);
    CHECK(tape.grad(unused)[1] == 0.0);
}

TEST_CASE("mask_columns zeroes dropped columns and routes gradients") {
    SplitRng rng(47);
    auto x = random_tensor(Shape{1, 4, 6}, rng);
    std::vector<std::uint8_t> keep{1, 0, 1, 1, 0, 1};
    auto y = mask_columns(x, keep);
    for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 6; ++w)
            CHECK(y.at3(0, h, w) == (keep[static_cast<std::size_t>(w)] ? x.at3(0, h, w) : 0.0));

    auto target = random_tensor(Shape{1, 4, 6}, rng);
    double err = max_grad_error({x}, [&](Tape<double>& t, const std::vector<Var>& v) {
        return t.sq_norm_diff(t.mask_columns(v[0], keep), t.leaf(target));
    });
    CHECK(err < 1e-4);
}

TEST_CASE("weighted_sum combines scalars and propagates weights") {
    SplitRng rng(53);
    auto a = random_tensor(Shape{2, 3, 3}, rng);
    auto b = random_tensor(Shape{2, 3, 3}, rng);
    double err = max_grad_error({a, b}, [&](Tape<double>& t, const std::vector<Var>& v) {
        auto z = t.leaf(Tensor<double>{Shape{2, 3, 3}});
        auto t1 = t.sq_norm_diff(v[0], z);
        auto t2 = t.sq_norm_diff(v[0], v[1]);
        return t.weighted_sum({{t1, 0.5}, {t2, 2.0}});
    });
    CHECK(err < 1e-4);
}
