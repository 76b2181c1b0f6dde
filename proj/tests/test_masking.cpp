#include <doctest.h>

#include <cstdio>

#include "support/checks.hpp"
#include "zsscl/masking.hpp"
#include "zsscl/synthgen.hpp"

using namespace zsscl;

TEST_CASE("generate_mask drops exactly the rounded count") {
    auto m = generate_mask(100, 0.5, 42);
    CHECK(m.n() == 100);
    CHECK(m.missing_count() == 50);

    auto none = generate_mask(100, 0.0, 42);
    CHECK(none.missing_count() == 0);

    auto third = generate_mask(10, 0.3, 7);
    CHECK(third.missing_count() == 3);

    CHECK_THROWS_AS(generate_mask(100, 1.0, 1), UsageError);
    CHECK_THROWS_AS(generate_mask(100, -0.1, 1), UsageError);
    CHECK_THROWS_AS(generate_mask(0, 0.5, 1), UsageError);
}

TEST_CASE("generate_mask is deterministic per seed") {
    auto a = generate_mask(64, 0.5, 9);
    auto b = generate_mask(64, 0.5, 9);
    CHECK(a == b);
    auto c = generate_mask(64, 0.5, 10);
    CHECK(a.keep != c.keep);
}

TEST_CASE("detect_mask flags silent traces") {
    Gather g(16, 10, 0.004);
    for (int s = 0; s < 16; ++s)
        for (int t = 0; t < 10; ++t) g.at(s, t) = t == 3 || t == 7 ? 0.0f : 1.0f + s;
    auto m = detect_mask(g);
    for (int t = 0; t < 10; ++t) CHECK(m.keep[static_cast<std::size_t>(t)] == (t == 3 || t == 7 ? 0 : 1));

    Gather live(4, 4, 0.004);
    for (auto& v : live.data) v = 2.5f;
    auto all = detect_mask(live);
    CHECK(all.missing_count() == 0);

    Gather dead(4, 4, 0.004);
    CHECK_THROWS_AS(detect_mask(dead), UsageError);
}

TEST_CASE("apply_mask zeroes dropped columns and is idempotent") {
    SplitRng rng(3);
    auto x = zsscl::testing::random_tensor(Shape{1, 8, 12}, rng);
    auto m = generate_mask(12, 0.25, 4);

    auto ones = generate_mask(12, 0.0, 4);
    auto same = apply_mask(x, ones);
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(same[i] == x[i]);

    auto once = apply_mask(x, m);
    auto twice = apply_mask(once, m);
    for (std::int64_t i = 0; i < once.size(); ++i) CHECK(once[i] == twice[i]);

    TraceMask wrong;
    wrong.keep.assign(5, 1);
    CHECK_THROWS_AS(apply_mask(x, wrong), DimensionError);
}

TEST_CASE("masked data is a fixed point of its own mask") {
    SplitRng rng(5);
    auto m_full = zsscl::testing::random_tensor(Shape{1, 6, 20}, rng);
    auto R = generate_mask(20, 0.4, 11);
    auto d = apply_mask(m_full, R);
    auto again = apply_mask(d, R);
    for (std::int64_t i = 0; i < d.size(); ++i) CHECK(again[i] == d[i]);
}

TEST_CASE("resample_rprime matches the base fraction and redraws support") {
    auto base = generate_mask(100, 0.5, 21);
    SplitRng rng(100);
    RPrimePolicy policy;
    auto rp = resample_rprime(base, policy, rng);
    CHECK(rp.missing_count() == 50);
    CHECK(rp.keep != base.keep);  // same support has probability ~1/C(100,50)

    RPrimePolicy fixed;
    fixed.mode = RPrimePolicy::Mode::fixed_fraction;
    fixed.fraction = 0.3;
    auto rp3 = resample_rprime(generate_mask(10, 0.5, 2), fixed, rng);
    CHECK(rp3.missing_count() == 3);
}

TEST_CASE("rprime stream reproduces under one seed") {
    auto base = generate_mask(40, 0.5, 77);
    RPrimePolicy policy;
    SplitRng rng_a(123), rng_b(123);
    for (int i = 0; i < 5; ++i) {
        auto a = resample_rprime(base, policy, rng_a);
        auto b = resample_rprime(base, policy, rng_b);
        CHECK(a == b);
    }
}

TEST_CASE("rprime fraction is clamped for degenerate bases") {
    auto full = generate_mask(20, 0.0, 1);
    RPrimePolicy policy;
    SplitRng rng(9);
    auto rp = resample_rprime(full, policy, rng);
    CHECK(rp.missing_count() == 2);  // clamped to 0.1
}

TEST_CASE("masking algebra holds over randomized cases") {
    SplitRng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + static_cast<int>(rng.bounded(30));
        const int h = 1 + static_cast<int>(rng.bounded(6));
        // Draw the drop count directly so at least one trace stays live.
        const int drop = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n)));
        const double frac = static_cast<double>(drop) / n;

        // Strictly nonzero amplitudes so every trace is live.
        Tensor<float> x{Shape{1, h, n}};
        for (std::int64_t i = 0; i < x.size(); ++i) {
            const double mag = rng.uniform(0.5, 1.5);
            x[i] = static_cast<float>(rng.uniform() < 0.5 ? -mag : mag);
        }

        auto R = generate_mask(n, frac, trial);

        // Complementarity: x*R + x*(1-R) == x exactly.
        auto a = apply_mask(x, R);
        auto b = apply_mask(x, complement(R));
        for (std::int64_t i = 0; i < x.size(); ++i) {
            REQUIRE(a[i] + b[i] == x[i]);
            REQUIRE((a[i] == 0.0f || b[i] == 0.0f));
        }

        // Idempotence.
        auto aa = apply_mask(a, R);
        for (std::int64_t i = 0; i < x.size(); ++i) REQUIRE(aa[i] == a[i]);

        // Scalar multiplication commutes with masking.
        const float alpha = static_cast<float>(rng.uniform(-2.0, 2.0));
        Tensor<float> scaled{x.shape()};
        for (std::int64_t i = 0; i < x.size(); ++i) scaled[i] = alpha * x[i];
        auto mask_then_scale = apply_mask(scaled, R);
        for (std::int64_t i = 0; i < x.size(); ++i) REQUIRE(mask_then_scale[i] == alpha * a[i]);

        // detect o apply o generate recovers the generated mask.
        Gather g(h, n, 0.004);
        for (std::int64_t i = 0; i < x.size(); ++i) g.data[static_cast<std::size_t>(i)] = x[i];
        auto detected = detect_mask(apply_mask(g, R));
        REQUIRE(detected.keep == R.keep);
    }
}

TEST_CASE("mask file round trip keeps values and seed") {
    auto m = generate_mask(33, 0.3, 456);
    const std::string path = "mask_roundtrip_test.txt";
    write_mask(m, path);
    auto r = read_mask(path);
    std::remove(path.c_str());
    CHECK(r.keep == m.keep);
    REQUIRE(r.seed.has_value());
    CHECK(*r.seed == 456);
}

TEST_CASE("mask reader rejects junk lines") {
    const std::string path = "mask_bad_test.txt";
    {
        std::ofstream os(path);
        os << "1\n0\ntwo\n";
    }
    CHECK_THROWS_AS(read_mask(path), ParseError);
    std::remove(path.c_str());
}
