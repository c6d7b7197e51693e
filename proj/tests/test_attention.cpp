#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "bcp/attention.hpp"

#include "oracles.hpp"

#include <stdexcept>

using namespace bcp;

TEST_CASE("unit exponent reproduces the value channel") {
    auto rng = oracles::make_rng(701);
    RasterImage thermal = oracles::random_image(9, 7, 3, rng);
    RasterImage v = rgb_to_hsv_v(thermal);
    AttentionMap att = build_attention(thermal, 1.0);
    CHECK(att.gamma == 1.0);
    for (Eigen::Index i = 0; i < v.data().size(); ++i) CHECK(att.values[i] == v.data()[i]);
}

TEST_CASE("single-channel thermal input is taken as the value channel directly") {
    auto rng = oracles::make_rng(702);
    RasterImage thermal = oracles::random_image(6, 6, 1, rng);
    AttentionMap att = build_attention(thermal, 1.0);
    for (Eigen::Index i = 0; i < thermal.data().size(); ++i)
        CHECK(att.values[i] == thermal.data()[i]);
}

TEST_CASE("fractional and integer exponents follow the power law") {
    RasterImage quarter = RasterImage::constant(2, 2, 1, 0.25);
    CHECK(build_attention(quarter, 0.5).values[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(build_attention(quarter, 2.0).values[0] == doctest::Approx(0.0625).epsilon(1e-12));
}

TEST_CASE("zero stays zero under any exponent") {
    RasterImage black = RasterImage::constant(3, 3, 3, 0.0);
    for (double gamma : {0.25, 1.0, 2.0, 7.5}) {
        AttentionMap att = build_attention(black, gamma);
        for (Eigen::Index i = 0; i < att.values.size(); ++i) CHECK(att.values[i] == 0.0);
    }
}

TEST_CASE("non-positive exponents are rejected") {
    RasterImage img = RasterImage::constant(2, 2, 1, 0.5);
    CHECK_THROWS_AS(build_attention(img, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(build_attention(img, -1.0), std::invalid_argument);
}

TEST_CASE("larger exponents damp interior values and fix the endpoints") {
    auto rng = oracles::make_rng(703);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double v = uni(rng);
        Eigen::ArrayXd one(1);
        one[0] = v;
        RasterImage px(1, 1, 1, one);
        const double lo = build_attention(px, 1.5).values[0];
        const double hi = build_attention(px, 3.0).values[0];
        CHECK(lo >= 0.0);
        CHECK(lo <= 1.0);
        if (v > 0.0 && v < 1.0) CHECK(hi < lo);
    }
    for (double v : {0.0, 1.0}) {
        Eigen::ArrayXd d(1);
        d[0] = v;
        RasterImage px(1, 1, 1, d);
        CHECK(build_attention(px, 1.5).values[0] == build_attention(px, 3.0).values[0]);
    }
}

TEST_CASE("a pyramid level at the source size is unchanged") {
    auto rng = oracles::make_rng(704);
    RasterImage thermal = oracles::random_image(8, 6, 1, rng);
    AttentionMap att = build_attention(thermal, 2.0);
    auto levels = attention_pyramid(att, {{8, 6}});
    REQUIRE(levels.size() == 1);
    CHECK(levels[0].gamma == att.gamma);
    for (Eigen::Index i = 0; i < att.values.size(); ++i)
        CHECK(levels[0].values[i] == att.values[i]);
}

TEST_CASE("constant maps stay constant at every level") {
    AttentionMap att{8, 8, Eigen::ArrayXd::Constant(64, 0.3), 2.0};
    auto levels = attention_pyramid(att, {{4, 4}, {2, 2}, {3, 5}, {16, 16}});
    for (const auto& lvl : levels)
        for (Eigen::Index i = 0; i < lvl.values.size(); ++i)
            CHECK(lvl.values[i] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("exact halving averages each 2x2 block") {
    Eigen::ArrayXd v(16);
    for (int i = 0; i < 16; ++i) v[i] = i / 16.0;
    AttentionMap att{4, 4, v, 2.0};
    auto levels = attention_pyramid(att, {{2, 2}});
    REQUIRE(levels.size() == 1);
    const auto& half = levels[0];
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            const double mean = (v[(2 * r) * 4 + 2 * c] + v[(2 * r) * 4 + 2 * c + 1] +
                                 v[(2 * r + 1) * 4 + 2 * c] + v[(2 * r + 1) * 4 + 2 * c + 1]) /
                                4.0;
            CHECK(half.values[r * 2 + c] == doctest::Approx(mean).epsilon(1e-12));
        }
}

TEST_CASE("block means preserve the total attention mass") {
    auto rng = oracles::make_rng(705);
    RasterImage thermal = oracles::random_image(12, 8, 1, rng);
    AttentionMap att = build_attention(thermal, 2.0);
    auto levels = attention_pyramid(att, {{6, 4}, {3, 2}});
    CHECK(att.values.mean() == doctest::Approx(levels[0].values.mean()).epsilon(1e-12));
    CHECK(att.values.mean() == doctest::Approx(levels[1].values.mean()).epsilon(1e-12));
}

TEST_CASE("inexact ratios fall back to nearest-neighbor sampling") {
    Eigen::ArrayXd v(16);
    for (int i = 0; i < 16; ++i) v[i] = i / 16.0;
    AttentionMap att{4, 4, v, 1.0};
    auto levels = attention_pyramid(att, {{3, 3}});
    const auto& out = levels[0];
    // center-aligned nearest neighbor against the source grid
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            const int sr = std::min(3, static_cast<int>((r + 0.5) * 4.0 / 3.0));
            const int sc = std::min(3, static_cast<int>((c + 0.5) * 4.0 / 3.0));
            CHECK(out.values[r * 3 + c] == v[sr * 4 + sc]);
        }
}

TEST_CASE("requesting an empty level is rejected") {
    AttentionMap att{4, 4, Eigen::ArrayXd::Constant(16, 0.5), 1.0};
    CHECK_THROWS_AS(attention_pyramid(att, {{0, 2}}), std::invalid_argument);
}

TEST_CASE("attention values stay inside the unit interval") {
    auto rng = oracles::make_rng(706);
    for (double gamma : {0.1, 0.7, 1.0, 2.0, 11.0}) {
        RasterImage thermal = oracles::random_image(10, 10, 3, rng);
        AttentionMap att = build_attention(thermal, gamma);
        CHECK(att.values.minCoeff() >= 0.0);
        CHECK(att.values.maxCoeff() <= 1.0);
    }
}
