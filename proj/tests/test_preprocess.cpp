#include <doctest.h>

#include <algorithm>
#include <set>

#include "oracles.hpp"
#include "scarq/preprocess.hpp"

using namespace scarq;

TEST_CASE("percentile matches the sort-based oracle") {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> v(1 + rng.below(200));
        for (auto& x : v) x = rng.normal();
        const double p = rng.uniform(0.0, 100.0);
        CHECK(percentile(v, p) == doctest::Approx(oracle::percentile(v, p)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(percentile(std::vector<double>{}, 50), DegenerateInputError);
}

TEST_CASE("percentile_normalize on 0..100") {
    Slice2D s(101, 1);
    for (int i = 0; i <= 100; ++i) s(i, 0) = i;
    const auto n = percentile_normalize(s);
    CHECK(n(50, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(n(100, 0) == 1.0);
    CHECK(n(0, 0) == 0.0);
    const auto u = percentile_normalize(s, {5, 95, false});
    CHECK(u(100, 0) == doctest::Approx(95.0 / 90.0).epsilon(1e-12));
    CHECK_THROWS_AS(percentile_normalize(Slice2D(4, 4, 2.0)), DegenerateInputError);
}

TEST_CASE("percentile_normalize bounds, rank order and affine invariance") {
    Rng rng(5);
    Slice2D s(20, 15);
    for (auto& v : s.data) v = rng.normal(3.0, 2.0);
    const auto n = percentile_normalize(s);
    const double lo = oracle::percentile(s.data, 5), hi = oracle::percentile(s.data, 95);
    Slice2D affine = s;
    for (auto& v : affine.data) v = 4.0 * v - 7.0;
    const auto na = percentile_normalize(affine);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(n.data[i] >= 0.0);
        CHECK(n.data[i] <= 1.0);
        CHECK(na.data[i] == doctest::Approx(n.data[i]).epsilon(1e-9));
        if (s.data[i] > lo && s.data[i] < hi) CHECK(n.data[i] == doctest::Approx((s.data[i] - lo) / (hi - lo)));
    }
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (s.data[i] < s.data[j]) CHECK(n.data[i] <= n.data[j]);
}

TEST_CASE("crop_or_pad") {
    Slice2D big(300, 300);
    for (int y = 0; y < 300; ++y)
        for (int x = 0; x < 300; ++x) big(x, y) = x + 1000 * y;
    const auto c = crop_or_pad(big);
    CHECK(c.width == 256);
    CHECK(c(0, 0) == big(22, 22));
    CHECK(c(255, 255) == big(277, 277));

    Slice2D small(200, 200, 1.0);
    const auto p = crop_or_pad(small);
    CHECK(p(27, 128) == 0.0);
    CHECK(p(28, 128) == 1.0);
    CHECK(p(227, 128) == 1.0);
    CHECK(p(228, 128) == 0.0);

    Slice2D same(256, 256, 2.0);
    CHECK(crop_or_pad(same) == same);

    Slice2D odd(201, 255);
    for (std::size_t i = 0; i < odd.size(); ++i) odd.data[i] = static_cast<double>(i);
    CHECK(crop_or_pad(crop_or_pad(odd), 201, 255) == odd);
    Slice2D odd_big(301, 257);
    for (std::size_t i = 0; i < odd_big.size(); ++i) odd_big.data[i] = static_cast<double>(i);
    const auto back = crop_or_pad(crop_or_pad(odd_big), 301, 257);
    const int ox = (301 - 256) / 2, oy = (257 - 256) / 2;
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x) REQUIRE(back(x + ox, y + oy) == odd_big(x + ox, y + oy));
}

TEST_CASE("resample") {
    Rng rng(9);
    Slice2D s(7, 5);
    for (auto& v : s.data) v = rng.uniform();
    CHECK(resample(s, 7, 5) == s);
    Slice2D flat(6, 6, 3.5);
    for (double v : resample(flat, 12, 12).data) CHECK(v == doctest::Approx(3.5));
    Image2D<std::uint8_t> labels(9, 9);
    for (auto& v : labels.data) v = static_cast<std::uint8_t>(rng.below(3)) * 2;
    std::set<int> in(labels.data.begin(), labels.data.end());
    for (auto v : resample_nearest(labels, 17, 4).data) CHECK(in.count(v) == 1);
    CHECK_THROWS(resample(s, 0, 3));
    // corner alignment
    Slice2D ramp(2, 1, std::vector<double>{0.0, 1.0});
    const auto r = resample(ramp, 5, 1);
    CHECK(r(2, 0) == doctest::Approx(0.5));
}

TEST_CASE("gaussian_blur preserves constants") {
    Slice2D flat(10, 8, 2.0);
    for (double v : gaussian_blur(flat, 1.5).data) CHECK(v == doctest::Approx(2.0));
    CHECK(gaussian_blur(flat, 0.0) == flat);
}

TEST_CASE("crop_at_centroid") {
    Mask2D m(128, 128);
    m(40, 40) = 1;
    Slice2D s(128, 128);
    for (std::size_t i = 0; i < s.size(); ++i) s.data[i] = static_cast<double>(i);
    const auto c = crop_at_centroid(s, m, 64);
    CHECK(c.offset == Offset{8, 8});
    CHECK(c.slice(0, 0) == s(8, 8));
    CHECK(c.slice(63, 63) == s(71, 71));

    const auto r = oracle::ring(128, 128, 64, 64, 10, 15);
    CHECK(crop_at_centroid(s, r, 64).offset == Offset{32, 32});

    CHECK_THROWS_AS(crop_at_centroid(s, Mask2D(128, 128), 64), DegenerateInputError);
}

TEST_CASE("crop_at_centroid near the border maps back") {
    Rng rng(21);
    for (int t = 0; t < 50; ++t) {
        Mask2D m(80, 70);
        const int px = static_cast<int>(rng.below(80)), py = static_cast<int>(rng.below(70));
        m(px, py) = 1;
        Slice2D s(80, 70);
        for (std::size_t i = 0; i < s.size(); ++i) s.data[i] = 1.0 + static_cast<double>(i);
        const auto c = crop_at_centroid(s, m, 64);
        const auto back = paste_window(c.slice, c.offset, 80, 70);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const int fx = x + c.offset.x, fy = y + c.offset.y;
                if (s.contains(fx, fy)) REQUIRE(back(fx, fy) == s(fx, fy));
                else REQUIRE(c.slice(x, y) == 0.0);
            }
    }
}

TEST_CASE("mask_for_scar") {
    Rng rng(4);
    Slice2D s(40, 40);
    for (auto& v : s.data) v = rng.uniform(0.0, 3.0);
    const auto myo = oracle::ring(40, 40, 20, 20, 8, 12);
    const auto cavity = oracle::ring(40, 40, 20, 20, -1, 8);
    const auto out = mask_for_scar(s, myo, cavity);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (cavity.data[i]) CHECK(out.data[i] == 2.5);
        else if (myo.data[i]) CHECK((out.data[i] >= 0.0 && out.data[i] <= 1.0));
        else CHECK(out.data[i] == 0.0);
    }
    CHECK_THROWS_AS(mask_for_scar(s, Mask2D(40, 40), cavity), DegenerateInputError);
}
