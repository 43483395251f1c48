#include <doctest.h>

#include "oracles.hpp"
#include "scarq/bbox.hpp"
#include "scarq/phantom.hpp"

using namespace scarq;

TEST_CASE("proposal box") {
    CHECK(proposal_box() == BoundingBox{128, 128, 134, 134});
    CHECK(proposal_box(300, 300) == BoundingBox{150, 150, 134, 134});
    CHECK(apply_transform(proposal_box(), {}) == proposal_box());
}

TEST_CASE("encode/apply") {
    const BoundingBox p{128, 128, 134, 134};
    CHECK(encode_transform(p, p) == BoxTransform{0, 0, 1, 1});
    const auto t = encode_transform(p, {120, 140, 100, 160});
    CHECK(t.dx == -8);
    CHECK(t.dy == 12);
    CHECK(t.sx == doctest::Approx(100.0 / 134.0).epsilon(1e-15));
    CHECK(t.sy == doctest::Approx(160.0 / 134.0).epsilon(1e-15));
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const BoundingBox a{rng.uniform(0, 256), rng.uniform(0, 256), rng.uniform(1, 200), rng.uniform(1, 200)};
        const BoundingBox b{rng.uniform(0, 256), rng.uniform(0, 256), rng.uniform(1, 200), rng.uniform(1, 200)};
        const auto r = apply_transform(a, encode_transform(a, b));
        REQUIRE(std::fabs(r.cx - b.cx) <= 1e-9);
        REQUIRE(std::fabs(r.cy - b.cy) <= 1e-9);
        REQUIRE(std::fabs(r.w - b.w) <= 1e-9);
        REQUIRE(std::fabs(r.h - b.h) <= 1e-9);
    }
}

TEST_CASE("gt box from labels") {
    std::vector<std::uint8_t> data(128 * 128, 0);
    for (int y = 40; y <= 80; ++y)
        for (int x = 50; x <= 90; ++x) data[y * 128 + x] = 2;
    LabelMap labels({128, 128, 1}, {1, 1, 1}, data);
    const auto box = gt_box_from_labels(labels, 0.0);
    const auto px = box.pixels();
    CHECK(px.x0 == 50);
    CHECK(px.x1 == 90);
    CHECK(px.y0 == 40);
    CHECK(px.y1 == 80);
    const auto grown = gt_box_from_labels(labels, 0.10);
    CHECK(grown.w == doctest::Approx(box.w * 1.2));
    CHECK(grown.h == doctest::Approx(box.h * 1.2));
    CHECK(grown.cx == doctest::Approx(box.cx));
    LabelMap empty({4, 4, 1}, {1, 1, 1}, std::vector<std::uint8_t>(16, 0));
    CHECK_THROWS_AS(gt_box_from_labels(empty), DegenerateInputError);
}

TEST_CASE("gt box contains every LV voxel of phantoms") {
    for (const auto& s : generate_population(6, 0.5, 17)) {
        const auto box = gt_box_from_labels(*s.labels);
        const auto& l = *s.labels;
        for (int z = 0; z < l.dims().nz; ++z)
            for (int y = 0; y < l.dims().ny; ++y)
                for (int x = 0; x < l.dims().nx; ++x)
                    if (l.at(x, y, z) != 0) REQUIRE(box.covers(x, y));
    }
}

TEST_CASE("reference slice") {
    CHECK(select_reference_slice(7) == 1);
    CHECK(select_reference_slice(2) == 1);
    CHECK(select_reference_slice(1) == 0);
}

TEST_CASE("heuristic regressor on phantoms") {
    CHECK(heuristic_regressor(Slice2D(256, 256, 0.0)) == BoxTransform{});

    PhantomSpec spec;
    spec.nx = spec.ny = 256;
    spec.cx = spec.cy = 127.5;
    const auto subject = generate_phantom(spec);
    const auto ref = subject.image.slice(1);
    const auto t = heuristic_regressor(ref);
    const auto box = apply_transform(proposal_box(), t);
    const auto lv = subject.labels->slice(1);
    std::size_t lv_px = 0, inside = 0;
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x)
            if (lv(x, y) != 0) {
                ++lv_px;
                inside += box.covers(x, y);
            }
    CHECK(static_cast<double>(inside) >= 0.99 * static_cast<double>(lv_px));

    // translation equivariance
    Slice2D shifted(256, 256, spec.intensities.background);
    for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x)
            if (ref.contains(x - 11, y + 6)) shifted(x, y) = ref(x - 11, y + 6);
    const auto ts = heuristic_regressor(shifted);
    CHECK(ts.dx == doctest::Approx(t.dx + 11));
    CHECK(ts.dy == doctest::Approx(t.dy - 6));
    CHECK(ts.sx == doctest::Approx(t.sx));
}

TEST_CASE("iou") {
    const BoundingBox a{10, 10, 10, 10};
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, {30, 30, 10, 10}) == 0.0);
    CHECK(iou(a, {15, 10, 10, 10}) == doctest::Approx(50.0 / 150.0));
}

TEST_CASE("external regressor csv") {
    const auto r = ExternalBoxRegressor::from_csv_text("subject_id,dx,dy,sx,sy\ns1,1,2,0.5,0.75\n");
    CHECK(r.predict("s1", Slice2D(), nullptr) == BoxTransform{1, 2, 0.5, 0.75});
    CHECK_THROWS(r.predict("s2", Slice2D(), nullptr));
    CHECK_THROWS_AS(make_box_regressor("cnn"), ConfigError);
}
