#include <doctest.h>

#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "scarq/nifti.hpp"
#include "scarq/phantom.hpp"
#include "scarq/synthesis.hpp"

using namespace scarq;

namespace {

SubjectRecord small_phantom(bool scar, std::uint64_t seed = 0, double noise = 0.02) {
    PhantomSpec spec;
    spec.id = scar ? "p" : "n";
    spec.nx = spec.ny = 96;
    spec.cx = spec.cy = 47.5;
    spec.nz = 3;
    spec.noise_sigma = noise;
    spec.seed = seed;
    if (scar) {
        spec.scar_start = -0.5;
        spec.scar_end = 1.0;
    }
    auto s = generate_phantom(spec);
    s.id = spec.id;
    return s;
}

std::set<int> classes(const LabelSlice& l) { return {l.data.begin(), l.data.end()}; }

std::array<std::size_t, 4> class_counts(const LabelSlice& l) {
    std::array<std::size_t, 4> c{};
    for (auto v : l.data) ++c[v];
    return c;
}

}  // namespace

TEST_CASE("rotate_labels") {
    const auto slice = small_phantom(true).labels->slice(0);
    CHECK(rotate_labels(slice, 0) == slice);
    CHECK(rotate_labels(rotate_labels(slice, 180), 180) == slice);
    CHECK_THROWS_AS(rotate_labels(slice, 45), InvalidArgument);
    for (const auto& s : generate_population(5, 0.0, 3)) {
        const auto l = s.labels->slice(0);
        for (int deg : {60, 120, 240, 300}) {
            const auto r = rotate_labels(l, deg);
            const auto before = class_counts(l), after = class_counts(r);
            for (int c = 1; c <= 2; ++c) {
                CHECK(std::fabs(static_cast<double>(after[c]) - static_cast<double>(before[c])) <
                      0.05 * static_cast<double>(before[c]));
            }
            for (int c : classes(r)) CHECK(classes(l).count(c) == 1);
        }
    }
}

TEST_CASE("elastic_deform") {
    const auto l = small_phantom(true).labels->slice(1);
    CHECK(elastic_deform(l, 0.0, 5.0, 3) == l);
    CHECK(elastic_deform(l, 50.0, 5.0, 3) == elastic_deform(l, 50.0, 5.0, 3));
    CHECK_THROWS(elastic_deform(l, 50.0, 0.0, 3));
    int connected = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto d = elastic_deform(l, 50.0, 5.0, seed);
        for (int c : classes(d)) REQUIRE(classes(l).count(c) == 1);
        Mask2D wall(d.width, d.height);
        for (std::size_t i = 0; i < d.size(); ++i) wall.data[i] = d.data[i] >= 2;
        connected += oracle::count_components(wall, 1, true) == 1;
    }
    CHECK(connected >= 90);
}

TEST_CASE("morph keeps scar inside the wall") {
    const auto l = small_phantom(true, 0, 0.0).labels->slice(1);
    auto wall_of = [](const LabelSlice& s) {
        Mask2D m(s.width, s.height);
        for (std::size_t i = 0; i < s.size(); ++i) m.data[i] = s.data[i] >= 2;
        return m;
    };
    const auto dil = morph(l, MorphOp::dilate, 1);
    CHECK(wall_of(dil) == wall_of(l));
    CHECK(class_counts(dil)[3] > class_counts(l)[3]);
    for (std::size_t i = 0; i < l.size(); ++i) {
        if (dil.data[i] == 3) CHECK(l.data[i] >= 2);
    }
    const auto op = morph(l, MorphOp::open, 1);
    CHECK(wall_of(op) == wall_of(l));
    CHECK(class_counts(morph(op, MorphOp::dilate, 1))[3] >= class_counts(op)[3]);
    CHECK(morph(l, MorphOp::none, 1) == l);

    LabelSlice line(9, 9, 2);
    for (int x = 0; x < 9; ++x) line(x, 4) = 3;
    CHECK(class_counts(morph(line, MorphOp::open, 1))[3] == 0);
    CHECK_THROWS(morph(line, MorphOp::dilate, 0));
}

TEST_CASE("swap and augmented requests") {
    const auto p = small_phantom(true, 1), n = small_phantom(false, 2);
    const auto a = swap_label_style(p, n, "s1");
    CHECK(a.use == SynthesisUse::myocardium);
    CHECK(a.source_subject == "p");
    CHECK(a.style.id == "n");
    const auto b = swap_label_style(n, p, "s2");
    CHECK(b.use == SynthesisUse::myocardium);
    CHECK_NOTHROW(swap_label_style(p, p, "same"));
    const auto c = make_augmented_request(p, n, LabelAugSpec{60, true, 50, 5, 9, MorphOp::dilate, 1}, "a1");
    CHECK(c.use == SynthesisUse::myocardium_and_scar);
    CHECK(use_name(a.use) == "myocardium");
}

TEST_CASE("synthesize_image statistics") {
    const auto style = small_phantom(true, 4);
    auto req = swap_label_style(small_phantom(true, 5), style, "x");
    auto per_class = [&](const Volume& v, const LabelMap& l) {
        std::array<double, 4> sum{};
        std::array<double, 4> n{};
        for (std::size_t i = 0; i < v.data().size(); ++i) {
            sum[l.data()[i]] += v.data()[i];
            n[l.data()[i]] += 1;
        }
        for (int c = 0; c < 4; ++c) sum[c] /= n[c];
        return sum;
    };
    const auto style_means = per_class(style.image, *style.labels);
    const auto exact = synthesize_image(req, {0.0, 0.0}, 1);
    const auto m0 = per_class(exact, req.labels);
    for (int c = 0; c < 4; ++c) CHECK(m0[c] == doctest::Approx(style_means[c]).epsilon(1e-9));

    int ok = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto m = per_class(synthesize_image(req, {}, seed), req.labels);
        bool all = true;
        for (int c = 0; c < 4; ++c) all &= std::fabs(m[c] - style_means[c]) <= 0.10 * std::fabs(style_means[c]);
        ok += all;
    }
    CHECK(ok == 50);
    CHECK(synthesize_image(req, {}, 3) == synthesize_image(req, {}, 3));
}

TEST_CASE("synthesize_image falls back when the style lacks a class") {
    const auto style = small_phantom(false, 4);
    const auto req = swap_label_style(small_phantom(true, 5), style, "x");
    CHECK_NOTHROW(synthesize_image(req, {}, 1));
}

TEST_CASE("bbox augmentation") {
    Slice2D img(256, 256, 0.0);
    for (int y = 100; y < 140; ++y)
        for (int x = 90; x < 150; ++x) img(x, y) = 1.0;
    const BoundingBox box{119.5, 119.5, 60, 40};

    const auto [same_img, same_box] = apply_bbox_aug(img, box, BboxAugParams{});
    CHECK(same_img == img);
    CHECK(same_box == box);

    BboxAugParams shift;
    shift.tx = 0.2;
    const auto [moved_img, moved_box] = apply_bbox_aug(img, box, shift);
    CHECK(moved_box.cx - box.cx == doctest::Approx(51.2).epsilon(1e-12));
    CHECK(moved_box.cy == doctest::Approx(box.cy));
    CHECK(moved_box.w == doctest::Approx(box.w));

    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        BboxAugSpec spec;
        spec.seed = seed;
        const auto p = sample_bbox_aug(spec);
        CHECK((p.shear_deg >= -20 && p.shear_deg <= 20));
        CHECK((p.rotation_deg >= -90 && p.rotation_deg <= 90));
        CHECK((p.tx == 0.0 || (std::fabs(p.tx) >= 0.14 && std::fabs(p.tx) <= 0.21)));
        CHECK((p.scale >= 0.5 && p.scale <= 1.5));
        if (p.noise) CHECK((p.noise_mu == 0.1 && p.noise_sigma == 0.1));
        if (p.blur) CHECK(p.blur_sigma == 1.5);
        CHECK(augment_for_bbox(img, box, spec) == augment_for_bbox(img, box, spec));
    }
}

TEST_CASE("emit_dataset") {
    const auto dir = std::filesystem::temp_directory_path() / "scarq_test_emit";
    std::filesystem::remove_all(dir);
    const auto p = small_phantom(true, 1), n = small_phantom(false, 2);
    std::vector<SynthesisRequest> reqs{swap_label_style(p, n, "s1"),
                                       make_augmented_request(p, n, {120, true, 50, 5, 4, MorphOp::open, 1}, "a1")};
    const auto rows = emit_dataset(reqs, dir / "one", 9);
    CHECK(rows.size() == 2);
    CHECK(rows[1].rotation_deg == 120);
    CHECK(rows[1].morph_op == "open");
    CHECK(rows[0].stage == "myocardium");
    emit_dataset(reqs, dir / "two", 9);
    for (const char* f : {"s1_image.nii", "s1_label.nii", "a1_image.nii", "a1_label.nii", "manifest.csv"}) {
        REQUIRE(std::filesystem::exists(dir / "one" / f));
        CHECK(read_file_bytes(dir / "one" / f) == read_file_bytes(dir / "two" / f));
    }
    CHECK(emit_dataset({}, dir / "empty", 1).empty());
    const auto manifest = read_file_bytes(dir / "empty" / "manifest.csv");
    CHECK(std::string(manifest.begin(), manifest.end()) == std::string(manifest_header) + "\n");
    std::filesystem::remove_all(dir);
}
