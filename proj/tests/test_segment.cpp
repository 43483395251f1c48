#include <doctest.h>

#include <filesystem>

#include "oracles.hpp"
#include "scarq/metrics.hpp"
#include "scarq/mixture.hpp"
#include "scarq/nifti.hpp"
#include "scarq/phantom.hpp"
#include "scarq/preprocess.hpp"
#include "scarq/segment.hpp"

using namespace scarq;

namespace {

bool subset(const Mask2D& a, const Mask2D& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.data[i] && !b.data[i]) return false;
    return true;
}

// Phantom slice with its wall and scar masks.
struct PhantomSlice {
    Slice2D image;
    Mask2D wall;
    Mask2D scar;
};

PhantomSlice phantom_slice(double noise, bool with_scar, std::uint64_t seed = 1, int z = 1) {
    PhantomSpec spec;
    spec.nx = spec.ny = 128;
    spec.cx = spec.cy = 63.5;
    spec.noise_sigma = noise;
    spec.seed = seed;
    if (with_scar) {
        spec.scar_start = 0.3;
        spec.scar_end = 1.6;
    }
    const auto s = generate_phantom(spec);
    const auto l = s.labels->slice(z);
    Mask2D wall(l.width, l.height), scar(l.width, l.height);
    for (std::size_t i = 0; i < l.size(); ++i) {
        wall.data[i] = l.data[i] >= 2;
        scar.data[i] = l.data[i] == 3;
    }
    return {s.image.slice(z), wall, scar};
}

}  // namespace

TEST_CASE("otsu threshold examples") {
    std::vector<double> v(50, 0.0);
    v.insert(v.end(), 50, 255.0);
    const auto t = otsu_threshold(v);
    CHECK(t.threshold > 0.0);
    CHECK(t.threshold < 255.0);

    std::vector<int> levels;
    levels.insert(levels.end(), 30, 10);
    levels.insert(levels.end(), 30, 20);
    levels.insert(levels.end(), 40, 200);
    std::vector<std::uint64_t> hist(256, 0);
    for (int l : levels) ++hist[l];
    CHECK(otsu_histogram_split(hist) == oracle::otsu_levels(levels, 256));

    CHECK_THROWS_AS(otsu_threshold(std::vector<double>(10, 3.0)), DegenerateInputError);
}

TEST_CASE("otsu on random bimodal samples leaves both classes nonempty") {
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> v;
        for (int i = 0; i < 200; ++i) v.push_back(i % 2 ? rng.normal(0, 1) : rng.normal(6, 1));
        const double th = otsu_threshold(v).threshold;
        const auto low = std::count_if(v.begin(), v.end(), [&](double x) { return x <= th; });
        CHECK(low > 0);
        CHECK(low < 200);
    }
}

TEST_CASE("nsd threshold") {
    // remote pixels 0.9 and 1.1: mean 1.0, population sd 0.1
    Slice2D img(4, 1, std::vector<double>{0.9, 1.1, 1.4, 1.6});
    Mask2D myo(4, 1, 1);
    Mask2D remote(4, 1, std::vector<std::uint8_t>{1, 1, 0, 0});
    const auto r = nsd_threshold(img, myo, remote, 5.0);
    CHECK(r.threshold == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(r.mask.data == std::vector<std::uint8_t>{0, 0, 0, 1});
    CHECK(nsd_threshold(img, myo, remote, 0.0).threshold == doctest::Approx(1.0).epsilon(1e-12));
    Mask2D one(4, 1, std::vector<std::uint8_t>{1, 0, 0, 0});
    CHECK_THROWS_AS(nsd_threshold(img, myo, one, 5.0), DegenerateInputError);
}

TEST_CASE("nsd is monotone in n") {
    Rng rng(2);
    Slice2D img(30, 30);
    for (auto& v : img.data) v = rng.normal(1.0, 0.3);
    Mask2D myo(30, 30, 1);
    Mask2D remote(30, 30);
    for (int x = 0; x < 10; ++x) remote(x, 0) = 1;
    Mask2D prev = nsd_threshold(img, myo, remote, 0.0).mask;
    for (double n = 0.5; n <= 6.0; n += 0.5) {
        const auto cur = nsd_threshold(img, myo, remote, n).mask;
        CHECK(subset(cur, prev));
        prev = cur;
    }
}

TEST_CASE("fwhm threshold") {
    Slice2D img(3, 1, std::vector<double>{0.9, 1.1, 2.0});
    Mask2D myo(3, 1, 1);
    Mask2D seed(3, 1, std::vector<std::uint8_t>{0, 0, 1});
    const auto r = fwhm_threshold(img, myo, seed);
    CHECK(r.threshold == 1.0);
    CHECK(r.mask.data == std::vector<std::uint8_t>{0, 1, 1});
    CHECK_THROWS_AS(fwhm_threshold(img, myo, Mask2D(3, 1)), DegenerateInputError);
}

TEST_CASE("fwhm seed of the brightest pixel equals the full seed with the same max") {
    auto p = phantom_slice(0.0, true);
    const auto seed = default_fwhm_seed(p.image, p.wall);
    Mask2D single(p.wall.width, p.wall.height);
    std::size_t best = 0;
    for (std::size_t i = 0; i < p.image.size(); ++i)
        if (p.wall.data[i] && (!p.wall.data[best] || p.image.data[i] > p.image.data[best])) best = i;
    single.data[best] = 1;
    CHECK(fwhm_threshold(p.image, p.wall, single).mask == fwhm_threshold(p.image, p.wall, seed).mask);
    // noiseless scar is more than twice the healthy level: exact recovery
    CHECK(fwhm_threshold(p.image, p.wall, seed).mask == p.scar);
}

TEST_CASE("nsd recovers phantom scar with a remote sector") {
    auto p = phantom_slice(0.02, true, 5);
    const auto remote = darkest_sector(p.image, p.wall, 6);
    CHECK(subset(remote, p.wall));
    CHECK(count_nonzero(remote) > 2);
    const auto r = nsd_threshold(p.image, p.wall, remote, 5.0);
    CHECK(dice(r.mask, p.scar) >= 0.95);
}

TEST_CASE("em_fit closed form for K=1") {
    std::vector<double> v{1, 2, 4, 7, 11};
    const auto fit = em_fit(v, 1);
    const double mean = 5.0;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= 5.0;
    CHECK(fit.mixture.components[0].mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(fit.mixture.components[0].variance == doctest::Approx(var).epsilon(1e-12));
    CHECK(fit.mixture.components[0].weight == doctest::Approx(1.0));
}

TEST_CASE("em_fit recovers a separated mixture and is deterministic") {
    Rng rng(123);
    std::vector<double> v, a, b;
    for (int i = 0; i < 500; ++i) a.push_back(rng.normal(0, 1));
    for (int i = 0; i < 500; ++i) b.push_back(rng.normal(10, 1));
    v = a;
    v.insert(v.end(), b.begin(), b.end());
    const auto fit = em_fit(v, 2);
    CHECK(std::fabs(fit.mixture.components[0].mean - 0.0) <= 0.2);
    CHECK(std::fabs(fit.mixture.components[1].mean - 10.0) <= 0.2);
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
        CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-9);
    const auto again = em_fit(v, 2);
    CHECK(again.mixture.components[1].mean == fit.mixture.components[1].mean);
    double sum = 0.0;
    for (const auto& c : fit.mixture.components) sum += c.weight;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("em_fit errors") {
    CHECK_THROWS_AS(em_fit(std::vector<double>(10, 1.0), 2), DegenerateInputError);
    CHECK_THROWS_AS(em_fit(std::vector<double>{1, 2, 3}, 2), InvalidArgument);
}

TEST_CASE("em scar rule") {
    Slice2D two(2, 1, std::vector<double>{0.0, 10.0});
    CHECK(em_scar_segment(two, Mask2D(2, 1, 1)).data == std::vector<std::uint8_t>{0, 1});

    Rng rng(6);
    Slice2D flat(40, 40);
    for (auto& v : flat.data) v = rng.normal(1.0, 0.05);
    CHECK(count_nonzero(em_scar_segment(flat, Mask2D(40, 40, 1))) == 0);

    auto p = phantom_slice(0.02, true, 9);
    const auto scar = em_scar_segment(p.image, p.wall);
    CHECK(subset(scar, p.wall));
    CHECK(dice(scar, p.scar) >= 0.95);
}

TEST_CASE("scar segmenters stay inside the myocardium") {
    auto p = phantom_slice(0.02, true, 3);
    LabelSlice guide(p.wall.width, p.wall.height);
    for (std::size_t i = 0; i < guide.size(); ++i) guide.data[i] = p.scar.data[i] ? 3 : p.wall.data[i] ? 2 : 0;
    for (const char* name : {"nsd", "fwhm", "em", "otsu", "oracle"}) {
        const auto seg = make_scar_segmenter(name);
        CHECK(subset(seg->segment(p.image, p.wall, &guide), p.wall));
    }
    CHECK_THROWS_AS(make_scar_segmenter("unet"), ConfigError);
    CHECK_THROWS_AS(make_myocardium_segmenter("unet"), ConfigError);
}

TEST_CASE("phantom myocardium segmenter") {
    const auto clean = phantom_slice(0.0, false);
    CHECK(phantom_myo_segmenter(percentile_normalize(clean.image, {5, 95, false})).data == clean.wall.data);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto noisy = phantom_slice(0.02, true, seed);
        const auto m = phantom_myo_segmenter(percentile_normalize(noisy.image, {5, 95, false}));
        CHECK(dice(m, noisy.wall) >= 0.95);
    }
    CHECK(count_nonzero(phantom_myo_segmenter(Slice2D(64, 64, 0.0))) == 0);
}

TEST_CASE("prediction import") {
    const auto dir = std::filesystem::temp_directory_path() / "scarq_test_import";
    std::filesystem::create_directories(dir);
    LabelMap labels({4, 4, 1}, {1, 1, 1}, {0, 2, 2, 0, 2, 1, 3, 0, 2, 2, 2, 0, 0, 0, 0, 0});
    save_label_map(prediction_path(dir, "s1", Stage::scar), labels);
    const auto scar = import_masks(dir, "s1", Stage::scar, labels.dims());
    CHECK(scar.count_nonzero() == 1);
    CHECK(dice(scar, scar_mask(labels)) == 1.0);
    CHECK_THROWS_AS(import_masks(dir, "s2", Stage::scar, labels.dims()), IoError);
    CHECK_THROWS_AS(import_masks(dir, "s1", Stage::scar, Dims{5, 4, 1}), DimensionError);
    std::filesystem::remove_all(dir);
}
