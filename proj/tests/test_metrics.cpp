#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "scarq/metrics.hpp"

using namespace scarq;

namespace {

Mask3D mask3(Dims d, Spacing s = {}) {
    Mask3D m;
    m.dims = d;
    m.spacing = s;
    m.data.assign(d.count(), 0);
    return m;
}

std::size_t at(const Mask3D& m, int x, int y, int z) {
    return (static_cast<std::size_t>(z) * m.dims.ny + y) * m.dims.nx + x;
}

}  // namespace

TEST_CASE("dice examples") {
    std::vector<std::uint8_t> a{1, 1, 1, 1, 0, 0}, b{0, 0, 1, 1, 1, 1}, none(6, 0);
    CHECK(dice(a, a) == 1.0);
    CHECK(dice(a, std::vector<std::uint8_t>{0, 0, 0, 0, 1, 1}) == 0.0);
    CHECK(dice(a, b) == 0.5);
    CHECK(dice(none, none) == 1.0);
    CHECK_THROWS_AS(dice(a, std::vector<std::uint8_t>(5, 0)), DimensionError);
}

TEST_CASE("dice properties on random masks") {
    Rng rng(12);
    for (int t = 0; t < 100; ++t) {
        const auto a = oracle::random_mask3(rng, 6, 0.3);
        const auto b = oracle::random_mask3(rng, 6, 0.3);
        CHECK(dice(a, b) == dice(b, a));
        CHECK(dice(a, b) == doctest::Approx(oracle::dice(a.data, b.data)).epsilon(1e-15));
    }
}

TEST_CASE("hausdorff examples") {
    auto a = mask3({10, 3, 3});
    auto b = mask3({10, 3, 3});
    a.data[at(a, 1, 1, 1)] = 1;
    b.data[at(b, 4, 1, 1)] = 1;
    CHECK(hausdorff_mm(a, b) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(hausdorff_mm(a, a) == 0.0);
    auto aniso = a;
    aniso.spacing = {1.0, 1.0, 5.0};
    auto bz = b;
    bz.spacing = aniso.spacing;
    bz.data.assign(bz.data.size(), 0);
    bz.data[at(bz, 1, 1, 2)] = 1;
    CHECK(hausdorff_mm(aniso, bz) == doctest::Approx(5.0));
    CHECK_THROWS_AS(hausdorff_mm(a, mask3({10, 3, 3})), DegenerateInputError);
    CHECK_THROWS_AS(hausdorff_mm(a, mask3({9, 3, 3})), DimensionError);
}

TEST_CASE("hausdorff symmetry and triangle inequality") {
    Rng rng(14);
    for (int t = 0; t < 30; ++t) {
        const auto a = oracle::random_mask3(rng, 8, 0.2, {1.0, 1.5, 2.0});
        const auto b = oracle::random_mask3(rng, 8, 0.2, {1.0, 1.5, 2.0});
        const auto c = oracle::random_mask3(rng, 8, 0.2, {1.0, 1.5, 2.0});
        const double ab = hausdorff_mm(a, b), bc = hausdorff_mm(b, c), ac = hausdorff_mm(a, c);
        CHECK(ab == hausdorff_mm(b, a));
        CHECK(ac <= ab + bc + 1e-9);
        CHECK(ab == doctest::Approx(oracle::hausdorff(a, b)).epsilon(1e-12));
        CHECK(hausdorff_mm(a, b, HausdorffMode::percentile95) <= ab + 1e-12);
    }
}

TEST_CASE("volumes and scar burden") {
    auto a = mask3({10, 10, 1});
    auto b = a;
    std::fill_n(b.data.begin(), 100, 1);
    CHECK(volume_difference(a, a) == 0.0);
    CHECK(volume_difference(a, b) == doctest::Approx(0.1).epsilon(1e-12));

    auto scar = mask3({10, 10, 1});
    auto myo = mask3({10, 10, 1});
    std::fill_n(myo.data.begin(), 90, 1);
    std::fill(scar.data.begin() + 90, scar.data.end(), 1);
    CHECK(scar_burden(scar, myo) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(scar_burden(mask3({10, 10, 1}), myo) == 0.0);
    CHECK_THROWS_AS(scar_burden(a, a), DegenerateInputError);
}

TEST_CASE("pearson") {
    PairedSeries s{{1, 2, 3, 4}, {3, 5, 7, 9}};
    CHECK(pearson_r(s) == doctest::Approx(1.0).epsilon(1e-12));
    PairedSeries neg{{1, 2, 3}, {-1, -2, -3}};
    CHECK(pearson_r(neg) == doctest::Approx(-1.0).epsilon(1e-12));
    Rng rng(15);
    for (int t = 0; t < 100; ++t) {
        PairedSeries r;
        const int n = 2 + static_cast<int>(rng.below(40));
        for (int i = 0; i < n; ++i) {
            r.manual.push_back(rng.normal(50, 10));
            r.automatic.push_back(rng.normal(50, 10));
        }
        CHECK(std::fabs(pearson_r(r) - oracle::pearson(r.manual, r.automatic)) <= 1e-12);
        PairedSeries affine = r;
        for (auto& v : affine.automatic) v = 3.0 * v + 2.0;
        CHECK(pearson_r(affine) == doctest::Approx(pearson_r(r)).epsilon(1e-9));
    }
    CHECK_THROWS_AS(pearson_r(PairedSeries{{1}, {1}}), InvalidArgument);
}

TEST_CASE("bland altman") {
    PairedSeries same{{1, 2, 3}, {1, 2, 3}};
    const auto z = bland_altman(same);
    CHECK(z.bias == 0.0);
    CHECK(z.loa_low == 0.0);
    CHECK(z.loa_high == 0.0);
    PairedSeries plus{{1, 2, 3}, {3, 4, 5}};
    const auto p = bland_altman(plus);
    CHECK(p.bias == doctest::Approx(2.0));
    CHECK(p.sd == doctest::Approx(0.0));
    Rng rng(16);
    for (int t = 0; t < 100; ++t) {
        PairedSeries r;
        for (int i = 0; i < 20; ++i) {
            r.manual.push_back(rng.normal(50, 10));
            r.automatic.push_back(rng.normal(55, 10));
        }
        const auto got = bland_altman(r);
        const auto ref = oracle::bland_altman(r.manual, r.automatic);
        CHECK(std::fabs(got.bias - ref.bias) <= 1e-12);
        CHECK(std::fabs(got.sd - ref.sd) <= 1e-12);
        CHECK(got.loa_high - got.bias == doctest::Approx(got.bias - got.loa_low));
        PairedSeries shifted = r;
        for (auto& v : shifted.automatic) v += 4.0;
        const auto s = bland_altman(shifted);
        CHECK(s.bias == doctest::Approx(got.bias + 4.0));
        CHECK(s.loa_high - s.loa_low == doctest::Approx(got.loa_high - got.loa_low));
    }
}

TEST_CASE("classification accuracy") {
    std::vector<char> truth_c(50, 1);
    bool truth[50], pred[50];
    for (int i = 0; i < 50; ++i) truth[i] = pred[i] = i % 3 == 0;
    CHECK(classification_accuracy(pred, truth) == 100.0);
    pred[0] = !pred[0];
    pred[1] = !pred[1];
    pred[2] = !pred[2];
    CHECK(classification_accuracy(pred, truth) == doctest::Approx(94.0).epsilon(1e-12));
    CHECK_THROWS(classification_accuracy(std::span<const bool>{}, std::span<const bool>{}));
}

TEST_CASE("wilcoxon") {
    const std::vector<double> pos{1, 2, 3, 4, 5};
    CHECK(wilcoxon_signed_rank(pos, Alternative::greater).p_value == doctest::Approx(1.0 / 32).epsilon(1e-12));
    CHECK(wilcoxon_signed_rank(pos, Alternative::two_sided).p_value == doctest::Approx(0.0625).epsilon(1e-12));
    const std::vector<double> sym{1, -1, 2, -2, 3, -3};
    CHECK(wilcoxon_signed_rank(sym, Alternative::two_sided).p_value >= 0.5);
    CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>(6, 0.0), Alternative::two_sided), DegenerateInputError);
    CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2, 3}, Alternative::two_sided), InvalidArgument);
}

TEST_CASE("wilcoxon exact matches enumeration, including ties") {
    Rng rng(18);
    for (int t = 0; t < 60; ++t) {
        const int n = 5 + static_cast<int>(rng.below(8));
        std::vector<double> d;
        for (int i = 0; i < n; ++i) d.push_back(static_cast<double>(static_cast<int>(rng.below(9)) - 3) + 0.0);
        std::erase(d, 0.0);
        if (d.size() < 5) continue;
        // mid-ranks of |d|
        std::vector<double> ranks(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            double below = 0, equal = 0;
            for (double e : d) {
                below += std::fabs(e) < std::fabs(d[i]);
                equal += std::fabs(e) == std::fabs(d[i]);
            }
            ranks[i] = below + (equal + 1) / 2.0;
        }
        double w = 0;
        for (std::size_t i = 0; i < d.size(); ++i)
            if (d[i] > 0) w += ranks[i];
        const auto g = wilcoxon_signed_rank(d, Alternative::greater);
        const auto l = wilcoxon_signed_rank(d, Alternative::less);
        const auto two = wilcoxon_signed_rank(d, Alternative::two_sided);
        CHECK(g.exact);
        CHECK(g.statistic == doctest::Approx(w));
        CHECK(g.p_value == doctest::Approx(oracle::wilcoxon_enumerate(ranks, w, 1)).epsilon(1e-12));
        CHECK(l.p_value == doctest::Approx(oracle::wilcoxon_enumerate(ranks, w, -1)).epsilon(1e-12));
        CHECK(two.p_value == doctest::Approx(std::min(1.0, oracle::wilcoxon_enumerate(ranks, w, 0))).epsilon(1e-12));
    }
}

TEST_CASE("wilcoxon normal approximation for large n") {
    std::vector<double> d;
    for (int i = 1; i <= 30; ++i) d.push_back(i % 4 == 0 ? -i : i);
    const auto r = wilcoxon_signed_rank(d, Alternative::two_sided);
    CHECK_FALSE(r.exact);
    CHECK(r.p_value > 0.0);
    CHECK(r.p_value < 0.05);
}
