#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "scarq/nifti.hpp"
#include "scarq/rng.hpp"
#include "scarq/volume.hpp"

using namespace scarq;

namespace {

std::vector<std::uint8_t> minimal_float_header() {
    Volume v({2, 2, 1}, {1.0, 1.0, 1.0}, {1.0, 2.0, 3.0, 4.0});
    return write_nifti(v, NiftiDatatype::float32);
}

Volume random_volume(Rng& rng, NiftiDatatype dt) {
    const Dims d{1 + static_cast<int>(rng.below(9)), 1 + static_cast<int>(rng.below(9)),
                 1 + static_cast<int>(rng.below(5))};
    std::vector<double> data(d.count());
    for (auto& v : data) {
        switch (dt) {
            case NiftiDatatype::uint8: v = static_cast<double>(rng.below(256)); break;
            case NiftiDatatype::int16: v = static_cast<double>(rng.below(65536)) - 32768.0; break;
            case NiftiDatatype::float32: v = static_cast<double>(static_cast<float>(rng.normal(0.0, 100.0))); break;
        }
    }
    return Volume(d, {0.5 + 0.25 * static_cast<double>(rng.below(8)), 1.25, 8.0}, std::move(data));
}

}  // namespace

TEST_CASE("minimal float32 header decodes") {
    const auto bytes = minimal_float_header();
    const auto img = read_nifti(bytes);
    CHECK(img.dims == Dims{2, 2, 1});
    CHECK(img.datatype == NiftiDatatype::float32);
    CHECK(img.values == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("byte-swapped header decodes to the native twin") {
    Rng rng(7);
    for (auto dt : {NiftiDatatype::uint8, NiftiDatatype::int16, NiftiDatatype::float32}) {
        const auto v = random_volume(rng, dt);
        const auto little = read_nifti(write_nifti(v, dt, Endian::little));
        const auto big = read_nifti(write_nifti(v, dt, Endian::big));
        CHECK(big.endian == Endian::big);
        CHECK(little.endian == Endian::little);
        CHECK(to_volume(big) == to_volume(little));
    }
}

TEST_CASE("malformed headers are rejected") {
    auto bytes = minimal_float_header();
    SUBCASE("bad magic") {
        std::memcpy(bytes.data() + 344, "xxxx", 4);
        CHECK_THROWS_AS(read_nifti(bytes), FormatError);
    }
    SUBCASE("unsupported datatype") {
        const std::int16_t code = 64;
        std::memcpy(bytes.data() + 70, &code, 2);
        CHECK_THROWS_AS(read_nifti(bytes), UnsupportedError);
    }
    SUBCASE("truncated payload") {
        bytes.resize(bytes.size() - 1);
        CHECK_THROWS_AS(read_nifti(bytes), LengthError);
    }
    SUBCASE("short header") {
        bytes.resize(100);
        CHECK_THROWS_AS(read_nifti(bytes), LengthError);
    }
}

TEST_CASE("scl_slope and scl_inter are applied") {
    auto bytes = minimal_float_header();
    const float slope = 2.0f, inter = 1.0f;
    std::memcpy(bytes.data() + 112, &slope, 4);
    std::memcpy(bytes.data() + 116, &inter, 4);
    CHECK(read_nifti(bytes).values == std::vector<double>{3, 5, 7, 9});
}

TEST_CASE("write/read roundtrip and byte-identical re-serialization") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        for (auto dt : {NiftiDatatype::uint8, NiftiDatatype::int16, NiftiDatatype::float32}) {
            const auto v = random_volume(rng, dt);
            const auto bytes = write_nifti(v, dt);
            const auto back = to_volume(read_nifti(bytes));
            REQUIRE(back == v);
            CHECK(write_nifti(back, dt) == bytes);
        }
    }
}

TEST_CASE("label maps serialize as raw class bytes") {
    LabelMap labels({4, 1, 1}, {1, 1, 1}, {0, 1, 2, 3});
    const auto bytes = write_nifti(labels);
    CHECK(std::vector<std::uint8_t>(bytes.begin() + 352, bytes.end()) == std::vector<std::uint8_t>{0, 1, 2, 3});
    CHECK(to_label_map(read_nifti(bytes)) == labels);
}

TEST_CASE("MVO class folds into scar") {
    Volume v({3, 1, 1}, {1, 1, 1}, {0, 4, 2});
    const auto labels = to_label_map(read_nifti(write_nifti(v, NiftiDatatype::uint8)));
    CHECK(labels.data() == std::vector<std::uint8_t>{0, 3, 2});
}

TEST_CASE("unrepresentable values raise range errors") {
    CHECK_THROWS_AS(write_nifti(Volume({1, 1, 1}, {1, 1, 1}, {1e40}), NiftiDatatype::int16), RangeError);
    CHECK_THROWS_AS(write_nifti(Volume({1, 1, 1}, {1, 1, 1}, {300}), NiftiDatatype::uint8), RangeError);
}

TEST_CASE("slice order reversal") {
    Volume v({1, 1, 3}, {1, 1, 1}, {1, 2, 3});
    const auto img = read_nifti(write_nifti(v, NiftiDatatype::float32));
    CHECK(to_volume(img, SliceOrder::reversed).data() == std::vector<double>{3, 2, 1});
}

TEST_CASE("file roundtrip including gzip-free path") {
    const auto dir = std::filesystem::temp_directory_path() / "scarq_test_volume";
    std::filesystem::create_directories(dir);
    LabelMap labels({2, 2, 2}, {1.25, 1.25, 10}, {0, 1, 2, 3, 3, 2, 1, 0});
    save_label_map(dir / "l.nii", labels);
    CHECK(load_label_map(dir / "l.nii") == labels);
    CHECK_THROWS_AS(load_label_map(dir / "missing.nii"), IoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("voxel volume arithmetic") {
    CHECK(voxel_volume_cm3({1, 1, 10}) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(voxel_volume_cm3({1.25, 1.25, 8}) == doctest::Approx(0.0125).epsilon(1e-12));
    CHECK(voxel_volume_cm3({1, 1, 1}) == doctest::Approx(0.001).epsilon(1e-12));
}

TEST_CASE("volume_of_class") {
    std::vector<std::uint8_t> data(40, 0);
    std::fill_n(data.begin(), 10, 3);
    LabelMap labels({10, 4, 1}, {1, 1, 10}, data);
    CHECK(volume_of_class(labels, 3) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(volume_of_class(labels, 1) == 0.0);
    double total = 0.0;
    for (std::uint8_t c = 0; c <= 3; ++c) total += volume_of_class(labels, c);
    CHECK(total == doctest::Approx(40 * 0.01).epsilon(1e-12));
}

TEST_CASE("invalid spacing and label values") {
    CHECK_THROWS_AS(Volume({1, 1, 1}, {0, 1, 1}, {1}), RangeError);
    CHECK_THROWS(LabelMap({1, 1, 1}, {1, 1, 1}, {7}));
}
