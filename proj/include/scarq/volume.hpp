#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "scarq/image.hpp"

namespace scarq {

/// Class encoding shared by every label map in the library.
namespace label {
inline constexpr std::uint8_t background = 0;
inline constexpr std::uint8_t cavity = 1;
inline constexpr std::uint8_t myocardium = 2;
inline constexpr std::uint8_t scar = 3;
inline constexpr std::uint8_t max_class = 3;
/// EMIDEC's microvascular-obstruction class; folded into scar on ingest.
inline constexpr std::uint8_t emidec_mvo = 4;
}  // namespace label

struct Dims {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    std::size_t slice_count() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    bool operator==(const Dims&) const = default;
};

/// Voxel size in mm: in-plane (dx, dy) and slice spacing dz.
struct Spacing {
    double dx = 1.0;
    double dy = 1.0;
    double dz = 1.0;

    bool operator==(const Spacing&) const = default;
};

/// Throws RangeError unless all three spacings are positive and finite.
void validate_spacing(const Spacing& spacing);

/// Binary 3D mask; same layout as Volume.
struct Mask3D {
    Dims dims;
    Spacing spacing;
    std::vector<std::uint8_t> data;

    std::size_t count_nonzero() const;
    Mask2D slice(int z) const;
    bool operator==(const Mask3D&) const = default;
};

/// 3D scalar grid. Data is row-major per slice, slices ordered base to apex.
class Volume {
public:
    Volume() = default;
    Volume(Dims dims, Spacing spacing, std::vector<double> data);

    static Volume from_slices(const std::vector<Slice2D>& slices, double dz);

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    const std::vector<double>& data() const { return data_; }

    double at(int x, int y, int z) const { return data_[index(x, y, z)]; }
    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims_.ny + static_cast<std::size_t>(y)) * dims_.nx +
               static_cast<std::size_t>(x);
    }

    Slice2D slice(int z) const;

    bool operator==(const Volume&) const = default;

private:
    Dims dims_;
    Spacing spacing_;
    std::vector<double> data_;
};

/// 3D class grid with values restricted to {0,1,2,3}.
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(Dims dims, Spacing spacing, std::vector<std::uint8_t> data);

    static LabelMap from_slices(const std::vector<LabelSlice>& slices, double dz);

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    const std::vector<std::uint8_t>& data() const { return data_; }

    std::uint8_t at(int x, int y, int z) const { return data_[index(x, y, z)]; }
    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims_.ny + static_cast<std::size_t>(y)) * dims_.nx +
               static_cast<std::size_t>(x);
    }

    LabelSlice slice(int z) const;

    /// Voxels whose class is any of `classes`.
    Mask3D mask_of(std::initializer_list<std::uint8_t> classes) const;

    bool operator==(const LabelMap&) const = default;

private:
    Dims dims_;
    Spacing spacing_;
    std::vector<std::uint8_t> data_;
};

/// Myocardial wall = healthy myocardium plus scar.
inline Mask3D wall_mask(const LabelMap& labels) { return labels.mask_of({label::myocardium, label::scar}); }
inline Mask3D scar_mask(const LabelMap& labels) { return labels.mask_of({label::scar}); }

struct SubjectRecord {
    std::string id;
    Volume image;
    std::optional<LabelMap> labels;
    std::optional<bool> pathological;

    /// Throws DimensionError when labels are present with mismatched dims.
    void validate() const;
};

/// dx*dy*dz converted from mm^3 to cm^3.
double voxel_volume_cm3(const Spacing& spacing);

double volume_of_class(const LabelMap& labels, std::uint8_t cls);

double mask_volume_cm3(const Mask3D& mask);

}  // namespace scarq
