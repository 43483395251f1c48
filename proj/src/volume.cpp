#include "scarq/volume.hpp"

#include <algorithm>
#include <cmath>

namespace scarq {

void validate_spacing(const Spacing& s) {
    for (double v : {s.dx, s.dy, s.dz}) {
        if (!std::isfinite(v) || v <= 0.0) throw RangeError("spacing must be positive and finite");
    }
}

namespace {

void validate_dims(const Dims& d) {
    if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0) throw InvalidArgument("grid dimensions must be positive");
}

}  // namespace

std::size_t Mask3D::count_nonzero() const {
    return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto v) { return v != 0; }));
}

Mask2D Mask3D::slice(int z) const {
    const auto n = dims.slice_count();
    Mask2D out(dims.nx, dims.ny, 0, spacing.dx, spacing.dy);
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(n * z), n, out.data.begin());
    return out;
}

Volume::Volume(Dims dims, Spacing spacing, std::vector<double> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    validate_dims(dims_);
    validate_spacing(spacing_);
    if (data_.size() != dims_.count()) throw DimensionError("Volume: data length != nx*ny*nz");
    for (double v : data_) {
        if (!std::isfinite(v)) throw RangeError("Volume: non-finite voxel value");
    }
}

Volume Volume::from_slices(const std::vector<Slice2D>& slices, double dz) {
    if (slices.empty()) throw InvalidArgument("Volume::from_slices: no slices");
    const auto& first = slices.front();
    std::vector<double> data;
    data.reserve(first.size() * slices.size());
    for (const auto& s : slices) {
        require_same_shape(first, s, "Volume::from_slices: slice shapes differ");
        data.insert(data.end(), s.data.begin(), s.data.end());
    }
    return Volume({first.width, first.height, static_cast<int>(slices.size())}, {first.dx, first.dy, dz},
                  std::move(data));
}

Slice2D Volume::slice(int z) const {
    if (z < 0 || z >= dims_.nz) throw InvalidArgument("Volume::slice: index out of range");
    const auto n = dims_.slice_count();
    const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(n * z);
    return Slice2D(dims_.nx, dims_.ny, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(n)),
                   spacing_.dx, spacing_.dy);
}

LabelMap::LabelMap(Dims dims, Spacing spacing, std::vector<std::uint8_t> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    validate_dims(dims_);
    validate_spacing(spacing_);
    if (data_.size() != dims_.count()) throw DimensionError("LabelMap: data length != nx*ny*nz");
    for (auto v : data_) {
        if (v > label::max_class) throw RangeError("LabelMap: class value outside {0,1,2,3}");
    }
}

LabelMap LabelMap::from_slices(const std::vector<LabelSlice>& slices, double dz) {
    if (slices.empty()) throw InvalidArgument("LabelMap::from_slices: no slices");
    const auto& first = slices.front();
    std::vector<std::uint8_t> data;
    data.reserve(first.size() * slices.size());
    for (const auto& s : slices) {
        require_same_shape(first, s, "LabelMap::from_slices: slice shapes differ");
        data.insert(data.end(), s.data.begin(), s.data.end());
    }
    return LabelMap({first.width, first.height, static_cast<int>(slices.size())}, {first.dx, first.dy, dz},
                    std::move(data));
}

LabelSlice LabelMap::slice(int z) const {
    if (z < 0 || z >= dims_.nz) throw InvalidArgument("LabelMap::slice: index out of range");
    const auto n = dims_.slice_count();
    const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(n * z);
    return LabelSlice(dims_.nx, dims_.ny, std::vector<std::uint8_t>(begin, begin + static_cast<std::ptrdiff_t>(n)),
                      spacing_.dx, spacing_.dy);
}

Mask3D LabelMap::mask_of(std::initializer_list<std::uint8_t> classes) const {
    Mask3D out{dims_, spacing_, std::vector<std::uint8_t>(data_.size(), 0)};
    for (std::size_t i = 0; i < data_.size(); ++i) {
        out.data[i] = std::find(classes.begin(), classes.end(), data_[i]) != classes.end();
    }
    return out;
}

void SubjectRecord::validate() const {
    if (labels && labels->dims() != image.dims()) {
        throw DimensionError("subject " + id + ": label dims do not match image dims");
    }
}

double voxel_volume_cm3(const Spacing& spacing) {
    validate_spacing(spacing);
    return spacing.dx * spacing.dy * spacing.dz / 1000.0;
}

double volume_of_class(const LabelMap& labels, std::uint8_t cls) {
    if (cls > label::max_class) throw InvalidArgument("volume_of_class: class outside {0,1,2,3}");
    const auto n = std::count(labels.data().begin(), labels.data().end(), cls);
    return static_cast<double>(n) * voxel_volume_cm3(labels.spacing());
}

double mask_volume_cm3(const Mask3D& mask) {
    return static_cast<double>(mask.count_nonzero()) * voxel_volume_cm3(mask.spacing);
}

}  // namespace scarq
