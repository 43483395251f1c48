#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "scarq/volume.hpp"

namespace scarq {

/// NIfTI-1 datatype codes handled by the reader and writer.
enum class NiftiDatatype : std::int16_t {
    uint8 = 2,
    int16 = 4,
    float32 = 16,
};

enum class Endian { little, big };

/// Slice ordering applied when converting a decoded file into a Volume.
/// `stored` keeps the file's z order; `reversed` flips it so the stack runs
/// base to apex when the file was written apex first.
enum class SliceOrder { stored, reversed };

/// Decoded contents of a NIfTI-1 file: geometry plus scaled voxel values in file order.
struct NiftiImage {
    Dims dims;
    Spacing spacing;
    NiftiDatatype datatype = NiftiDatatype::float32;
    Endian endian = Endian::little;
    std::vector<double> values;
};

/// Parses a single-file NIfTI-1 image (magic "n+1"), or a header+image pair
/// concatenated into one buffer (magic "ni1").
NiftiImage read_nifti(std::span<const std::uint8_t> bytes);

Volume to_volume(const NiftiImage& image, SliceOrder order = SliceOrder::stored);

/// Converts decoded values to class labels; EMIDEC's MVO class (4) becomes scar (3).
LabelMap to_label_map(const NiftiImage& image, SliceOrder order = SliceOrder::stored);

std::vector<std::uint8_t> write_nifti(const Volume& volume, NiftiDatatype datatype,
                                      Endian endian = Endian::little);
std::vector<std::uint8_t> write_nifti(const LabelMap& labels, NiftiDatatype datatype = NiftiDatatype::uint8,
                                      Endian endian = Endian::little);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Files may be gzip-compressed (.nii.gz); .hdr paths read the paired .img.
Volume load_volume(const std::filesystem::path& path, SliceOrder order = SliceOrder::stored);
LabelMap load_label_map(const std::filesystem::path& path, SliceOrder order = SliceOrder::stored);
void save_volume(const std::filesystem::path& path, const Volume& volume,
                 NiftiDatatype datatype = NiftiDatatype::float32);
void save_label_map(const std::filesystem::path& path, const LabelMap& labels);

}  // namespace scarq
