#include "scarq/nifti.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cfloat>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include <zlib.h>

namespace scarq {

namespace {

constexpr std::size_t header_size = 348;
constexpr std::size_t default_vox_offset = 352;

// Byte offsets of the NIfTI-1 header fields we touch.
constexpr std::size_t off_sizeof_hdr = 0;
constexpr std::size_t off_dim = 40;
constexpr std::size_t off_datatype = 70;
constexpr std::size_t off_bitpix = 72;
constexpr std::size_t off_pixdim = 76;
constexpr std::size_t off_vox_offset = 108;
constexpr std::size_t off_scl_slope = 112;
constexpr std::size_t off_scl_inter = 116;
constexpr std::size_t off_xyzt_units = 123;
constexpr std::size_t off_magic = 344;

constexpr bool host_little = std::endian::native == std::endian::little;

template <typename T>
T byteswap(T value) {
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), &value, sizeof(T));
    std::reverse(raw.begin(), raw.end());
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
}

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    template <typename T>
    T get(std::size_t offset) const {
        T value;
        std::memcpy(&value, bytes_.data() + offset, sizeof(T));
        return swap_ ? byteswap(value) : value;
    }

private:
    std::span<const std::uint8_t> bytes_;
    bool swap_;
};

class ByteWriter {
public:
    ByteWriter(std::vector<std::uint8_t>& out, bool swap) : out_(out), swap_(swap) {}

    template <typename T>
    void put(std::size_t offset, T value) {
        if (swap_) value = byteswap(value);
        std::memcpy(out_.data() + offset, &value, sizeof(T));
    }

private:
    std::vector<std::uint8_t>& out_;
    bool swap_;
};

int bytes_per_voxel(NiftiDatatype dt) {
    switch (dt) {
        case NiftiDatatype::uint8: return 1;
        case NiftiDatatype::int16: return 2;
        case NiftiDatatype::float32: return 4;
    }
    throw UnsupportedError("unsupported NIfTI datatype");
}

NiftiDatatype checked_datatype(std::int16_t code) {
    switch (code) {
        case 2: return NiftiDatatype::uint8;
        case 4: return NiftiDatatype::int16;
        case 16: return NiftiDatatype::float32;
        default: throw UnsupportedError("unsupported NIfTI datatype code " + std::to_string(code));
    }
}

std::vector<double> reorder_slices(const Dims& dims, std::vector<double> values, SliceOrder order) {
    if (order == SliceOrder::stored || dims.nz < 2) return values;
    const auto n = dims.slice_count();
    std::vector<double> out(values.size());
    for (int z = 0; z < dims.nz; ++z) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(n * z), n,
                    out.begin() + static_cast<std::ptrdiff_t>(n * (dims.nz - 1 - z)));
    }
    return out;
}

std::vector<std::uint8_t> encode(const Dims& dims, const Spacing& spacing, std::span<const double> values,
                                 NiftiDatatype datatype, Endian endian) {
    const int bpv = bytes_per_voxel(datatype);
    std::vector<std::uint8_t> out(default_vox_offset + values.size() * static_cast<std::size_t>(bpv), 0);
    const bool swap = (endian == Endian::little) != host_little;
    ByteWriter w(out, swap);

    w.put<std::int32_t>(off_sizeof_hdr, static_cast<std::int32_t>(header_size));
    const std::int16_t dim[8] = {3,
                                 static_cast<std::int16_t>(dims.nx),
                                 static_cast<std::int16_t>(dims.ny),
                                 static_cast<std::int16_t>(dims.nz),
                                 1,
                                 1,
                                 1,
                                 1};
    for (int i = 0; i < 8; ++i) w.put<std::int16_t>(off_dim + 2 * i, dim[i]);
    w.put<std::int16_t>(off_datatype, static_cast<std::int16_t>(datatype));
    w.put<std::int16_t>(off_bitpix, static_cast<std::int16_t>(8 * bpv));
    const float pixdim[8] = {1.0f,
                             static_cast<float>(spacing.dx),
                             static_cast<float>(spacing.dy),
                             static_cast<float>(spacing.dz),
                             0.0f,
                             0.0f,
                             0.0f,
                             0.0f};
    for (int i = 0; i < 8; ++i) w.put<float>(off_pixdim + 4 * i, pixdim[i]);
    w.put<float>(off_vox_offset, static_cast<float>(default_vox_offset));
    w.put<float>(off_scl_slope, 1.0f);
    w.put<float>(off_scl_inter, 0.0f);
    out[off_xyzt_units] = 2;  // NIFTI_UNITS_MM
    std::memcpy(out.data() + off_magic, "n+1\0", 4);

    std::uint8_t* payload = out.data() + default_vox_offset;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!std::isfinite(v)) throw RangeError("write_nifti: non-finite value");
        switch (datatype) {
            case NiftiDatatype::uint8: {
                if (v < 0.0 || v > 255.0 || v != std::floor(v)) {
                    throw RangeError("write_nifti: value not representable as uint8");
                }
                payload[i] = static_cast<std::uint8_t>(v);
                break;
            }
            case NiftiDatatype::int16: {
                if (v < -32768.0 || v > 32767.0 || v != std::floor(v)) {
                    throw RangeError("write_nifti: value not representable as int16");
                }
                auto raw = static_cast<std::int16_t>(v);
                if (swap) raw = byteswap(raw);
                std::memcpy(payload + 2 * i, &raw, 2);
                break;
            }
            case NiftiDatatype::float32: {
                if (std::fabs(v) > static_cast<double>(FLT_MAX)) {
                    throw RangeError("write_nifti: value overflows float32");
                }
                auto raw = static_cast<float>(v);
                if (swap) raw = byteswap(raw);
                std::memcpy(payload + 4 * i, &raw, 4);
                break;
            }
        }
    }
    return out;
}

void check_dims_fit_header(const Dims& dims) {
    constexpr int max16 = std::numeric_limits<std::int16_t>::max();
    if (dims.nx > max16 || dims.ny > max16 || dims.nz > max16) {
        throw RangeError("write_nifti: dimension exceeds NIfTI-1 int16 limit");
    }
}

}  // namespace

NiftiImage read_nifti(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < header_size) throw LengthError("NIfTI: buffer shorter than the 348-byte header");

    std::int32_t sizeof_hdr;
    std::memcpy(&sizeof_hdr, bytes.data(), 4);
    bool swap = false;
    if (sizeof_hdr != static_cast<std::int32_t>(header_size)) {
        if (byteswap(sizeof_hdr) != static_cast<std::int32_t>(header_size)) {
            throw FormatError("NIfTI: sizeof_hdr is not 348 in either byte order");
        }
        swap = true;
    }

    const char* magic = reinterpret_cast<const char*>(bytes.data() + off_magic);
    const bool single_file = std::memcmp(magic, "n+1\0", 4) == 0;
    const bool pair = std::memcmp(magic, "ni1\0", 4) == 0;
    if (!single_file && !pair) throw FormatError("NIfTI: bad magic");

    const ByteReader r(bytes, swap);
    std::int16_t dim[8];
    for (int i = 0; i < 8; ++i) dim[i] = r.get<std::int16_t>(off_dim + 2 * i);
    if (dim[0] < 1 || dim[0] > 7) throw FormatError("NIfTI: dim[0] outside 1..7");
    for (int i = 1; i <= dim[0]; ++i) {
        if (dim[i] < 1) throw FormatError("NIfTI: non-positive dimension");
        if (i > 3 && dim[i] != 1) throw UnsupportedError("NIfTI: images with more than 3 dimensions");
    }

    NiftiImage image;
    image.endian = (swap == host_little) ? Endian::big : Endian::little;
    image.dims = {dim[1], dim[0] >= 2 ? dim[2] : 1, dim[0] >= 3 ? dim[3] : 1};

    const auto datatype_code = r.get<std::int16_t>(off_datatype);
    image.datatype = checked_datatype(datatype_code);
    const int bpv = bytes_per_voxel(image.datatype);
    if (r.get<std::int16_t>(off_bitpix) != 8 * bpv) throw FormatError("NIfTI: bitpix does not match datatype");

    double pix[3];
    for (int i = 0; i < 3; ++i) {
        const double p = r.get<float>(off_pixdim + 4 * (i + 1));
        if (i + 1 > dim[0] && !(p > 0.0)) {
            pix[i] = 1.0;
        } else if (!(p > 0.0) || !std::isfinite(p)) {
            throw FormatError("NIfTI: pixdim must be positive");
        } else {
            pix[i] = p;
        }
    }
    image.spacing = {pix[0], pix[1], pix[2]};

    const double vox_offset = r.get<float>(off_vox_offset);
    std::size_t data_offset = 0;
    if (single_file) {
        if (!(vox_offset >= static_cast<double>(header_size)) || vox_offset != std::floor(vox_offset)) {
            throw FormatError("NIfTI: vox_offset must be an integer >= 348");
        }
        data_offset = static_cast<std::size_t>(vox_offset);
    } else {
        if (!(vox_offset >= 0.0) || vox_offset != std::floor(vox_offset)) {
            throw FormatError("NIfTI: bad vox_offset");
        }
        data_offset = header_size + static_cast<std::size_t>(vox_offset);
    }

    const std::size_t count = image.dims.count();
    const std::size_t payload = count * static_cast<std::size_t>(bpv);
    if (bytes.size() < data_offset || bytes.size() - data_offset < payload) {
        throw LengthError("NIfTI: truncated voxel payload");
    }

    double slope = r.get<float>(off_scl_slope);
    double inter = r.get<float>(off_scl_inter);
    const bool scaled = slope != 0.0 && std::isfinite(slope);
    if (!scaled || !std::isfinite(inter)) inter = 0.0;

    image.values.resize(count);
    const ByteReader data(bytes.subspan(data_offset), swap);
    for (std::size_t i = 0; i < count; ++i) {
        double v = 0.0;
        switch (image.datatype) {
            case NiftiDatatype::uint8: v = bytes[data_offset + i]; break;
            case NiftiDatatype::int16: v = data.get<std::int16_t>(2 * i); break;
            case NiftiDatatype::float32: v = data.get<float>(4 * i); break;
        }
        if (scaled) v = slope * v + inter;
        if (!std::isfinite(v)) throw RangeError("NIfTI: non-finite voxel value");
        image.values[i] = v;
    }
    return image;
}

Volume to_volume(const NiftiImage& image, SliceOrder order) {
    return Volume(image.dims, image.spacing, reorder_slices(image.dims, image.values, order));
}

LabelMap to_label_map(const NiftiImage& image, SliceOrder order) {
    const auto values = reorder_slices(image.dims, image.values, order);
    std::vector<std::uint8_t> classes(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (v != std::floor(v)) throw FormatError("NIfTI label map: non-integer label value");
        if (v < 0.0 || v > label::emidec_mvo) throw RangeError("NIfTI label map: class outside {0..4}");
        const auto c = static_cast<std::uint8_t>(v);
        classes[i] = c == label::emidec_mvo ? label::scar : c;
    }
    return LabelMap(image.dims, image.spacing, std::move(classes));
}

std::vector<std::uint8_t> write_nifti(const Volume& volume, NiftiDatatype datatype, Endian endian) {
    check_dims_fit_header(volume.dims());
    return encode(volume.dims(), volume.spacing(), volume.data(), datatype, endian);
}

std::vector<std::uint8_t> write_nifti(const LabelMap& labels, NiftiDatatype datatype, Endian endian) {
    check_dims_fit_header(labels.dims());
    const std::vector<double> values(labels.data().begin(), labels.data().end());
    return encode(labels.dims(), labels.spacing(), values, datatype, endian);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

namespace {

bool is_gzip(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes, const std::filesystem::path& path) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("zlib init failed for " + path.string());
    std::vector<std::uint8_t> out;
    std::array<std::uint8_t, 1 << 16> buffer{};
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buffer.data();
        zs.avail_out = static_cast<uInt>(buffer.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw FormatError("corrupt gzip stream in " + path.string());
        }
        out.insert(out.end(), buffer.data(), buffer.data() + (buffer.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw LengthError("truncated gzip stream in " + path.string());
        }
    }
    inflateEnd(&zs);
    return out;
}

std::vector<std::uint8_t> read_image_bytes(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    if (is_gzip(bytes)) bytes = gunzip(bytes, path);
    if (path.extension() == ".hdr") {
        auto img = path;
        img.replace_extension(".img");
        const auto payload = read_file_bytes(img);
        bytes.resize(std::min<std::size_t>(bytes.size(), header_size));
        bytes.insert(bytes.end(), payload.begin(), payload.end());
    }
    return bytes;
}

}  // namespace

Volume load_volume(const std::filesystem::path& path, SliceOrder order) {
    return to_volume(read_nifti(read_image_bytes(path)), order);
}

LabelMap load_label_map(const std::filesystem::path& path, SliceOrder order) {
    return to_label_map(read_nifti(read_image_bytes(path)), order);
}

void save_volume(const std::filesystem::path& path, const Volume& volume, NiftiDatatype datatype) {
    write_file_bytes(path, write_nifti(volume, datatype));
}

void save_label_map(const std::filesystem::path& path, const LabelMap& labels) {
    write_file_bytes(path, write_nifti(labels, NiftiDatatype::uint8));
}

}  // namespace scarq
