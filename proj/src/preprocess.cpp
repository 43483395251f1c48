#include "scarq/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace scarq {

namespace {

void validate_params(const NormParams& p) {
    if (!(p.p_lo >= 0.0 && p.p_lo < p.p_hi && p.p_hi <= 100.0)) {
        throw InvalidArgument("NormParams: require 0 <= p_lo < p_hi <= 100");
    }
}

double percentile_sorted(const std::vector<double>& sorted, double p) {
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double source_coord(int i, int in, int out) {
    if (out == 1 || in == 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
}

}  // namespace

double percentile(std::span<const double> values, double p) {
    if (values.empty()) throw DegenerateInputError("percentile of an empty set");
    if (!(p >= 0.0 && p <= 100.0)) throw InvalidArgument("percentile rank outside [0,100]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return percentile_sorted(sorted, p);
}

Slice2D percentile_normalize(const Slice2D& slice, const NormParams& params) {
    validate_params(params);
    if (slice.empty()) throw DegenerateInputError("percentile_normalize: empty slice");
    std::vector<double> sorted = slice.data;
    std::sort(sorted.begin(), sorted.end());
    const double lo = percentile_sorted(sorted, params.p_lo);
    const double hi = percentile_sorted(sorted, params.p_hi);
    if (!(hi > lo)) throw DegenerateInputError("percentile_normalize: pseudo-min equals pseudo-max");

    Slice2D out = slice;
    const double scale = 1.0 / (hi - lo);
    for (double& v : out.data) {
        v = (v - lo) * scale;
        if (params.clamp) v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

Slice2D resample(const Slice2D& slice, int out_w, int out_h, ResampleMode mode) {
    if (out_w <= 0 || out_h <= 0) throw InvalidArgument("resample: target size must be positive");
    if (slice.empty()) throw InvalidArgument("resample: empty input");
    const double sx = slice.dx * (out_w > 1 ? static_cast<double>(slice.width - 1) / (out_w - 1) : 1.0);
    const double sy = slice.dy * (out_h > 1 ? static_cast<double>(slice.height - 1) / (out_h - 1) : 1.0);
    Slice2D out(out_w, out_h, 0.0, slice.width > 1 ? sx : slice.dx, slice.height > 1 ? sy : slice.dy);

    for (int y = 0; y < out_h; ++y) {
        const double fy = source_coord(y, slice.height, out_h);
        for (int x = 0; x < out_w; ++x) {
            const double fx = source_coord(x, slice.width, out_w);
            if (mode == ResampleMode::nearest) {
                const int ix = std::clamp(static_cast<int>(std::lround(fx)), 0, slice.width - 1);
                const int iy = std::clamp(static_cast<int>(std::lround(fy)), 0, slice.height - 1);
                out(x, y) = slice(ix, iy);
                continue;
            }
            const int x0 = std::min(static_cast<int>(std::floor(fx)), slice.width - 1);
            const int y0 = std::min(static_cast<int>(std::floor(fy)), slice.height - 1);
            const int x1 = std::min(x0 + 1, slice.width - 1);
            const int y1 = std::min(y0 + 1, slice.height - 1);
            const double tx = fx - x0;
            const double ty = fy - y0;
            const double top = (1.0 - tx) * slice(x0, y0) + tx * slice(x1, y0);
            const double bottom = (1.0 - tx) * slice(x0, y1) + tx * slice(x1, y1);
            out(x, y) = (1.0 - ty) * top + ty * bottom;
        }
    }
    return out;
}

Image2D<std::uint8_t> resample_nearest(const Image2D<std::uint8_t>& labels, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0) throw InvalidArgument("resample: target size must be positive");
    if (labels.empty()) throw InvalidArgument("resample: empty input");
    Image2D<std::uint8_t> out(out_w, out_h, 0, labels.dx, labels.dy);
    for (int y = 0; y < out_h; ++y) {
        const int iy = std::clamp(static_cast<int>(std::lround(source_coord(y, labels.height, out_h))), 0,
                                  labels.height - 1);
        for (int x = 0; x < out_w; ++x) {
            const int ix = std::clamp(static_cast<int>(std::lround(source_coord(x, labels.width, out_w))), 0,
                                      labels.width - 1);
            out(x, y) = labels(ix, iy);
        }
    }
    return out;
}

namespace {

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

}  // namespace

Slice2D gaussian_blur(const Slice2D& slice, double sigma) {
    if (!(sigma > 0.0) || slice.empty()) return slice;
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
        total += kernel[k + radius];
    }
    for (double& k : kernel) k /= total;

    Slice2D tmp = slice;
    for (int y = 0; y < slice.height; ++y) {
        for (int x = 0; x < slice.width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * slice(reflect_index(x + k, slice.width), y);
            tmp(x, y) = acc;
        }
    }
    Slice2D out = slice;
    for (int y = 0; y < slice.height; ++y) {
        for (int x = 0; x < slice.width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp(x, reflect_index(y + k, slice.height));
            out(x, y) = acc;
        }
    }
    return out;
}

Offset mask_centroid(const Mask2D& mask) {
    double sx = 0.0;
    double sy = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask(x, y)) {
                sx += x;
                sy += y;
                ++n;
            }
        }
    }
    if (n == 0) throw DegenerateInputError("centroid of an empty mask");
    return {static_cast<int>(std::lround(sx / static_cast<double>(n))),
            static_cast<int>(std::lround(sy / static_cast<double>(n)))};
}

CentroidCrop crop_at_centroid(const Slice2D& slice, const Mask2D& myo_mask, int size) {
    require_same_shape(slice, myo_mask, "crop_at_centroid: mask shape differs from slice");
    if (size <= 0) throw InvalidArgument("crop_at_centroid: size must be positive");
    const Offset c = mask_centroid(myo_mask);
    const Offset origin{c.x - size / 2, c.y - size / 2};
    return {extract_window(slice, origin, size, size), origin};
}

Slice2D mask_for_scar(const Slice2D& slice, const Mask2D& myo_mask, const Mask2D& cavity_mask,
                      const NormParams& params) {
    require_same_shape(slice, myo_mask, "mask_for_scar: myocardium mask shape differs");
    require_same_shape(slice, cavity_mask, "mask_for_scar: cavity mask shape differs");
    validate_params(params);

    std::vector<double> myo_values;
    for (std::size_t i = 0; i < slice.size(); ++i) {
        if (myo_mask.data[i] && cavity_mask.data[i]) {
            throw InvalidArgument("mask_for_scar: myocardium and cavity masks overlap");
        }
        if (myo_mask.data[i]) myo_values.push_back(slice.data[i]);
    }
    if (myo_values.empty()) throw DegenerateInputError("mask_for_scar: empty myocardium");
    std::sort(myo_values.begin(), myo_values.end());
    const double lo = percentile_sorted(myo_values, params.p_lo);
    const double hi = percentile_sorted(myo_values, params.p_hi);
    const bool constant = !(hi > lo);

    Slice2D out(slice.width, slice.height, 0.0, slice.dx, slice.dy);
    for (std::size_t i = 0; i < slice.size(); ++i) {
        if (cavity_mask.data[i]) {
            out.data[i] = scar_stage_cavity_value;
        } else if (myo_mask.data[i]) {
            double v = constant ? 0.0 : (slice.data[i] - lo) / (hi - lo);
            if (params.clamp) v = std::clamp(v, 0.0, 1.0);
            out.data[i] = v;
        }
    }
    return out;
}

}  // namespace scarq
