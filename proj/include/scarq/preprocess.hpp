#pragma once

#include <span>
#include <utility>

#include "scarq/image.hpp"

namespace scarq {

struct NormParams {
    double p_lo = 5.0;
    double p_hi = 95.0;
    bool clamp = true;
};

/// Percentile with linear interpolation between order statistics
/// (rank = p/100 * (n-1)). Throws DegenerateInputError on empty input.
double percentile(std::span<const double> values, double p);

/// Min-max normalization with the p_lo/p_hi percentiles as pseudo-min/max.
/// Throws DegenerateInputError when the two percentiles coincide.
Slice2D percentile_normalize(const Slice2D& slice, const NormParams& params = {});

/// Centered crop or zero-pad to out_w x out_h. For odd size differences the
/// extra pixel is padded (or cropped away) on the high side, so cropping back
/// to the original size is an exact inverse.
template <typename T>
Image2D<T> crop_or_pad(const Image2D<T>& in, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0) throw InvalidArgument("crop_or_pad: target must be positive");
    Image2D<T> out(out_w, out_h, T{}, in.dx, in.dy);
    // Output pixel (x, y) reads input pixel (x + ox, y + oy).
    const int ox = (in.width - out_w) >= 0 ? (in.width - out_w) / 2 : -((out_w - in.width) / 2);
    const int oy = (in.height - out_h) >= 0 ? (in.height - out_h) / 2 : -((out_h - in.height) / 2);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            out(x, y) = in.get_or(x + ox, y + oy, T{});
        }
    }
    return out;
}

template <typename T>
Image2D<T> crop_or_pad(const Image2D<T>& in, int target = 256) {
    if (target <= 0 || target % 2 != 0) throw InvalidArgument("crop_or_pad: target must be even and positive");
    return crop_or_pad(in, target, target);
}

enum class ResampleMode { bilinear, nearest };

/// Resampling with corner-aligned pixel centers: output pixel i maps to input
/// coordinate i * (in - 1) / (out - 1).
Slice2D resample(const Slice2D& slice, int out_w, int out_h, ResampleMode mode = ResampleMode::bilinear);

/// Nearest-neighbour resampling for masks and label slices.
Image2D<std::uint8_t> resample_nearest(const Image2D<std::uint8_t>& labels, int out_w, int out_h);

/// Separable Gaussian blur, kernel truncated at 4 sigma, mirrored borders.
/// sigma <= 0 returns the input unchanged.
Slice2D gaussian_blur(const Slice2D& slice, double sigma);

/// Top-left corner of a crop window in the source frame.
struct Offset {
    int x = 0;
    int y = 0;
    bool operator==(const Offset&) const = default;
};

/// Copies the size x size window whose top-left corner is `origin`; pixels off the source are zero.
template <typename T>
Image2D<T> extract_window(const Image2D<T>& in, Offset origin, int width, int height) {
    Image2D<T> out(width, height, T{}, in.dx, in.dy);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) out(x, y) = in.get_or(x + origin.x, y + origin.y, T{});
    }
    return out;
}

/// Writes `window` back into a frame of the given size at `origin`; pixels falling off the frame are dropped.
template <typename T>
Image2D<T> paste_window(const Image2D<T>& window, Offset origin, int frame_w, int frame_h) {
    Image2D<T> out(frame_w, frame_h, T{}, window.dx, window.dy);
    for (int y = 0; y < window.height; ++y) {
        for (int x = 0; x < window.width; ++x) {
            const int fx = x + origin.x;
            const int fy = y + origin.y;
            if (out.contains(fx, fy)) out(fx, fy) = window(x, y);
        }
    }
    return out;
}

/// Integer-rounded centroid of the nonzero mask pixels.
Offset mask_centroid(const Mask2D& mask);

struct CentroidCrop {
    Slice2D slice;
    Offset offset;
};

/// size x size window centered on the mask centroid (window origin = centroid - size/2).
CentroidCrop crop_at_centroid(const Slice2D& slice, const Mask2D& myo_mask, int size = 64);

/// Fixed intensity assigned to cavity pixels in the scar-stage input.
inline constexpr double scar_stage_cavity_value = 2.5;

/// Scar-stage input: zero outside myocardium and cavity, myocardium rescaled by
/// its own 5th/95th percentiles (clamped to [0,1]), cavity set to 2.5.
/// A constant-valued myocardium maps to 0.
Slice2D mask_for_scar(const Slice2D& slice, const Mask2D& myo_mask, const Mask2D& cavity_mask,
                      const NormParams& params = {});

}  // namespace scarq
