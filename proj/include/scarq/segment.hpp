#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "scarq/image.hpp"
#include "scarq/mixture.hpp"
#include "scarq/volume.hpp"

namespace scarq {

// ---------------------------------------------------------------------------
// Threshold rules

inline constexpr int otsu_bins = 256;

/// Otsu split of a histogram: bins [0, bin] form the low class.
/// Maximizes between-class variance, computed exactly from integer level sums
/// as (N*S0 - n0*S)^2 / (n0*n1); ties go to the lowest bin.
/// Throws DegenerateInputError when fewer than two bins are occupied.
int otsu_histogram_split(std::span<const std::uint64_t> counts);

struct OtsuResult {
    /// Last bin of the low class.
    int bin = 0;
    /// Midpoint between the largest low-class value and the smallest high-class value;
    /// the high class is exactly {v > threshold}.
    double threshold = 0.0;
};

/// Otsu threshold over a 256-bin histogram spanning [min, max] of the values.
OtsuResult otsu_threshold(std::span<const double> values);

/// Histogram bin of `v` for `bins` uniform bins over [lo, hi].
int histogram_bin(double v, double lo, double hi, int bins = otsu_bins);

struct ThresholdMask {
    Mask2D mask;
    double threshold = 0.0;
};

/// mean + n * sd.
constexpr double nsd_cutoff(double mean, double sd, double n) { return mean + n * sd; }

/// nSD rule: myocardium pixels strictly above mean(remote) + n * sd(remote),
/// with the population standard deviation. The remote region must lie inside
/// the myocardium and contain at least two pixels.
ThresholdMask nsd_threshold(const Slice2D& image, const Mask2D& myocardium, const Mask2D& remote, double n = 5.0);

/// FWHM rule: myocardium pixels at or above half the maximum inside the seed region.
ThresholdMask fwhm_threshold(const Slice2D& image, const Mask2D& myocardium, const Mask2D& seed);

/// Default FWHM seed: the 8-connected region of myocardium pixels at or above half
/// of the myocardial maximum that contains the brightest myocardium pixel.
Mask2D default_fwhm_seed(const Slice2D& image, const Mask2D& myocardium);

/// Splits the myocardium into `sectors` equal angular sectors about its centroid
/// and returns the sector with the lowest mean intensity (sectors with fewer
/// than two pixels are skipped).
Mask2D darkest_sector(const Slice2D& image, const Mask2D& myocardium, int sectors = 6);

/// Posterior for the brighter component above which a pixel is called scar.
inline constexpr double em_scar_posterior = 0.5;
/// Minimum weight of the brighter component for scar to be reported.
inline constexpr double em_scar_min_weight = 0.01;

/// Two-component EM scar rule on myocardium intensities. Returns an empty mask
/// when the brighter component carries less than 1% of the weight or when a
/// single Gaussian explains the myocardium better (lower BIC). Inputs with fewer
/// than four myocardium pixels fall back to splitting at the mid-range.
Mask2D em_scar_segment(const Slice2D& image, const Mask2D& myocardium);

/// Otsu threshold on the myocardium intensities.
Mask2D otsu_scar_segment(const Slice2D& image, const Mask2D& myocardium);

/// Classical myocardium segmenter used in place of a trained network.
///
/// Fits a three-component mixture (dark myocardium, intermediate background,
/// bright blood pool and enhancement), takes the bright blob nearest the image
/// centre, grows it through dark and bright pixels into the LV, and splits the
/// LV into cavity and wall along the endocardial radius traced per angle.
/// Angles whose first dark pixel lies well beyond the median radius (bright
/// subendocardial enhancement) take the radius interpolated from neighbours.
/// Returns an empty mask when nothing plausible is found.
Mask2D phantom_myo_segmenter(const Slice2D& slice);

// ---------------------------------------------------------------------------
// Stage interfaces

enum class Stage { myocardium, scar };

std::string_view stage_name(Stage stage);

/// Myocardium stage. `guide`, when present, holds reference labels aligned to
/// the stage frame (ground truth or imported predictions).
class MyocardiumSegmenter {
public:
    virtual ~MyocardiumSegmenter() = default;
    virtual std::string name() const = 0;
    /// True when the segmenter needs `guide` labels.
    virtual bool needs_guide() const { return false; }
    virtual Mask2D segment(const Slice2D& image, const LabelSlice* guide) const = 0;
};

/// Scar stage. Output is always a subset of `myocardium`.
class ScarSegmenter {
public:
    virtual ~ScarSegmenter() = default;
    virtual std::string name() const = 0;
    virtual bool needs_guide() const { return false; }
    virtual Mask2D segment(const Slice2D& image, const Mask2D& myocardium, const LabelSlice* guide) const = 0;
};

/// Known names: "em" (phantom_myo_segmenter), "oracle", "import".
/// Throws ConfigError for anything else.
std::unique_ptr<MyocardiumSegmenter> make_myocardium_segmenter(std::string_view name);

/// Known names: "nsd", "fwhm", "em", "otsu", "oracle", "import".
std::unique_ptr<ScarSegmenter> make_scar_segmenter(std::string_view name, double nsd_n = 5.0);

/// Prediction file for a subject and stage: `<dir>/<subject_id>_<stage>.nii`.
std::filesystem::path prediction_path(const std::filesystem::path& dir, std::string_view subject_id, Stage stage);

/// Loads a predicted label map and checks it against the subject's dims.
LabelMap import_prediction(const std::filesystem::path& dir, std::string_view subject_id, Stage stage,
                           const Dims& expected);

/// Mask of the requested stage's class from an imported prediction:
/// myocardium = classes {2,3}, scar = class 3.
Mask3D import_masks(const std::filesystem::path& dir, std::string_view subject_id, Stage stage,
                    const Dims& expected);

}  // namespace scarq
