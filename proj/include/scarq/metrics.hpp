#pragma once

#include <span>
#include <vector>

#include "scarq/image.hpp"
#include "scarq/volume.hpp"

namespace scarq {

/// 2|A∩B| / (|A|+|B|); two empty masks score 1.
double dice(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
double dice(const Mask3D& a, const Mask3D& b);
double dice(const Mask2D& a, const Mask2D& b);

enum class HausdorffMode {
    max,            ///< classical symmetric Hausdorff distance
    percentile95,   ///< 95th percentile of the pooled directed surface distances
};

/// Foreground voxels with at least one 6-neighbour outside the mask (grid
/// edges count as outside).
Mask3D boundary(const Mask3D& mask);

/// Symmetric Hausdorff distance in mm between the boundary voxel centres of
/// two masks, with anisotropic spacing. Throws DegenerateInputError if either
/// mask is empty and DimensionError on mismatched grids.
double hausdorff_mm(const Mask3D& a, const Mask3D& b, HausdorffMode mode = HausdorffMode::max);

/// 2D variant on one slice (4-neighbour boundary).
double hausdorff_mm(const Mask2D& a, const Mask2D& b, HausdorffMode mode = HausdorffMode::max);

/// |vol(a) - vol(b)| in cm^3.
double volume_difference(const Mask3D& a, const Mask3D& b);

/// 100 * vol(scar) / vol(myocardium ∪ scar). Throws DegenerateInputError when the wall is empty.
double scar_burden(const Mask3D& scar, const Mask3D& myocardium);

struct PairedSeries {
    std::vector<double> manual;
    std::vector<double> automatic;

    /// Throws InvalidArgument unless both have the same length >= 2.
    void validate() const;
};

double pearson_r(const PairedSeries& series);

struct AgreementResult {
    double bias = 0.0;
    double sd = 0.0;
    double loa_low = 0.0;
    double loa_high = 0.0;
};

inline constexpr double loa_z = 1.96;

/// Differences automatic - manual; bias = mean, limits = bias ± 1.96 * sample sd.
AgreementResult bland_altman(const PairedSeries& series);

/// Percentage of subjects whose predicted scar flag matches the ground truth.
double classification_accuracy(std::span<const bool> predicted, std::span<const bool> truth);

enum class Alternative { two_sided, greater, less };

struct WilcoxonResult {
    double statistic = 0.0;  ///< W+, the rank sum of positive differences
    double p_value = 1.0;
    int n = 0;               ///< nonzero differences used
    bool exact = false;
};

inline constexpr int wilcoxon_exact_max_n = 12;

/// Wilcoxon signed-rank test on paired differences. Zeros are dropped, ties
/// take mid-ranks. n <= 12 uses the exact permutation distribution; larger n
/// uses the normal approximation with tie correction.
/// Throws DegenerateInputError when all differences are zero and
/// InvalidArgument with fewer than 5 nonzero differences.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences, Alternative alternative);

}  // namespace scarq
