#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scarq/volume.hpp"

namespace scarq {

struct PhantomIntensities {
    double background = 0.3;
    double cavity = 0.6;
    double myocardium = 0.1;
    double scar = 0.95;
};

/// Short-axis LV phantom: a stack of annuli whose inner radius tapers linearly
/// from base (slice 0) to apex while the wall thickness stays constant, with an
/// optional subendocardial scar sector.
struct PhantomSpec {
    std::string id = "phantom";
    int nx = 160;
    int ny = 160;
    int nz = 8;
    Spacing spacing{1.25, 1.25, 10.0};
    /// LV centre in pixel coordinates.
    double cx = 79.5;
    double cy = 79.5;
    /// Radii at the base, mm.
    double inner_radius_mm = 20.0;
    double outer_radius_mm = 29.0;
    /// Inner-radius multiplier reached at the apical slice.
    double apex_scale = 0.6;
    /// Scar sector [start, end) in radians, measured with atan2(y - cy, x - cx);
    /// empty when end <= start.
    double scar_start = 0.0;
    double scar_end = 0.0;
    /// Fraction of the wall thickness, from the endocardium, that the scar occupies.
    double transmurality = 1.0;
    /// Inclusive slice range carrying scar; a negative last slice means "through the apex".
    int scar_first_slice = 0;
    int scar_last_slice = -1;
    PhantomIntensities intensities{};
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    bool has_scar() const;
};

/// Inner/outer radius (mm) on slice z.
struct SliceRadii {
    double inner;
    double outer;
};
SliceRadii phantom_radii(const PhantomSpec& spec, int z);

/// Rasterized labels plus class intensity and seeded Gaussian noise.
/// Throws InvalidArgument on an invalid spec and RangeError when the LV does not
/// fit inside the grid with a one-pixel border.
SubjectRecord generate_phantom(const PhantomSpec& spec);

/// Scar share of the wall area for a sector of angular width `sector` (radians)
/// covering the inner `transmurality` of an annulus.
double analytic_scar_fraction(double inner, double outer, double sector, double transmurality);

struct PopulationRanges {
    int nx = 256;
    int ny = 256;
    int min_slices = 6;
    int max_slices = 9;
    Spacing spacing{1.25, 1.25, 10.0};
    double inner_radius_mm[2] = {16.0, 24.0};
    double wall_thickness_mm[2] = {7.0, 11.0};
    double apex_scale[2] = {0.5, 0.7};
    double centre_offset_px = 15.0;
    double scar_width_deg[2] = {50.0, 140.0};
    double transmurality[2] = {0.5, 1.0};
    double noise_sigma = 0.02;
    PhantomIntensities intensities{};
};

/// `n` phantoms, round(n * pathological_fraction) of them with scar. Which
/// subjects are pathological is a seeded shuffle; geometry is drawn per subject
/// from `ranges` with seeds derived from `seed`.
std::vector<SubjectRecord> generate_population(int n, double pathological_fraction, std::uint64_t seed,
                                               const PopulationRanges& ranges = {});

/// Per-subject specs behind generate_population (same arguments, same order).
std::vector<PhantomSpec> population_specs(int n, double pathological_fraction, std::uint64_t seed,
                                          const PopulationRanges& ranges = {});

}  // namespace scarq
