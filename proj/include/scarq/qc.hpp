#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scarq/bbox.hpp"
#include "scarq/components.hpp"
#include "scarq/image.hpp"

namespace scarq {

/// A myocardium mask is closed when its foreground is one 8-connected component
/// and its 4-connected complement has a component that does not reach the
/// image border (the enclosed cavity). Empty masks are not closed.
bool is_closed_myocardium(const Mask2D& myo_mask);

/// Union of complement components that do not touch the border.
/// Throws DegenerateInputError when the mask is not closed.
Mask2D interior_of(const Mask2D& myo_mask);

struct JitterParams {
    /// Magnitude range of the per-axis translation, as a fraction of the box side.
    double min_fraction = 0.14;
    double max_fraction = 0.21;
};

/// `count` copies of `box` whose centres are shifted by +/-U(min, max) * side
/// independently per axis, with a random sign. Deterministic per seed.
std::vector<BoundingBox> jitter_boxes(const BoundingBox& box, int count, std::uint64_t seed,
                                      const JitterParams& params = {});

enum class VoteRule {
    at_least,      ///< pixel kept when votes >= k
    greater_than,  ///< pixel kept when votes > k
};

enum class VoteSearch {
    smallest_k,  ///< k ascending from 1
    largest_k,   ///< k descending from the number of predictions
};

struct VoteOptions {
    VoteRule rule = VoteRule::at_least;
    VoteSearch search = VoteSearch::smallest_k;
};

struct VoteResult {
    Mask2D mask;
    /// k of the accepted candidate, 0 when falling back.
    int k = 0;
    bool closed = false;
    bool fell_back = false;
};

/// Per-pixel vote counts over the predictions.
Image2D<int> vote_counts(std::span<const Mask2D> predictions);

/// Thresholds the vote map at each k in search order and returns the first
/// closed candidate; falls back to `original` when none closes.
/// Throws InvalidArgument with fewer than two predictions.
VoteResult ensemble_revote(std::span<const Mask2D> predictions, const Mask2D& original,
                           const VoteOptions& options = {});

inline constexpr double default_min_scar_ratio = 0.03;

/// Removes each 8-connected scar component whose pixel count is below
/// min_ratio * |myocardium ∪ scar|. Components at exactly the ratio are kept.
/// Throws DegenerateInputError when the wall is empty.
Mask2D scar_ratio_filter(const Mask2D& scar, const Mask2D& myocardium, double min_ratio = default_min_scar_ratio);

}  // namespace scarq
