#pragma once

#include <cstdint>
#include <vector>

#include "scarq/image.hpp"

namespace scarq {

enum class Connectivity { four = 4, eight = 8 };

/// Connected components of a binary mask. Component ids are dense (1..N) and
/// assigned in raster order of each component's first pixel; 0 marks background.
struct ComponentSet {
    Image2D<std::int32_t> labels;
    std::vector<std::size_t> sizes;  // sizes[id - 1]
    Connectivity connectivity = Connectivity::eight;

    std::size_t count() const { return sizes.size(); }
    /// Mask of a single component.
    Mask2D component_mask(std::int32_t id) const;
    /// Id of the largest component (lowest id on ties), 0 when empty.
    std::int32_t largest() const;
};

/// Two-pass labeling with a union-find equivalence table.
ComponentSet connected_components(const Mask2D& mask, Connectivity connectivity);

/// Complement of a mask (0 <-> 1).
Mask2D invert(const Mask2D& mask);

/// Fills every background region that does not touch the image border.
Mask2D fill_holes(const Mask2D& mask);

}  // namespace scarq
