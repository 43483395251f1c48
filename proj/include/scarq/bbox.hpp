#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "scarq/image.hpp"
#include "scarq/preprocess.hpp"
#include "scarq/volume.hpp"

namespace scarq {

/// Axis-aligned box in continuous pixel coordinates (pixel i has its centre at i).
/// A pixel is covered when its centre lies inside the closed box.
struct BoundingBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 1.0;
    double h = 1.0;

    double left() const { return cx - 0.5 * w; }
    double right() const { return cx + 0.5 * w; }
    double top() const { return cy - 0.5 * h; }
    double bottom() const { return cy + 0.5 * h; }

    /// Inclusive pixel index range covered by the box.
    struct PixelRange {
        int x0, y0, x1, y1;
        int width() const { return x1 - x0 + 1; }
        int height() const { return y1 - y0 + 1; }
    };
    PixelRange pixels() const;

    bool covers(int x, int y) const;
    bool operator==(const BoundingBox&) const = default;
};

/// Center translation (pixels) and per-axis side scalings mapping a proposal onto a target box.
struct BoxTransform {
    double dx = 0.0;
    double dy = 0.0;
    double sx = 1.0;
    double sy = 1.0;

    bool operator==(const BoxTransform&) const = default;
};

inline constexpr int bbox_frame_size = 256;
inline constexpr double proposal_side = 134.0;
inline constexpr double default_box_margin = 0.10;

/// Box validity: w, h positive and finite.
void validate_box(const BoundingBox& box);

/// Fixed 134 x 134 proposal centred at (image_w/2, image_h/2).
BoundingBox proposal_box(int image_w = bbox_frame_size, int image_h = bbox_frame_size);

BoxTransform encode_transform(const BoundingBox& proposal, const BoundingBox& target);
BoundingBox apply_transform(const BoundingBox& proposal, const BoxTransform& t);

/// Grows each side by `margin` times the box extent on that axis.
BoundingBox expand_box(const BoundingBox& box, double margin);

/// Tight box (pixel-edge convention) around the nonzero pixels of a mask, then
/// grown by `margin` per side. Throws DegenerateInputError for an empty mask.
BoundingBox mask_box(const Mask2D& mask, double margin = 0.0);

/// Tight box around classes {1,2,3} (cavity plus wall) projected over all slices.
/// Throws DegenerateInputError when no LV voxel exists.
BoundingBox gt_box_from_labels(const LabelMap& labels, double margin = default_box_margin);

/// Index of the reference slice for box prediction: the second slice from the
/// base, or 0 (with a warning) for single-slice stacks.
int select_reference_slice(int slice_count);

struct HeuristicRegressorParams {
    /// Margin applied around the bright blood-pool blob, per side, as a fraction of its extent.
    double margin = 0.45;
};

/// Otsu-binarizes the slice, takes the largest bright 8-connected component and
/// returns the transform mapping the proposal onto its grown tight box. An empty
/// foreground yields the identity transform (with a warning).
BoxTransform heuristic_regressor(const Slice2D& normalized, const HeuristicRegressorParams& params = {});

/// Intersection over union of two boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Box prediction source for the localisation stage. Inputs are in the
/// 256 x 256 centre-cropped frame.
class BoxRegressor {
public:
    virtual ~BoxRegressor() = default;
    virtual std::string name() const = 0;
    /// `reference` is the normalized reference slice; `labels` (cropped to the
    /// same frame, all slices) is present when the subject has ground truth.
    virtual BoxTransform predict(std::string_view subject_id, const Slice2D& reference,
                                 const LabelMap* labels) const = 0;
};

class HeuristicBoxRegressor final : public BoxRegressor {
public:
    explicit HeuristicBoxRegressor(HeuristicRegressorParams params = {}) : params_(params) {}
    std::string name() const override { return "heuristic"; }
    BoxTransform predict(std::string_view, const Slice2D& reference, const LabelMap*) const override;

private:
    HeuristicRegressorParams params_;
};

/// Ground-truth box (label oracle).
class LabelBoxRegressor final : public BoxRegressor {
public:
    explicit LabelBoxRegressor(double margin = default_box_margin) : margin_(margin) {}
    std::string name() const override { return "oracle"; }
    BoxTransform predict(std::string_view subject_id, const Slice2D& reference, const LabelMap* labels) const override;

private:
    double margin_;
};

/// Predictions loaded from CSV rows `subject_id,dx,dy,sx,sy` (header optional).
class ExternalBoxRegressor final : public BoxRegressor {
public:
    explicit ExternalBoxRegressor(std::map<std::string, BoxTransform> predictions)
        : predictions_(std::move(predictions)) {}
    static ExternalBoxRegressor from_csv(const std::filesystem::path& path);
    static ExternalBoxRegressor from_csv_text(std::string_view text);

    std::string name() const override { return "external"; }
    BoxTransform predict(std::string_view subject_id, const Slice2D& reference, const LabelMap*) const override;
    const std::map<std::string, BoxTransform>& predictions() const { return predictions_; }

private:
    std::map<std::string, BoxTransform> predictions_;
};

/// "heuristic", "oracle", or "external:<csv path>".
std::unique_ptr<BoxRegressor> make_box_regressor(std::string_view spec, double gt_margin = default_box_margin);

}  // namespace scarq
