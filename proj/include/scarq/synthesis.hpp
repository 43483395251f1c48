#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scarq/bbox.hpp"
#include "scarq/image.hpp"
#include "scarq/volume.hpp"

namespace scarq {

// ---------------------------------------------------------------------------
// Label-map augmentation

enum class MorphOp { none, dilate, open };

std::string_view morph_name(MorphOp op);
MorphOp parse_morph(std::string_view name);

/// One label augmentation recipe. Rotation must be a multiple of 60 degrees.
struct LabelAugSpec {
    int rotation_deg = 0;
    bool elastic = false;
    double alpha = 50.0;
    double sigma = 5.0;
    std::uint64_t elastic_seed = 0;
    MorphOp morph = MorphOp::none;
    int morph_radius = 1;
};

/// Rotation about the slice centre ((w-1)/2, (h-1)/2) with nearest-neighbour
/// sampling; pixels mapped from outside the slice become background.
/// Throws InvalidArgument unless `deg` is a multiple of 60.
LabelSlice rotate_labels(const LabelSlice& labels, int deg);

/// Random elastic deformation: per-pixel U(-1,1) displacements per axis,
/// Gaussian-smoothed with `sigma`, scaled by `alpha`; labels are resampled
/// nearest-neighbour with border clamping.
LabelSlice elastic_deform(const LabelSlice& labels, double alpha, double sigma, std::uint64_t seed);

/// Disk-shaped structuring element offsets with dx^2 + dy^2 <= r^2.
std::vector<std::pair<int, int>> disk_offsets(int radius);

/// Binary morphology on the scar class. Dilation only converts healthy
/// myocardium into scar; opening turns removed scar back into myocardium, so the
/// wall (myocardium ∪ scar) never changes.
LabelSlice morph(const LabelSlice& labels, MorphOp op, int radius);

/// Applies rotation, elastic deformation (seed derived per slice) and
/// morphology to every slice, in that order.
LabelMap augment_labels(const LabelMap& labels, const LabelAugSpec& spec);

// ---------------------------------------------------------------------------
// Synthesis requests

/// Which segmentation stages may train on a synthetic subject. Swapped
/// label/style pairs feed the myocardium stage only; augmented labels feed both.
enum class SynthesisUse { myocardium, myocardium_and_scar };

std::string_view use_name(SynthesisUse use);

struct SynthesisRequest {
    std::string output_id;
    std::string source_subject;
    LabelMap labels;
    SubjectRecord style;
    LabelAugSpec augmentation;
    SynthesisUse use = SynthesisUse::myocardium_and_scar;
};

/// Pairs one subject's labels with the other subject's image as style. The
/// pairing is meant to cross pathological and normal subjects; same-pathology
/// pairs are allowed with a warning.
SynthesisRequest swap_label_style(const SubjectRecord& labels_from, const SubjectRecord& style_from,
                                  std::string output_id);

/// Augments `source`'s labels with `spec`; `style` supplies the appearance.
SynthesisRequest make_augmented_request(const SubjectRecord& source, const SubjectRecord& style,
                                        const LabelAugSpec& spec, std::string output_id);

struct SynthesisParams {
    double blend_sigma = 1.0;
    /// Additive noise sd as a fraction of the style image's intensity range.
    double noise_fraction = 0.02;
};

/// Label-conditioned procedural image: every class is filled with Gaussian
/// samples moment-matched to the style image's mean and sd for that class, the
/// result is blurred with `blend_sigma`, each class is shifted back to its style
/// mean, and additive Gaussian noise is applied.
/// Classes absent from the style fall back to global style statistics.
Volume synthesize_image(const SynthesisRequest& request, const SynthesisParams& params, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Bounding-box training augmentation

struct BboxAugSpec {
    double noise_mu = 0.1;
    double noise_sigma = 0.1;
    double blur_sigma = 1.5;
    double shear_deg[2] = {-20.0, 20.0};
    double rotation_deg[2] = {-90.0, 90.0};
    /// Magnitude range of the per-axis translation, fraction of image size; sign is random.
    double translation[2] = {0.14, 0.21};
    double scale[2] = {0.5, 1.5};
    /// Chance that each augmentation is applied.
    double probability = 0.5;
    std::uint64_t seed = 0;
};

/// Concrete draw from a BboxAugSpec. Disabled operations hold their identity value.
struct BboxAugParams {
    bool noise = false;
    double noise_mu = 0.0;
    double noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;
    bool blur = false;
    double blur_sigma = 0.0;
    double shear_deg = 0.0;
    double rotation_deg = 0.0;
    double tx = 0.0;
    double ty = 0.0;
    double scale = 1.0;

    bool is_geometric_identity() const;
};

BboxAugParams sample_bbox_aug(const BboxAugSpec& spec);

/// Geometric transform about the image centre (scale, then shear, then
/// rotation, then translation) applied to the image (bilinear, zero fill) and to
/// the box corners, whose hull becomes the new box; then blur and noise on the
/// image only.
std::pair<Slice2D, BoundingBox> apply_bbox_aug(const Slice2D& image, const BoundingBox& box,
                                               const BboxAugParams& params);

std::pair<Slice2D, BoundingBox> augment_for_bbox(const Slice2D& image, const BoundingBox& box,
                                                 const BboxAugSpec& spec);

// ---------------------------------------------------------------------------
// Dataset emission

struct ManifestRow {
    std::string output_id;
    std::string source_subject;
    std::string style_subject;
    int rotation_deg = 0;
    std::string elastic_seed;
    std::string morph_op;
    int morph_radius = 0;
    std::string stage;
};

inline constexpr const char* manifest_header =
    "output_id,source_subject,style_subject,rotation_deg,elastic_seed,morph_op,morph_radius,stage";

ManifestRow manifest_row(const SynthesisRequest& request);
std::string format_manifest(std::span<const ManifestRow> rows);

/// Writes `<output_id>_image.nii` (float32) and `<output_id>_label.nii` (uint8)
/// per request plus `manifest.csv`. Request i is synthesized with seed
/// derive_seed(root_seed, i). Throws IoError when the directory is unusable.
std::vector<ManifestRow> emit_dataset(std::span<const SynthesisRequest> requests,
                                      const std::filesystem::path& out_dir, std::uint64_t root_seed,
                                      const SynthesisParams& params = {});

}  // namespace scarq
