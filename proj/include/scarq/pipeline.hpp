#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scarq/bbox.hpp"
#include "scarq/metrics.hpp"
#include "scarq/qc.hpp"
#include "scarq/synthesis.hpp"
#include "scarq/volume.hpp"

namespace scarq {

/// Pipeline layouts:
///  a  box -> myocardium -> scar (cascaded)
///  b  myocardium -> scar, whole 256 frame
///  c  box -> combined myocardium + scar
///  d  combined myocardium + scar, whole 256 frame
///  e  as a; the synthetic training set is emitted separately
enum class Variant { a, b, c, d, e };

char variant_letter(Variant v);
/// Throws ConfigError for anything but a single letter a..e.
Variant parse_variant(std::string_view text);
bool variant_uses_box(Variant v);
/// True when scar runs as its own stage on the centroid crop.
bool variant_is_cascaded(Variant v);

struct PipelineConfig {
    Variant variant = Variant::a;
    /// "heuristic", "oracle", "external:<csv>"; empty picks the variant default
    /// (heuristic with a box stage, none without).
    std::string regressor;
    std::string myo_seg = "em";
    std::string scar_seg = "nsd";
    double nsd_n = 5.0;
    /// Clamp the 5/95 percentile normalization of stage inputs to [0, 1].
    bool norm_clamp = false;
    bool revote = true;
    bool ratio_filter = true;
    double min_scar_ratio = default_min_scar_ratio;
    VoteOptions vote;
    JitterParams jitter;
    int jitter_count = 10;
    std::uint64_t seed = 0;
    double gt_margin = default_box_margin;
    int frame_size = 256;
    /// Myocardium-stage input size for unguided segmenters.
    int work_size = 128;
    int scar_crop = 64;
    /// Directory of `<id>_<stage>.nii` predictions for the "import" segmenters.
    std::string prediction_dir;
    HausdorffMode hd_mode = HausdorffMode::max;
    /// Variant e: where the synthetic set goes, how many augmented copies per
    /// subject, and whether label/style swaps are added.
    std::string synth_dir;
    int synth_augment = 2;
    bool synth_swap = true;
    std::uint64_t synth_seed = 0;

    /// Regressor after resolving the variant default ("none" without a box stage).
    std::string effective_regressor() const;
    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

/// Applies flat `key = value` lines (blank lines and `#` comments ignored) on top of `base`.
/// Unknown keys and malformed values throw ConfigError.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
/// Round-trippable `key=value` text.
std::string format_config(const PipelineConfig& config);
/// Short tag such as "a:heuristic/em/nsd".
std::string config_label(const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Reports

inline constexpr const char* slice_all = "all";
inline constexpr const char* slice_mean = "mean";

struct MetricRow {
    std::string subject_id;
    /// Slice index, "all" (3D, primary) or "mean" (mean of per-slice DSC).
    std::string slice;
    std::string cls;  ///< "myocardium" (wall) or "scar"
    double dsc = 0.0;
    double hd_mm = 0.0;
    double vol_manual_cm3 = 0.0;
    double vol_auto_cm3 = 0.0;
    double vol_diff_cm3 = 0.0;
    double scar_burden_pct = 0.0;
};

struct QcEvent {
    std::string subject_id;
    int slice = -1;  ///< -1 for subject-level events
    std::string kind;
    std::string detail;
};

struct SubjectSummary {
    std::string subject_id;
    bool scar_predicted = false;
    std::optional<bool> scar_manual;
    int failed_slices = 0;
    int slices = 0;
};

struct QuantReport {
    std::vector<MetricRow> rows;
    std::vector<QcEvent> events;
    std::vector<SubjectSummary> subjects;
    std::string config_echo;

    bool partial() const;
    /// Rows ordered by subject, slice (numeric, then "all", "mean") and class;
    /// events by subject and slice; subjects by id.
    void sort();
    void append(const QuantReport& other);
};

struct SubjectOutput {
    QuantReport report;
    /// Predicted labels in the original frame: 1 cavity, 2 myocardium, 3 scar.
    LabelMap prediction;
};

/// Per-subject seed, independent of processing order.
std::uint64_t subject_seed(std::uint64_t root, std::string_view subject_id);

/// Rows comparing `automatic` to `manual`: one per slice and class, plus "all" and "mean".
std::vector<MetricRow> evaluate_prediction(std::string_view subject_id, const LabelMap& manual,
                                           const LabelMap& automatic, HausdorffMode mode = HausdorffMode::max);

/// Volume-only rows for subjects without ground truth.
std::vector<MetricRow> describe_prediction(std::string_view subject_id, const LabelMap& automatic);

/// Runs the configured variant on one subject. Per-slice stage errors are
/// logged as "error" events and leave that slice empty.
SubjectOutput run_subject(const SubjectRecord& subject, const PipelineConfig& config);

/// Same as run_subject with the myocardium stage replaced by the ground-truth
/// wall. Throws InvalidArgument when the subject has no labels.
SubjectOutput replace_with_gt_myocardium(const SubjectRecord& subject, const PipelineConfig& config);

struct DatasetRun {
    QuantReport report;
    std::vector<LabelMap> predictions;  ///< same order as the input subjects
};

/// run_subject over all subjects on `threads` workers (0 = hardware concurrency).
/// Output does not depend on the thread count.
DatasetRun run_dataset(std::span<const SubjectRecord> subjects, const PipelineConfig& config, int threads = 0,
                       bool gt_myocardium = false);

// ---------------------------------------------------------------------------
// Ablation

struct AblationRow {
    std::string config;
    std::string subject_id;
    int slice = 0;
    std::string cls;
    double dsc = 0.0;
};

struct AblationSummary {
    std::string config;
    std::string cls;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
};

struct AblationComparison {
    std::string config_a;
    std::string config_b;
    std::string cls;
    double mean_difference = 0.0;  ///< a - b
    double p_value = 1.0;
    int n = 0;  ///< nonzero paired differences
    std::string note;
};

struct AblationResult {
    std::vector<AblationRow> rows;
    std::vector<AblationSummary> summaries;
    std::vector<AblationComparison> comparisons;
};

/// Runs every config on every subject and compares per-slice DSC pairwise with
/// a two-sided Wilcoxon signed-rank test. Identical DSC series give p = 1.
/// Throws InvalidArgument with fewer than two configs.
AblationResult run_ablation(std::span<const SubjectRecord> subjects, std::span<const PipelineConfig> configs,
                            int threads = 0);

/// "0.861 (0.052)" style.
std::string format_mean_sd(double mean, double sd, int digits = 3);
std::string format_ablation_summary(const AblationResult& result);
std::string format_ablation_csv(const AblationResult& result);

// ---------------------------------------------------------------------------
// Synthetic training set (variant e)

/// Requests for the synthetic set: when `synth_swap` is on, pathological and
/// normal subjects (sorted by id) are paired index-wise and swapped both ways;
/// then `synth_augment` augmented copies per labelled subject with rotation,
/// elastic, morphology and style subject drawn from `synth_seed`.
/// Subjects without labels are skipped.
std::vector<SynthesisRequest> plan_synthetic_dataset(std::span<const SubjectRecord> subjects,
                                                     const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Splits

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

/// Seeded shuffle; the test set holds round(n * test_fraction) ids, each side kept in input order.
Split split_subjects(std::span<const std::string> ids, double test_fraction, std::uint64_t seed);

}  // namespace scarq
