#include "scarq/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>

#include "scarq/preprocess.hpp"
#include "scarq/rng.hpp"
#include "scarq/segment.hpp"

namespace scarq {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& key, const std::string& value) {
    double out = 0.0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
    }
    return out;
}

long long parse_integer(const std::string& key, const std::string& value) {
    long long out = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("config: '" + key + "' expects an integer, got '" + value + "'");
    }
    return out;
}

std::uint64_t parse_seed(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("config: '" + key + "' expects an unsigned integer, got '" + value + "'");
    }
    return out;
}

int parse_int(const std::string& key, const std::string& value) {
    const long long v = parse_integer(key, value);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        throw ConfigError("config: '" + key + "' out of range");
    }
    return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw ConfigError("config: '" + key + "' expects a boolean, got '" + value + "'");
}

std::string number_text(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

bool known_scar_segmenter(std::string_view name) {
    return name == "nsd" || name == "fwhm" || name == "em" || name == "otsu" || name == "oracle" || name == "import";
}

bool known_myo_segmenter(std::string_view name) { return name == "em" || name == "oracle" || name == "import"; }

}  // namespace

char variant_letter(Variant v) { return static_cast<char>('a' + static_cast<int>(v)); }

Variant parse_variant(std::string_view text) {
    if (text.size() == 1 && text[0] >= 'a' && text[0] <= 'e') return static_cast<Variant>(text[0] - 'a');
    throw ConfigError("unknown variant '" + std::string(text) + "' (expected a..e)");
}

bool variant_uses_box(Variant v) { return v == Variant::a || v == Variant::c || v == Variant::e; }

bool variant_is_cascaded(Variant v) { return v == Variant::a || v == Variant::b || v == Variant::e; }

std::string PipelineConfig::effective_regressor() const {
    if (!regressor.empty()) return regressor;
    return variant_uses_box(variant) ? "heuristic" : "none";
}

void PipelineConfig::validate() const {
    const std::string reg = effective_regressor();
    if (!variant_uses_box(variant)) {
        if (reg != "none") {
            throw ConfigError(std::string("variant ") + variant_letter(variant) +
                              " has no bounding-box stage but regressor '" + reg + "' was requested");
        }
    } else if (reg != "heuristic" && reg != "oracle" && reg.rfind("external:", 0) != 0) {
        throw ConfigError("unknown regressor '" + reg + "'");
    }
    if (!known_myo_segmenter(myo_seg)) throw ConfigError("unknown myocardium segmenter '" + myo_seg + "'");
    if (!known_scar_segmenter(scar_seg)) throw ConfigError("unknown scar segmenter '" + scar_seg + "'");
    if ((myo_seg == "import" || scar_seg == "import") && prediction_dir.empty()) {
        throw ConfigError("import segmenters need prediction_dir");
    }
    if (!(nsd_n > 0.0)) throw ConfigError("nsd_n must be positive");
    if (!(min_scar_ratio >= 0.0 && min_scar_ratio <= 1.0)) throw ConfigError("min_scar_ratio must lie in [0, 1]");
    if (!(jitter.min_fraction >= 0.0 && jitter.min_fraction <= jitter.max_fraction)) {
        throw ConfigError("jitter range must satisfy 0 <= min <= max");
    }
    if (revote && jitter_count < 2) throw ConfigError("jitter_count must be at least 2");
    if (frame_size <= 0 || frame_size % 2 != 0) throw ConfigError("frame_size must be even and positive");
    if (work_size < 8) throw ConfigError("work_size must be at least 8");
    if (scar_crop <= 0) throw ConfigError("scar_crop must be positive");
    if (!(gt_margin >= 0.0)) throw ConfigError("gt_margin must be non-negative");
    if (synth_augment < 0) throw ConfigError("synth_augment must be non-negative");
}

PipelineConfig parse_config(std::string_view text, PipelineConfig c) {
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));

        if (key == "variant") c.variant = parse_variant(value);
        else if (key == "regressor") c.regressor = value;
        else if (key == "myo_seg") c.myo_seg = value;
        else if (key == "scar_seg") c.scar_seg = value;
        else if (key == "nsd_n") c.nsd_n = parse_number(key, value);
        else if (key == "norm_clamp") c.norm_clamp = parse_bool(key, value);
        else if (key == "revote") c.revote = parse_bool(key, value);
        else if (key == "ratio_filter") c.ratio_filter = parse_bool(key, value);
        else if (key == "min_scar_ratio") c.min_scar_ratio = parse_number(key, value);
        else if (key == "vote_rule") {
            if (value == "at_least") c.vote.rule = VoteRule::at_least;
            else if (value == "greater_than") c.vote.rule = VoteRule::greater_than;
            else throw ConfigError("config: vote_rule must be at_least or greater_than");
        } else if (key == "vote_search") {
            if (value == "smallest_k") c.vote.search = VoteSearch::smallest_k;
            else if (value == "largest_k") c.vote.search = VoteSearch::largest_k;
            else throw ConfigError("config: vote_search must be smallest_k or largest_k");
        } else if (key == "jitter_min") c.jitter.min_fraction = parse_number(key, value);
        else if (key == "jitter_max") c.jitter.max_fraction = parse_number(key, value);
        else if (key == "jitter_count") c.jitter_count = parse_int(key, value);
        else if (key == "seed") c.seed = parse_seed(key, value);
        else if (key == "gt_margin") c.gt_margin = parse_number(key, value);
        else if (key == "frame_size") c.frame_size = parse_int(key, value);
        else if (key == "work_size") c.work_size = parse_int(key, value);
        else if (key == "scar_crop") c.scar_crop = parse_int(key, value);
        else if (key == "prediction_dir") c.prediction_dir = value;
        else if (key == "hd_mode") {
            if (value == "max") c.hd_mode = HausdorffMode::max;
            else if (value == "p95") c.hd_mode = HausdorffMode::percentile95;
            else throw ConfigError("config: hd_mode must be max or p95");
        } else if (key == "synth_dir") c.synth_dir = value;
        else if (key == "synth_augment") c.synth_augment = parse_int(key, value);
        else if (key == "synth_swap") c.synth_swap = parse_bool(key, value);
        else if (key == "synth_seed") c.synth_seed = parse_seed(key, value);
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), std::move(base));
}

std::string format_config(const PipelineConfig& c) {
    std::ostringstream out;
    out << "variant=" << variant_letter(c.variant) << '\n'
        << "regressor=" << c.effective_regressor() << '\n'
        << "myo_seg=" << c.myo_seg << '\n'
        << "scar_seg=" << c.scar_seg << '\n'
        << "nsd_n=" << number_text(c.nsd_n) << '\n'
        << "norm_clamp=" << (c.norm_clamp ? "true" : "false") << '\n'
        << "revote=" << (c.revote ? "true" : "false") << '\n'
        << "ratio_filter=" << (c.ratio_filter ? "true" : "false") << '\n'
        << "min_scar_ratio=" << number_text(c.min_scar_ratio) << '\n'
        << "vote_rule=" << (c.vote.rule == VoteRule::at_least ? "at_least" : "greater_than") << '\n'
        << "vote_search=" << (c.vote.search == VoteSearch::smallest_k ? "smallest_k" : "largest_k") << '\n'
        << "jitter_min=" << number_text(c.jitter.min_fraction) << '\n'
        << "jitter_max=" << number_text(c.jitter.max_fraction) << '\n'
        << "jitter_count=" << c.jitter_count << '\n'
        << "seed=" << c.seed << '\n'
        << "gt_margin=" << number_text(c.gt_margin) << '\n'
        << "frame_size=" << c.frame_size << '\n'
        << "work_size=" << c.work_size << '\n'
        << "scar_crop=" << c.scar_crop << '\n'
        << "prediction_dir=" << c.prediction_dir << '\n'
        << "hd_mode=" << (c.hd_mode == HausdorffMode::max ? "max" : "p95") << '\n'
        << "synth_dir=" << c.synth_dir << '\n'
        << "synth_augment=" << c.synth_augment << '\n'
        << "synth_swap=" << (c.synth_swap ? "true" : "false") << '\n'
        << "synth_seed=" << c.synth_seed << '\n';
    return out.str();
}

std::string config_label(const PipelineConfig& c) {
    std::string out(1, variant_letter(c.variant));
    out += ':' + c.effective_regressor() + '/' + c.myo_seg + '/' + c.scar_seg;
    return out;
}

// ---------------------------------------------------------------------------

bool QuantReport::partial() const {
    return std::any_of(subjects.begin(), subjects.end(), [](const SubjectSummary& s) { return s.failed_slices > 0; });
}

namespace {

// Numeric slices first, then "all", then "mean".
std::pair<int, long long> slice_key(const std::string& s) {
    if (s == slice_all) return {1, 0};
    if (s == slice_mean) return {2, 0};
    long long v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return {0, v};
}

}  // namespace

void QuantReport::sort() {
    std::stable_sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
        if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
        const auto ka = slice_key(a.slice);
        const auto kb = slice_key(b.slice);
        if (ka != kb) return ka < kb;
        return a.cls < b.cls;
    });
    std::stable_sort(events.begin(), events.end(), [](const QcEvent& a, const QcEvent& b) {
        if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
        return a.slice < b.slice;
    });
    std::stable_sort(subjects.begin(), subjects.end(),
                     [](const SubjectSummary& a, const SubjectSummary& b) { return a.subject_id < b.subject_id; });
}

void QuantReport::append(const QuantReport& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    events.insert(events.end(), other.events.begin(), other.events.end());
    subjects.insert(subjects.end(), other.subjects.begin(), other.subjects.end());
    if (config_echo.empty()) config_echo = other.config_echo;
}

std::uint64_t subject_seed(std::uint64_t root, std::string_view subject_id) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : subject_id) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return derive_seed(root, h);
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

constexpr const char* class_myo = "myocardium";
constexpr const char* class_scar = "scar";

Mask2D wall_of_slice(const LabelSlice& s) {
    Mask2D out(s.width, s.height, 0, s.dx, s.dy);
    for (std::size_t i = 0; i < s.size(); ++i) out.data[i] = s.data[i] == label::myocardium || s.data[i] == label::scar;
    return out;
}

double burden_or_nan(std::size_t scar, std::size_t wall) {
    return wall == 0 ? nan : 100.0 * static_cast<double>(scar) / static_cast<double>(wall);
}

double hd2_or_nan(const Mask2D& a, const Mask2D& b, HausdorffMode mode) {
    if (count_nonzero(a) == 0 || count_nonzero(b) == 0) return nan;
    return hausdorff_mm(a, b, mode);
}

double hd3_or_nan(const Mask3D& a, const Mask3D& b, HausdorffMode mode) {
    if (a.count_nonzero() == 0 || b.count_nonzero() == 0) return nan;
    return hausdorff_mm(a, b, mode);
}

}  // namespace

std::vector<MetricRow> evaluate_prediction(std::string_view subject_id, const LabelMap& manual,
                                           const LabelMap& automatic, HausdorffMode mode) {
    if (!(manual.dims() == automatic.dims())) throw DimensionError("evaluate_prediction: label grids differ");
    const double voxel = voxel_volume_cm3(manual.spacing());
    const std::string id(subject_id);
    std::vector<MetricRow> rows;
    double dsc_sum[2] = {0.0, 0.0};
    double hd_sum[2] = {0.0, 0.0};
    int hd_n[2] = {0, 0};
    const int nz = manual.dims().nz;
    for (int z = 0; z < nz; ++z) {
        const LabelSlice m = manual.slice(z);
        const LabelSlice a = automatic.slice(z);
        const Mask2D masks_m[2] = {wall_of_slice(m), class_mask(m, label::scar)};
        const Mask2D masks_a[2] = {wall_of_slice(a), class_mask(a, label::scar)};
        const double burden = burden_or_nan(count_nonzero(masks_a[1]), count_nonzero(masks_a[0]));
        for (int c = 0; c < 2; ++c) {
            MetricRow r;
            r.subject_id = id;
            r.slice = std::to_string(z);
            r.cls = c == 0 ? class_myo : class_scar;
            r.dsc = dice(masks_m[c], masks_a[c]);
            r.hd_mm = hd2_or_nan(masks_m[c], masks_a[c], mode);
            r.vol_manual_cm3 = static_cast<double>(count_nonzero(masks_m[c])) * voxel;
            r.vol_auto_cm3 = static_cast<double>(count_nonzero(masks_a[c])) * voxel;
            r.vol_diff_cm3 = std::fabs(r.vol_auto_cm3 - r.vol_manual_cm3);
            r.scar_burden_pct = burden;
            dsc_sum[c] += r.dsc;
            if (!std::isnan(r.hd_mm)) {
                hd_sum[c] += r.hd_mm;
                ++hd_n[c];
            }
            rows.push_back(std::move(r));
        }
    }

    const Mask3D wall_m = wall_mask(manual);
    const Mask3D wall_a = wall_mask(automatic);
    const Mask3D scar_m = scar_mask(manual);
    const Mask3D scar_a = scar_mask(automatic);
    const double burden = burden_or_nan(scar_a.count_nonzero(), wall_a.count_nonzero());
    const Mask3D* masks_m[2] = {&wall_m, &scar_m};
    const Mask3D* masks_a[2] = {&wall_a, &scar_a};
    for (int c = 0; c < 2; ++c) {
        MetricRow all;
        all.subject_id = id;
        all.slice = slice_all;
        all.cls = c == 0 ? class_myo : class_scar;
        all.dsc = dice(*masks_m[c], *masks_a[c]);
        all.hd_mm = hd3_or_nan(*masks_m[c], *masks_a[c], mode);
        all.vol_manual_cm3 = mask_volume_cm3(*masks_m[c]);
        all.vol_auto_cm3 = mask_volume_cm3(*masks_a[c]);
        all.vol_diff_cm3 = volume_difference(*masks_m[c], *masks_a[c]);
        all.scar_burden_pct = burden;
        rows.push_back(all);

        MetricRow mean;
        mean.subject_id = id;
        mean.slice = slice_mean;
        mean.cls = all.cls;
        mean.dsc = nz > 0 ? dsc_sum[c] / nz : nan;
        mean.hd_mm = hd_n[c] > 0 ? hd_sum[c] / hd_n[c] : nan;
        mean.vol_manual_cm3 = nan;
        mean.vol_auto_cm3 = nan;
        mean.vol_diff_cm3 = nan;
        mean.scar_burden_pct = burden;
        rows.push_back(mean);
    }
    return rows;
}

std::vector<MetricRow> describe_prediction(std::string_view subject_id, const LabelMap& automatic) {
    const double voxel = voxel_volume_cm3(automatic.spacing());
    std::vector<MetricRow> rows;
    auto add = [&](std::string slice, const char* cls, std::size_t count, double burden) {
        MetricRow r;
        r.subject_id = std::string(subject_id);
        r.slice = std::move(slice);
        r.cls = cls;
        r.dsc = nan;
        r.hd_mm = nan;
        r.vol_manual_cm3 = nan;
        r.vol_auto_cm3 = static_cast<double>(count) * voxel;
        r.vol_diff_cm3 = nan;
        r.scar_burden_pct = burden;
        rows.push_back(std::move(r));
    };
    for (int z = 0; z < automatic.dims().nz; ++z) {
        const LabelSlice a = automatic.slice(z);
        const std::size_t wall = count_nonzero(wall_of_slice(a));
        const std::size_t scar = count_nonzero(class_mask(a, label::scar));
        add(std::to_string(z), class_myo, wall, burden_or_nan(scar, wall));
        add(std::to_string(z), class_scar, scar, burden_or_nan(scar, wall));
    }
    const std::size_t wall = wall_mask(automatic).count_nonzero();
    const std::size_t scar = scar_mask(automatic).count_nonzero();
    add(slice_all, class_myo, wall, burden_or_nan(scar, wall));
    add(slice_all, class_scar, scar, burden_or_nan(scar, wall));
    return rows;
}

// ---------------------------------------------------------------------------
// Subject run

namespace {

struct StageInputs {
    NormParams norm;
    const MyocardiumSegmenter* myo = nullptr;
    const ScarSegmenter* scar = nullptr;
    int frame = 256;
    int work = 128;
};

Mask2D segment_in_box(const Slice2D& norm, const BoundingBox& box, const LabelSlice* guide, const StageInputs& in) {
    const auto r = box.pixels();
    if (r.width() < 2 || r.height() < 2) throw DegenerateInputError("myocardium stage: box too small");
    const Offset origin{r.x0, r.y0};
    const Slice2D crop = percentile_normalize(extract_window(norm, origin, r.width(), r.height()), in.norm);
    Mask2D mask;
    if (in.myo->needs_guide()) {
        const LabelSlice g = extract_window(*guide, origin, r.width(), r.height());
        mask = in.myo->segment(crop, &g);
    } else {
        const Mask2D small = in.myo->segment(resample(crop, in.work, in.work), nullptr);
        mask = resample_nearest(small, r.width(), r.height());
    }
    return paste_window(mask, origin, in.frame, in.frame);
}

Mask2D empty_like(const Slice2D& s) { return Mask2D(s.width, s.height, 0, s.dx, s.dy); }

SubjectOutput run_impl(const SubjectRecord& subject, const PipelineConfig& config, bool gt_myocardium) {
    config.validate();
    subject.validate();
    if (gt_myocardium && !subject.labels) {
        throw InvalidArgument("replace_with_gt_myocardium: subject " + subject.id + " has no labels");
    }

    const Dims dims = subject.image.dims();
    const Spacing spacing = subject.image.spacing();
    const int F = config.frame_size;
    const int nz = dims.nz;
    const std::uint64_t seed = subject_seed(config.seed, subject.id);

    SubjectOutput out;
    QuantReport& report = out.report;
    report.config_echo = format_config(config);
    auto event = [&](int slice, std::string kind, std::string detail) {
        report.events.push_back({subject.id, slice, std::move(kind), std::move(detail)});
    };

    const auto myo_seg = make_myocardium_segmenter(config.myo_seg);
    const auto scar_seg = make_scar_segmenter(config.scar_seg, config.nsd_n);
    const NormParams norm_params{5.0, 95.0, config.norm_clamp};
    StageInputs stage{norm_params, myo_seg.get(), scar_seg.get(), F, config.work_size};

    // Frame conversion.
    std::vector<Slice2D> norm(static_cast<std::size_t>(nz));
    std::vector<std::string> slice_error(static_cast<std::size_t>(nz));
    std::vector<LabelSlice> gt_frame;
    for (int z = 0; z < nz; ++z) {
        const Slice2D framed = crop_or_pad(subject.image.slice(z), F);
        try {
            norm[z] = percentile_normalize(framed, norm_params);
        } catch (const Error& e) {
            slice_error[z] = e.what();
            norm[z] = framed;
        }
    }
    std::optional<LabelMap> gt_map;
    if (subject.labels) {
        for (int z = 0; z < nz; ++z) gt_frame.push_back(crop_or_pad(subject.labels->slice(z), F));
        gt_map = LabelMap::from_slices(gt_frame, spacing.dz);
    }

    std::string setup_error;
    std::vector<LabelSlice> myo_guides;
    std::vector<LabelSlice> scar_guides;
    auto load_guides = [&](const std::string& name, Stage st, std::vector<LabelSlice>& guides) {
        if (name == "oracle") {
            if (!subject.labels) throw InvalidArgument("oracle segmenter: subject " + subject.id + " has no labels");
            guides = gt_frame;
        } else if (name == "import") {
            const LabelMap pred = import_prediction(config.prediction_dir, subject.id, st, dims);
            for (int z = 0; z < nz; ++z) guides.push_back(crop_or_pad(pred.slice(z), F));
        }
    };

    BoundingBox box{0.5 * (F - 1), 0.5 * (F - 1), static_cast<double>(F), static_cast<double>(F)};
    try {
        if (!gt_myocardium) load_guides(config.myo_seg, Stage::myocardium, myo_guides);
        load_guides(config.scar_seg, Stage::scar, scar_guides);
        if (variant_uses_box(config.variant) && !gt_myocardium) {
            const int ref = select_reference_slice(nz);
            if (!slice_error[ref].empty()) throw DegenerateInputError("reference slice: " + slice_error[ref]);
            const auto regressor = make_box_regressor(config.effective_regressor(), config.gt_margin);
            const BoxTransform t = regressor->predict(subject.id, norm[ref], gt_map ? &*gt_map : nullptr);
            box = apply_transform(proposal_box(F, F), t);
            validate_box(box);
            std::ostringstream detail;
            detail << std::setprecision(6) << "cx=" << box.cx << " cy=" << box.cy << " w=" << box.w << " h=" << box.h;
            event(-1, "box", detail.str());
        }
    } catch (const Error& e) {
        setup_error = e.what();
        event(-1, "error", setup_error);
    }

    const bool cascaded = variant_is_cascaded(config.variant);
    std::vector<LabelSlice> frame_pred;
    int failed = 0;
    for (int z = 0; z < nz; ++z) {
        LabelSlice pred(F, F, label::background, spacing.dx, spacing.dy);
        try {
            if (!setup_error.empty()) throw Error(setup_error);
            if (!slice_error[z].empty()) throw DegenerateInputError(slice_error[z]);
            const Slice2D& img = norm[z];
            const LabelSlice* myo_guide = myo_guides.empty() ? nullptr : &myo_guides[z];
            const LabelSlice* scar_guide = scar_guides.empty() ? nullptr : &scar_guides[z];

            Mask2D myo;
            if (gt_myocardium) {
                myo = wall_of_slice(gt_frame[z]);
            } else {
                myo = segment_in_box(img, box, myo_guide, stage);
            }
            bool closed = count_nonzero(myo) > 0 && is_closed_myocardium(myo);
            if (!closed && config.revote && !gt_myocardium) {
                const auto boxes = jitter_boxes(box, config.jitter_count, derive_seed(seed, static_cast<std::uint64_t>(z)),
                                                config.jitter);
                std::vector<Mask2D> votes;
                for (const auto& b : boxes) {
                    try {
                        votes.push_back(segment_in_box(img, b, myo_guide, stage));
                    } catch (const Error&) {
                    }
                }
                if (votes.size() >= 2) {
                    const VoteResult v = ensemble_revote(votes, myo, config.vote);
                    myo = v.mask;
                    closed = v.closed;
                    event(z, "revote", v.fell_back ? "fell back to original" : "k=" + std::to_string(v.k));
                } else {
                    event(z, "revote", "too few jittered predictions");
                }
            }
            if (!closed) event(z, "open_myocardium", "no enclosed cavity");

            const Mask2D cavity = closed ? interior_of(myo) : empty_like(img);
            Mask2D scar = empty_like(img);
            if (count_nonzero(myo) == 0) {
                event(z, "empty_myocardium", "scar stage skipped");
            } else if (cascaded) {
                const int S = config.scar_crop;
                const CentroidCrop crop = crop_at_centroid(img, myo, S);
                const Mask2D myo_w = extract_window(myo, crop.offset, S, S);
                const Mask2D cav_w = extract_window(cavity, crop.offset, S, S);
                const Slice2D input = mask_for_scar(crop.slice, myo_w, cav_w);
                std::optional<LabelSlice> guide_w;
                if (scar_guide) guide_w = extract_window(*scar_guide, crop.offset, S, S);
                const Mask2D scar_w = scar_seg->segment(input, myo_w, guide_w ? &*guide_w : nullptr);
                scar = paste_window(scar_w, crop.offset, F, F);
                if (config.ratio_filter) {
                    const Mask2D filtered = scar_ratio_filter(scar, myo, config.min_scar_ratio);
                    const std::size_t removed = count_nonzero(scar) - count_nonzero(filtered);
                    if (removed > 0) event(z, "ratio_filter", "removed " + std::to_string(removed) + " px");
                    scar = filtered;
                }
            } else {
                const auto r = box.pixels();
                const Offset origin{r.x0, r.y0};
                const Slice2D crop = percentile_normalize(extract_window(img, origin, r.width(), r.height()), norm_params);
                const Mask2D myo_c = extract_window(myo, origin, r.width(), r.height());
                std::optional<LabelSlice> guide_c;
                if (scar_guide) guide_c = extract_window(*scar_guide, origin, r.width(), r.height());
                const Mask2D scar_c = scar_seg->segment(crop, myo_c, guide_c ? &*guide_c : nullptr);
                scar = paste_window(scar_c, origin, F, F);
            }

            for (std::size_t i = 0; i < pred.size(); ++i) {
                if (scar.data[i] && myo.data[i]) pred.data[i] = label::scar;
                else if (myo.data[i]) pred.data[i] = label::myocardium;
                else if (cavity.data[i]) pred.data[i] = label::cavity;
            }
        } catch (const Error& e) {
            ++failed;
            if (setup_error.empty()) event(z, "error", e.what());
            pred = LabelSlice(F, F, label::background, spacing.dx, spacing.dy);
        }
        LabelSlice back = crop_or_pad(pred, dims.nx, dims.ny);
        back.dx = spacing.dx;
        back.dy = spacing.dy;
        frame_pred.push_back(std::move(back));
    }

    out.prediction = LabelMap::from_slices(frame_pred, spacing.dz);
    if (subject.labels) {
        report.rows = evaluate_prediction(subject.id, *subject.labels, out.prediction, config.hd_mode);
    } else {
        report.rows = describe_prediction(subject.id, out.prediction);
    }

    SubjectSummary summary;
    summary.subject_id = subject.id;
    summary.scar_predicted = scar_mask(out.prediction).count_nonzero() > 0;
    if (subject.pathological) {
        summary.scar_manual = subject.pathological;
    } else if (subject.labels) {
        summary.scar_manual = scar_mask(*subject.labels).count_nonzero() > 0;
    }
    summary.failed_slices = failed;
    summary.slices = nz;
    report.subjects.push_back(summary);
    report.sort();
    return out;
}

}  // namespace

SubjectOutput run_subject(const SubjectRecord& subject, const PipelineConfig& config) {
    return run_impl(subject, config, false);
}

SubjectOutput replace_with_gt_myocardium(const SubjectRecord& subject, const PipelineConfig& config) {
    return run_impl(subject, config, true);
}

DatasetRun run_dataset(std::span<const SubjectRecord> subjects, const PipelineConfig& config, int threads,
                       bool gt_myocardium) {
    config.validate();
    std::vector<SubjectOutput> outputs(subjects.size());
    std::vector<std::exception_ptr> errors(subjects.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < subjects.size(); i = next++) {
            try {
                outputs[i] = run_impl(subjects[i], config, gt_myocardium);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned n = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
    n = std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(1, subjects.size())));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    DatasetRun run;
    run.report.config_echo = format_config(config);
    for (auto& o : outputs) {
        run.report.append(o.report);
        run.predictions.push_back(std::move(o.prediction));
    }
    run.report.sort();
    return run;
}

// ---------------------------------------------------------------------------
// Ablation

std::string format_mean_sd(double mean, double sd, int digits) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << mean << " (" << sd << ')';
    return out.str();
}

AblationResult run_ablation(std::span<const SubjectRecord> subjects, std::span<const PipelineConfig> configs,
                            int threads) {
    if (configs.size() < 2) throw InvalidArgument("run_ablation: at least two configs are required");
    for (const auto& c : configs) c.validate();

    std::vector<std::string> names;
    std::map<std::string, int> seen;
    for (const auto& c : configs) {
        std::string name = config_label(c);
        const int k = ++seen[name];
        if (k > 1) name += "#" + std::to_string(k);
        names.push_back(name);
    }

    AblationResult result;
    // series[config][cls] keyed by (subject, slice)
    std::vector<std::map<std::string, std::map<std::pair<std::string, int>, double>>> series(configs.size());
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const DatasetRun run = run_dataset(subjects, configs[i], threads);
        for (const auto& r : run.report.rows) {
            if (r.slice == slice_all || r.slice == slice_mean) continue;
            const int z = std::stoi(r.slice);
            result.rows.push_back({names[i], r.subject_id, z, r.cls, r.dsc});
            series[i][r.cls][{r.subject_id, z}] = r.dsc;
        }
    }

    for (const char* cls : {class_myo, class_scar}) {
        for (std::size_t i = 0; i < configs.size(); ++i) {
            const auto& s = series[i][cls];
            AblationSummary sum;
            sum.config = names[i];
            sum.cls = cls;
            sum.n = s.size();
            double total = 0.0;
            for (const auto& [k, v] : s) total += std::isnan(v) ? 0.0 : v;
            sum.mean = sum.n ? total / static_cast<double>(sum.n) : nan;
            double ss = 0.0;
            for (const auto& [k, v] : s) ss += (v - sum.mean) * (v - sum.mean);
            sum.sd = sum.n > 1 ? std::sqrt(ss / static_cast<double>(sum.n - 1)) : 0.0;
            result.summaries.push_back(sum);
        }
        for (std::size_t i = 0; i < configs.size(); ++i) {
            for (std::size_t j = i + 1; j < configs.size(); ++j) {
                AblationComparison cmp;
                cmp.config_a = names[i];
                cmp.config_b = names[j];
                cmp.cls = cls;
                std::vector<double> diffs;
                for (const auto& [k, v] : series[i][cls]) {
                    const auto it = series[j][cls].find(k);
                    if (it == series[j][cls].end() || std::isnan(v) || std::isnan(it->second)) continue;
                    diffs.push_back(v - it->second);
                }
                cmp.mean_difference = diffs.empty() ? nan
                                                    : std::accumulate(diffs.begin(), diffs.end(), 0.0) /
                                                          static_cast<double>(diffs.size());
                const auto nonzero = std::count_if(diffs.begin(), diffs.end(), [](double d) { return d != 0.0; });
                cmp.n = static_cast<int>(nonzero);
                if (nonzero == 0) {
                    cmp.p_value = 1.0;
                    cmp.note = "identical";
                } else {
                    try {
                        const WilcoxonResult w = wilcoxon_signed_rank(diffs, Alternative::two_sided);
                        cmp.p_value = w.p_value;
                        cmp.note = w.exact ? "exact" : "normal approximation";
                    } catch (const InvalidArgument&) {
                        cmp.p_value = nan;
                        cmp.note = "fewer than 5 nonzero differences";
                    }
                }
                result.comparisons.push_back(cmp);
            }
        }
    }
    return result;
}

std::string format_ablation_summary(const AblationResult& result) {
    std::ostringstream out;
    out << "config,class,n,mean_dsc (sd)\n";
    for (const auto& s : result.summaries) {
        out << s.config << ',' << s.cls << ',' << s.n << ',' << format_mean_sd(s.mean, s.sd) << '\n';
    }
    out << "\nconfig_a,config_b,class,mean_difference,p_value,n,note\n";
    for (const auto& c : result.comparisons) {
        out << c.config_a << ',' << c.config_b << ',' << c.cls << ',' << std::setprecision(6) << c.mean_difference
            << ',' << c.p_value << ',' << c.n << ',' << c.note << '\n';
    }
    return out.str();
}

std::string format_ablation_csv(const AblationResult& result) {
    std::ostringstream out;
    out << "config,subject_id,slice,class,dsc\n" << std::setprecision(10);
    for (const auto& r : result.rows) {
        out << r.config << ',' << r.subject_id << ',' << r.slice << ',' << r.cls << ',' << r.dsc << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------

std::vector<SynthesisRequest> plan_synthetic_dataset(std::span<const SubjectRecord> subjects,
                                                     const PipelineConfig& config) {
    std::vector<const SubjectRecord*> labelled;
    for (const auto& s : subjects) {
        if (s.labels) labelled.push_back(&s);
    }
    std::sort(labelled.begin(), labelled.end(),
              [](const SubjectRecord* a, const SubjectRecord* b) { return a->id < b->id; });

    auto is_pathological = [](const SubjectRecord& s) {
        return s.pathological ? *s.pathological : scar_mask(*s.labels).count_nonzero() > 0;
    };
    auto numbered = [](const char* prefix, std::size_t i) {
        std::ostringstream id;
        id << prefix << std::setw(3) << std::setfill('0') << i;
        return id.str();
    };

    std::vector<SynthesisRequest> out;
    if (config.synth_swap) {
        std::vector<const SubjectRecord*> path;
        std::vector<const SubjectRecord*> normal;
        for (const auto* s : labelled) (is_pathological(*s) ? path : normal).push_back(s);
        std::size_t k = 0;
        for (std::size_t i = 0; i < std::min(path.size(), normal.size()); ++i) {
            out.push_back(swap_label_style(*path[i], *normal[i], numbered("syn_swap_", k++)));
            out.push_back(swap_label_style(*normal[i], *path[i], numbered("syn_swap_", k++)));
        }
    }
    if (config.synth_augment > 0 && !labelled.empty()) {
        Rng rng(config.synth_seed);
        std::size_t k = 0;
        for (const auto* s : labelled) {
            for (int copy = 0; copy < config.synth_augment; ++copy) {
                LabelAugSpec spec;
                spec.rotation_deg = 60 * static_cast<int>(rng.below(6));
                spec.elastic = rng.coin();
                spec.elastic_seed = rng.next_u64();
                spec.morph = static_cast<MorphOp>(rng.below(3));
                spec.morph_radius = 1;
                const auto* style = labelled[rng.below(labelled.size())];
                out.push_back(make_augmented_request(*s, *style, spec, numbered("syn_aug_", k++)));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

Split split_subjects(std::span<const std::string> ids, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) throw InvalidArgument("split_subjects: fraction must lie in [0, 1]");
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ids.size())));
    std::vector<bool> is_test(ids.size(), false);
    for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
    Split split;
    for (std::size_t i = 0; i < ids.size(); ++i) (is_test[i] ? split.test : split.train).push_back(ids[i]);
    return split;
}

}  // namespace scarq
