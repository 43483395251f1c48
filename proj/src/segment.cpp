#include "scarq/segment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "scarq/components.hpp"
#include "scarq/nifti.hpp"
#include "scarq/preprocess.hpp"

namespace scarq {

int histogram_bin(double v, double lo, double hi, int bins) {
    if (!(hi > lo)) return 0;
    const double t = (v - lo) / (hi - lo) * bins;
    return std::clamp(static_cast<int>(std::floor(t)), 0, bins - 1);
}

namespace {

/// a^2 / da > b^2 / db, exact when the products fit in 128 bits.
bool score_greater(unsigned __int128 a, unsigned __int128 da, unsigned __int128 b, unsigned __int128 db) {
    unsigned __int128 a2, b2, lhs, rhs;
    if (!__builtin_mul_overflow(a, a, &a2) && !__builtin_mul_overflow(b, b, &b2) &&
        !__builtin_mul_overflow(a2, db, &lhs) && !__builtin_mul_overflow(b2, da, &rhs)) {
        return lhs > rhs;
    }
    const auto la = static_cast<long double>(a);
    const auto lb = static_cast<long double>(b);
    return la * la / static_cast<long double>(da) > lb * lb / static_cast<long double>(db);
}

}  // namespace

int otsu_histogram_split(std::span<const std::uint64_t> counts) {
    if (counts.size() < 2) throw DegenerateInputError("otsu: histogram needs at least two bins");
    std::uint64_t total = 0;
    __int128 level_sum = 0;
    int occupied = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        total += counts[i];
        level_sum += static_cast<__int128>(i) * counts[i];
        occupied += counts[i] > 0;
    }
    if (occupied < 2) throw DegenerateInputError("otsu: fewer than two occupied bins");

    // Scores d^2 / (n0 n1) are compared by cross-multiplication so ties are exact.
    int best = -1;
    unsigned __int128 best_num = 0;
    unsigned __int128 best_den = 1;
    std::uint64_t n0 = 0;
    __int128 s0 = 0;
    for (std::size_t t = 0; t + 1 < counts.size(); ++t) {
        n0 += counts[t];
        s0 += static_cast<__int128>(t) * counts[t];
        const std::uint64_t n1 = total - n0;
        if (n0 == 0 || n1 == 0) continue;
        const __int128 diff = static_cast<__int128>(total) * s0 - static_cast<__int128>(n0) * level_sum;
        const auto mag = static_cast<unsigned __int128>(diff < 0 ? -diff : diff);
        const auto den = static_cast<unsigned __int128>(n0) * n1;
        if (best < 0 || score_greater(mag, den, best_num, best_den)) {
            best_num = mag;
            best_den = den;
            best = static_cast<int>(t);
        }
    }
    return best;
}

OtsuResult otsu_threshold(std::span<const double> values) {
    if (values.size() < 2) throw DegenerateInputError("otsu: need at least two values");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) throw DegenerateInputError("otsu: constant input");

    std::vector<std::uint64_t> counts(otsu_bins, 0);
    for (double v : values) ++counts[histogram_bin(v, lo, hi)];
    const int split = otsu_histogram_split(counts);

    double low_max = -std::numeric_limits<double>::infinity();
    double high_min = std::numeric_limits<double>::infinity();
    for (double v : values) {
        if (histogram_bin(v, lo, hi) <= split) {
            low_max = std::max(low_max, v);
        } else {
            high_min = std::min(high_min, v);
        }
    }
    return {split, low_max + 0.5 * (high_min - low_max)};
}

namespace {

void require_subset(const Mask2D& inner, const Mask2D& outer, const char* what) {
    require_same_shape(inner, outer, what);
    for (std::size_t i = 0; i < inner.size(); ++i) {
        if (inner.data[i] && !outer.data[i]) throw InvalidArgument(what);
    }
}

std::vector<double> masked_values(const Slice2D& image, const Mask2D& mask) {
    std::vector<double> out;
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (mask.data[i]) out.push_back(image.data[i]);
    }
    return out;
}

Mask2D empty_like(const Mask2D& m) { return Mask2D(m.width, m.height, 0, m.dx, m.dy); }

}  // namespace

ThresholdMask nsd_threshold(const Slice2D& image, const Mask2D& myocardium, const Mask2D& remote, double n) {
    require_same_shape(image, myocardium, "nsd_threshold: myocardium shape differs");
    require_subset(remote, myocardium, "nsd_threshold: remote region must lie inside the myocardium");
    const auto values = masked_values(image, remote);
    if (values.size() < 2) throw DegenerateInputError("nsd_threshold: remote region needs at least two pixels");

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size()));

    ThresholdMask out{empty_like(myocardium), nsd_cutoff(mean, sd, n)};
    for (std::size_t i = 0; i < image.size(); ++i) {
        out.mask.data[i] = myocardium.data[i] && image.data[i] > out.threshold;
    }
    return out;
}

ThresholdMask fwhm_threshold(const Slice2D& image, const Mask2D& myocardium, const Mask2D& seed) {
    require_same_shape(image, myocardium, "fwhm_threshold: myocardium shape differs");
    require_same_shape(image, seed, "fwhm_threshold: seed shape differs");
    const auto values = masked_values(image, seed);
    if (values.empty()) throw DegenerateInputError("fwhm_threshold: empty seed region");

    const double peak = *std::max_element(values.begin(), values.end());
    ThresholdMask out{empty_like(myocardium), 0.5 * peak};
    for (std::size_t i = 0; i < image.size(); ++i) {
        out.mask.data[i] = myocardium.data[i] && image.data[i] >= out.threshold;
    }
    return out;
}

Mask2D default_fwhm_seed(const Slice2D& image, const Mask2D& myocardium) {
    require_same_shape(image, myocardium, "default_fwhm_seed: myocardium shape differs");
    std::size_t peak_index = image.size();
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (myocardium.data[i] && (peak_index == image.size() || image.data[i] > image.data[peak_index])) {
            peak_index = i;
        }
    }
    if (peak_index == image.size()) throw DegenerateInputError("default_fwhm_seed: empty myocardium");

    const double half = 0.5 * image.data[peak_index];
    Mask2D bright = empty_like(myocardium);
    for (std::size_t i = 0; i < image.size(); ++i) bright.data[i] = myocardium.data[i] && image.data[i] >= half;
    const auto cc = connected_components(bright, Connectivity::eight);
    return cc.component_mask(cc.labels.data[peak_index]);
}

Mask2D darkest_sector(const Slice2D& image, const Mask2D& myocardium, int sectors) {
    require_same_shape(image, myocardium, "darkest_sector: myocardium shape differs");
    if (sectors < 1) throw InvalidArgument("darkest_sector: need at least one sector");
    double cx = 0.0;
    double cy = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (myocardium(x, y)) {
                cx += x;
                cy += y;
                ++n;
            }
        }
    }
    if (n == 0) throw DegenerateInputError("darkest_sector: empty myocardium");
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);

    Image2D<int> sector_of(image.width, image.height, -1);
    std::vector<double> sum(sectors, 0.0);
    std::vector<std::size_t> count(sectors, 0);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (!myocardium(x, y)) continue;
            double a = std::atan2(y - cy, x - cx);
            if (a < 0) a += 2.0 * std::numbers::pi;
            const int s = std::min(sectors - 1, static_cast<int>(a / (2.0 * std::numbers::pi) * sectors));
            sector_of(x, y) = s;
            sum[s] += image(x, y);
            ++count[s];
        }
    }
    int best = -1;
    for (int s = 0; s < sectors; ++s) {
        if (count[s] < 2) continue;
        if (best < 0 || sum[s] / count[s] < sum[best] / count[best]) best = s;
    }
    if (best < 0) throw DegenerateInputError("darkest_sector: no sector with two or more pixels");
    Mask2D out = empty_like(myocardium);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = sector_of.data[i] == best;
    return out;
}

Mask2D em_scar_segment(const Slice2D& image, const Mask2D& myocardium) {
    require_same_shape(image, myocardium, "em_scar_segment: myocardium shape differs");
    const auto values = masked_values(image, myocardium);
    if (values.empty()) throw DegenerateInputError("em_scar_segment: empty myocardium");
    Mask2D out = empty_like(myocardium);

    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    if (!(*hi_it > *lo_it)) return out;

    if (values.size() < 4) {
        const double mid = 0.5 * (*lo_it + *hi_it);
        for (std::size_t i = 0; i < image.size(); ++i) out.data[i] = myocardium.data[i] && image.data[i] > mid;
        return out;
    }

    const EmFit two = em_fit(values, 2);
    const auto& bright = two.mixture.components.back();
    if (bright.weight < em_scar_min_weight) return out;
    const EmFit one = em_fit(values, 1);
    if (bic(two, values.size()) >= bic(one, values.size())) return out;

    for (std::size_t i = 0; i < image.size(); ++i) {
        if (!myocardium.data[i]) continue;
        out.data[i] = two.mixture.posterior(image.data[i]).back() > em_scar_posterior;
    }
    return out;
}

Mask2D otsu_scar_segment(const Slice2D& image, const Mask2D& myocardium) {
    require_same_shape(image, myocardium, "otsu_scar_segment: myocardium shape differs");
    const auto values = masked_values(image, myocardium);
    Mask2D out = empty_like(myocardium);
    if (values.size() < 2) return out;
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    if (!(*hi_it > *lo_it)) return out;
    const double threshold = otsu_threshold(values).threshold;
    for (std::size_t i = 0; i < image.size(); ++i) out.data[i] = myocardium.data[i] && image.data[i] > threshold;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int angular_bins = 64;
constexpr double em_sample_limit = 16384.0;

int angle_bin(double ddx, double ddy) {
    double a = std::atan2(ddy, ddx);
    if (a < 0) a += 2.0 * std::numbers::pi;
    return std::min(angular_bins - 1, static_cast<int>(a / (2.0 * std::numbers::pi) * angular_bins));
}

/// Replaces invalid radii (NaN) by linear interpolation between the nearest
/// valid neighbours, walking around the circle.
bool fill_circular(std::vector<double>& radius) {
    const int n = static_cast<int>(radius.size());
    std::vector<int> valid;
    for (int i = 0; i < n; ++i) {
        if (!std::isnan(radius[i])) valid.push_back(i);
    }
    if (valid.empty()) return false;
    for (int i = 0; i < n; ++i) {
        if (!std::isnan(radius[i])) continue;
        int prev = -1;
        int next = -1;
        for (int step = 1; step < n && (prev < 0 || next < 0); ++step) {
            if (prev < 0 && !std::isnan(radius[(i - step + n) % n])) prev = step;
            if (next < 0 && !std::isnan(radius[(i + step) % n])) next = step;
        }
        const double a = radius[(i - prev + n) % n];
        const double b = radius[(i + next) % n];
        radius[i] = a + (b - a) * static_cast<double>(prev) / static_cast<double>(prev + next);
    }
    return true;
}

}  // namespace

Mask2D phantom_myo_segmenter(const Slice2D& slice) {
    Mask2D empty(slice.width, slice.height, 0, slice.dx, slice.dy);
    if (slice.size() < 16) return empty;
    const auto [lo_it, hi_it] = std::minmax_element(slice.data.begin(), slice.data.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) return empty;

    std::vector<double> values;
    const std::size_t stride =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(static_cast<double>(slice.size()) / em_sample_limit)));
    for (std::size_t i = 0; i < slice.size(); i += stride) values.push_back(slice.data[i]);
    std::vector<GaussianComponent> comps;
    try {
        EmOptions options;
        options.tol = 1e-6 * static_cast<double>(values.size());
        options.tied_variance = true;
        // Dark and bright start in the far tails so small classes are not absorbed by the background.
        const double p_dark = percentile(values, 0.5);
        const double p_mid = percentile(values, 50.0);
        const double p_bright = percentile(values, 99.5);
        const double spread = percentile(values, 75.0) - percentile(values, 25.0);
        const double var = std::max(spread * spread / (1.349 * 1.349), 1e-12);
        Mixture1D init{{{0.1, p_dark, var}, {0.8, p_mid, var}, {0.1, p_bright, var}}};
        comps = em_fit_from(values, init, options).mixture.components;
    } catch (const Error&) {
        return empty;
    }

    // Hard assignment to the nearest component mean: 0 dark, 1 mid, 2 bright.
    Image2D<std::uint8_t> cls(slice.width, slice.height, 0);
    const double cut_low = 0.5 * (comps[0].mean + comps[1].mean);
    const double cut_high = 0.5 * (comps[1].mean + comps[2].mean);
    for (std::size_t i = 0; i < slice.size(); ++i) {
        const double v = slice.data[i];
        cls.data[i] = v < cut_low ? 0 : (v < cut_high ? 1 : 2);
    }

    Mask2D bright = empty;
    for (std::size_t i = 0; i < slice.size(); ++i) bright.data[i] = cls.data[i] == 2;
    const auto bright_cc = connected_components(bright, Connectivity::eight);
    if (bright_cc.count() == 0) return empty;

    // Bright component closest to the frame centre.
    const double mx = 0.5 * (slice.width - 1);
    const double my = 0.5 * (slice.height - 1);
    std::vector<double> nearest(bright_cc.count(), std::numeric_limits<double>::infinity());
    for (int y = 0; y < slice.height; ++y) {
        for (int x = 0; x < slice.width; ++x) {
            const auto id = bright_cc.labels(x, y);
            if (id) nearest[id - 1] = std::min(nearest[id - 1], std::hypot(x - mx, y - my));
        }
    }
    const auto seed_id =
        static_cast<std::int32_t>(std::min_element(nearest.begin(), nearest.end()) - nearest.begin()) + 1;

    // LV = dark-or-bright region connected to the seed, holes filled.
    Mask2D tissue = empty;
    for (std::size_t i = 0; i < slice.size(); ++i) tissue.data[i] = cls.data[i] != 1;
    const auto tissue_cc = connected_components(tissue, Connectivity::eight);
    std::int32_t lv_id = 0;
    for (std::size_t i = 0; i < slice.size() && !lv_id; ++i) {
        if (bright_cc.labels.data[i] == seed_id) lv_id = tissue_cc.labels.data[i];
    }
    const Mask2D lv = fill_holes(tissue_cc.component_mask(lv_id));

    double cx = 0.0;
    double cy = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < slice.height; ++y) {
        for (int x = 0; x < slice.width; ++x) {
            if (lv(x, y)) {
                cx += x;
                cy += y;
                ++n;
            }
        }
    }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);

    // Endocardial radius per angle = distance of the innermost dark LV pixel.
    std::vector<double> radius(angular_bins, std::numeric_limits<double>::quiet_NaN());
    for (int y = 0; y < slice.height; ++y) {
        for (int x = 0; x < slice.width; ++x) {
            if (!lv(x, y) || cls(x, y) != 0) continue;
            const int b = angle_bin(x - cx, y - cy);
            const double d = std::hypot(x - cx, y - cy);
            if (std::isnan(radius[b]) || d < radius[b]) radius[b] = d;
        }
    }
    std::vector<double> valid;
    for (double r : radius) {
        if (!std::isnan(r)) valid.push_back(r);
    }
    if (valid.size() < angular_bins / 4) return empty;
    std::nth_element(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(valid.size() / 2), valid.end());
    const double median = valid[valid.size() / 2];
    const double limit = median + std::max(1.5, 0.05 * median);
    for (double& r : radius) {
        if (!std::isnan(r) && r > limit) r = std::numeric_limits<double>::quiet_NaN();
    }
    fill_circular(radius);

    Mask2D wall = empty;
    for (int y = 0; y < slice.height; ++y) {
        for (int x = 0; x < slice.width; ++x) {
            if (!lv(x, y)) continue;
            const double d = std::hypot(x - cx, y - cy);
            wall(x, y) = d >= radius[angle_bin(x - cx, y - cy)];
        }
    }
    const auto wall_cc = connected_components(wall, Connectivity::eight);
    if (wall_cc.count() == 0) return empty;
    return wall_cc.component_mask(wall_cc.largest());
}

// ---------------------------------------------------------------------------

std::string_view stage_name(Stage stage) { return stage == Stage::myocardium ? "myocardium" : "scar"; }

namespace {

Mask2D wall_of(const LabelSlice& labels) {
    Mask2D out(labels.width, labels.height, 0, labels.dx, labels.dy);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out.data[i] = labels.data[i] == label::myocardium || labels.data[i] == label::scar;
    }
    return out;
}

const LabelSlice& require_guide(const LabelSlice* guide, const Slice2D& image, const char* who) {
    if (!guide) throw InvalidArgument(std::string(who) + ": reference labels required");
    require_same_shape(image, *guide, "segmenter: guide labels shape differs from image");
    return *guide;
}

class EmMyocardium final : public MyocardiumSegmenter {
public:
    std::string name() const override { return "em"; }
    Mask2D segment(const Slice2D& image, const LabelSlice*) const override { return phantom_myo_segmenter(image); }
};

class LabelMyocardium final : public MyocardiumSegmenter {
public:
    explicit LabelMyocardium(std::string name) : name_(std::move(name)) {}
    std::string name() const override { return name_; }
    bool needs_guide() const override { return true; }
    Mask2D segment(const Slice2D& image, const LabelSlice* guide) const override {
        return wall_of(require_guide(guide, image, "label myocardium segmenter"));
    }

private:
    std::string name_;
};

class NsdScar final : public ScarSegmenter {
public:
    explicit NsdScar(double n) : n_(n) {}
    std::string name() const override { return "nsd"; }
    Mask2D segment(const Slice2D& image, const Mask2D& myo, const LabelSlice*) const override {
        if (count_nonzero(myo) < 2) return Mask2D(myo.width, myo.height, 0, myo.dx, myo.dy);
        return nsd_threshold(image, myo, darkest_sector(image, myo), n_).mask;
    }

private:
    double n_;
};

class FwhmScar final : public ScarSegmenter {
public:
    std::string name() const override { return "fwhm"; }
    Mask2D segment(const Slice2D& image, const Mask2D& myo, const LabelSlice*) const override {
        if (count_nonzero(myo) == 0) return myo;
        return fwhm_threshold(image, myo, default_fwhm_seed(image, myo)).mask;
    }
};

class EmScar final : public ScarSegmenter {
public:
    std::string name() const override { return "em"; }
    Mask2D segment(const Slice2D& image, const Mask2D& myo, const LabelSlice*) const override {
        if (count_nonzero(myo) == 0) return myo;
        return em_scar_segment(image, myo);
    }
};

class OtsuScar final : public ScarSegmenter {
public:
    std::string name() const override { return "otsu"; }
    Mask2D segment(const Slice2D& image, const Mask2D& myo, const LabelSlice*) const override {
        return otsu_scar_segment(image, myo);
    }
};

class LabelScar final : public ScarSegmenter {
public:
    explicit LabelScar(std::string name) : name_(std::move(name)) {}
    std::string name() const override { return name_; }
    bool needs_guide() const override { return true; }
    Mask2D segment(const Slice2D& image, const Mask2D& myo, const LabelSlice* guide) const override {
        const auto& labels = require_guide(guide, image, "label scar segmenter");
        Mask2D out(myo.width, myo.height, 0, myo.dx, myo.dy);
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = myo.data[i] && labels.data[i] == label::scar;
        return out;
    }

private:
    std::string name_;
};

}  // namespace

std::unique_ptr<MyocardiumSegmenter> make_myocardium_segmenter(std::string_view name) {
    if (name == "em") return std::make_unique<EmMyocardium>();
    if (name == "oracle" || name == "import") return std::make_unique<LabelMyocardium>(std::string(name));
    throw ConfigError("unknown myocardium segmenter '" + std::string(name) + "'");
}

std::unique_ptr<ScarSegmenter> make_scar_segmenter(std::string_view name, double nsd_n) {
    if (name == "nsd") return std::make_unique<NsdScar>(nsd_n);
    if (name == "fwhm") return std::make_unique<FwhmScar>();
    if (name == "em") return std::make_unique<EmScar>();
    if (name == "otsu") return std::make_unique<OtsuScar>();
    if (name == "oracle" || name == "import") return std::make_unique<LabelScar>(std::string(name));
    throw ConfigError("unknown scar segmenter '" + std::string(name) + "'");
}

std::filesystem::path prediction_path(const std::filesystem::path& dir, std::string_view subject_id, Stage stage) {
    return dir / (std::string(subject_id) + "_" + std::string(stage_name(stage)) + ".nii");
}

LabelMap import_prediction(const std::filesystem::path& dir, std::string_view subject_id, Stage stage,
                           const Dims& expected) {
    const auto path = prediction_path(dir, subject_id, stage);
    if (!std::filesystem::exists(path)) throw IoError("missing prediction file " + path.string());
    LabelMap labels = load_label_map(path);
    if (labels.dims() != expected) throw DimensionError("prediction " + path.string() + " has mismatched dims");
    return labels;
}

Mask3D import_masks(const std::filesystem::path& dir, std::string_view subject_id, Stage stage,
                    const Dims& expected) {
    const LabelMap labels = import_prediction(dir, subject_id, stage, expected);
    return stage == Stage::myocardium ? wall_mask(labels) : scar_mask(labels);
}

}  // namespace scarq
