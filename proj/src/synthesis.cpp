#include "scarq/synthesis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "scarq/log.hpp"
#include "scarq/nifti.hpp"
#include "scarq/preprocess.hpp"
#include "scarq/rng.hpp"

namespace scarq {

std::string_view morph_name(MorphOp op) {
    switch (op) {
        case MorphOp::none: return "none";
        case MorphOp::dilate: return "dilate";
        case MorphOp::open: return "open";
    }
    return "none";
}

MorphOp parse_morph(std::string_view name) {
    if (name == "none") return MorphOp::none;
    if (name == "dilate") return MorphOp::dilate;
    if (name == "open") return MorphOp::open;
    throw InvalidArgument("unknown morphological operation '" + std::string(name) + "'");
}

std::string_view use_name(SynthesisUse use) {
    return use == SynthesisUse::myocardium ? "myocardium" : "myocardium+scar";
}

LabelSlice rotate_labels(const LabelSlice& labels, int deg) {
    if (deg % 60 != 0) throw InvalidArgument("rotate_labels: rotation must be a multiple of 60 degrees");
    const int step = ((deg / 60) % 6 + 6) % 6;
    if (step == 0) return labels;

    // Exact cosines keep 180 degrees an exact pixel permutation.
    const double half_sqrt3 = std::sqrt(3.0) / 2.0;
    const std::array<std::pair<double, double>, 6> cos_sin = {{{1.0, 0.0},
                                                              {0.5, half_sqrt3},
                                                              {-0.5, half_sqrt3},
                                                              {-1.0, 0.0},
                                                              {-0.5, -half_sqrt3},
                                                              {0.5, -half_sqrt3}}};
    const auto [c, s] = cos_sin[static_cast<std::size_t>(step)];
    const double cx = 0.5 * (labels.width - 1);
    const double cy = 0.5 * (labels.height - 1);

    LabelSlice out(labels.width, labels.height, label::background, labels.dx, labels.dy);
    for (int y = 0; y < labels.height; ++y) {
        for (int x = 0; x < labels.width; ++x) {
            // Inverse rotation maps the output pixel back to its source.
            const double ox = x - cx;
            const double oy = y - cy;
            const double sx = cx + c * ox + s * oy;
            const double sy = cy - s * ox + c * oy;
            const auto ix = static_cast<int>(std::lround(sx));
            const auto iy = static_cast<int>(std::lround(sy));
            out(x, y) = labels.get_or(ix, iy, label::background);
        }
    }
    return out;
}

LabelSlice elastic_deform(const LabelSlice& labels, double alpha, double sigma, std::uint64_t seed) {
    if (alpha < 0.0) throw InvalidArgument("elastic_deform: alpha must be non-negative");
    if (!(sigma > 0.0)) throw InvalidArgument("elastic_deform: sigma must be positive");
    if (alpha == 0.0) return labels;

    Rng rng(seed);
    Slice2D field_x(labels.width, labels.height, 0.0);
    Slice2D field_y(labels.width, labels.height, 0.0);
    for (double& v : field_x.data) v = rng.uniform(-1.0, 1.0);
    for (double& v : field_y.data) v = rng.uniform(-1.0, 1.0);
    field_x = gaussian_blur(field_x, sigma);
    field_y = gaussian_blur(field_y, sigma);

    LabelSlice out(labels.width, labels.height, label::background, labels.dx, labels.dy);
    for (int y = 0; y < labels.height; ++y) {
        for (int x = 0; x < labels.width; ++x) {
            const int sx = std::clamp(static_cast<int>(std::lround(x + alpha * field_x(x, y))), 0, labels.width - 1);
            const int sy = std::clamp(static_cast<int>(std::lround(y + alpha * field_y(x, y))), 0, labels.height - 1);
            out(x, y) = labels(sx, sy);
        }
    }
    return out;
}

std::vector<std::pair<int, int>> disk_offsets(int radius) {
    std::vector<std::pair<int, int>> out;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy <= radius * radius) out.emplace_back(dx, dy);
        }
    }
    return out;
}

namespace {

Mask2D dilate(const Mask2D& m, const std::vector<std::pair<int, int>>& se) {
    Mask2D out(m.width, m.height, 0, m.dx, m.dy);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m(x, y)) continue;
            for (auto [dx, dy] : se) {
                if (out.contains(x + dx, y + dy)) out(x + dx, y + dy) = 1;
            }
        }
    }
    return out;
}

Mask2D erode(const Mask2D& m, const std::vector<std::pair<int, int>>& se) {
    Mask2D out(m.width, m.height, 0, m.dx, m.dy);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            bool keep = m(x, y) != 0;
            for (std::size_t k = 0; keep && k < se.size(); ++k) keep = m.get_or(x + se[k].first, y + se[k].second, 0) != 0;
            out(x, y) = keep;
        }
    }
    return out;
}

}  // namespace

LabelSlice morph(const LabelSlice& labels, MorphOp op, int radius) {
    if (op == MorphOp::none) return labels;
    if (radius < 1) throw InvalidArgument("morph: radius must be at least 1");
    const auto se = disk_offsets(radius);
    const Mask2D scar = class_mask(labels, label::scar);
    LabelSlice out = labels;
    if (op == MorphOp::dilate) {
        const Mask2D grown = dilate(scar, se);
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (grown.data[i] && out.data[i] == label::myocardium) out.data[i] = label::scar;
        }
    } else {
        const Mask2D opened = dilate(erode(scar, se), se);
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (scar.data[i] && !opened.data[i]) out.data[i] = label::myocardium;
        }
    }
    return out;
}

LabelMap augment_labels(const LabelMap& labels, const LabelAugSpec& spec) {
    if (spec.rotation_deg % 60 != 0) throw InvalidArgument("augment_labels: rotation must be a multiple of 60");
    std::vector<LabelSlice> slices;
    for (int z = 0; z < labels.dims().nz; ++z) {
        LabelSlice s = rotate_labels(labels.slice(z), spec.rotation_deg);
        if (spec.elastic) s = elastic_deform(s, spec.alpha, spec.sigma, derive_seed(spec.elastic_seed, static_cast<std::uint64_t>(z)));
        s = morph(s, spec.morph, spec.morph_radius);
        slices.push_back(std::move(s));
    }
    return LabelMap::from_slices(slices, labels.spacing().dz);
}

SynthesisRequest swap_label_style(const SubjectRecord& labels_from, const SubjectRecord& style_from,
                                  std::string output_id) {
    if (!labels_from.labels) throw InvalidArgument("swap_label_style: label subject has no labels");
    if (!style_from.labels) throw InvalidArgument("swap_label_style: style subject has no labels");
    if (labels_from.pathological && style_from.pathological && *labels_from.pathological == *style_from.pathological) {
        warn("swap_label_style: " + labels_from.id + " and " + style_from.id + " share the same pathology flag");
    }
    SynthesisRequest r;
    r.output_id = std::move(output_id);
    r.source_subject = labels_from.id;
    r.labels = *labels_from.labels;
    r.style = style_from;
    r.use = SynthesisUse::myocardium;
    return r;
}

SynthesisRequest make_augmented_request(const SubjectRecord& source, const SubjectRecord& style,
                                        const LabelAugSpec& spec, std::string output_id) {
    if (!source.labels) throw InvalidArgument("make_augmented_request: source subject has no labels");
    if (!style.labels) throw InvalidArgument("make_augmented_request: style subject has no labels");
    SynthesisRequest r;
    r.output_id = std::move(output_id);
    r.source_subject = source.id;
    r.labels = augment_labels(*source.labels, spec);
    r.style = style;
    r.augmentation = spec;
    r.use = SynthesisUse::myocardium_and_scar;
    return r;
}

Volume synthesize_image(const SynthesisRequest& request, const SynthesisParams& params, std::uint64_t seed) {
    const auto& style = request.style;
    if (!style.labels) throw InvalidArgument("synthesize_image: style subject has no labels");
    style.validate();

    struct Stats {
        double mean = 0.0;
        double sd = 0.0;
        std::size_t n = 0;
    };
    std::array<Stats, label::max_class + 1> stats{};
    Stats global;
    const auto& img = style.image.data();
    const auto& lab = style.labels->data();
    for (std::size_t i = 0; i < img.size(); ++i) {
        stats[lab[i]].mean += img[i];
        ++stats[lab[i]].n;
        global.mean += img[i];
        ++global.n;
    }
    for (auto& s : stats) {
        if (s.n) s.mean /= static_cast<double>(s.n);
    }
    global.mean /= static_cast<double>(global.n);
    for (std::size_t i = 0; i < img.size(); ++i) {
        auto& s = stats[lab[i]];
        s.sd += (img[i] - s.mean) * (img[i] - s.mean);
        global.sd += (img[i] - global.mean) * (img[i] - global.mean);
    }
    for (auto& s : stats) {
        if (s.n) s.sd = std::sqrt(s.sd / static_cast<double>(s.n));
    }
    global.sd = std::sqrt(global.sd / static_cast<double>(global.n));
    const auto [lo, hi] = std::minmax_element(img.begin(), img.end());
    const double range = *hi - *lo;

    const auto& out_labels = request.labels.data();
    std::array<bool, label::max_class + 1> present{};
    for (auto c : out_labels) present[c] = true;
    for (std::uint8_t c = 0; c <= label::max_class; ++c) {
        if (present[c] && stats[c].n == 0) {
            warn("synthesize_image: style " + style.id + " lacks class " + std::to_string(c) +
                 ", using global statistics");
            stats[c] = global;
        }
    }

    Rng rng(seed);
    std::vector<double> values(out_labels.size());
    for (double& v : values) v = rng.normal();

    // Moment-match the draws of each class to exactly zero mean, unit sd.
    std::array<double, label::max_class + 1> zsum{};
    std::array<double, label::max_class + 1> zsq{};
    std::array<std::size_t, label::max_class + 1> zn{};
    for (std::size_t i = 0; i < values.size(); ++i) {
        zsum[out_labels[i]] += values[i];
        ++zn[out_labels[i]];
    }
    std::array<double, label::max_class + 1> zmean{};
    for (std::size_t c = 0; c < zmean.size(); ++c) zmean[c] = zn[c] ? zsum[c] / static_cast<double>(zn[c]) : 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - zmean[out_labels[i]];
        zsq[out_labels[i]] += d * d;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto c = out_labels[i];
        const double zsd = zn[c] > 1 ? std::sqrt(zsq[c] / static_cast<double>(zn[c])) : 0.0;
        const double z = zsd > 0.0 ? (values[i] - zmean[c]) / zsd : 0.0;
        values[i] = stats[c].mean + stats[c].sd * z;
    }

    const auto& dims = request.labels.dims();
    const auto& spacing = request.labels.spacing();
    const std::size_t per_slice = dims.slice_count();
    if (params.blend_sigma > 0.0) {
        for (int z = 0; z < dims.nz; ++z) {
            const auto begin = values.begin() + static_cast<std::ptrdiff_t>(per_slice * z);
            Slice2D s(dims.nx, dims.ny, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(per_slice)));
            s = gaussian_blur(s, params.blend_sigma);
            std::copy(s.data.begin(), s.data.end(), begin);
        }
        // Blurring thin structures drags their means toward the neighbours; shift each class back.
        std::array<double, label::max_class + 1> blurred{};
        for (std::size_t i = 0; i < values.size(); ++i) blurred[out_labels[i]] += values[i];
        for (std::size_t c = 0; c < blurred.size(); ++c) {
            if (zn[c]) blurred[c] = stats[c].mean - blurred[c] / static_cast<double>(zn[c]);
        }
        for (std::size_t i = 0; i < values.size(); ++i) values[i] += blurred[out_labels[i]];
    }
    if (params.noise_fraction > 0.0) {
        const double sd = params.noise_fraction * range;
        for (double& v : values) v += rng.normal(0.0, sd);
    }
    return Volume(dims, spacing, std::move(values));
}

// ---------------------------------------------------------------------------

bool BboxAugParams::is_geometric_identity() const {
    return shear_deg == 0.0 && rotation_deg == 0.0 && tx == 0.0 && ty == 0.0 && scale == 1.0;
}

BboxAugParams sample_bbox_aug(const BboxAugSpec& spec) {
    Rng rng(spec.seed);
    BboxAugParams p;
    // Draw every value unconditionally so enabling one op does not shift the others.
    const bool use_noise = rng.uniform() < spec.probability;
    const bool use_blur = rng.uniform() < spec.probability;
    const bool use_shear = rng.uniform() < spec.probability;
    const bool use_rotation = rng.uniform() < spec.probability;
    const bool use_translation = rng.uniform() < spec.probability;
    const bool use_scale = rng.uniform() < spec.probability;
    const double shear = rng.uniform(spec.shear_deg[0], spec.shear_deg[1]);
    const double rotation = rng.uniform(spec.rotation_deg[0], spec.rotation_deg[1]);
    const double tx = rng.uniform(spec.translation[0], spec.translation[1]) * (rng.coin() ? 1.0 : -1.0);
    const double ty = rng.uniform(spec.translation[0], spec.translation[1]) * (rng.coin() ? 1.0 : -1.0);
    const double scale = rng.uniform(spec.scale[0], spec.scale[1]);
    const std::uint64_t noise_seed = rng.next_u64();

    if (use_noise) {
        p.noise = true;
        p.noise_mu = spec.noise_mu;
        p.noise_sigma = spec.noise_sigma;
        p.noise_seed = noise_seed;
    }
    if (use_blur) {
        p.blur = true;
        p.blur_sigma = spec.blur_sigma;
    }
    if (use_shear) p.shear_deg = shear;
    if (use_rotation) p.rotation_deg = rotation;
    if (use_translation) {
        p.tx = tx;
        p.ty = ty;
    }
    if (use_scale) p.scale = scale;
    return p;
}

namespace {

struct Affine {
    // p' = centre + m * (p - centre) + t
    double m[2][2];
    double t[2];
};

Affine make_affine(const BboxAugParams& p, int w, int h) {
    const double deg = std::numbers::pi / 180.0;
    const double c = std::cos(p.rotation_deg * deg);
    const double s = std::sin(p.rotation_deg * deg);
    const double k = std::tan(p.shear_deg * deg);
    // rotation * shear(x += k y) * scale
    const double sh[2][2] = {{p.scale, k * p.scale}, {0.0, p.scale}};
    Affine a{};
    a.m[0][0] = c * sh[0][0] - s * sh[1][0];
    a.m[0][1] = c * sh[0][1] - s * sh[1][1];
    a.m[1][0] = s * sh[0][0] + c * sh[1][0];
    a.m[1][1] = s * sh[0][1] + c * sh[1][1];
    a.t[0] = p.tx * w;
    a.t[1] = p.ty * h;
    return a;
}

}  // namespace

std::pair<Slice2D, BoundingBox> apply_bbox_aug(const Slice2D& image, const BoundingBox& box,
                                               const BboxAugParams& params) {
    validate_box(box);
    Slice2D out = image;
    BoundingBox out_box = box;

    if (!params.is_geometric_identity()) {
        const Affine a = make_affine(params, image.width, image.height);
        const double det = a.m[0][0] * a.m[1][1] - a.m[0][1] * a.m[1][0];
        if (!(std::fabs(det) > 0.0)) throw InvalidArgument("apply_bbox_aug: singular transform");
        const double inv[2][2] = {{a.m[1][1] / det, -a.m[0][1] / det}, {-a.m[1][0] / det, a.m[0][0] / det}};
        const double cx = 0.5 * (image.width - 1);
        const double cy = 0.5 * (image.height - 1);

        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                const double qx = x - cx - a.t[0];
                const double qy = y - cy - a.t[1];
                const double sx = cx + inv[0][0] * qx + inv[0][1] * qy;
                const double sy = cy + inv[1][0] * qx + inv[1][1] * qy;
                const int x0 = static_cast<int>(std::floor(sx));
                const int y0 = static_cast<int>(std::floor(sy));
                const double fx = sx - x0;
                const double fy = sy - y0;
                const double v = (1 - fx) * (1 - fy) * image.get_or(x0, y0, 0.0) +
                                 fx * (1 - fy) * image.get_or(x0 + 1, y0, 0.0) +
                                 (1 - fx) * fy * image.get_or(x0, y0 + 1, 0.0) +
                                 fx * fy * image.get_or(x0 + 1, y0 + 1, 0.0);
                out(x, y) = v;
            }
        }

        double x_lo = std::numeric_limits<double>::infinity();
        double y_lo = x_lo;
        double x_hi = -x_lo;
        double y_hi = -x_lo;
        for (double px : {box.left(), box.right()}) {
            for (double py : {box.top(), box.bottom()}) {
                const double ox = px - cx;
                const double oy = py - cy;
                const double nx = cx + a.m[0][0] * ox + a.m[0][1] * oy + a.t[0];
                const double ny = cy + a.m[1][0] * ox + a.m[1][1] * oy + a.t[1];
                x_lo = std::min(x_lo, nx);
                x_hi = std::max(x_hi, nx);
                y_lo = std::min(y_lo, ny);
                y_hi = std::max(y_hi, ny);
            }
        }
        out_box = {0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi), x_hi - x_lo, y_hi - y_lo};
    }

    if (params.blur) out = gaussian_blur(out, params.blur_sigma);
    if (params.noise) {
        Rng rng(params.noise_seed);
        for (double& v : out.data) v += rng.normal(params.noise_mu, params.noise_sigma);
    }
    return {std::move(out), out_box};
}

std::pair<Slice2D, BoundingBox> augment_for_bbox(const Slice2D& image, const BoundingBox& box,
                                                 const BboxAugSpec& spec) {
    return apply_bbox_aug(image, box, sample_bbox_aug(spec));
}

// ---------------------------------------------------------------------------

ManifestRow manifest_row(const SynthesisRequest& r) {
    ManifestRow row;
    row.output_id = r.output_id;
    row.source_subject = r.source_subject;
    row.style_subject = r.style.id;
    row.rotation_deg = r.augmentation.rotation_deg;
    row.elastic_seed = r.augmentation.elastic ? std::to_string(r.augmentation.elastic_seed) : "";
    row.morph_op = std::string(morph_name(r.augmentation.morph));
    row.morph_radius = r.augmentation.morph == MorphOp::none ? 0 : r.augmentation.morph_radius;
    row.stage = std::string(use_name(r.use));
    return row;
}

std::string format_manifest(std::span<const ManifestRow> rows) {
    std::ostringstream out;
    out << manifest_header << '\n';
    for (const auto& r : rows) {
        out << r.output_id << ',' << r.source_subject << ',' << r.style_subject << ',' << r.rotation_deg << ','
            << r.elastic_seed << ',' << r.morph_op << ',' << r.morph_radius << ',' << r.stage << '\n';
    }
    return out.str();
}

std::vector<ManifestRow> emit_dataset(std::span<const SynthesisRequest> requests,
                                      const std::filesystem::path& out_dir, std::uint64_t root_seed,
                                      const SynthesisParams& params) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw IoError("emit_dataset: cannot create " + out_dir.string());
    }
    std::vector<ManifestRow> rows;
    for (std::size_t i = 0; i < requests.size(); ++i) {
        const auto& r = requests[i];
        const Volume image = synthesize_image(r, params, derive_seed(root_seed, i));
        save_volume(out_dir / (r.output_id + "_image.nii"), image, NiftiDatatype::float32);
        save_label_map(out_dir / (r.output_id + "_label.nii"), r.labels);
        rows.push_back(manifest_row(r));
    }
    const std::string text = format_manifest(rows);
    std::ofstream out(out_dir / "manifest.csv", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("emit_dataset: cannot write manifest in " + out_dir.string());
    out << text;
    return rows;
}

}  // namespace scarq
