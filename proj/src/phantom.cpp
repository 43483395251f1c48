#include "scarq/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "scarq/rng.hpp"

namespace scarq {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

bool in_sector(double angle, double start, double end) {
    if (end - start >= two_pi) return true;
    double a = std::fmod(angle - start, two_pi);
    if (a < 0) a += two_pi;
    return a < end - start;
}

void validate(const PhantomSpec& s) {
    if (s.nx < 3 || s.ny < 3 || s.nz < 1) throw InvalidArgument("phantom: grid too small");
    validate_spacing(s.spacing);
    if (!(s.inner_radius_mm > 0.0 && s.inner_radius_mm < s.outer_radius_mm)) {
        throw InvalidArgument("phantom: need 0 < inner radius < outer radius");
    }
    if (!(s.apex_scale > 0.0 && s.apex_scale <= 1.0)) throw InvalidArgument("phantom: apex_scale must be in (0,1]");
    if (!(s.transmurality > 0.0 && s.transmurality <= 1.0)) {
        throw InvalidArgument("phantom: transmurality must be in (0,1]");
    }
    const auto& i = s.intensities;
    const double levels[] = {i.background, i.cavity, i.myocardium, i.scar};
    for (int a = 0; a < 4; ++a) {
        for (int b = a + 1; b < 4; ++b) {
            if (levels[a] == levels[b]) throw InvalidArgument("phantom: class intensities must be distinct");
        }
    }
    if (s.noise_sigma < 0.0) throw InvalidArgument("phantom: negative noise");
}

}  // namespace

bool PhantomSpec::has_scar() const {
    const int last = scar_last_slice < 0 ? nz - 1 : std::min(scar_last_slice, nz - 1);
    return scar_end > scar_start && scar_first_slice <= last && scar_first_slice < nz;
}

SliceRadii phantom_radii(const PhantomSpec& spec, int z) {
    const double f = spec.nz > 1 ? static_cast<double>(z) / (spec.nz - 1) : 0.0;
    const double inner = spec.inner_radius_mm * (1.0 - (1.0 - spec.apex_scale) * f);
    return {inner, inner + (spec.outer_radius_mm - spec.inner_radius_mm)};
}

SubjectRecord generate_phantom(const PhantomSpec& spec) {
    validate(spec);
    const double dx = spec.spacing.dx;
    const double dy = spec.spacing.dy;
    const double reach_x = spec.outer_radius_mm / dx;
    const double reach_y = spec.outer_radius_mm / dy;
    if (spec.cx - reach_x < 1.0 || spec.cx + reach_x > spec.nx - 2.0 || spec.cy - reach_y < 1.0 ||
        spec.cy + reach_y > spec.ny - 2.0) {
        throw RangeError("phantom: LV exceeds the grid");
    }

    const Dims dims{spec.nx, spec.ny, spec.nz};
    std::vector<std::uint8_t> labels(dims.count(), label::background);
    std::vector<double> image(dims.count(), 0.0);
    const bool scarred = spec.has_scar();
    const int scar_last = spec.scar_last_slice < 0 ? spec.nz - 1 : spec.scar_last_slice;
    const auto& lv = spec.intensities;
    const double class_level[] = {lv.background, lv.cavity, lv.myocardium, lv.scar};

    Rng rng(spec.seed);
    std::size_t i = 0;
    for (int z = 0; z < spec.nz; ++z) {
        const auto [inner, outer] = phantom_radii(spec, z);
        const double scar_outer = inner + spec.transmurality * (outer - inner);
        const bool scar_slice = scarred && z >= spec.scar_first_slice && z <= scar_last;
        for (int y = 0; y < spec.ny; ++y) {
            for (int x = 0; x < spec.nx; ++x, ++i) {
                const double ox = (x - spec.cx) * dx;
                const double oy = (y - spec.cy) * dy;
                const double d = std::hypot(ox, oy);
                std::uint8_t c = label::background;
                if (d < inner) {
                    c = label::cavity;
                } else if (d < outer) {
                    c = label::myocardium;
                    if (scar_slice && d < scar_outer && in_sector(std::atan2(oy, ox), spec.scar_start, spec.scar_end)) {
                        c = label::scar;
                    }
                }
                labels[i] = c;
                image[i] = class_level[c] + (spec.noise_sigma > 0.0 ? rng.normal(0.0, spec.noise_sigma) : 0.0);
            }
        }
    }

    SubjectRecord subject;
    subject.id = spec.id;
    subject.image = Volume(dims, spec.spacing, std::move(image));
    subject.labels = LabelMap(dims, spec.spacing, std::move(labels));
    subject.pathological = scarred;
    return subject;
}

double analytic_scar_fraction(double inner, double outer, double sector, double transmurality) {
    const double scar_outer = inner + transmurality * (outer - inner);
    const double angular = std::min(sector, two_pi) / two_pi;
    return angular * (scar_outer * scar_outer - inner * inner) / (outer * outer - inner * inner);
}

std::vector<PhantomSpec> population_specs(int n, double pathological_fraction, std::uint64_t seed,
                                          const PopulationRanges& r) {
    if (n < 1) throw InvalidArgument("generate_population: n must be at least 1");
    if (r.min_slices < 4 || r.max_slices < r.min_slices) throw InvalidArgument("generate_population: need 4 <= min_slices <= max_slices");
    if (!(pathological_fraction >= 0.0 && pathological_fraction <= 1.0)) {
        throw InvalidArgument("generate_population: fraction must be in [0,1]");
    }
    const auto n_path = static_cast<int>(std::lround(n * pathological_fraction));
    std::vector<bool> pathological(static_cast<std::size_t>(n), false);
    std::fill_n(pathological.begin(), n_path, true);
    Rng shuffle_rng(derive_seed(seed, 0xFFFFFFFFULL));
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(shuffle_rng.below(static_cast<std::uint64_t>(i + 1)));
        const bool tmp = pathological[i];
        pathological[i] = pathological[j];
        pathological[j] = tmp;
    }

    std::vector<PhantomSpec> specs;
    for (int s = 0; s < n; ++s) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
        PhantomSpec p;
        char id[32];
        std::snprintf(id, sizeof id, "phantom_%03d", s);
        p.id = id;
        p.nx = r.nx;
        p.ny = r.ny;
        p.nz = r.min_slices + static_cast<int>(rng.below(static_cast<std::uint64_t>(r.max_slices - r.min_slices + 1)));
        p.spacing = r.spacing;
        p.inner_radius_mm = rng.uniform(r.inner_radius_mm[0], r.inner_radius_mm[1]);
        p.outer_radius_mm = p.inner_radius_mm + rng.uniform(r.wall_thickness_mm[0], r.wall_thickness_mm[1]);
        p.apex_scale = rng.uniform(r.apex_scale[0], r.apex_scale[1]);
        p.cx = 0.5 * (r.nx - 1) + rng.uniform(-r.centre_offset_px, r.centre_offset_px);
        p.cy = 0.5 * (r.ny - 1) + rng.uniform(-r.centre_offset_px, r.centre_offset_px);
        const double start = rng.uniform(0.0, two_pi);
        const double width = rng.uniform(r.scar_width_deg[0], r.scar_width_deg[1]) * std::numbers::pi / 180.0;
        const double transmurality = rng.uniform(r.transmurality[0], r.transmurality[1]);
        const int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.nz / 2)));
        const int last = first + 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(p.nz - first - 2)));
        if (pathological[static_cast<std::size_t>(s)]) {
            p.scar_start = start;
            p.scar_end = start + width;
            p.transmurality = transmurality;
            p.scar_first_slice = first;
            p.scar_last_slice = last;
        }
        p.intensities = r.intensities;
        p.noise_sigma = r.noise_sigma;
        p.seed = derive_seed(seed, static_cast<std::uint64_t>(s) + 0x10000ULL);
        specs.push_back(p);
    }
    return specs;
}

std::vector<SubjectRecord> generate_population(int n, double pathological_fraction, std::uint64_t seed,
                                               const PopulationRanges& ranges) {
    std::vector<SubjectRecord> out;
    for (const auto& spec : population_specs(n, pathological_fraction, seed, ranges)) {
        out.push_back(generate_phantom(spec));
    }
    return out;
}

}  // namespace scarq
