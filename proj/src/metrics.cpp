#include "scarq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scarq/preprocess.hpp"

namespace scarq {

double dice(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) throw DimensionError("dice: mask sizes differ");
    std::size_t na = 0;
    std::size_t nb = 0;
    std::size_t both = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a[i] != 0;
        const bool y = b[i] != 0;
        na += x;
        nb += y;
        both += x && y;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double dice(const Mask3D& a, const Mask3D& b) {
    if (a.dims != b.dims) throw DimensionError("dice: grid dims differ");
    return dice(std::span<const std::uint8_t>(a.data), std::span<const std::uint8_t>(b.data));
}

double dice(const Mask2D& a, const Mask2D& b) {
    require_same_shape(a, b, "dice: slice shapes differ");
    return dice(std::span<const std::uint8_t>(a.data), std::span<const std::uint8_t>(b.data));
}

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

Mask3D boundary_impl(const Mask3D& m, bool through_slices) {
    const auto& d = m.dims;
    Mask3D out{d, m.spacing, std::vector<std::uint8_t>(m.data.size(), 0)};
    auto at = [&](int x, int y, int z) -> bool {
        if (x < 0 || y < 0 || z < 0 || x >= d.nx || y >= d.ny || z >= d.nz) return false;
        return m.data[(static_cast<std::size_t>(z) * d.ny + y) * d.nx + x] != 0;
    };
    std::size_t i = 0;
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x, ++i) {
                if (!m.data[i]) continue;
                bool edge = !at(x - 1, y, z) || !at(x + 1, y, z) || !at(x, y - 1, z) || !at(x, y + 1, z);
                if (through_slices) edge = edge || !at(x, y, z - 1) || !at(x, y, z + 1);
                out.data[i] = edge;
            }
        }
    }
    return out;
}

/// Exact 1D squared distance transform (lower envelope of parabolas) for
/// samples at positions q * step.
void edt_1d(std::vector<double>& f, double step, std::vector<double>& out, std::vector<int>& v,
            std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (!std::isfinite(f[q])) continue;
        const double pq = q * step;
        while (k >= 0) {
            const double pv = v[k] * step;
            const double s = ((f[q] + pq * pq) - (f[v[k]] + pv * pv)) / (2.0 * (pq - pv));
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -inf : [&] {
            const double pv = v[k - 1] * step;
            return ((f[q] + pq * pq) - (f[v[k - 1]] + pv * pv)) / (2.0 * (pq - pv));
        }();
        z[k + 1] = inf;
    }
    if (k < 0) {
        std::fill(out.begin(), out.end(), inf);
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        const double pq = q * step;
        while (z[j + 1] < pq) ++j;
        const double diff = pq - v[j] * step;
        out[q] = diff * diff + f[v[j]];
    }
}

/// Squared Euclidean distance (mm^2) from every voxel to the nearest feature voxel.
std::vector<double> squared_distance_transform(const Mask3D& feature) {
    const auto& d = feature.dims;
    std::vector<double> dist(feature.data.size());
    for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = feature.data[i] ? 0.0 : inf;

    const int extent[3] = {d.nx, d.ny, d.nz};
    const double step[3] = {feature.spacing.dx, feature.spacing.dy, feature.spacing.dz};
    const std::size_t stride[3] = {1, static_cast<std::size_t>(d.nx), static_cast<std::size_t>(d.nx) * d.ny};
    const int longest = std::max({d.nx, d.ny, d.nz});
    std::vector<double> f(longest);
    std::vector<double> out(longest);
    std::vector<int> v(longest);
    std::vector<double> z(longest + 1);

    for (int axis = 0; axis < 3; ++axis) {
        const int n = extent[axis];
        if (n == 1) continue;
        f.resize(n);
        out.resize(n);
        v.assign(n, 0);
        z.assign(n + 1, 0.0);
        const int a1 = (axis + 1) % 3;
        const int a2 = (axis + 2) % 3;
        for (int j = 0; j < extent[a2]; ++j) {
            for (int i = 0; i < extent[a1]; ++i) {
                const std::size_t base = i * stride[a1] + j * stride[a2];
                for (int q = 0; q < n; ++q) f[q] = dist[base + q * stride[axis]];
                edt_1d(f, step[axis], out, v, z);
                for (int q = 0; q < n; ++q) dist[base + q * stride[axis]] = out[q];
            }
        }
    }
    return dist;
}

std::vector<double> directed_distances(const Mask3D& from_boundary, const std::vector<double>& to_sq_dist) {
    std::vector<double> out;
    for (std::size_t i = 0; i < from_boundary.data.size(); ++i) {
        if (from_boundary.data[i]) out.push_back(std::sqrt(to_sq_dist[i]));
    }
    return out;
}

double hausdorff_impl(const Mask3D& a, const Mask3D& b, HausdorffMode mode, bool through_slices) {
    if (a.dims != b.dims) throw DimensionError("hausdorff: grid dims differ");
    if (a.count_nonzero() == 0 || b.count_nonzero() == 0) {
        throw DegenerateInputError("hausdorff: undefined for an empty mask");
    }
    const Mask3D ba = boundary_impl(a, through_slices);
    const Mask3D bb = boundary_impl(b, through_slices);
    const auto ab = directed_distances(ba, squared_distance_transform(bb));
    const auto ba_d = directed_distances(bb, squared_distance_transform(ba));
    if (mode == HausdorffMode::max) {
        return std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba_d.begin(), ba_d.end()));
    }
    std::vector<double> pooled = ab;
    pooled.insert(pooled.end(), ba_d.begin(), ba_d.end());
    return percentile(pooled, 95.0);
}

Mask3D lift(const Mask2D& m) {
    return Mask3D{{m.width, m.height, 1}, {m.dx, m.dy, 1.0}, m.data};
}

}  // namespace

Mask3D boundary(const Mask3D& mask) { return boundary_impl(mask, true); }

double hausdorff_mm(const Mask3D& a, const Mask3D& b, HausdorffMode mode) {
    return hausdorff_impl(a, b, mode, true);
}

double hausdorff_mm(const Mask2D& a, const Mask2D& b, HausdorffMode mode) {
    require_same_shape(a, b, "hausdorff: slice shapes differ");
    return hausdorff_impl(lift(a), lift(b), mode, false);
}

double volume_difference(const Mask3D& a, const Mask3D& b) {
    if (a.dims != b.dims) throw DimensionError("volume_difference: grid dims differ");
    return std::fabs(mask_volume_cm3(a) - mask_volume_cm3(b));
}

double scar_burden(const Mask3D& scar, const Mask3D& myocardium) {
    if (scar.dims != myocardium.dims) throw DimensionError("scar_burden: grid dims differ");
    std::size_t wall = 0;
    std::size_t scarred = 0;
    for (std::size_t i = 0; i < scar.data.size(); ++i) {
        wall += scar.data[i] || myocardium.data[i];
        scarred += scar.data[i] != 0;
    }
    if (wall == 0) throw DegenerateInputError("scar_burden: empty myocardial wall");
    return 100.0 * static_cast<double>(scarred) / static_cast<double>(wall);
}

void PairedSeries::validate() const {
    if (manual.size() != automatic.size()) throw InvalidArgument("paired series lengths differ");
    if (manual.size() < 2) throw InvalidArgument("paired series need at least two pairs");
}

double pearson_r(const PairedSeries& s) {
    s.validate();
    const auto n = static_cast<double>(s.manual.size());
    const double mx = std::accumulate(s.manual.begin(), s.manual.end(), 0.0) / n;
    const double my = std::accumulate(s.automatic.begin(), s.automatic.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < s.manual.size(); ++i) {
        const double a = s.manual[i] - mx;
        const double b = s.automatic[i] - my;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0) throw DegenerateInputError("pearson_r: constant series");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

AgreementResult bland_altman(const PairedSeries& s) {
    s.validate();
    const std::size_t n = s.manual.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += s.automatic[i] - s.manual[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (s.automatic[i] - s.manual[i]) - mean;
        ss += d * d;
    }
    AgreementResult r;
    r.bias = mean;
    r.sd = std::sqrt(ss / static_cast<double>(n - 1));
    r.loa_low = r.bias - loa_z * r.sd;
    r.loa_high = r.bias + loa_z * r.sd;
    return r;
}

double classification_accuracy(std::span<const bool> predicted, std::span<const bool> truth) {
    if (predicted.size() != truth.size()) throw InvalidArgument("classification_accuracy: lengths differ");
    if (predicted.empty()) throw InvalidArgument("classification_accuracy: no subjects");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == truth[i];
    return 100.0 * static_cast<double>(correct) / static_cast<double>(predicted.size());
}

namespace {

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences, Alternative alternative) {
    std::vector<double> d;
    for (double v : differences) {
        if (!std::isfinite(v)) throw InvalidArgument("wilcoxon: non-finite difference");
        if (v != 0.0) d.push_back(v);
    }
    if (d.empty()) throw DegenerateInputError("wilcoxon: all differences are zero");
    if (d.size() < 5) throw InvalidArgument("wilcoxon: need at least 5 nonzero differences");

    const std::size_t n = d.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::fabs(d[a]) < std::fabs(d[b]); });

    std::vector<double> rank(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]])) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        const auto t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }

    WilcoxonResult result;
    result.n = static_cast<int>(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] > 0) result.statistic += rank[i];
    }

    double p_greater = 0.0;
    double p_less = 0.0;
    if (n <= static_cast<std::size_t>(wilcoxon_exact_max_n)) {
        result.exact = true;
        // Ranks are multiples of 0.5; compare doubled sums as integers.
        std::vector<long> twice(n);
        for (std::size_t i = 0; i < n; ++i) twice[i] = std::lround(2.0 * rank[i]);
        const long observed = std::lround(2.0 * result.statistic);
        const std::uint32_t patterns = 1u << n;
        std::uint32_t ge = 0;
        std::uint32_t le = 0;
        for (std::uint32_t mask = 0; mask < patterns; ++mask) {
            long w = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (1u << i)) w += twice[i];
            }
            ge += w >= observed;
            le += w <= observed;
        }
        p_greater = static_cast<double>(ge) / patterns;
        p_less = static_cast<double>(le) / patterns;
    } else {
        const auto nn = static_cast<double>(n);
        const double mean = nn * (nn + 1.0) / 4.0;
        const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
        const double z = (result.statistic - mean) / std::sqrt(var);
        p_greater = normal_upper_tail(z);
        p_less = normal_upper_tail(-z);
    }

    switch (alternative) {
        case Alternative::greater: result.p_value = p_greater; break;
        case Alternative::less: result.p_value = p_less; break;
        case Alternative::two_sided: result.p_value = std::min(1.0, 2.0 * std::min(p_greater, p_less)); break;
    }
    return result;
}

}  // namespace scarq
