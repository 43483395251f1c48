#include "scarq/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "scarq/error.hpp"
#include "scarq/rng.hpp"

namespace scarq {

namespace {

constexpr double variance_floor_factor = 1e-8;

double log_normal_pdf(double x, double mean, double variance) {
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

double log_sum_exp(std::span<const double> terms) {
    const double m = *std::max_element(terms.begin(), terms.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

void sort_components(Mixture1D& mixture) {
    std::stable_sort(mixture.components.begin(), mixture.components.end(),
                     [](const auto& a, const auto& b) { return a.mean < b.mean; });
}

struct Range {
    double lo;
    double hi;
};

Range value_range(std::span<const double> values) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return {*lo, *hi};
}

Mixture1D quantile_init(std::span<const double> values, int k, double floor) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    Mixture1D mix;
    double pooled = 0.0;
    for (int j = 0; j < k; ++j) {
        const std::size_t begin = n * static_cast<std::size_t>(j) / static_cast<std::size_t>(k);
        const std::size_t end = n * static_cast<std::size_t>(j + 1) / static_cast<std::size_t>(k);
        double mean = 0.0;
        for (std::size_t i = begin; i < end; ++i) mean += sorted[i];
        mean /= static_cast<double>(end - begin);
        for (std::size_t i = begin; i < end; ++i) pooled += (sorted[i] - mean) * (sorted[i] - mean);
        mix.components.push_back({1.0 / k, mean, 0.0});
    }
    pooled /= static_cast<double>(n);
    for (auto& c : mix.components) c.variance = std::max(pooled, floor);
    return mix;
}

Mixture1D random_init(std::span<const double> values, int k, double floor, std::uint64_t seed) {
    Rng rng(seed);
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());

    Mixture1D mix;
    for (int j = 0; j < k; ++j) {
        const double centre = values[static_cast<std::size_t>(rng.below(values.size()))];
        mix.components.push_back({1.0 / k, centre, std::max(var, floor)});
    }
    return mix;
}

EmFit run_em(std::span<const double> values, Mixture1D mix, double floor, const EmOptions& options) {
    const std::size_t n = values.size();
    const std::size_t k = mix.size();
    std::vector<double> resp(n * k);
    std::vector<double> terms(k);

    EmFit fit;
    // E-step doubles as the log-likelihood evaluation of the current parameters.
    auto expectation = [&](const Mixture1D& m) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                const auto& c = m.components[j];
                terms[j] = c.weight > 0.0 ? std::log(c.weight) + log_normal_pdf(values[i], c.mean, c.variance)
                                          : -std::numeric_limits<double>::infinity();
            }
            const double lse = log_sum_exp(terms);
            ll += lse;
            for (std::size_t j = 0; j < k; ++j) resp[i * k + j] = std::exp(terms[j] - lse);
        }
        return ll;
    };

    double ll = expectation(mix);
    fit.log_likelihood.push_back(ll);
    for (int iter = 0; iter < options.max_iter; ++iter) {
        double pooled_ss = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            double nk = 0.0;
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nk += resp[i * k + j];
                sum += resp[i * k + j] * values[i];
            }
            auto& c = mix.components[j];
            if (nk <= 0.0) {
                c.weight = 0.0;
                continue;
            }
            c.weight = nk / static_cast<double>(n);
            c.mean = sum / nk;
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = values[i] - c.mean;
                ss += resp[i * k + j] * d * d;
            }
            c.variance = std::max(ss / nk, floor);
            pooled_ss += ss;
        }
        if (options.tied_variance) {
            const double v = std::max(pooled_ss / static_cast<double>(n), floor);
            for (auto& c : mix.components) c.variance = v;
        }
        const double next = expectation(mix);
        fit.log_likelihood.push_back(next);
        fit.iterations = iter + 1;
        const double gain = next - ll;
        ll = next;
        if (gain < options.tol) {
            fit.converged = true;
            break;
        }
    }
    sort_components(mix);
    fit.mixture = std::move(mix);
    return fit;
}

void validate_inputs(std::span<const double> values, int k) {
    if (k < 1) throw InvalidArgument("em_fit: need at least one component");
    if (values.size() < 2 * static_cast<std::size_t>(k)) {
        throw InvalidArgument("em_fit: need at least 2K values");
    }
    const auto r = value_range(values);
    if (!(r.hi > r.lo)) throw DegenerateInputError("em_fit: all values are equal");
}

}  // namespace

double Mixture1D::log_likelihood(std::span<const double> values) const {
    std::vector<double> terms(components.size());
    double ll = 0.0;
    for (double v : values) {
        for (std::size_t j = 0; j < components.size(); ++j) {
            const auto& c = components[j];
            terms[j] = c.weight > 0.0 ? std::log(c.weight) + log_normal_pdf(v, c.mean, c.variance)
                                      : -std::numeric_limits<double>::infinity();
        }
        ll += log_sum_exp(terms);
    }
    return ll;
}

std::vector<double> Mixture1D::posterior(double value) const {
    std::vector<double> terms(components.size());
    for (std::size_t j = 0; j < components.size(); ++j) {
        const auto& c = components[j];
        terms[j] = c.weight > 0.0 ? std::log(c.weight) + log_normal_pdf(value, c.mean, c.variance)
                                  : -std::numeric_limits<double>::infinity();
    }
    const double lse = log_sum_exp(terms);
    for (double& t : terms) t = std::exp(t - lse);
    return terms;
}

EmFit em_fit(std::span<const double> values, int components, const EmOptions& options) {
    validate_inputs(values, components);
    const auto r = value_range(values);
    const double floor = variance_floor_factor * (r.hi - r.lo) * (r.hi - r.lo);
    return run_em(values, quantile_init(values, components, floor), floor, options);
}

EmFit em_fit_from(std::span<const double> values, Mixture1D initial, const EmOptions& options) {
    if (initial.components.empty()) throw InvalidArgument("em_fit_from: empty initial mixture");
    validate_inputs(values, static_cast<int>(initial.size()));
    const auto r = value_range(values);
    const double floor = variance_floor_factor * (r.hi - r.lo) * (r.hi - r.lo);
    double total = 0.0;
    for (auto& c : initial.components) {
        if (!(c.weight > 0.0) || !std::isfinite(c.mean) || !(c.variance > 0.0)) {
            throw InvalidArgument("em_fit_from: initial components need positive weight and variance");
        }
        c.variance = std::max(c.variance, floor);
        total += c.weight;
    }
    for (auto& c : initial.components) c.weight /= total;
    return run_em(values, std::move(initial), floor, options);
}

EmFit em_fit_restarts(std::span<const double> values, int components, std::span<const std::uint64_t> seeds,
                      const EmOptions& options) {
    validate_inputs(values, components);
    const auto r = value_range(values);
    const double floor = variance_floor_factor * (r.hi - r.lo) * (r.hi - r.lo);
    EmFit best = run_em(values, quantile_init(values, components, floor), floor, options);
    for (auto seed : seeds) {
        EmFit fit = run_em(values, random_init(values, components, floor, seed), floor, options);
        if (fit.final_log_likelihood() > best.final_log_likelihood()) best = std::move(fit);
    }
    return best;
}

double bic(const EmFit& fit, std::size_t n) {
    const double params = 3.0 * static_cast<double>(fit.mixture.size()) - 1.0;
    return -2.0 * fit.final_log_likelihood() + params * std::log(static_cast<double>(n));
}

}  // namespace scarq
