#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace scarq {

struct GaussianComponent {
    double weight = 0.0;
    double mean = 0.0;
    double variance = 1.0;
};

/// One-dimensional Gaussian mixture; components are kept sorted by mean.
struct Mixture1D {
    std::vector<GaussianComponent> components;

    std::size_t size() const { return components.size(); }
    double log_likelihood(std::span<const double> values) const;
    /// Posterior responsibility of each component for `value`.
    std::vector<double> posterior(double value) const;
};

struct EmOptions {
    int max_iter = 200;
    double tol = 1e-6;
    /// One variance shared by all components.
    bool tied_variance = false;
};

struct EmFit {
    Mixture1D mixture;
    /// Log-likelihood of the initial parameters followed by one entry per iteration.
    std::vector<double> log_likelihood;
    int iterations = 0;
    bool converged = false;

    double final_log_likelihood() const { return log_likelihood.back(); }
};

/// EM for a K-component 1D Gaussian mixture.
///
/// Initialization: values are sorted and split into K equal-count chunks; chunk
/// means seed the component means, the pooled within-chunk variance seeds every
/// variance, and weights start uniform. Iteration stops once the log-likelihood
/// gain falls below `tol` or after `max_iter` iterations. Variances are floored
/// at 1e-8 * range^2.
///
/// Throws InvalidArgument when fewer than 2K values are given and
/// DegenerateInputError when all values are equal.
EmFit em_fit(std::span<const double> values, int components, const EmOptions& options = {});

/// EM from caller-supplied starting parameters (weights are renormalized).
EmFit em_fit_from(std::span<const double> values, Mixture1D initial, const EmOptions& options = {});

/// Runs the quantile-initialized fit plus one randomly initialized fit per
/// seed and returns the one with the highest final log-likelihood.
EmFit em_fit_restarts(std::span<const double> values, int components, std::span<const std::uint64_t> seeds,
                      const EmOptions& options = {});

/// Bayesian information criterion, -2 log L + p log n with p = 3K - 1.
double bic(const EmFit& fit, std::size_t n);

}  // namespace scarq
