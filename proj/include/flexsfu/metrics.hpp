// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "flexsfu/activation.hpp"
#include "flexsfu/fitter.hpp"
#include "flexsfu/pwl.hpp"
#include "flexsfu/sfu_sim.hpp"

namespace flexsfu {

// Uniform-grid trapezoid error estimates against the exact activation.
// sq_aae = mae^2 puts mean-absolute-error numbers on the MSE scale.
struct ErrorMetrics {
    double mse = 0.0;
    double mae = 0.0;
    double sq_aae = 0.0;
    double max_abs_err = 0.0;
    int grid_points = 0;
    double lo = 0.0;
    double hi = 0.0;

    double aae() const { return mae; }
};

ErrorMetrics compute_metrics(const std::function<double(double)>& approx,
                             const ActivationSpec& spec, double lo, double hi,
                             int grid_points);
ErrorMetrics compute_metrics(const PwlModel& model, const ActivationSpec& spec, double lo,
                             double hi, int grid_points);
ErrorMetrics compute_metrics(const LutImage& image, const ActivationSpec& spec, double lo,
                             double hi, int grid_points);

// Software image evaluation, element-wise identical to the datapath:
// encode x, rank lookup over the stored breakpoints, fused MADD,
// decode the result.
double quantized_eval(const LutImage& image, double x);

struct SweepRow {
    std::string function;
    std::size_t n = 0;
    double final_loss = 0.0;
    ErrorMetrics metrics;
    PwlModel model;
};

// Fits every breakpoint count and measures each best model.
std::vector<SweepRow> sweep_breakpoints(const ActivationSpec& spec, double lo, double hi,
                                        const std::vector<std::size_t>& counts,
                                        const FitterConfig& config);

struct UniformComparison {
    double mse_uniform = 0.0;
    double mse_fitted = 0.0;
    double ratio = 0.0;  // uniform / fitted
    PwlModel uniform_model;
    PwlModel fitted_model;
};

// Uniform breakpoint placement with exact values versus the full fit,
// both measured by the same objective grid.
UniformComparison uniform_vs_nonuniform(const ActivationSpec& spec, double lo, double hi,
                                        std::size_t n, const FitterConfig& config);

struct SoaRow {
    std::string function;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n = 0;
    ErrorMetrics metrics;
    // Published reference accuracy (squared mean absolute error) for
    // this configuration; tabulated for comparison, not produced here.
    double reference_sq_aae = 0.0;
    bool free_left = false;  // truncated interval sides fit without asymptote pinning
    bool free_right = false;
    PwlModel model;
};

// Runs the standard comparison configurations for tanh, sigmoid, and
// gelu over their published intervals and breakpoint counts.
std::vector<SoaRow> soa_comparison(const FitterConfig& base_config);

// Worker count for independent table rows: FLEXSFU_THREADS when set
// (clamped to [1, 64]), otherwise the hardware concurrency.
int worker_count();

}  // namespace flexsfu
