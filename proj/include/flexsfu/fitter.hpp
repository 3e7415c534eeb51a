// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "flexsfu/activation.hpp"
#include "flexsfu/pwl.hpp"

namespace flexsfu {

// Per-side boundary handling for a fit: auto_detect uses the
// activation's natural asymptotes; the other two force a mode,
// e.g. free ends for fits over truncated intervals.
enum class BoundaryOverride { auto_detect, asymptote, free_side };

struct FitterConfig {
    double lr = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int grid_points = 100001;
    int max_inner_steps = 5000;
    int inner_patience = 200;
    double inner_rel_tol = 1e-7;
    double plateau_factor = 0.5;
    int plateau_patience = 50;
    double outer_lr_decay = 0.5;
    double lr_floor = 1e-4;
    int max_outer_iters = 20;
    std::uint64_t seed = 0;
    BoundaryOverride left_boundary = BoundaryOverride::auto_detect;
    BoundaryOverride right_boundary = BoundaryOverride::auto_detect;

    void validate() const;  // throws std::invalid_argument on bad fields
};

struct LossSample {
    int step;  // global Adam step index across the whole fit
    double loss;
    double lr;
};

struct OuterTrace {
    int iteration;
    double removed_p;
    double inserted_p;
    double loss_after;
};

struct FitReport {
    double final_loss = 0.0;
    std::vector<LossSample> loss_history;
    int outer_iterations = 0;
    std::vector<OuterTrace> trace;
    double wall_time_s = 0.0;  // informational; never serialized
};

// Gradient of the discrete loss with respect to every parameter slot.
// Slots owned by an asymptote-constrained side are reported as zero;
// their chain contribution is folded into the breakpoint position.
struct LossGradient {
    std::vector<double> d_p;
    std::vector<double> d_v;
    double d_ml = 0.0;
    double d_mr = 0.0;
};

struct InsertionChoice {
    std::size_t segment;  // inner segment index in [1, n-1]
    double p_new;
    double v_new;
    std::vector<double> losses;  // one entry per inner segment, index 0 = segment 1
};

// Mean squared error between the model and the activation over a
// uniform composite-trapezoid grid on [lo, hi], normalized by the
// interval length. This discrete sum is the optimization objective.
double loss_mse(const PwlModel& model, const ActivationSpec& spec, double lo, double hi,
                int grid_points);

// Exact analytic gradient of loss_mse's discrete sum.
LossGradient grad_loss(const PwlModel& model, const ActivationSpec& spec, double lo,
                       double hi, int grid_points);

// Adam descent with plateau LR scheduling, sort-and-clamp projection,
// and boundary re-application after every step. Returns the
// lowest-loss model encountered and the per-step loss history.
// Throws DivergedError if the loss leaves the finite range.
std::pair<PwlModel, std::vector<LossSample>> inner_optimize(const PwlModel& model,
                                                            const ActivationSpec& spec,
                                                            double lo, double hi,
                                                            const FitterConfig& config,
                                                            double lr);

// Loss of the model with breakpoint i deleted (boundary re-applied),
// for every i; returns the argmin index. Requires n >= 3.
std::pair<std::size_t, std::vector<double>> removal_candidate(const PwlModel& model,
                                                              const ActivationSpec& spec,
                                                              double lo, double hi,
                                                              const FitterConfig& config);

// Length-weighted squared-error integral per inner segment; the new
// breakpoint is the midpoint of the argmax segment, placed on the
// existing line so the interpolant is unchanged at insertion time.
InsertionChoice insertion_candidate(const PwlModel& model, const ActivationSpec& spec,
                                    double lo, double hi, const FitterConfig& config);

// Full optimization: uniform init, inner descent, then outer
// remove/insert cycles at geometrically decaying learning rates.
// Deterministic for a fixed config.
std::pair<PwlModel, FitReport> fit(const ActivationSpec& spec, double lo, double hi,
                                   std::size_t n, const FitterConfig& config);

}  // namespace flexsfu
