// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>

namespace flexsfu {

enum class ActivationKind {
    relu,
    leaky_relu,
    gelu,
    silu,
    sigmoid,
    tanh,
    exp_neg,
    hardswish,
};

/// Identity of a target function f together with its exact double-precision
/// evaluator and default interpolation interval.
struct ActivationSpec {
    ActivationKind kind = ActivationKind::relu;
    double alpha = 0.01;  // leaky_relu slope for x < 0

    double interval_lo() const;
    double interval_hi() const;
    std::pair<double, double> default_interval() const {
        return {interval_lo(), interval_hi()};
    }

    std::string name() const;

    /// Parses "gelu", "leaky_relu:0.01", ... (the CLI-addressable form).
    static ActivationSpec from_string(const std::string& s);
};

enum class BoundaryMode { asymptote, free };

/// Linear asymptote data for both ends of the real line.
/// Intercepts are defined as lim (f(x) - m*x); a side with no finite
/// asymptote inside its usable range reports mode = free.
struct BoundaryInfo {
    BoundaryMode left_mode = BoundaryMode::free;
    BoundaryMode right_mode = BoundaryMode::free;
    double m_l = 0.0;
    double c_l = 0.0;
    double m_r = 0.0;
    double c_r = 0.0;
};

/// Exact f(x) in double precision. Throws std::invalid_argument on
/// non-finite input.
double eval_exact(const ActivationSpec& spec, double x);

BoundaryInfo boundary_info(const ActivationSpec& spec);

}  // namespace flexsfu
