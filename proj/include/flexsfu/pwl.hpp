// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "flexsfu/activation.hpp"

namespace flexsfu {

// Non-uniform piecewise-linear approximation with n breakpoints.
// Breakpoints must be strictly increasing; n >= 2. Outside the
// breakpoint range the two outer segments extrapolate with slopes
// m_l and m_r anchored at the first and last breakpoint.
struct PwlModel {
    std::vector<double> p;   // breakpoint positions, sorted ascending
    std::vector<double> v;   // value at each breakpoint
    double m_l = 0.0;        // slope left of p.front()
    double m_r = 0.0;        // slope right of p.back()
    BoundaryMode left_mode = BoundaryMode::free;
    BoundaryMode right_mode = BoundaryMode::free;

    std::size_t n() const { return p.size(); }

    // Throws std::invalid_argument when sizes disagree, n < 2, any
    // entry is non-finite, or breakpoints are not strictly increasing.
    void validate() const;
};

// Per-segment affine coefficients: y = m*x + q on segment i.
// A model with n breakpoints has n+1 segments; segment 0 covers
// x <= p[0] and segment n covers x > p[n-1].
struct SegmentCoeffs {
    std::vector<double> m;
    std::vector<double> q;

    std::size_t segments() const { return m.size(); }
};

// Index of the segment containing x: the number of breakpoints
// strictly less than x. Segment i > 0 covers (p[i-1], p[i]].
std::size_t segment_index(const PwlModel& model, double x);

// Evaluates the model via breakpoint interpolation.
double eval_pwl(const PwlModel& model, double x);

// Converts breakpoint form to per-segment slope/intercept pairs.
SegmentCoeffs to_segment_coeffs(const PwlModel& model);

// Evaluates y = m*x + q for the segment selected by x. Matches
// eval_pwl up to the rounding of the affine rewrite.
double eval_coeffs(const SegmentCoeffs& coeffs, const std::vector<double>& p, double x);

// Builds an n-breakpoint model with uniformly spaced breakpoints on
// [lo, hi], values sampled from the target, and boundary conditions
// taken from the activation's asymptotes.
PwlModel uniform_init(const ActivationSpec& spec, std::size_t n, double lo, double hi);

// Same, with explicit per-side boundary modes (a fit over a truncated
// interval may leave a naturally-asymptotic side free). Free sides get
// a central-difference slope estimate at the endpoint.
PwlModel uniform_init_with_modes(const ActivationSpec& spec, std::size_t n, double lo,
                                 double hi, BoundaryMode left, BoundaryMode right);

// Re-applies boundary constraints in place for the sides the model
// holds in asymptote mode: pins v at those ends to m*p + c and
// overwrites the outer slopes. Free sides are untouched.
void apply_boundary(PwlModel& model, const BoundaryInfo& info);

}  // namespace flexsfu
