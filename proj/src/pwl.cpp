// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#include "flexsfu/pwl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flexsfu {

void PwlModel::validate() const {
    if (p.size() < 2) {
        throw std::invalid_argument("PwlModel: need at least 2 breakpoints");
    }
    if (p.size() != v.size()) {
        throw std::invalid_argument("PwlModel: p/v size mismatch");
    }
    if (!std::isfinite(m_l) || !std::isfinite(m_r)) {
        throw std::invalid_argument("PwlModel: non-finite outer slope");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i]) || !std::isfinite(v[i])) {
            throw std::invalid_argument("PwlModel: non-finite entry");
        }
        if (i > 0 && !(p[i - 1] < p[i])) {
            throw std::invalid_argument("PwlModel: breakpoints not strictly increasing");
        }
    }
    // Relative spacing floor keeps segment slopes representable.
    const double min_gap = 1e-6 * (p.back() - p.front());
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (!(p[i - 1] + min_gap <= p[i])) {
            throw std::invalid_argument("PwlModel: breakpoints closer than the minimum gap");
        }
    }
}

std::size_t segment_index(const PwlModel& model, double x) {
    // count of breakpoints strictly below x; ties at a breakpoint
    // resolve to the segment on its left.
    return static_cast<std::size_t>(
        std::lower_bound(model.p.begin(), model.p.end(), x) - model.p.begin());
}

double eval_pwl(const PwlModel& model, double x) {
    const std::size_t n = model.p.size();
    if (x <= model.p[0]) {
        return model.m_l * (x - model.p[0]) + model.v[0];
    }
    if (x >= model.p[n - 1]) {
        return model.m_r * (x - model.p[n - 1]) + model.v[n - 1];
    }
    const std::size_t i = segment_index(model, x);  // 1 <= i <= n-1
    if (x == model.p[i]) return model.v[i];  // breakpoint identity, exactly
    const double t = (x - model.p[i - 1]) / (model.p[i] - model.p[i - 1]);
    return model.v[i - 1] + t * (model.v[i] - model.v[i - 1]);
}

SegmentCoeffs to_segment_coeffs(const PwlModel& model) {
    const std::size_t n = model.p.size();
    SegmentCoeffs c;
    c.m.resize(n + 1);
    c.q.resize(n + 1);
    c.m[0] = model.m_l;
    c.q[0] = model.v[0] - model.m_l * model.p[0];
    for (std::size_t i = 1; i < n; ++i) {
        const double slope = (model.v[i] - model.v[i - 1]) / (model.p[i] - model.p[i - 1]);
        c.m[i] = slope;
        c.q[i] = model.v[i - 1] - slope * model.p[i - 1];
    }
    c.m[n] = model.m_r;
    c.q[n] = model.v[n - 1] - model.m_r * model.p[n - 1];
    return c;
}

double eval_coeffs(const SegmentCoeffs& coeffs, const std::vector<double>& p, double x) {
    const std::size_t i = static_cast<std::size_t>(
        std::lower_bound(p.begin(), p.end(), x) - p.begin());
    return coeffs.m[i] * x + coeffs.q[i];
}

PwlModel uniform_init(const ActivationSpec& spec, std::size_t n, double lo, double hi) {
    const BoundaryInfo info = boundary_info(spec);
    return uniform_init_with_modes(spec, n, lo, hi, info.left_mode, info.right_mode);
}

PwlModel uniform_init_with_modes(const ActivationSpec& spec, std::size_t n, double lo,
                                 double hi, BoundaryMode left, BoundaryMode right) {
    if (n < 2) {
        throw std::invalid_argument("uniform_init: need at least 2 breakpoints");
    }
    if (!(lo < hi)) {
        throw std::invalid_argument("uniform_init: empty interval");
    }
    PwlModel model;
    model.p.resize(n);
    model.v.resize(n);
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = (i + 1 == n) ? hi : lo + step * static_cast<double>(i);
        model.p[i] = x;
        model.v[i] = eval_exact(spec, x);
    }
    model.left_mode = left;
    model.right_mode = right;
    // Free ends start from a derivative estimate so extrapolation is sane.
    const double delta = 1e-5 * (hi - lo);
    if (left == BoundaryMode::free) {
        model.m_l = (eval_exact(spec, lo + delta) - eval_exact(spec, lo - delta)) / (2.0 * delta);
    }
    if (right == BoundaryMode::free) {
        model.m_r = (eval_exact(spec, hi + delta) - eval_exact(spec, hi - delta)) / (2.0 * delta);
    }
    apply_boundary(model, boundary_info(spec));
    return model;
}

void apply_boundary(PwlModel& model, const BoundaryInfo& info) {
    const std::size_t n = model.p.size();
    if (model.left_mode == BoundaryMode::asymptote) {
        model.m_l = info.m_l;
        model.v[0] = info.m_l * model.p[0] + info.c_l;
    }
    if (model.right_mode == BoundaryMode::asymptote) {
        model.m_r = info.m_r;
        model.v[n - 1] = info.m_r * model.p[n - 1] + info.c_r;
    }
}

}  // namespace flexsfu
