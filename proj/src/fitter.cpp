// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#include "flexsfu/fitter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "flexsfu/errors.hpp"

namespace flexsfu {

namespace {

struct Grid {
    double a;
    double b;
    int points;
    double h;
};

Grid make_grid(double lo, double hi, int points) {
    if (!(lo < hi)) throw std::invalid_argument("fitter: empty interval");
    if (points < 2) throw std::invalid_argument("fitter: grid_points must be >= 2");
    return Grid{lo, hi, points, (hi - lo) / static_cast<double>(points - 1)};
}

double grid_x(const Grid& g, int j) {
    return j + 1 == g.points ? g.b : g.a + g.h * static_cast<double>(j);
}

std::vector<double> sample_target(const ActivationSpec& spec, const Grid& g) {
    std::vector<double> f(static_cast<std::size_t>(g.points));
    for (int j = 0; j < g.points; ++j) f[static_cast<std::size_t>(j)] = eval_exact(spec, grid_x(g, j));
    return f;
}

// One fused sweep: trapezoid loss and, when grad is non-null, the
// exact gradient of that sum. Expressions mirror eval_pwl so the
// objective is bitwise the same as summing eval_pwl residuals.
double loss_grad_pass(const PwlModel& m, const std::vector<double>& f, const Grid& g,
                      LossGradient* grad) {
    const std::size_t n = m.p.size();
    if (grad) {
        grad->d_p.assign(n, 0.0);
        grad->d_v.assign(n, 0.0);
        grad->d_ml = 0.0;
        grad->d_mr = 0.0;
    }
    const double base_w = 1.0 / static_cast<double>(g.points - 1);
    double loss = 0.0;
    std::size_t k = 0;  // breakpoints strictly below the current x
    std::size_t cur = static_cast<std::size_t>(-1);
    double pl = 0.0, dp = 1.0, vl = 0.0, dv = 0.0, s = 0.0;
    for (int j = 0; j < g.points; ++j) {
        const double x = grid_x(g, j);
        while (k < n && m.p[k] < x) ++k;
        const double w = (j == 0 || j + 1 == g.points) ? 0.5 * base_w : base_w;
        double yhat;
        int region;  // -1 left outer, 0 inner, +1 right outer
        double t = 0.0;
        if (x <= m.p[0]) {
            region = -1;
            yhat = m.m_l * (x - m.p[0]) + m.v[0];
        } else if (x >= m.p[n - 1]) {
            region = 1;
            yhat = m.m_r * (x - m.p[n - 1]) + m.v[n - 1];
        } else {
            region = 0;
            if (k != cur) {
                cur = k;
                pl = m.p[k - 1];
                dp = m.p[k] - m.p[k - 1];
                vl = m.v[k - 1];
                dv = m.v[k] - m.v[k - 1];
                s = dv / dp;
            }
            t = (x - pl) / dp;
            // Exact breakpoint hits return v[k] bitwise, matching eval_pwl.
            yhat = (x == m.p[k]) ? m.v[k] : vl + t * dv;
        }
        const double e = yhat - f[static_cast<std::size_t>(j)];
        loss += w * e * e;
        if (grad) {
            const double c = 2.0 * w * e;
            if (region < 0) {
                grad->d_ml += c * (x - m.p[0]);
                grad->d_p[0] += -c * m.m_l;
                grad->d_v[0] += c;
            } else if (region > 0) {
                grad->d_mr += c * (x - m.p[n - 1]);
                grad->d_p[n - 1] += -c * m.m_r;
                grad->d_v[n - 1] += c;
            } else {
                grad->d_v[k - 1] += c * (1.0 - t);
                grad->d_v[k] += c * t;
                grad->d_p[k - 1] += c * s * (x - m.p[k]) / dp;
                grad->d_p[k] += -c * s * (x - pl) / dp;
            }
        }
    }
    if (grad) {
        // Constrained ends: v = m*p + c chains the value derivative
        // into the position; slope and value slots are not free.
        if (m.left_mode == BoundaryMode::asymptote) {
            grad->d_p[0] += grad->d_v[0] * m.m_l;
            grad->d_v[0] = 0.0;
            grad->d_ml = 0.0;
        }
        if (m.right_mode == BoundaryMode::asymptote) {
            grad->d_p[n - 1] += grad->d_v[n - 1] * m.m_r;
            grad->d_v[n - 1] = 0.0;
            grad->d_mr = 0.0;
        }
    }
    return loss;
}

struct AdamState {
    std::vector<double> m1;
    std::vector<double> m2;
    explicit AdamState(std::size_t size) : m1(size, 0.0), m2(size, 0.0) {}
};

// Parameter layout: [p_0..p_{n-1}, v_0..v_{n-1}, m_l, m_r].
void adam_update(PwlModel& m, AdamState& st, const LossGradient& g, int t, double lr,
                 const FitterConfig& cfg) {
    const std::size_t n = m.p.size();
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    auto step_one = [&](double& param, double grad, std::size_t slot) {
        double& m1 = st.m1[slot];
        double& m2 = st.m2[slot];
        m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
        m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad * grad;
        param -= lr * (m1 / bc1) / (std::sqrt(m2 / bc2) + cfg.adam_eps);
    };
    for (std::size_t i = 0; i < n; ++i) step_one(m.p[i], g.d_p[i], i);
    for (std::size_t i = 0; i < n; ++i) step_one(m.v[i], g.d_v[i], n + i);
    step_one(m.m_l, g.d_ml, 2 * n);
    step_one(m.m_r, g.d_mr, 2 * n + 1);
}

// Sort (p, v) pairs jointly (moments follow), enforce the minimum gap
// left to right, and re-pin constrained ends.
void project(PwlModel& m, AdamState& st, const BoundaryInfo& info) {
    const std::size_t n = m.p.size();
    if (!std::is_sorted(m.p.begin(), m.p.end())) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return m.p[a] < m.p[b]; });
        auto permute = [&](std::vector<double>& vec, std::size_t offset) {
            std::vector<double> tmp(n);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = vec[offset + idx[i]];
            for (std::size_t i = 0; i < n; ++i) vec[offset + i] = tmp[i];
        };
        permute(m.p, 0);
        permute(m.v, 0);
        permute(st.m1, 0);
        permute(st.m2, 0);
        permute(st.m1, n);
        permute(st.m2, n);
    }
    const double span = m.p[n - 1] - m.p[0];
    // Twice the validation floor: clamping can stretch the span, and
    // the final model must still clear the 1e-6 relative-gap check.
    const double min_gap = 2e-6 * (span > 0.0 ? span : 1.0);
    for (std::size_t i = 1; i < n; ++i) {
        if (m.p[i] < m.p[i - 1] + min_gap) m.p[i] = m.p[i - 1] + min_gap;
    }
    apply_boundary(m, info);
}

PwlModel inner_optimize_impl(PwlModel model, const std::vector<double>& f, const Grid& g,
                             const FitterConfig& cfg, double lr0, const BoundaryInfo& info,
                             std::vector<LossSample>& history, int& global_step,
                             double& best_loss_out) {
    const std::size_t n = model.p.size();
    double lr = lr0;
    AdamState st(2 * n + 2);
    LossGradient grad;
    PwlModel best = model;
    double best_loss = std::numeric_limits<double>::infinity();
    // Patience and plateau windows measure the cumulative relative
    // improvement of the best loss since their last reset, so a steady
    // trickle of sub-tolerance steps still counts as progress.
    double stall_anchor = std::numeric_limits<double>::infinity();
    double plateau_anchor = std::numeric_limits<double>::infinity();
    int plateau = 0;
    int stall = 0;
    for (int step = 0; step <= cfg.max_inner_steps; ++step) {
        const double loss = loss_grad_pass(model, f, g, &grad);
        if (!std::isfinite(loss)) {
            throw DivergedError("inner_optimize: non-finite loss at step " +
                                std::to_string(step));
        }
        history.push_back({global_step++, loss, lr});
        if (step == 0) {
            best = model;
            best_loss = loss;
            stall_anchor = loss;
            plateau_anchor = loss;
        } else {
            if (loss < best_loss) {
                best = model;
                best_loss = loss;
            }
            if ((stall_anchor - best_loss) / std::max(stall_anchor, 1e-300) >=
                cfg.inner_rel_tol) {
                stall = 0;
                stall_anchor = best_loss;
            } else {
                ++stall;
            }
            if ((plateau_anchor - best_loss) / std::max(plateau_anchor, 1e-300) >=
                cfg.inner_rel_tol) {
                plateau = 0;
                plateau_anchor = best_loss;
            } else {
                ++plateau;
            }
            if (stall >= cfg.inner_patience) break;
            if (plateau >= cfg.plateau_patience) {
                lr *= cfg.plateau_factor;
                plateau = 0;
                plateau_anchor = best_loss;
            }
        }
        if (step == cfg.max_inner_steps) break;
        adam_update(model, st, grad, step + 1, lr, cfg);
        project(model, st, info);
    }
    best_loss_out = best_loss;
    return best;
}

double removal_loss_of(const PwlModel& model, std::size_t i, const std::vector<double>& f,
                       const Grid& g, const BoundaryInfo& info) {
    PwlModel reduced = model;
    reduced.p.erase(reduced.p.begin() + static_cast<std::ptrdiff_t>(i));
    reduced.v.erase(reduced.v.begin() + static_cast<std::ptrdiff_t>(i));
    apply_boundary(reduced, info);
    return loss_grad_pass(reduced, f, g, nullptr);
}

std::pair<std::size_t, std::vector<double>> removal_candidate_impl(
    const PwlModel& model, const std::vector<double>& f, const Grid& g,
    const BoundaryInfo& info) {
    const std::size_t n = model.p.size();
    if (n < 3) {
        throw std::invalid_argument("removal_candidate: need at least 3 breakpoints");
    }
    std::vector<double> losses(n);
    std::size_t argmin = 0;
    for (std::size_t i = 0; i < n; ++i) {
        losses[i] = removal_loss_of(model, i, f, g, info);
        if (losses[i] < losses[argmin]) argmin = i;
    }
    return {argmin, losses};
}

// Squared-error integral of the interpolant per inner segment,
// restricted to the fit interval, via trapezoid cells split exactly at
// breakpoints. Index s of the result holds segment s+1.
InsertionChoice insertion_candidate_impl(const PwlModel& model, const ActivationSpec& spec,
                                         const std::vector<double>& f, const Grid& g) {
    const std::size_t n = model.p.size();
    std::vector<double> integral(n + 1, 0.0);
    SegmentCoeffs coeffs = to_segment_coeffs(model);
    auto err_at_cached = [&](int j, std::size_t seg) {
        const double x = grid_x(g, j);
        const double yhat = coeffs.m[seg] * x + coeffs.q[seg];
        return yhat - f[static_cast<std::size_t>(j)];
    };
    std::size_t k = 0;  // count of breakpoints <= previous grid node
    double x_prev = grid_x(g, 0);
    while (k < n && model.p[k] <= x_prev) ++k;
    std::size_t seg_prev = k;
    double e_prev = err_at_cached(0, seg_prev);
    for (int j = 1; j < g.points; ++j) {
        const double x_cur = grid_x(g, j);
        double u = x_prev;
        double e_u = e_prev;
        std::size_t seg = seg_prev;
        while (k < n && model.p[k] < x_cur) {
            const double q = model.p[k];
            if (q > u) {
                const double e_q = model.v[k] - eval_exact(spec, q);
                integral[seg] += 0.5 * (q - u) * (e_u * e_u + e_q * e_q);
                u = q;
                e_u = e_q;
            }
            ++k;
            seg = k;
        }
        const double e_cur = err_at_cached(j, seg);
        integral[seg] += 0.5 * (x_cur - u) * (e_u * e_u + e_cur * e_cur);
        x_prev = x_cur;
        e_prev = e_cur;
        seg_prev = seg;
    }
    InsertionChoice choice;
    choice.losses.assign(integral.begin() + 1, integral.end() - 1);
    std::size_t best = 0;
    for (std::size_t i = 1; i < choice.losses.size(); ++i) {
        if (choice.losses[i] > choice.losses[best]) best = i;
    }
    choice.segment = best + 1;
    choice.p_new = 0.5 * (model.p[choice.segment - 1] + model.p[choice.segment]);
    choice.v_new = 0.5 * (model.v[choice.segment - 1] + model.v[choice.segment]);
    return choice;
}

BoundaryMode resolve_mode(BoundaryOverride ov, BoundaryMode natural) {
    switch (ov) {
        case BoundaryOverride::auto_detect: return natural;
        case BoundaryOverride::asymptote: return BoundaryMode::asymptote;
        case BoundaryOverride::free_side: return BoundaryMode::free;
    }
    return natural;
}

}  // namespace

void FitterConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("FitterConfig: lr must be positive");
    if (!(0.0 < beta1 && beta1 < beta2 && beta2 < 1.0)) {
        throw std::invalid_argument("FitterConfig: need 0 < beta1 < beta2 < 1");
    }
    if (grid_points < 2) throw std::invalid_argument("FitterConfig: grid_points must be >= 2");
    if (max_inner_steps < 1 || max_outer_iters < 0) {
        throw std::invalid_argument("FitterConfig: step budgets must be positive");
    }
}

double loss_mse(const PwlModel& model, const ActivationSpec& spec, double lo, double hi,
                int grid_points) {
    model.validate();
    const Grid g = make_grid(lo, hi, grid_points);
    const std::vector<double> f = sample_target(spec, g);
    return loss_grad_pass(model, f, g, nullptr);
}

LossGradient grad_loss(const PwlModel& model, const ActivationSpec& spec, double lo,
                       double hi, int grid_points) {
    model.validate();
    const Grid g = make_grid(lo, hi, grid_points);
    const std::vector<double> f = sample_target(spec, g);
    LossGradient grad;
    loss_grad_pass(model, f, g, &grad);
    return grad;
}

std::pair<PwlModel, std::vector<LossSample>> inner_optimize(const PwlModel& model,
                                                            const ActivationSpec& spec,
                                                            double lo, double hi,
                                                            const FitterConfig& config,
                                                            double lr) {
    model.validate();
    config.validate();
    const Grid g = make_grid(lo, hi, config.grid_points);
    const std::vector<double> f = sample_target(spec, g);
    std::vector<LossSample> history;
    int global_step = 0;
    double best_loss = 0.0;
    PwlModel best = inner_optimize_impl(model, f, g, config, lr, boundary_info(spec),
                                        history, global_step, best_loss);
    return {std::move(best), std::move(history)};
}

std::pair<std::size_t, std::vector<double>> removal_candidate(const PwlModel& model,
                                                              const ActivationSpec& spec,
                                                              double lo, double hi,
                                                              const FitterConfig& config) {
    model.validate();
    const Grid g = make_grid(lo, hi, config.grid_points);
    return removal_candidate_impl(model, sample_target(spec, g), g, boundary_info(spec));
}

InsertionChoice insertion_candidate(const PwlModel& model, const ActivationSpec& spec,
                                    double lo, double hi, const FitterConfig& config) {
    model.validate();
    const Grid g = make_grid(lo, hi, config.grid_points);
    return insertion_candidate_impl(model, spec, sample_target(spec, g), g);
}

std::pair<PwlModel, FitReport> fit(const ActivationSpec& spec, double lo, double hi,
                                   std::size_t n, const FitterConfig& config) {
    config.validate();
    if (n < 2) throw std::invalid_argument("fit: need at least 2 breakpoints");
    const auto t_start = std::chrono::steady_clock::now();
    const Grid g = make_grid(lo, hi, config.grid_points);
    const BoundaryInfo info = boundary_info(spec);
    const BoundaryMode left = resolve_mode(config.left_boundary, info.left_mode);
    const BoundaryMode right = resolve_mode(config.right_boundary, info.right_mode);
    const std::vector<double> f = sample_target(spec, g);

    FitReport report;
    int global_step = 0;
    PwlModel model = uniform_init_with_modes(spec, n, lo, hi, left, right);
    double loss_after = 0.0;
    model = inner_optimize_impl(model, f, g, config, config.lr, info, report.loss_history,
                                global_step, loss_after);
    PwlModel best = model;
    double best_loss = loss_after;

    for (int k = 1; n >= 3 && k <= config.max_outer_iters; ++k) {
        const double prev_best = best_loss;
        const double lr_k = std::max(config.lr * std::pow(config.outer_lr_decay, k),
                                     config.lr_floor);
        const auto [rm_index, rm_losses] = removal_candidate_impl(model, f, g, info);
        const double removed_p = model.p[rm_index];
        PwlModel working = model;
        working.p.erase(working.p.begin() + static_cast<std::ptrdiff_t>(rm_index));
        working.v.erase(working.v.begin() + static_cast<std::ptrdiff_t>(rm_index));
        apply_boundary(working, info);
        // Merged segment left behind by the removal, in post-removal
        // segment numbering (0 and n-1 stand for the outer segments).
        const std::size_t merged_segment = rm_index;
        const InsertionChoice ins = insertion_candidate_impl(working, spec, f, g);
        working.p.insert(working.p.begin() + static_cast<std::ptrdiff_t>(ins.segment),
                         ins.p_new);
        working.v.insert(working.v.begin() + static_cast<std::ptrdiff_t>(ins.segment),
                         ins.v_new);
        apply_boundary(working, info);
        model = inner_optimize_impl(working, f, g, config, lr_k, info, report.loss_history,
                                    global_step, loss_after);
        report.outer_iterations = k;
        report.trace.push_back({k, removed_p, ins.p_new, loss_after});
        if (loss_after < best_loss) {
            best = model;
            best_loss = loss_after;
        }
        // Removal and insertion points have converged when the new
        // breakpoint lands back inside the merged segment: that move
        // re-splits exactly what the removal merged. An endpoint
        // removal leaves its former position in an outer segment where
        // no insertion can land, so it never converges by position and
        // the loop runs until the improvement rule or iteration cap.
        const bool converged = ins.segment == merged_segment;
        const bool stalled =
            !(prev_best > 0.0) || (prev_best - best_loss) / prev_best < 1e-3;
        if (converged || stalled) break;
    }

    report.final_loss = best_loss;
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(best), std::move(report)};
}

}  // namespace flexsfu
