// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#include "flexsfu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <limits>
#include <stdexcept>
#include <thread>
#include <utility>

#include "flexsfu/number_format.hpp"

namespace flexsfu {

namespace {

ErrorMetrics accumulate_metrics(const std::function<double(double)>& approx,
                                const ActivationSpec& spec, double lo, double hi,
                                int grid_points) {
    if (!(grid_points >= 2)) throw std::invalid_argument("metrics need at least 2 grid points");
    if (!(lo < hi)) throw std::invalid_argument("metrics need lo < hi");
    ErrorMetrics m;
    m.grid_points = grid_points;
    m.lo = lo;
    m.hi = hi;
    const double h = (hi - lo) / static_cast<double>(grid_points - 1);
    const double denom = static_cast<double>(grid_points - 1);
    for (int j = 0; j < grid_points; ++j) {
        const double x = (j + 1 == grid_points) ? hi : lo + h * static_cast<double>(j);
        const double e = approx(x) - eval_exact(spec, x);
        const double w = ((j == 0 || j + 1 == grid_points) ? 0.5 : 1.0) / denom;
        const double ae = std::abs(e);
        m.mse += w * e * e;
        m.mae += w * ae;
        m.max_abs_err = std::max(m.max_abs_err, ae);
    }
    m.sq_aae = m.mae * m.mae;
    return m;
}

// Runs one job per row index, at most worker_count() in flight, and
// collects results in index order so output never depends on timing.
template <typename R>
std::vector<R> parallel_rows(std::size_t count, const std::function<R(std::size_t)>& job) {
    std::vector<R> out(count);
    const std::size_t workers = static_cast<std::size_t>(worker_count());
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = job(i);
        return out;
    }
    std::size_t next = 0;
    while (next < count) {
        const std::size_t batch = std::min(workers, count - next);
        std::vector<std::future<R>> running;
        running.reserve(batch);
        for (std::size_t k = 0; k < batch; ++k) {
            const std::size_t idx = next + k;
            running.push_back(std::async(std::launch::async, [&job, idx] { return job(idx); }));
        }
        for (std::size_t k = 0; k < batch; ++k) out[next + k] = running[k].get();
        next += batch;
    }
    return out;
}

}  // namespace

int worker_count() {
    if (const char* env = std::getenv("FLEXSFU_THREADS")) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end != env && parsed >= 1) return static_cast<int>(std::min(parsed, 64L));
        return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(std::min(hw, 64u));
}

ErrorMetrics compute_metrics(const std::function<double(double)>& approx,
                             const ActivationSpec& spec, double lo, double hi,
                             int grid_points) {
    return accumulate_metrics(approx, spec, lo, hi, grid_points);
}

ErrorMetrics compute_metrics(const PwlModel& model, const ActivationSpec& spec, double lo,
                             double hi, int grid_points) {
    return accumulate_metrics([&model](double x) { return eval_pwl(model, x); }, spec, lo, hi,
                              grid_points);
}

double quantized_eval(const LutImage& image, double x) {
    const NumberFormat fmt = image.fmt;
    const std::uint32_t xb = encode(x, fmt);
    const double xd = decode(xb, fmt);
    std::size_t rank = 0;
    for (const std::uint32_t b : image.bp) {
        if (decode(b, fmt) < xd) ++rank;
    }
    return decode(fma_quantized(image.cf[rank].m, xb, image.cf[rank].q, fmt), fmt);
}

ErrorMetrics compute_metrics(const LutImage& image, const ActivationSpec& spec, double lo,
                             double hi, int grid_points) {
    // Rank counting ignores slot order, so the level-order breakpoints
    // can be sorted once and binary searched.
    const NumberFormat fmt = image.fmt;
    std::vector<double> sorted_bp;
    sorted_bp.reserve(image.bp.size());
    for (const std::uint32_t b : image.bp) sorted_bp.push_back(decode(b, fmt));
    std::sort(sorted_bp.begin(), sorted_bp.end());
    auto eval = [&](double x) {
        const std::uint32_t xb = encode(x, fmt);
        const double xd = decode(xb, fmt);
        const std::size_t rank = static_cast<std::size_t>(
            std::lower_bound(sorted_bp.begin(), sorted_bp.end(), xd) - sorted_bp.begin());
        return decode(fma_quantized(image.cf[rank].m, xb, image.cf[rank].q, fmt), fmt);
    };
    return accumulate_metrics(eval, spec, lo, hi, grid_points);
}

std::vector<SweepRow> sweep_breakpoints(const ActivationSpec& spec, double lo, double hi,
                                        const std::vector<std::size_t>& counts,
                                        const FitterConfig& config) {
    std::function<SweepRow(std::size_t)> job = [&](std::size_t i) {
        const std::size_t n = counts[i];
        auto [model, report] = fit(spec, lo, hi, n, config);
        SweepRow row;
        row.function = spec.name();
        row.n = n;
        row.final_loss = report.final_loss;
        row.metrics = compute_metrics(model, spec, lo, hi, config.grid_points);
        row.model = std::move(model);
        return row;
    };
    return parallel_rows<SweepRow>(counts.size(), job);
}

UniformComparison uniform_vs_nonuniform(const ActivationSpec& spec, double lo, double hi,
                                        std::size_t n, const FitterConfig& config) {
    UniformComparison cmp;
    cmp.uniform_model = uniform_init(spec, n, lo, hi);
    cmp.mse_uniform = loss_mse(cmp.uniform_model, spec, lo, hi, config.grid_points);
    auto [fitted, report] = fit(spec, lo, hi, n, config);
    cmp.fitted_model = std::move(fitted);
    cmp.mse_fitted = report.final_loss;
    cmp.ratio = cmp.mse_fitted > 0.0
                    ? cmp.mse_uniform / cmp.mse_fitted
                    : std::numeric_limits<double>::infinity();
    return cmp;
}

std::vector<SoaRow> soa_comparison(const FitterConfig& base_config) {
    struct Config {
        const char* function;
        double lo, hi;
        std::size_t n;
        double reference;
        bool free_left, free_right;
    };
    // Reference sq-AAE values as published for these exact
    // configurations. Truncated intervals drop the asymptote pin on
    // the cut sides.
    static const Config kRows[] = {
        {"tanh", -8.0, 8.0, 16, 4.27e-7, false, false},
        {"tanh", -3.5, 3.5, 16, 1.52e-6, true, true},
        {"tanh", -3.5, 3.5, 64, 7.88e-9, true, true},
        {"tanh", 1.0 / 64.0, 4.0, 32, 6.72e-9, true, true},
        {"sigmoid", -8.0, 8.0, 16, 1.21e-7, false, false},
        {"sigmoid", -7.0, 7.0, 16, 4.97e-7, true, true},
        {"sigmoid", -7.0, 7.0, 64, 2.38e-9, true, true},
        {"sigmoid", 1.0 / 64.0, 4.0, 32, 3.80e-8, true, true},
        {"gelu", -8.0, 8.0, 16, 1.89e-7, false, false},
    };
    constexpr std::size_t kRowCount = sizeof(kRows) / sizeof(kRows[0]);

    std::function<SoaRow(std::size_t)> job = [&](std::size_t i) {
        const Config& c = kRows[i];
        const ActivationSpec spec = ActivationSpec::from_string(c.function);
        FitterConfig cfg = base_config;
        cfg.left_boundary = c.free_left ? BoundaryOverride::free_side : BoundaryOverride::auto_detect;
        cfg.right_boundary =
            c.free_right ? BoundaryOverride::free_side : BoundaryOverride::auto_detect;
        auto [model, report] = fit(spec, c.lo, c.hi, c.n, cfg);
        SoaRow row;
        row.function = c.function;
        row.lo = c.lo;
        row.hi = c.hi;
        row.n = c.n;
        row.metrics = compute_metrics(model, spec, c.lo, c.hi, cfg.grid_points);
        row.reference_sq_aae = c.reference;
        row.free_left = c.free_left;
        row.free_right = c.free_right;
        row.model = std::move(model);
        (void)report;
        return row;
    };
    return parallel_rows<SoaRow>(kRowCount, job);
}

}  // namespace flexsfu
