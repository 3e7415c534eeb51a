// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "flexsfu/activation.hpp"
#include "flexsfu/fitter.hpp"
#include "flexsfu/metrics.hpp"
#include "flexsfu/number_format.hpp"
#include "flexsfu/pwl.hpp"
#include "flexsfu/sfu_sim.hpp"

using namespace flexsfu;

namespace {

ActivationSpec make_spec(ActivationKind kind) {
    ActivationSpec spec;
    spec.kind = kind;
    return spec;
}

FitterConfig tiny_config() {
    FitterConfig cfg;
    cfg.grid_points = 5001;
    cfg.max_inner_steps = 800;
    cfg.max_outer_iters = 4;
    return cfg;
}

PwlModel exact_relu_model(std::vector<double> p) {
    PwlModel m;
    m.v = p;
    m.p = std::move(p);
    m.m_l = 0.0;
    m.m_r = 1.0;
    m.left_mode = BoundaryMode::asymptote;
    m.right_mode = BoundaryMode::asymptote;
    return m;
}

void check_internal_invariants(const ErrorMetrics& em) {
    CHECK(em.mse >= 0.0);
    CHECK(em.mae >= 0.0);
    CHECK(em.sq_aae == em.mae * em.mae);
    CHECK(em.sq_aae <= em.mse * (1.0 + 1e-12));
    CHECK(em.max_abs_err >= em.mae * (1.0 - 1e-12));
    CHECK(em.aae() == em.mae);
}

}  // namespace

TEST_CASE("metrics of an exact representation are all zero") {
    const ActivationSpec relu = make_spec(ActivationKind::relu);
    const ErrorMetrics em = compute_metrics(exact_relu_model({0.0, 4.0, 8.0}), relu, -8.0,
                                            8.0, 20001);
    CHECK(em.mse == 0.0);
    CHECK(em.mae == 0.0);
    CHECK(em.sq_aae == 0.0);
    CHECK(em.max_abs_err == 0.0);
    CHECK(em.grid_points == 20001);
    CHECK(em.lo == -8.0);
    CHECK(em.hi == 8.0);
}

TEST_CASE("metrics of a constant offset recover the offset exactly") {
    const ActivationSpec relu = make_spec(ActivationKind::relu);
    const double delta = 0.25;
    const auto approx = [&](double x) { return eval_exact(relu, x) + delta; };
    const ErrorMetrics em = compute_metrics(approx, relu, -4.0, 4.0, 10001);
    CHECK(em.mse == doctest::Approx(delta * delta).epsilon(1e-12));
    CHECK(em.mae == doctest::Approx(delta).epsilon(1e-12));
    CHECK(em.sq_aae == doctest::Approx(delta * delta).epsilon(1e-12));
    CHECK(em.max_abs_err == doctest::Approx(delta).epsilon(1e-12));
    check_internal_invariants(em);
}

TEST_CASE("metrics converge under grid refinement") {
    const ActivationSpec gelu = make_spec(ActivationKind::gelu);
    const PwlModel m = uniform_init(gelu, 8, -2.0, 2.0);
    const ErrorMetrics coarse = compute_metrics(m, gelu, -2.0, 2.0, 100001);
    const ErrorMetrics fine = compute_metrics(m, gelu, -2.0, 2.0, 1000001);
    CHECK(coarse.mse == doctest::Approx(fine.mse).epsilon(1e-4));
    CHECK(coarse.mae == doctest::Approx(fine.mae).epsilon(1e-4));
    CHECK(coarse.max_abs_err == doctest::Approx(fine.max_abs_err).epsilon(1e-3));
    check_internal_invariants(coarse);
    check_internal_invariants(fine);
}

TEST_CASE("metrics invariants hold on random models") {
    std::mt19937_64 rng(0x3e71c5ULL);
    const ActivationSpec th = make_spec(ActivationKind::tanh);
    std::uniform_real_distribution<double> unoise(-0.3, 0.3);
    for (int rep = 0; rep < 20; ++rep) {
        PwlModel m = uniform_init(th, 6, -8.0, 8.0);
        for (std::size_t i = 1; i + 1 < m.v.size(); ++i) m.v[i] += unoise(rng);
        check_internal_invariants(compute_metrics(m, th, -8.0, 8.0, 2001));
    }
}

TEST_CASE("metrics of the model loss grid agree with loss_mse") {
    const ActivationSpec gelu = make_spec(ActivationKind::gelu);
    const PwlModel m = uniform_init(gelu, 5, -2.0, 2.0);
    const ErrorMetrics em = compute_metrics(m, gelu, -2.0, 2.0, 20001);
    CHECK(em.mse == loss_mse(m, gelu, -2.0, 2.0, 20001));
}

TEST_CASE("lut image metrics agree with quantized_eval point by point") {
    const ActivationSpec sig = make_spec(ActivationKind::sigmoid);
    const PwlModel m = uniform_init(sig, 7, -8.0, 8.0);
    const LutImage image = build_lut_image(m, NumberFormat::from_string("fp16"), 8);
    const ErrorMetrics direct = compute_metrics(image, sig, -8.0, 8.0, 4001);
    const ErrorMetrics wrapped = compute_metrics(
        [&](double x) { return quantized_eval(image, x); }, sig, -8.0, 8.0, 4001);
    CHECK(direct.mse == wrapped.mse);
    CHECK(direct.mae == wrapped.mae);
    CHECK(direct.sq_aae == wrapped.sq_aae);
    CHECK(direct.max_abs_err == wrapped.max_abs_err);
    check_internal_invariants(direct);
}

TEST_CASE("quantized_eval is bit-identical to the datapath") {
    std::mt19937_64 rng(0x9a47bULL);
    const ActivationSpec th = make_spec(ActivationKind::tanh);
    const PwlModel m = uniform_init(th, 12, -6.0, 6.0);
    for (const std::string& name : {std::string("fp16"), std::string("fx16:8")}) {
        const NumberFormat fmt = NumberFormat::from_string(name);
        const LutImage image = build_lut_image(m, fmt, 16);
        SfuState state(1);
        state.ld_bp(0, image);
        state.ld_cf(0, image);
        std::uniform_real_distribution<double> ux(-10.0, 10.0);
        std::vector<double> points;
        for (int rep = 0; rep < 2000; ++rep) points.push_back(ux(rng));
        for (double p : m.p) points.push_back(p);  // tie rule on stored breakpoints
        for (double x : points) {
            const std::uint32_t bits = encode(x, fmt);
            const auto out = state.exe_af({bits}, fmt.total_bits).first;
            CAPTURE(name);
            CAPTURE(x);
            CHECK(quantized_eval(image, x) == decode(out[0], fmt));
        }
    }
}

TEST_CASE("fp32 quantization degrades metrics by at most a rounding slack") {
    const ActivationSpec gelu = make_spec(ActivationKind::gelu);
    const PwlModel m = uniform_init(gelu, 9, -2.0, 2.0);
    const NumberFormat fp32 = NumberFormat::from_string("fp32");
    const LutImage image = build_lut_image(m, fp32, 16);
    const ErrorMetrics real_m = compute_metrics(m, gelu, -2.0, 2.0, 20001);
    const ErrorMetrics quant = compute_metrics(image, gelu, -2.0, 2.0, 20001);
    CHECK(quant.mse >= real_m.mse - ulp_at_one(fp32));
    CHECK(quant.mae >= real_m.mae - ulp_at_one(fp32));
}

TEST_CASE("sweep_breakpoints reports one improving row per count") {
    const ActivationSpec gelu = make_spec(ActivationKind::gelu);
    const FitterConfig cfg = tiny_config();
    const std::vector<std::size_t> counts = {4, 8};
    const auto rows = sweep_breakpoints(gelu, -2.0, 2.0, counts, cfg);
    REQUIRE(rows.size() == 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].function == "gelu");
        CHECK(rows[i].n == counts[i]);
        CHECK(rows[i].model.p.size() == counts[i]);
        CHECK(rows[i].metrics.grid_points > 0);
        CHECK(rows[i].final_loss >= 0.0);
        check_internal_invariants(rows[i].metrics);
    }
    CHECK(rows[1].metrics.mse < rows[0].metrics.mse);
}

TEST_CASE("uniform_vs_nonuniform beats uniform placement on gelu") {
    const ActivationSpec gelu = make_spec(ActivationKind::gelu);
    FitterConfig cfg;
    cfg.grid_points = 20001;
    const UniformComparison cmp = uniform_vs_nonuniform(gelu, -2.0, 2.0, 5, cfg);
    CHECK(cmp.mse_uniform > 0.0);
    CHECK(cmp.mse_fitted > 0.0);
    CHECK(cmp.ratio == cmp.mse_uniform / cmp.mse_fitted);
    CHECK(cmp.ratio >= 3.0);
    // The uniform reference keeps equally spaced breakpoints.
    REQUIRE(cmp.uniform_model.p.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(cmp.uniform_model.p[i] ==
              doctest::Approx(-2.0 + static_cast<double>(i)).epsilon(1e-15));
    }
}

TEST_CASE("uniform_vs_nonuniform is exact for relu with a centered breakpoint") {
    const ActivationSpec relu = make_spec(ActivationKind::relu);
    FitterConfig cfg;
    cfg.grid_points = 5001;
    const UniformComparison cmp = uniform_vs_nonuniform(relu, -2.0, 2.0, 3, cfg);
    CHECK(cmp.mse_uniform == 0.0);
    CHECK(cmp.mse_fitted == 0.0);
}

TEST_CASE("uniform_vs_nonuniform never loses to its own initialization") {
    const FitterConfig cfg = tiny_config();
    for (ActivationKind kind :
         {ActivationKind::relu, ActivationKind::leaky_relu, ActivationKind::gelu,
          ActivationKind::silu, ActivationKind::sigmoid, ActivationKind::tanh,
          ActivationKind::exp_neg, ActivationKind::hardswish}) {
        const ActivationSpec spec = make_spec(kind);
        const UniformComparison cmp = uniform_vs_nonuniform(
            spec, spec.interval_lo(), spec.interval_hi(), 16, cfg);
        CAPTURE(spec.name());
        if (cmp.mse_fitted > 0.0) {
            CHECK(cmp.ratio >= 1.0);
        } else {
            CHECK(cmp.mse_uniform >= 0.0);
        }
    }
}

TEST_CASE("soa_comparison runs the published configuration set") {
    FitterConfig cfg;
    cfg.grid_points = 2001;
    cfg.max_inner_steps = 150;
    cfg.max_outer_iters = 1;
    const auto rows = soa_comparison(cfg);
    REQUIRE(rows.size() == 9);

    struct Expect {
        const char* function;
        double lo, hi;
        std::size_t n;
        double reference;
        bool free_left, free_right;
    };
    const Expect expects[] = {
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
    for (std::size_t i = 0; i < 9; ++i) {
        CAPTURE(i);
        CHECK(rows[i].function == expects[i].function);
        CHECK(rows[i].lo == expects[i].lo);
        CHECK(rows[i].hi == expects[i].hi);
        CHECK(rows[i].n == expects[i].n);
        CHECK(rows[i].reference_sq_aae == expects[i].reference);
        CHECK(rows[i].free_left == expects[i].free_left);
        CHECK(rows[i].free_right == expects[i].free_right);
        CHECK(rows[i].model.p.size() == expects[i].n);
        CHECK(rows[i].metrics.grid_points > 0);
        check_internal_invariants(rows[i].metrics);
        // Truncated sides keep their fitted mode on the model.
        CHECK((rows[i].model.left_mode == BoundaryMode::free) == expects[i].free_left);
        CHECK((rows[i].model.right_mode == BoundaryMode::free) == expects[i].free_right);
    }
}

TEST_CASE("worker_count respects the environment override") {
    const char* saved = std::getenv("FLEXSFU_THREADS");
    const std::string restore = saved ? saved : "";

    setenv("FLEXSFU_THREADS", "3", 1);
    CHECK(worker_count() == 3);
    setenv("FLEXSFU_THREADS", "999", 1);
    CHECK(worker_count() == 64);
    setenv("FLEXSFU_THREADS", "0", 1);
    CHECK(worker_count() == 1);
    setenv("FLEXSFU_THREADS", "junk", 1);
    CHECK(worker_count() == 1);

    if (saved) {
        setenv("FLEXSFU_THREADS", restore.c_str(), 1);
    } else {
        unsetenv("FLEXSFU_THREADS");
    }
    CHECK(worker_count() >= 1);
}
