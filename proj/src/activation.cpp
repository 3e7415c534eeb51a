// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#include "flexsfu/activation.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace flexsfu {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Gaussian CDF via erfc so the negative tail keeps full precision.
double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

}  // namespace

double ActivationSpec::interval_lo() const {
    return kind == ActivationKind::exp_neg ? -10.0 : -8.0;
}

double ActivationSpec::interval_hi() const {
    return kind == ActivationKind::exp_neg ? 0.1 : 8.0;
}

std::string ActivationSpec::name() const {
    switch (kind) {
        case ActivationKind::relu: return "relu";
        case ActivationKind::leaky_relu: {
            char buf[64];
            const auto res = std::to_chars(buf, buf + sizeof(buf), alpha);
            return "leaky_relu:" + std::string(buf, res.ptr);
        }
        case ActivationKind::gelu: return "gelu";
        case ActivationKind::silu: return "silu";
        case ActivationKind::sigmoid: return "sigmoid";
        case ActivationKind::tanh: return "tanh";
        case ActivationKind::exp_neg: return "exp_neg";
        case ActivationKind::hardswish: return "hardswish";
    }
    return "unknown";
}

ActivationSpec ActivationSpec::from_string(const std::string& s) {
    ActivationSpec spec;
    std::string base = s;
    const auto colon = s.find(':');
    if (colon != std::string::npos) {
        base = s.substr(0, colon);
        spec.alpha = std::stod(s.substr(colon + 1));
    }
    if (base == "relu") spec.kind = ActivationKind::relu;
    else if (base == "leaky_relu") spec.kind = ActivationKind::leaky_relu;
    else if (base == "gelu") spec.kind = ActivationKind::gelu;
    else if (base == "silu") spec.kind = ActivationKind::silu;
    else if (base == "sigmoid") spec.kind = ActivationKind::sigmoid;
    else if (base == "tanh") spec.kind = ActivationKind::tanh;
    else if (base == "exp_neg" || base == "exp") spec.kind = ActivationKind::exp_neg;
    else if (base == "hardswish") spec.kind = ActivationKind::hardswish;
    else throw std::invalid_argument("unknown activation function: " + s);
    return spec;
}

double eval_exact(const ActivationSpec& spec, double x) {
    if (!std::isfinite(x)) {
        throw std::invalid_argument("eval_exact: non-finite input");
    }
    switch (spec.kind) {
        case ActivationKind::relu:
            return x > 0.0 ? x : 0.0;
        case ActivationKind::leaky_relu:
            return x > 0.0 ? x : spec.alpha * x;
        case ActivationKind::gelu:
            return x * normal_cdf(x);
        case ActivationKind::silu:
            return x * stable_sigmoid(x);
        case ActivationKind::sigmoid:
            return stable_sigmoid(x);
        case ActivationKind::tanh:
            return std::tanh(x);
        case ActivationKind::exp_neg:
            return std::exp(x);
        case ActivationKind::hardswish:
            return x * std::min(std::max(x + 3.0, 0.0), 6.0) / 6.0;
    }
    throw std::invalid_argument("eval_exact: unknown activation kind");
}

BoundaryInfo boundary_info(const ActivationSpec& spec) {
    BoundaryInfo b;
    b.left_mode = BoundaryMode::asymptote;
    b.right_mode = BoundaryMode::asymptote;
    switch (spec.kind) {
        case ActivationKind::relu:
            b.m_l = 0.0; b.c_l = 0.0; b.m_r = 1.0; b.c_r = 0.0;
            break;
        case ActivationKind::leaky_relu:
            b.m_l = spec.alpha; b.c_l = 0.0; b.m_r = 1.0; b.c_r = 0.0;
            break;
        case ActivationKind::gelu:
        case ActivationKind::silu:
            b.m_l = 0.0; b.c_l = 0.0; b.m_r = 1.0; b.c_r = 0.0;
            break;
        case ActivationKind::sigmoid:
            b.m_l = 0.0; b.c_l = 0.0; b.m_r = 0.0; b.c_r = 1.0;
            break;
        case ActivationKind::tanh:
            b.m_l = 0.0; b.c_l = -1.0; b.m_r = 0.0; b.c_r = 1.0;
            break;
        case ActivationKind::exp_neg:
            // e^x -> 0 on the left; the interval ends at 0.1 where the
            // function is still rising, so no right asymptote applies.
            b.m_l = 0.0; b.c_l = 0.0;
            b.right_mode = BoundaryMode::free;
            break;
        case ActivationKind::hardswish:
            b.m_l = 0.0; b.c_l = 0.0; b.m_r = 1.0; b.c_r = 0.0;
            break;
    }
    return b;
}

}  // namespace flexsfu
