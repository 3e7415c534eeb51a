// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "flexsfu/fitter.hpp"
#include "flexsfu/pwl.hpp"

namespace flexsfu {

// Serialized fit result: the model plus everything needed to
// reproduce it. Serialization is canonical, so equal documents
// always produce byte-identical JSON.
struct ModelDocument {
    std::string function;  // parseable by ActivationSpec::from_string
    double lo = 0.0;
    double hi = 0.0;
    PwlModel model;
    std::uint64_t seed = 0;
    double final_loss = 0.0;
    int outer_iterations = 0;
    int grid_points = 0;
};

std::string to_json(const ModelDocument& doc);
ModelDocument document_from_json(const std::string& text);

// Fit diagnostics as canonical JSON. Wall time is deliberately
// excluded; reruns of the same seed must serialize identically.
std::string report_to_json(const FitReport& report, const FitterConfig& config);

// "step,loss,lr" rows covering the whole optimization.
std::string loss_history_csv(const FitReport& report);

// Shortest decimal form that parses back to the same double.
std::string csv_double(double value);

std::uint64_t fnv1a64(std::string_view bytes);

// "fnv1a64:<16 lowercase hex digits>" over the exact bytes written.
std::string content_hash_hex(std::string_view bytes);

std::string to_string(BoundaryMode mode);
BoundaryMode boundary_mode_from_string(std::string_view text);

}  // namespace flexsfu
