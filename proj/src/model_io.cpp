// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#include "flexsfu/model_io.hpp"

#include <charconv>
#include <stdexcept>
#include <system_error>

#include <json.hpp>

namespace flexsfu {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json model_to_node(const PwlModel& model) {
    ordered_json node;
    node["p"] = model.p;
    node["v"] = model.v;
    node["m_l"] = model.m_l;
    node["m_r"] = model.m_r;
    node["boundary_modes"] =
        ordered_json::array({to_string(model.left_mode), to_string(model.right_mode)});
    return node;
}

PwlModel model_from_node(const ordered_json& node) {
    PwlModel model;
    model.p = node.at("p").get<std::vector<double>>();
    model.v = node.at("v").get<std::vector<double>>();
    model.m_l = node.at("m_l").get<double>();
    model.m_r = node.at("m_r").get<double>();
    const auto& modes = node.at("boundary_modes");
    if (!modes.is_array() || modes.size() != 2)
        throw std::invalid_argument("boundary_modes must hold two entries");
    model.left_mode = boundary_mode_from_string(modes[0].get<std::string>());
    model.right_mode = boundary_mode_from_string(modes[1].get<std::string>());
    model.validate();
    return model;
}

}  // namespace

std::string to_string(BoundaryMode mode) {
    return mode == BoundaryMode::asymptote ? "asymptote" : "free";
}

BoundaryMode boundary_mode_from_string(std::string_view text) {
    if (text == "asymptote") return BoundaryMode::asymptote;
    if (text == "free") return BoundaryMode::free;
    throw std::invalid_argument("unknown boundary mode: " + std::string(text));
}

std::string to_json(const ModelDocument& doc) {
    ordered_json root;
    root["function"] = doc.function;
    root["interval"] = ordered_json::array({doc.lo, doc.hi});
    root["model"] = model_to_node(doc.model);
    ordered_json meta;
    meta["seed"] = doc.seed;
    meta["final_loss"] = doc.final_loss;
    meta["outer_iterations"] = doc.outer_iterations;
    meta["grid_points"] = doc.grid_points;
    root["fit_metadata"] = meta;
    return root.dump(2) + "\n";
}

ModelDocument document_from_json(const std::string& text) {
    const ordered_json root = ordered_json::parse(text);
    ModelDocument doc;
    doc.function = root.at("function").get<std::string>();
    const auto& interval = root.at("interval");
    if (!interval.is_array() || interval.size() != 2)
        throw std::invalid_argument("interval must hold two entries");
    doc.lo = interval[0].get<double>();
    doc.hi = interval[1].get<double>();
    doc.model = model_from_node(root.at("model"));
    const auto& meta = root.at("fit_metadata");
    doc.seed = meta.at("seed").get<std::uint64_t>();
    doc.final_loss = meta.at("final_loss").get<double>();
    doc.outer_iterations = meta.at("outer_iterations").get<int>();
    doc.grid_points = meta.at("grid_points").get<int>();
    return doc;
}

std::string report_to_json(const FitReport& report, const FitterConfig& config) {
    ordered_json root;
    root["final_loss"] = report.final_loss;
    root["outer_iterations"] = report.outer_iterations;
    root["total_steps"] = report.loss_history.size();
    ordered_json trace = ordered_json::array();
    for (const OuterTrace& t : report.trace) {
        ordered_json row;
        row["iteration"] = t.iteration;
        row["removed_p"] = t.removed_p;
        row["inserted_p"] = t.inserted_p;
        row["loss_after"] = t.loss_after;
        trace.push_back(row);
    }
    root["outer_trace"] = trace;
    ordered_json cfg;
    cfg["lr"] = config.lr;
    cfg["beta1"] = config.beta1;
    cfg["beta2"] = config.beta2;
    cfg["adam_eps"] = config.adam_eps;
    cfg["grid_points"] = config.grid_points;
    cfg["max_inner_steps"] = config.max_inner_steps;
    cfg["inner_patience"] = config.inner_patience;
    cfg["inner_rel_tol"] = config.inner_rel_tol;
    cfg["plateau_factor"] = config.plateau_factor;
    cfg["plateau_patience"] = config.plateau_patience;
    cfg["outer_lr_decay"] = config.outer_lr_decay;
    cfg["lr_floor"] = config.lr_floor;
    cfg["max_outer_iters"] = config.max_outer_iters;
    cfg["seed"] = config.seed;
    root["config"] = cfg;
    return root.dump(2) + "\n";
}

std::string loss_history_csv(const FitReport& report) {
    std::string out = "step,loss,lr\n";
    for (const LossSample& s : report.loss_history) {
        out += std::to_string(s.step);
        out += ',';
        out += csv_double(s.loss);
        out += ',';
        out += csv_double(s.lr);
        out += '\n';
    }
    return out;
}

std::string csv_double(double value) {
    char buf[64];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), value);
    if (res.ec != std::errc()) throw std::runtime_error("double formatting failed");
    return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string content_hash_hex(std::string_view bytes) {
    const std::uint64_t h = fnv1a64(bytes);
    char buf[17];
    for (int i = 0; i < 16; ++i) {
        const unsigned nibble = static_cast<unsigned>((h >> (60 - 4 * i)) & 0xF);
        buf[i] = static_cast<char>(nibble < 10 ? '0' + nibble : 'a' + (nibble - 10));
    }
    buf[16] = '\0';
    return std::string("fnv1a64:") + buf;
}

}  // namespace flexsfu
