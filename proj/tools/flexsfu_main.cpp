// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: fit -> export -> simulate -> report, with
// file-based persistence. Every command rerun with the same inputs
// and seed writes byte-identical files; nothing here injects
// timestamps or machine identity into output bodies.

#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flexsfu/activation.hpp"
#include "flexsfu/errors.hpp"
#include "flexsfu/fitter.hpp"
#include "flexsfu/metrics.hpp"
#include "flexsfu/model_io.hpp"
#include "flexsfu/number_format.hpp"
#include "flexsfu/pwl.hpp"
#include "flexsfu/sfu_sim.hpp"

namespace {

using namespace flexsfu;

// Exit codes shared by every subcommand.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitCapacity = 4;
constexpr int kExitFormat = 5;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw std::runtime_error("short write: " + path);
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Shared fit flags; interval defaults to the function's own when the
// flag is absent.
struct FitArgs {
    std::string fn;
    std::vector<double> interval;
    std::size_t n = 16;
    FitterConfig config;
    std::string left_boundary = "auto";
    std::string right_boundary = "auto";

    void attach(CLI::App* cmd, bool with_n) {
        cmd->add_option("--fn", fn, "activation function, e.g. gelu or leaky_relu:0.01")
            ->required();
        cmd->add_option("--interval", interval, "interval lo hi")->expected(2);
        if (with_n) cmd->add_option("--n", n, "breakpoint count");
        cmd->add_option("--seed", config.seed, "run seed recorded in outputs");
        cmd->add_option("--grid", config.grid_points, "objective grid points");
        cmd->add_option("--lr", config.lr, "Adam learning rate");
        cmd->add_option("--max-inner", config.max_inner_steps, "inner step budget");
        cmd->add_option("--max-outer", config.max_outer_iters, "outer iteration budget");
        cmd->add_option("--left-boundary", left_boundary, "auto|asymptote|free")
            ->check(CLI::IsMember({"auto", "asymptote", "free"}));
        cmd->add_option("--right-boundary", right_boundary, "auto|asymptote|free")
            ->check(CLI::IsMember({"auto", "asymptote", "free"}));
    }

    static BoundaryOverride parse_override(const std::string& s) {
        if (s == "asymptote") return BoundaryOverride::asymptote;
        if (s == "free") return BoundaryOverride::free_side;
        return BoundaryOverride::auto_detect;
    }

    ActivationSpec spec() const { return ActivationSpec::from_string(fn); }

    std::pair<double, double> resolved_interval(const ActivationSpec& spec) const {
        if (interval.empty()) return spec.default_interval();
        return {interval[0], interval[1]};
    }

    FitterConfig resolved_config() const {
        FitterConfig cfg = config;
        cfg.left_boundary = parse_override(left_boundary);
        cfg.right_boundary = parse_override(right_boundary);
        return cfg;
    }
};

int cmd_fit(const FitArgs& args, const std::string& out_path, const std::string& report_path,
            const std::string& history_path) {
    const ActivationSpec spec = args.spec();
    const auto [lo, hi] = args.resolved_interval(spec);
    const FitterConfig cfg = args.resolved_config();
    auto [model, report] = fit(spec, lo, hi, args.n, cfg);

    ModelDocument doc;
    doc.function = spec.name();
    doc.lo = lo;
    doc.hi = hi;
    doc.model = model;
    doc.seed = cfg.seed;
    doc.final_loss = report.final_loss;
    doc.outer_iterations = report.outer_iterations;
    doc.grid_points = cfg.grid_points;
    const std::string body = to_json(doc);
    write_file(out_path, body);
    if (!report_path.empty()) write_file(report_path, report_to_json(report, cfg));
    if (!history_path.empty()) write_file(history_path, loss_history_csv(report));

    std::cout << "fit " << doc.function << " n=" << args.n << " loss=" << csv_double(report.final_loss)
              << " outer=" << report.outer_iterations << " hash=" << content_hash_hex(body) << "\n";
    return kExitOk;
}

int cmd_export(const std::string& model_path, const std::string& fmt_str, int depth,
               const std::string& out_path) {
    const ModelDocument doc = document_from_json(read_file(model_path));
    const NumberFormat fmt = NumberFormat::from_string(fmt_str);
    const LutImage image = build_lut_image(doc.model, fmt, depth);
    const std::string body = write_lut_image(image);
    write_file(out_path, body);
    std::cout << "export fmt=" << fmt.to_string() << " d=" << depth
              << " n=" << image.n_breakpoints << " hash=" << content_hash_hex(body) << "\n";
    return kExitOk;
}

// Raw tensors store one element per element_bits/8 bytes, little
// endian. CSV tensors are decimal reals, encoded on read.
std::vector<std::uint32_t> read_tensor(const std::string& path, const NumberFormat& fmt) {
    const std::string body = read_file(path);
    std::vector<std::uint32_t> elements;
    if (ends_with(path, ".csv")) {
        std::istringstream in(body);
        std::string token;
        while (std::getline(in, token)) {
            std::istringstream line(token);
            std::string cell;
            while (std::getline(line, cell, ',')) {
                if (cell.empty()) continue;
                const double value = std::stod(cell);
                if (std::isnan(value)) throw FormatMismatchError("NaN element in input tensor");
                elements.push_back(encode(value, fmt));
            }
        }
        return elements;
    }
    const std::size_t stride = static_cast<std::size_t>(fmt.total_bits) / 8;
    if (body.size() % stride != 0)
        throw FormatMismatchError("raw tensor size is not a multiple of the element width");
    elements.reserve(body.size() / stride);
    for (std::size_t i = 0; i < body.size(); i += stride) {
        std::uint32_t bits = 0;
        for (std::size_t b = 0; b < stride; ++b)
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(body[i + b])) << (8 * b);
        elements.push_back(bits);
    }
    return elements;
}

std::string tensor_to_raw(const std::vector<std::uint32_t>& elements, const NumberFormat& fmt) {
    const std::size_t stride = static_cast<std::size_t>(fmt.total_bits) / 8;
    std::string body;
    body.reserve(elements.size() * stride);
    for (const std::uint32_t bits : elements)
        for (std::size_t b = 0; b < stride; ++b)
            body.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    return body;
}

std::string perf_to_json(const PerfReport& perf, double clock_mhz) {
    nlohmann::ordered_json root;
    root["elements"] = perf.elements;
    root["load_cycles"] = perf.load_cycles;
    root["fill_cycles"] = perf.fill_cycles;
    root["steady_cycles"] = perf.steady_cycles;
    root["total_cycles"] = perf.total_cycles;
    root["throughput_elements_per_cycle"] = perf.achieved_throughput;
    root["clock_mhz"] = clock_mhz;
    root["gact_per_s"] = perf.gact_at(clock_mhz);
    return root.dump(2) + "\n";
}

int cmd_simulate(const std::string& image_path, const std::string& input_path, int n_clusters,
                 double clock_mhz, const std::string& out_path, const std::string& out_csv_path,
                 const std::string& report_path) {
    const LutImage image = read_lut_image(read_file(image_path));
    SfuState state(n_clusters);
    for (int c = 0; c < n_clusters; ++c) {
        state.ld_bp(c, image);
        state.ld_cf(c, image);
    }
    const std::vector<std::uint32_t> inputs = read_tensor(input_path, image.fmt);
    const auto [outputs, perf] = state.exe_af(inputs, image.element_bits());

    if (!out_path.empty()) write_file(out_path, tensor_to_raw(outputs, image.fmt));
    if (!out_csv_path.empty()) {
        std::string csv;
        for (const std::uint32_t bits : outputs) {
            csv += csv_double(decode(bits, image.fmt));
            csv += '\n';
        }
        write_file(out_csv_path, csv);
    }
    if (!report_path.empty()) write_file(report_path, perf_to_json(perf, clock_mhz));
    std::cout << "simulate elements=" << perf.elements << " fill=" << perf.fill_cycles
              << " steady=" << perf.steady_cycles << " total=" << perf.total_cycles
              << " gact=" << csv_double(perf.gact_at(clock_mhz)) << "\n";
    return kExitOk;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "function,n,final_loss,mse,aae,sq_aae,max_abs_err\n";
    for (const SweepRow& r : rows) {
        out += r.function;
        out += ',';
        out += std::to_string(r.n);
        out += ',';
        out += csv_double(r.final_loss);
        out += ',';
        out += csv_double(r.metrics.mse);
        out += ',';
        out += csv_double(r.metrics.mae);
        out += ',';
        out += csv_double(r.metrics.sq_aae);
        out += ',';
        out += csv_double(r.metrics.max_abs_err);
        out += '\n';
    }
    return out;
}

int cmd_report_sweep(const FitArgs& args, const std::vector<std::size_t>& counts,
                     const std::string& out_path) {
    const ActivationSpec spec = args.spec();
    const auto [lo, hi] = args.resolved_interval(spec);
    const std::vector<SweepRow> rows = sweep_breakpoints(spec, lo, hi, counts, args.resolved_config());
    const std::string body = sweep_csv(rows);
    write_file(out_path, body);
    std::cout << "report sweep rows=" << rows.size() << " hash=" << content_hash_hex(body) << "\n";
    return kExitOk;
}

int cmd_report_uniform(const FitArgs& args, const std::string& out_path) {
    const ActivationSpec spec = args.spec();
    const auto [lo, hi] = args.resolved_interval(spec);
    const UniformComparison cmp = uniform_vs_nonuniform(spec, lo, hi, args.n, args.resolved_config());
    std::string body = "function,n,mse_uniform,mse_fitted,ratio\n";
    body += spec.name();
    body += ',';
    body += std::to_string(args.n);
    body += ',';
    body += csv_double(cmp.mse_uniform);
    body += ',';
    body += csv_double(cmp.mse_fitted);
    body += ',';
    body += csv_double(cmp.ratio);
    body += '\n';
    write_file(out_path, body);
    std::cout << "report uniform ratio=" << csv_double(cmp.ratio) << " hash="
              << content_hash_hex(body) << "\n";
    return kExitOk;
}

int cmd_report_soa(const FitterConfig& base, const std::string& out_path) {
    const std::vector<SoaRow> rows = soa_comparison(base);
    std::string body =
        "function,lo,hi,n,sq_aae,reference_sq_aae,mse,max_abs_err,left_boundary,right_boundary\n";
    for (const SoaRow& r : rows) {
        body += r.function;
        body += ',';
        body += csv_double(r.lo);
        body += ',';
        body += csv_double(r.hi);
        body += ',';
        body += std::to_string(r.n);
        body += ',';
        body += csv_double(r.metrics.sq_aae);
        body += ',';
        body += csv_double(r.reference_sq_aae);
        body += ',';
        body += csv_double(r.metrics.mse);
        body += ',';
        body += csv_double(r.metrics.max_abs_err);
        body += ',';
        body += r.free_left ? "free" : "asymptote";
        body += ',';
        body += r.free_right ? "free" : "asymptote";
        body += '\n';
    }
    write_file(out_path, body);
    std::cout << "report soa rows=" << rows.size() << " hash=" << content_hash_hex(body) << "\n";
    return kExitOk;
}

std::vector<std::uint64_t> parse_sizes(const std::string& text) {
    std::vector<std::uint64_t> sizes;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const std::uint64_t lo = std::stoull(text.substr(0, dots));
        const std::uint64_t hi = std::stoull(text.substr(dots + 2));
        if (lo == 0 || lo > hi) throw std::invalid_argument("bad size range: " + text);
        for (std::uint64_t s = lo; s <= hi; s *= 2) sizes.push_back(s);
        return sizes;
    }
    std::istringstream in(text);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        if (!cell.empty()) sizes.push_back(std::stoull(cell));
    }
    if (sizes.empty()) throw std::invalid_argument("no sizes given");
    return sizes;
}

int cmd_report_perf(const std::string& fmt_str, int depth, int n_clusters, double clock_mhz,
                    const std::string& sizes_str, const std::string& out_path) {
    const NumberFormat fmt = NumberFormat::from_string(fmt_str);
    // Timing is data-independent; the identity line gives a valid
    // image in every format.
    PwlModel identity;
    identity.p = {-1.0, 1.0};
    identity.v = {-1.0, 1.0};
    identity.m_l = 1.0;
    identity.m_r = 1.0;
    identity.left_mode = BoundaryMode::free;
    identity.right_mode = BoundaryMode::free;
    const LutImage image = build_lut_image(identity, fmt, depth);
    SfuState state(n_clusters);
    for (int c = 0; c < n_clusters; ++c) {
        state.ld_bp(c, image);
        state.ld_cf(c, image);
    }
    const std::vector<std::uint64_t> sizes = parse_sizes(sizes_str);
    const std::vector<PerfReport> reports = state.perf_sweep(sizes, image.element_bits());
    std::string body =
        "elements,load_cycles,fill_cycles,steady_cycles,total_cycles,"
        "throughput_elements_per_cycle,gact_per_s,steady_throughput,steady_gact_per_s\n";
    for (const PerfReport& r : reports) {
        const double steady_tp =
            r.steady_cycles ? static_cast<double>(r.elements) / static_cast<double>(r.steady_cycles)
                            : 0.0;
        body += std::to_string(r.elements);
        body += ',';
        body += std::to_string(r.load_cycles);
        body += ',';
        body += std::to_string(r.fill_cycles);
        body += ',';
        body += std::to_string(r.steady_cycles);
        body += ',';
        body += std::to_string(r.total_cycles);
        body += ',';
        body += csv_double(r.achieved_throughput);
        body += ',';
        body += csv_double(r.gact_at(clock_mhz));
        body += ',';
        body += csv_double(steady_tp);
        body += ',';
        body += csv_double(steady_tp * clock_mhz / 1000.0);
        body += '\n';
    }
    write_file(out_path, body);
    std::cout << "report perf rows=" << reports.size() << " hash=" << content_hash_hex(body) << "\n";
    return kExitOk;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Non-uniform piecewise-linear activation approximation toolkit"};
    app.require_subcommand(1);

    // fit
    FitArgs fit_args;
    std::string fit_out = "model.json";
    std::string fit_report_path;
    std::string fit_history_path;
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit a PWL model to an activation");
    fit_args.attach(fit_cmd, true);
    fit_cmd->add_option("--out", fit_out, "model JSON path");
    fit_cmd->add_option("--report", fit_report_path, "fit report JSON path");
    fit_cmd->add_option("--history", fit_history_path, "loss history CSV path");

    // export
    std::string export_model = "model.json";
    std::string export_fmt = "fp16";
    int export_depth = 64;
    std::string export_out = "image.lut";
    CLI::App* export_cmd = app.add_subcommand("export", "quantize a model into a LUT image");
    export_cmd->add_option("--model", export_model, "model JSON path");
    export_cmd->add_option("--fmt", export_fmt, "number format string");
    export_cmd->add_option("--depth", export_depth, "LUT depth d (power of two in [4,64])");
    export_cmd->add_option("--out", export_out, "LUT image path");

    // simulate
    std::string sim_image = "image.lut";
    std::string sim_input;
    std::string sim_out;
    std::string sim_out_csv;
    std::string sim_report;
    int sim_nc = 1;
    double sim_clock = 600.0;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "run a tensor through the datapath model");
    sim_cmd->add_option("--image", sim_image, "LUT image path");
    sim_cmd->add_option("--input", sim_input, "input tensor (.csv of reals, else raw)")->required();
    sim_cmd->add_option("--out", sim_out, "raw output tensor path");
    sim_cmd->add_option("--out-csv", sim_out_csv, "decoded output CSV path");
    sim_cmd->add_option("--report", sim_report, "cycle/throughput JSON path");
    sim_cmd->add_option("--nc", sim_nc, "cluster count");
    sim_cmd->add_option("--clock-mhz", sim_clock, "clock for rate conversion");

    // report
    CLI::App* report_cmd = app.add_subcommand("report", "reproducible study outputs");
    report_cmd->require_subcommand(1);

    FitArgs sweep_args;
    std::string sweep_counts = "4,8,16,32,64";
    std::string sweep_out = "sweep.csv";
    CLI::App* sweep_cmd = report_cmd->add_subcommand("sweep", "loss versus breakpoint count");
    sweep_args.attach(sweep_cmd, false);
    sweep_cmd->add_option("--counts", sweep_counts, "comma-separated breakpoint counts");
    sweep_cmd->add_option("--out", sweep_out, "CSV path");

    FitArgs uniform_args;
    uniform_args.fn = "gelu";
    uniform_args.interval = {-2.0, 2.0};
    uniform_args.n = 5;
    std::string uniform_out = "uniform.csv";
    CLI::App* uniform_cmd =
        report_cmd->add_subcommand("uniform", "uniform versus fitted placement");
    uniform_args.attach(uniform_cmd, true);
    uniform_cmd->get_option("--fn")->required(false);
    uniform_cmd->add_option("--out", uniform_out, "CSV path");

    FitArgs soa_args;
    soa_args.fn = "tanh";  // unused; soa fixes its own functions
    std::string soa_out = "soa.csv";
    CLI::App* soa_cmd = report_cmd->add_subcommand("soa", "published-configuration comparison");
    soa_cmd->add_option("--seed", soa_args.config.seed, "run seed recorded in outputs");
    soa_cmd->add_option("--grid", soa_args.config.grid_points, "objective grid points");
    soa_cmd->add_option("--out", soa_out, "CSV path");

    std::string perf_fmt = "fp16";
    int perf_depth = 64;
    int perf_nc = 1;
    double perf_clock = 600.0;
    std::string perf_sizes = "2..8192";
    std::string perf_out = "perf.csv";
    CLI::App* perf_cmd = report_cmd->add_subcommand("perf", "cycle model saturation sweep");
    perf_cmd->add_option("--fmt", perf_fmt, "number format string");
    perf_cmd->add_option("--depth", perf_depth, "LUT depth");
    perf_cmd->add_option("--nc", perf_nc, "cluster count");
    perf_cmd->add_option("--clock-mhz", perf_clock, "clock for rate conversion");
    perf_cmd->add_option("--sizes", perf_sizes, "lo..hi doubling range or comma list");
    perf_cmd->add_option("--out", perf_out, "CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (fit_cmd->parsed()) return cmd_fit(fit_args, fit_out, fit_report_path, fit_history_path);
    if (export_cmd->parsed()) return cmd_export(export_model, export_fmt, export_depth, export_out);
    if (sim_cmd->parsed())
        return cmd_simulate(sim_image, sim_input, sim_nc, sim_clock, sim_out, sim_out_csv,
                            sim_report);
    if (sweep_cmd->parsed()) {
        std::vector<std::size_t> counts;
        for (const std::uint64_t s : parse_sizes(sweep_counts))
            counts.push_back(static_cast<std::size_t>(s));
        return cmd_report_sweep(sweep_args, counts, sweep_out);
    }
    if (uniform_cmd->parsed()) return cmd_report_uniform(uniform_args, uniform_out);
    if (soa_cmd->parsed()) return cmd_report_soa(soa_args.resolved_config(), soa_out);
    if (perf_cmd->parsed())
        return cmd_report_perf(perf_fmt, perf_depth, perf_nc, perf_clock, perf_sizes, perf_out);
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const DivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const CapacityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCapacity;
    } catch (const FormatMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const NotReadyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
