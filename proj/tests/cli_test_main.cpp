// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end driver for the command-line tool. argv[1] is the path to
// the flexsfu binary; every command runs through the shell against a
// private temporary directory and the outputs are checked against the
// library linked into this test.

#include <sys/wait.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexsfu/model_io.hpp"
#include "flexsfu/number_format.hpp"
#include "flexsfu/pwl.hpp"
#include "flexsfu/sfu_sim.hpp"

namespace {

using namespace flexsfu;

int g_failures = 0;

void check(bool ok, const std::string& what) {
    if (!ok) {
        ++g_failures;
        std::cerr << "FAIL: " << what << "\n";
    }
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

std::string g_cli;
std::filesystem::path g_dir;

std::string path_of(const std::string& name) { return (g_dir / name).string(); }

RunResult run(const std::string& args) {
    const std::string out_path = path_of("_stdout");
    const std::string err_path = path_of("_stderr");
    const std::string cmd =
        "\"" + g_cli + "\" " + args + " >\"" + out_path + "\" 2>\"" + err_path + "\"";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out_path);
    r.err = read_file(err_path);
    return r;
}

std::vector<std::string> data_rows(const std::string& csv) {
    std::vector<std::string> rows;
    std::istringstream in(csv);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            continue;
        }
        if (!line.empty()) rows.push_back(line);
    }
    return rows;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> cells;
    std::istringstream in(line);
    std::string cell;
    while (std::getline(in, cell, sep)) cells.push_back(cell);
    return cells;
}

void test_fit_workflow() {
    const std::string fit_args =
        "fit --fn gelu --interval -8 8 --n 16 --seed 7 --grid 20001 --max-inner 600 "
        "--max-outer 3";
    RunResult r = run(fit_args + " --out " + path_of("m.json") + " --report " +
                      path_of("r.json") + " --history " + path_of("h.csv"));
    check(r.exit_code == 0, "fit gelu exits 0, got " + std::to_string(r.exit_code) + ": " + r.err);
    check(r.out.find("fit gelu n=16") == 0, "fit stdout summary: " + r.out);
    check(r.out.find("hash=fnv1a64:") != std::string::npos, "fit stdout carries a content hash");

    const ModelDocument doc = document_from_json(read_file(path_of("m.json")));
    check(doc.function == "gelu", "fit model names its function");
    check(doc.model.p.size() == 16, "fit model holds 16 breakpoints");
    check(doc.seed == 7, "fit model records the seed");

    const nlohmann::json report = nlohmann::json::parse(read_file(path_of("r.json")));
    check(report["final_loss"].get<double>() > 0.0, "gelu fit loss is positive");
    check(report["config"]["seed"] == 7, "fit report records the seed");
    const std::vector<std::string> history = data_rows(read_file(path_of("h.csv")));
    check(history.size() == report["total_steps"].get<std::size_t>(),
          "history row count matches total steps");

    // Same seed, same flags: every artifact and the summary line must
    // be byte-identical.
    RunResult r2 = run(fit_args + " --out " + path_of("m2.json") + " --report " +
                       path_of("r2.json") + " --history " + path_of("h2.csv"));
    check(r2.exit_code == 0, "fit rerun exits 0");
    check(r2.out == r.out, "fit rerun prints identical summary");
    check(read_file(path_of("m2.json")) == read_file(path_of("m.json")),
          "fit rerun model bytes identical");
    check(read_file(path_of("r2.json")) == read_file(path_of("r.json")),
          "fit rerun report bytes identical");
    check(read_file(path_of("h2.csv")) == read_file(path_of("h.csv")),
          "fit rerun history bytes identical");
}

void test_fit_relu_exact() {
    RunResult r = run("fit --fn relu --n 2 --grid 20001 --out " + path_of("relu.json") +
                      " --report " + path_of("relu_r.json"));
    check(r.exit_code == 0, "fit relu n=2 exits 0: " + r.err);
    const nlohmann::json report = nlohmann::json::parse(read_file(path_of("relu_r.json")));
    check(report["final_loss"].get<double>() <= 1e-8,
          "relu admits an exact two-breakpoint fit, loss " +
              std::to_string(report["final_loss"].get<double>()));
}

void test_usage_errors() {
    check(run("fit --fn tanh --n 1").exit_code == 2, "n=1 is rejected as usage error");
    check(run("fit --fn frobnicate --n 4").exit_code == 2, "unknown function exits 2");
    check(run("fit").exit_code == 2, "missing --fn exits 2");
    check(run("frobnicate").exit_code == 2, "unknown subcommand exits 2");
    check(run("fit --fn tanh --interval 3 -3 --n 4").exit_code == 2,
          "reversed interval exits 2");
}

void test_export_identity() {
    ModelDocument doc;
    doc.function = "relu";  // placeholder name; export never evaluates it
    doc.lo = -1.0;
    doc.hi = 1.0;
    doc.model.p = {-1.0, 1.0};
    doc.model.v = {-1.0, 1.0};
    doc.model.m_l = 1.0;
    doc.model.m_r = 1.0;
    doc.model.left_mode = BoundaryMode::free;
    doc.model.right_mode = BoundaryMode::free;
    write_file(path_of("id.json"), to_json(doc));

    RunResult r = run("export --model " + path_of("id.json") + " --fmt fp16 --depth 4 --out " +
                      path_of("id.lut"));
    check(r.exit_code == 0, "identity export exits 0: " + r.err);
    const LutImage image = read_lut_image(read_file(path_of("id.lut")));
    check(image.depth == 4, "identity image depth 4");
    const NumberFormat fp16 = NumberFormat::from_string("fp16");
    for (const CoeffPair& cf : image.cf) {
        check(decode(cf.m, fp16) == 1.0, "identity slope decodes to 1");
        check(decode(cf.q, fp16) == 0.0, "identity intercept decodes to 0");
    }

    check(run("export --model " + path_of("id.json") + " --fmt fp16 --depth 5 --out " +
              path_of("bad.lut"))
                  .exit_code == 2,
          "non power-of-two depth exits 2");
}

void test_export_capacity() {
    // The gelu fit produced 16 breakpoints; d=16 offers only 15 slots.
    RunResult r = run("export --model " + path_of("m.json") + " --fmt fp16 --depth 16 --out " +
                      path_of("m16.lut"));
    check(r.exit_code == 4, "16 breakpoints at d=16 exits 4, got " + std::to_string(r.exit_code));
}

void test_simulate() {
    RunResult e = run("export --model " + path_of("m.json") + " --fmt fp16 --depth 32 --out " +
                      path_of("m32.lut"));
    check(e.exit_code == 0, "d=32 export exits 0: " + e.err);

    const std::size_t count = 8192;
    std::string csv;
    std::vector<double> values;
    values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double x = -4.0 + 8.0 * static_cast<double>(i) / static_cast<double>(count - 1);
        values.push_back(x);
        csv += csv_double(x);
        csv += '\n';
    }
    write_file(path_of("in.csv"), csv);

    RunResult r = run("simulate --image " + path_of("m32.lut") + " --input " + path_of("in.csv") +
                      " --out " + path_of("out.raw") + " --out-csv " + path_of("out.csv") +
                      " --report " + path_of("perf.json"));
    check(r.exit_code == 0, "simulate exits 0: " + r.err);
    check(r.out.find("fill=10") != std::string::npos, "d=32 pipeline fill is 10: " + r.out);

    const nlohmann::json perf = nlohmann::json::parse(read_file(path_of("perf.json")));
    check(perf["elements"] == count, "perf element count");
    check(perf["fill_cycles"] == 10, "perf fill cycles");
    check(perf["steady_cycles"] == count / 2, "fp16 runs two elements per cycle");

    // Replay the tensor through the linked library; the CLI bytes must
    // match exactly.
    const LutImage image = read_lut_image(read_file(path_of("m32.lut")));
    SfuState state(1);
    state.ld_bp(0, image);
    state.ld_cf(0, image);
    std::vector<std::uint32_t> inputs;
    inputs.reserve(values.size());
    for (const double x : values) inputs.push_back(encode(x, image.fmt));
    const auto [outputs, lib_perf] = state.exe_af(inputs, image.element_bits());
    std::string expected_raw;
    expected_raw.reserve(outputs.size() * 2);
    for (const std::uint32_t bits : outputs) {
        expected_raw.push_back(static_cast<char>(bits & 0xFF));
        expected_raw.push_back(static_cast<char>((bits >> 8) & 0xFF));
    }
    check(read_file(path_of("out.raw")) == expected_raw, "simulate raw bytes match the library");

    const std::vector<std::string> rows = data_rows("header\n" + read_file(path_of("out.csv")));
    check(rows.size() == count, "decoded CSV row per element");
    bool csv_ok = rows.size() == count;
    for (std::size_t i = 0; i < rows.size() && csv_ok; ++i)
        csv_ok = rows[i] == csv_double(decode(outputs[i], image.fmt));
    check(csv_ok, "decoded CSV values match the library");

    // Raw tensors read back through the same path.
    RunResult raw = run("simulate --image " + path_of("m32.lut") + " --input " +
                        path_of("out.raw") + " --report " + path_of("perf_raw.json"));
    check(raw.exit_code == 0, "raw tensor input exits 0: " + raw.err);
    const nlohmann::json perf_raw = nlohmann::json::parse(read_file(path_of("perf_raw.json")));
    check(perf_raw["elements"] == count, "raw tensor element count");

    write_file(path_of("odd.raw"), std::string(3, '\x01'));
    check(run("simulate --image " + path_of("m32.lut") + " --input " + path_of("odd.raw"))
                  .exit_code == 5,
          "misaligned raw tensor exits 5");
}

void test_simulate_empty_and_nan() {
    write_file(path_of("empty.csv"), "");
    RunResult r = run("simulate --image " + path_of("m32.lut") + " --input " +
                      path_of("empty.csv") + " --report " + path_of("perf_empty.json"));
    check(r.exit_code == 0, "empty tensor exits 0: " + r.err);
    check(r.out.find("steady=0") != std::string::npos, "empty tensor has zero steady cycles");
    const nlohmann::json perf = nlohmann::json::parse(read_file(path_of("perf_empty.json")));
    check(perf["elements"] == 0, "empty tensor perf elements");
    check(perf["steady_cycles"] == 0, "empty tensor perf steady");

    write_file(path_of("nan.csv"), "0.5\nnan\n1.0\n");
    check(run("simulate --image " + path_of("m32.lut") + " --input " + path_of("nan.csv"))
                  .exit_code == 5,
          "NaN element exits 5");
}

void test_report_sweep() {
    RunResult r = run("report sweep --fn sigmoid --grid 5001 --max-inner 300 --max-outer 2 --out " +
                      path_of("sweep.csv"));
    check(r.exit_code == 0, "report sweep exits 0: " + r.err);
    check(r.out.find("rows=5") != std::string::npos, "sweep reports five rows: " + r.out);
    const std::string body = read_file(path_of("sweep.csv"));
    const std::vector<std::string> rows = data_rows(body);
    check(body.find("function,n,final_loss,mse,aae,sq_aae,max_abs_err\n") == 0, "sweep header");
    check(rows.size() == 5, "sweep has one row per count");
    const std::vector<std::string> counts = {"4", "8", "16", "32", "64"};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::vector<std::string> cells = split(rows[i], ',');
        check(cells.size() == 7, "sweep row has seven cells");
        check(cells[0] == "sigmoid", "sweep row names the function");
        check(cells[1] == counts[i], "sweep row carries count " + counts[i]);
        check(std::stod(cells[3]) > 0.0, "sweep mse positive");
    }
}

void test_report_uniform() {
    RunResult r = run("report uniform --grid 20001 --max-inner 800 --max-outer 4 --out " +
                      path_of("uniform.csv"));
    check(r.exit_code == 0, "report uniform exits 0: " + r.err);
    const std::vector<std::string> rows = data_rows(read_file(path_of("uniform.csv")));
    check(rows.size() == 1, "uniform report has one row");
    const std::vector<std::string> cells = split(rows[0], ',');
    check(cells.size() == 5, "uniform row has five cells");
    check(cells[0] == "gelu", "uniform defaults to gelu");
    check(std::stod(cells[4]) >= 3.0, "fitted placement beats uniform 3x, got " + cells[4]);
}

void test_report_soa_parallel_determinism() {
    setenv("FLEXSFU_THREADS", "1", 1);
    RunResult r1 = run("report soa --grid 2001 --out " + path_of("soa1.csv"));
    setenv("FLEXSFU_THREADS", "4", 1);
    RunResult r4 = run("report soa --grid 2001 --out " + path_of("soa4.csv"));
    unsetenv("FLEXSFU_THREADS");
    check(r1.exit_code == 0, "report soa exits 0: " + r1.err);
    check(r4.exit_code == 0, "report soa (4 workers) exits 0: " + r4.err);
    check(r1.out.find("rows=9") != std::string::npos, "soa reports nine rows: " + r1.out);
    const std::string body1 = read_file(path_of("soa1.csv"));
    check(data_rows(body1).size() == 9, "soa CSV has nine data rows");
    check(body1 == read_file(path_of("soa4.csv")), "worker count never changes soa bytes");
}

void test_report_perf() {
    RunResult r = run("report perf --fmt fp16 --depth 32 --sizes 2..8192 --clock-mhz 600 --out " +
                      path_of("perf.csv"));
    check(r.exit_code == 0, "report perf exits 0: " + r.err);
    const std::vector<std::string> rows = data_rows(read_file(path_of("perf.csv")));
    check(rows.size() == 13, "doubling 2..8192 yields 13 rows");
    double prev = 0.0;
    for (const std::string& row : rows) {
        const std::vector<std::string> cells = split(row, ',');
        check(cells.size() == 9, "perf row has nine cells");
        const double tp = std::stod(cells[5]);
        check(tp >= prev, "throughput never decreases with size");
        prev = tp;
    }
    const std::vector<std::string> last = split(rows.back(), ',');
    check(std::stod(last[7]) > 1.99, "fp16 steady throughput approaches 2/cycle");
    check(std::abs(std::stod(last[8]) - 1.2) < 0.01, "fp16 at 600MHz approaches 1.2 GAct/s");
}

void test_threads_env_is_tolerant() {
    setenv("FLEXSFU_THREADS", "junk", 1);
    RunResult r = run("report sweep --fn relu --counts 4 --grid 2001 --max-inner 100 "
                      "--max-outer 1 --out " +
                      path_of("sweep_env.csv"));
    unsetenv("FLEXSFU_THREADS");
    check(r.exit_code == 0, "invalid FLEXSFU_THREADS falls back to one worker: " + r.err);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: cli_tests <path-to-flexsfu>\n";
        return 2;
    }
    g_cli = argv[1];
    char tmpl[] = "/tmp/flexsfu_cli_XXXXXX";
    const char* dir = mkdtemp(tmpl);
    if (dir == nullptr) {
        std::cerr << "cannot create temporary directory\n";
        return 2;
    }
    g_dir = dir;

    test_fit_workflow();
    test_fit_relu_exact();
    test_usage_errors();
    test_export_identity();
    test_export_capacity();
    test_simulate();
    test_simulate_empty_and_nan();
    test_report_sweep();
    test_report_uniform();
    test_report_soa_parallel_determinism();
    test_report_perf();
    test_threads_env_is_tolerant();

    std::filesystem::remove_all(g_dir);
    if (g_failures) {
        std::cerr << g_failures << " CLI check(s) failed\n";
        return 1;
    }
    std::cout << "all CLI checks passed\n";
    return 0;
}
