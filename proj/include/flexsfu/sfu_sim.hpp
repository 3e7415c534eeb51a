// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flexsfu/number_format.hpp"
#include "flexsfu/pwl.hpp"

namespace flexsfu {

struct CoeffPair {
    std::uint32_t m = 0;
    std::uint32_t q = 0;
    bool operator==(const CoeffPair&) const = default;
};

// Quantized memory image of one activation function: d-1 breakpoint
// slots serialized in balanced-BST level order (unused slots padded
// with the max-positive finite pattern, which no finite input can
// exceed) and d (m, q) coefficient pairs (slots past the last real
// segment replicate it). Element width is fmt.total_bits; memory words
// are 32-bit with entries packed LSB-first.
struct LutImage {
    NumberFormat fmt;
    int depth = 0;                  // d: power of two in [4, 64]
    std::size_t n_breakpoints = 0;  // real breakpoints in the source model
    std::vector<std::uint32_t> bp;  // d-1 entries, level order
    std::vector<CoeffPair> cf;      // d entries

    int element_bits() const { return fmt.total_bits; }
    int lanes() const { return 32 / fmt.total_bits; }

    bool operator==(const LutImage&) const = default;
};

// Quantizes a model into a LUT image. Requires n+1 <= d.
// Throws CapacityError when the model does not fit and
// std::invalid_argument for an illegal depth.
LutImage build_lut_image(const PwlModel& model, const NumberFormat& fmt, int depth);

// 32-bit memory word streams, one word per load cycle.
std::vector<std::uint32_t> packed_bp_words(const LutImage& image);
std::vector<std::uint32_t> packed_cf_words(const LutImage& image);

// Generic SIMD lane packing: element_bits in {8,16,32}, entries fill
// each word LSB-first. unpack_elements is the exact inverse.
std::vector<std::uint32_t> pack_elements(const std::vector<std::uint32_t>& elements,
                                         int element_bits);
std::vector<std::uint32_t> unpack_elements(const std::vector<std::uint32_t>& words,
                                           int element_bits, std::size_t count);

// Text serialization: header `flexsfu-lut v1 fmt=<str> d=<int> n=<int>`
// followed by BP and CF sections of one 8-digit hex word per line.
std::string write_lut_image(const LutImage& image);
LutImage read_lut_image(const std::string& text);

struct StageStep {
    int level = 0;
    std::uint32_t address = 0;  // accumulated address after this stage
    int cmp = 0;                // 1 iff x was strictly greater than the node
};

struct AduResult {
    std::uint32_t address = 0;
    std::vector<StageStep> trace;
};

struct PerfReport {
    std::uint64_t load_cycles = 0;
    std::uint64_t fill_cycles = 0;
    std::uint64_t steady_cycles = 0;
    std::uint64_t total_cycles = 0;
    std::uint64_t elements = 0;
    double achieved_throughput = 0.0;  // elements per counted cycle

    double gact_at(double clock_mhz) const {
        return achieved_throughput * clock_mhz / 1000.0;
    }
};

// Functional model of one SFU instance with N_c identical clusters.
// ld_bp/ld_cf install memories per cluster; exe_af streams a tensor
// through every pipeline stage. All results are deterministic.
class SfuState {
  public:
    explicit SfuState(int n_clusters);

    int clusters() const { return static_cast<int>(clusters_.size()); }
    bool ready() const;
    const NumberFormat& format() const;
    int depth() const;

    // Returns the number of 32-bit words written (one per cycle).
    // Throws FormatMismatchError when the image disagrees with memory
    // already loaded anywhere in the state.
    int ld_bp(int cluster, const LutImage& image);
    int ld_cf(int cluster, const LutImage& image);

    // Walks the log2(d) comparator stages for one element.
    // Throws NotReadyError before both loads of that cluster.
    AduResult adu_decode(int cluster, std::uint32_t x_bits) const;

    // Runs every element through adu_decode, the coefficient fetch,
    // and the fused MADD. element_bits must equal the loaded format
    // width; NaN patterns are rejected (FormatMismatchError). Cycle
    // model: fill = log2(d)+5, steady throughput = N_c * 32 /
    // element_bits elements per cycle; load cycles are not re-counted.
    std::pair<std::vector<std::uint32_t>, PerfReport> exe_af(
        const std::vector<std::uint32_t>& elements, int element_bits) const;

    // Per-tensor-size reports that also charge the (broadcast) load of
    // the currently installed image plus pipeline fill.
    std::vector<PerfReport> perf_sweep(const std::vector<std::uint64_t>& sizes,
                                       int element_bits) const;

  private:
    struct Cluster {
        bool bp_loaded = false;
        bool cf_loaded = false;
        std::vector<std::uint32_t> bp;
        std::vector<CoeffPair> cf;
    };

    const Cluster& ready_cluster(int cluster) const;
    void check_image(const LutImage& image);

    std::vector<Cluster> clusters_;
    NumberFormat fmt_;
    int depth_ = 0;
    bool fmt_set_ = false;
};

// Pipeline fill latency in cycles for a given LTC depth.
std::uint64_t fill_latency(int depth);

}  // namespace flexsfu
