// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#include "flexsfu/sfu_sim.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "flexsfu/errors.hpp"

namespace flexsfu {

namespace {

int log2_of(int depth) {
    int l = 0;
    while ((1 << l) < depth) ++l;
    return l;
}

void check_depth(int depth) {
    if (depth < 4 || depth > 64 || !std::has_single_bit(static_cast<unsigned>(depth))) {
        throw std::invalid_argument("LTC depth must be a power of two in [4, 64]");
    }
}

// Places sorted[lo..hi] into a perfect BST rooted at heap index node
// (0-based level order). Depth d-1 = 2^k - 1 keeps every split exact.
void fill_bst(const std::vector<std::uint32_t>& sorted, std::vector<std::uint32_t>& heap,
              std::size_t node, std::size_t lo, std::size_t hi) {
    const std::size_t mid = (lo + hi) / 2;
    heap[node] = sorted[mid];
    if (mid > lo) fill_bst(sorted, heap, 2 * node + 1, lo, mid - 1);
    if (hi > mid) fill_bst(sorted, heap, 2 * node + 2, mid + 1, hi);
}

std::uint32_t element_mask(int element_bits) {
    return element_bits == 32 ? 0xFFFFFFFFu : (1u << element_bits) - 1;
}

void check_element_bits(int element_bits) {
    if (element_bits != 8 && element_bits != 16 && element_bits != 32) {
        throw std::invalid_argument("element width must be 8, 16, or 32 bits");
    }
}

std::uint64_t div_ceil(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

}  // namespace

std::uint64_t fill_latency(int depth) {
    check_depth(depth);
    return static_cast<std::uint64_t>(log2_of(depth)) + 5;
}

LutImage build_lut_image(const PwlModel& model, const NumberFormat& fmt, int depth) {
    model.validate();
    check_depth(depth);
    const std::size_t n = model.p.size();
    if (n + 1 > static_cast<std::size_t>(depth)) {
        throw CapacityError("model needs " + std::to_string(n + 1) + " segments but depth is " +
                            std::to_string(depth));
    }
    LutImage image;
    image.fmt = fmt;
    image.depth = depth;
    image.n_breakpoints = n;

    // Quantized breakpoints stay sorted (encode is monotone); padding
    // with the max positive pattern keeps the slot array sorted too.
    std::vector<std::uint32_t> slots(static_cast<std::size_t>(depth) - 1,
                                     max_finite_bits(fmt));
    for (std::size_t i = 0; i < n; ++i) slots[i] = encode(model.p[i], fmt);
    image.bp.assign(slots.size(), 0);
    fill_bst(slots, image.bp, 0, 0, slots.size() - 1);

    const SegmentCoeffs coeffs = to_segment_coeffs(model);
    image.cf.resize(static_cast<std::size_t>(depth));
    for (std::size_t s = 0; s < static_cast<std::size_t>(depth); ++s) {
        const std::size_t src = s <= n ? s : n;  // replicate the last real segment
        image.cf[s].m = encode(coeffs.m[src], fmt);
        image.cf[s].q = encode(coeffs.q[src], fmt);
    }
    return image;
}

std::vector<std::uint32_t> pack_elements(const std::vector<std::uint32_t>& elements,
                                         int element_bits) {
    check_element_bits(element_bits);
    const int lanes = 32 / element_bits;
    const std::uint32_t mask = element_mask(element_bits);
    std::vector<std::uint32_t> words(div_ceil(elements.size(), lanes), 0);
    for (std::size_t i = 0; i < elements.size(); ++i) {
        words[i / lanes] |= (elements[i] & mask) << (element_bits * (i % lanes));
    }
    return words;
}

std::vector<std::uint32_t> unpack_elements(const std::vector<std::uint32_t>& words,
                                           int element_bits, std::size_t count) {
    check_element_bits(element_bits);
    const int lanes = 32 / element_bits;
    if (count > words.size() * static_cast<std::size_t>(lanes)) {
        throw std::invalid_argument("unpack_elements: not enough words");
    }
    const std::uint32_t mask = element_mask(element_bits);
    std::vector<std::uint32_t> elements(count);
    for (std::size_t i = 0; i < count; ++i) {
        elements[i] = (words[i / lanes] >> (element_bits * (i % lanes))) & mask;
    }
    return elements;
}

std::vector<std::uint32_t> packed_bp_words(const LutImage& image) {
    return pack_elements(image.bp, image.element_bits());
}

std::vector<std::uint32_t> packed_cf_words(const LutImage& image) {
    std::vector<std::uint32_t> stream;
    stream.reserve(image.cf.size() * 2);
    for (const CoeffPair& c : image.cf) {
        stream.push_back(c.m);
        stream.push_back(c.q);
    }
    return pack_elements(stream, image.element_bits());
}

std::string write_lut_image(const LutImage& image) {
    std::string out = "flexsfu-lut v1 fmt=" + image.fmt.to_string() +
                      " d=" + std::to_string(image.depth) +
                      " n=" + std::to_string(image.n_breakpoints) + "\n";
    char buf[16];
    auto emit = [&](std::uint32_t word) {
        std::snprintf(buf, sizeof buf, "%08x\n", word);
        out += buf;
    };
    out += "BP\n";
    for (std::uint32_t w : packed_bp_words(image)) emit(w);
    out += "CF\n";
    for (std::uint32_t w : packed_cf_words(image)) emit(w);
    return out;
}

LutImage read_lut_image(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("lut image: empty input");
    std::istringstream header(line);
    std::string magic, version, kv;
    header >> magic >> version;
    if (magic != "flexsfu-lut" || version != "v1") {
        throw std::invalid_argument("lut image: bad header");
    }
    LutImage image;
    bool have_fmt = false, have_d = false, have_n = false;
    while (header >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("lut image: bad header field");
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (key == "fmt") {
            image.fmt = NumberFormat::from_string(value);
            have_fmt = true;
        } else if (key == "d") {
            image.depth = std::stoi(value);
            have_d = true;
        } else if (key == "n") {
            image.n_breakpoints = static_cast<std::size_t>(std::stoul(value));
            have_n = true;
        } else {
            throw std::invalid_argument("lut image: unknown header key " + key);
        }
    }
    if (!have_fmt || !have_d || !have_n) throw std::invalid_argument("lut image: incomplete header");
    check_depth(image.depth);

    auto read_section = [&](const std::string& name, std::size_t entries) {
        if (!std::getline(in, line) || line != name) {
            throw std::invalid_argument("lut image: missing " + name + " section");
        }
        const int eb = image.element_bits();
        const std::size_t words = div_ceil(entries, 32 / eb);
        std::vector<std::uint32_t> data(words);
        for (std::size_t w = 0; w < words; ++w) {
            if (!std::getline(in, line)) throw std::invalid_argument("lut image: truncated");
            std::uint32_t value = 0;
            const auto res = std::from_chars(line.data(), line.data() + line.size(), value, 16);
            if (res.ec != std::errc{} || res.ptr != line.data() + line.size()) {
                throw std::invalid_argument("lut image: bad hex word '" + line + "'");
            }
            data[w] = value;
        }
        return unpack_elements(data, eb, entries);
    };
    const std::size_t d = static_cast<std::size_t>(image.depth);
    image.bp = read_section("BP", d - 1);
    const std::vector<std::uint32_t> cf_stream = read_section("CF", 2 * d);
    image.cf.resize(d);
    for (std::size_t s = 0; s < d; ++s) {
        image.cf[s].m = cf_stream[2 * s];
        image.cf[s].q = cf_stream[2 * s + 1];
    }
    if (image.n_breakpoints + 1 > d) throw std::invalid_argument("lut image: n too large for d");
    return image;
}

SfuState::SfuState(int n_clusters) {
    if (n_clusters < 1) throw std::invalid_argument("SfuState: need at least one cluster");
    clusters_.resize(static_cast<std::size_t>(n_clusters));
}

bool SfuState::ready() const {
    for (const Cluster& c : clusters_) {
        if (!c.bp_loaded || !c.cf_loaded) return false;
    }
    return true;
}

const NumberFormat& SfuState::format() const {
    if (!fmt_set_) throw NotReadyError("SfuState: nothing loaded");
    return fmt_;
}

int SfuState::depth() const {
    if (!fmt_set_) throw NotReadyError("SfuState: nothing loaded");
    return depth_;
}

void SfuState::check_image(const LutImage& image) {
    check_depth(image.depth);
    if (fmt_set_) {
        if (!(image.fmt == fmt_) || image.depth != depth_) {
            throw FormatMismatchError("image format " + image.fmt.to_string() + "/d=" +
                                      std::to_string(image.depth) + " differs from loaded " +
                                      fmt_.to_string() + "/d=" + std::to_string(depth_));
        }
    } else {
        fmt_ = image.fmt;
        depth_ = image.depth;
        fmt_set_ = true;
    }
}

int SfuState::ld_bp(int cluster, const LutImage& image) {
    if (cluster < 0 || cluster >= clusters()) {
        throw std::invalid_argument("ld_bp: bad cluster id");
    }
    check_image(image);
    Cluster& c = clusters_[static_cast<std::size_t>(cluster)];
    c.bp = image.bp;
    c.bp_loaded = true;
    return static_cast<int>(packed_bp_words(image).size());
}

int SfuState::ld_cf(int cluster, const LutImage& image) {
    if (cluster < 0 || cluster >= clusters()) {
        throw std::invalid_argument("ld_cf: bad cluster id");
    }
    check_image(image);
    Cluster& c = clusters_[static_cast<std::size_t>(cluster)];
    c.cf = image.cf;
    c.cf_loaded = true;
    return static_cast<int>(packed_cf_words(image).size());
}

const SfuState::Cluster& SfuState::ready_cluster(int cluster) const {
    if (cluster < 0 || cluster >= clusters()) {
        throw std::invalid_argument("bad cluster id");
    }
    const Cluster& c = clusters_[static_cast<std::size_t>(cluster)];
    if (!c.bp_loaded || !c.cf_loaded) {
        throw NotReadyError("cluster " + std::to_string(cluster) + " has no loaded image");
    }
    return c;
}

AduResult SfuState::adu_decode(int cluster, std::uint32_t x_bits) const {
    const Cluster& c = ready_cluster(cluster);
    if (is_nan_pattern(x_bits, fmt_)) {
        throw FormatMismatchError("adu_decode: NaN input pattern");
    }
    AduResult result;
    const int levels = log2_of(depth_);
    result.trace.reserve(static_cast<std::size_t>(levels));
    std::uint32_t a = 0;
    for (int level = 0; level < levels; ++level) {
        const std::size_t node = (std::size_t{1} << level) - 1 + a;
        const int cmp =
            ordered_compare(x_bits, c.bp[node], fmt_) == Ordering::greater ? 1 : 0;
        a = 2 * a + static_cast<std::uint32_t>(cmp);
        result.trace.push_back({level, a, cmp});
    }
    result.address = a;
    return result;
}

std::pair<std::vector<std::uint32_t>, PerfReport> SfuState::exe_af(
    const std::vector<std::uint32_t>& elements, int element_bits) const {
    check_element_bits(element_bits);
    if (!ready()) throw NotReadyError("exe_af: load bp and cf first");
    if (element_bits != fmt_.total_bits) {
        throw FormatMismatchError("exe_af: element width " + std::to_string(element_bits) +
                                  " does not match format " + fmt_.to_string());
    }
    std::vector<std::uint32_t> out(elements.size());
    const int nc = clusters();
    const int levels = log2_of(depth_);
    for (std::size_t i = 0; i < elements.size(); ++i) {
        const std::uint32_t x = elements[i];
        if (is_nan_pattern(x, fmt_)) {
            throw FormatMismatchError("exe_af: NaN input pattern");
        }
        const Cluster& c = clusters_[i % static_cast<std::size_t>(nc)];
        std::uint32_t a = 0;
        for (int level = 0; level < levels; ++level) {
            const std::size_t node = (std::size_t{1} << level) - 1 + a;
            const int cmp =
                ordered_compare(x, c.bp[node], fmt_) == Ordering::greater ? 1 : 0;
            a = 2 * a + static_cast<std::uint32_t>(cmp);
        }
        const CoeffPair& cf = c.cf[a];
        out[i] = fma_quantized(cf.m, x, cf.q, fmt_);
    }
    PerfReport perf;
    perf.elements = elements.size();
    perf.load_cycles = 0;
    perf.fill_cycles = fill_latency(depth_);
    const std::uint64_t per_cycle =
        static_cast<std::uint64_t>(nc) * (32 / static_cast<std::uint64_t>(element_bits));
    perf.steady_cycles = elements.empty() ? 0 : div_ceil(elements.size(), per_cycle);
    perf.total_cycles = perf.load_cycles + perf.fill_cycles + perf.steady_cycles;
    perf.achieved_throughput =
        perf.total_cycles == 0 ? 0.0
                               : static_cast<double>(perf.elements) /
                                     static_cast<double>(perf.total_cycles);
    return {std::move(out), perf};
}

std::vector<PerfReport> SfuState::perf_sweep(const std::vector<std::uint64_t>& sizes,
                                             int element_bits) const {
    check_element_bits(element_bits);
    if (!ready()) throw NotReadyError("perf_sweep: load bp and cf first");
    if (element_bits != fmt_.total_bits) {
        throw FormatMismatchError("perf_sweep: element width does not match format");
    }
    // Loads broadcast to all clusters, one 32-bit word per cycle.
    const std::size_t d = static_cast<std::size_t>(depth_);
    const std::uint64_t eb = static_cast<std::uint64_t>(element_bits);
    const std::uint64_t load_words = div_ceil((d - 1) * eb, 32) + div_ceil(2 * d * eb, 32);
    std::vector<PerfReport> reports;
    reports.reserve(sizes.size());
    for (std::uint64_t size : sizes) {
        PerfReport perf;
        perf.elements = size;
        perf.load_cycles = load_words;
        perf.fill_cycles = fill_latency(depth_);
        const std::uint64_t per_cycle =
            static_cast<std::uint64_t>(clusters()) * (32 / eb);
        perf.steady_cycles = size == 0 ? 0 : div_ceil(size, per_cycle);
        perf.total_cycles = perf.load_cycles + perf.fill_cycles + perf.steady_cycles;
        perf.achieved_throughput = perf.total_cycles == 0
                                       ? 0.0
                                       : static_cast<double>(size) /
                                             static_cast<double>(perf.total_cycles);
        reports.push_back(perf);
    }
    return reports;
}

}  // namespace flexsfu
