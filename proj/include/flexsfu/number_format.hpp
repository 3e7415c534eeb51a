// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace flexsfu {

enum class FormatKind { fixed_point, floating_point };

// One of the six hardware element formats. Floating layouts: 8-bit is
// E4M3 (bias 7, subnormals, saturating, no infinities, single NaN
// pattern S.1111.111); 16/32-bit are IEEE binary16/binary32. Fixed
// layouts are signed two's complement Q(total-frac).frac.
struct NumberFormat {
    FormatKind kind = FormatKind::floating_point;
    int total_bits = 16;
    int frac_bits = 0;  // fixed point only
    int exp_bits = 0;   // floating point only
    int mant_bits = 0;  // floating point only
    int bias = 0;       // floating point only

    static NumberFormat fp8_e4m3();
    static NumberFormat fp16();
    static NumberFormat fp32();
    static NumberFormat fixed(int total_bits, int frac_bits);

    // Accepts "fp8_e4m3", "fp16", "fp32", "fx<T>:<F>" (e.g. "fx16:8").
    static NumberFormat from_string(const std::string& s);
    std::string to_string() const;

    bool operator==(const NumberFormat&) const = default;
};

enum class Ordering { less, equal, greater };

// Round-to-nearest-even quantization of x into the format, saturating
// at the largest finite magnitude (no infinities are emitted for
// finite x) and normalizing signed zero to +0. The returned pattern
// occupies the low total_bits of the word.
// Throws std::invalid_argument for NaN. Infinite x maps to the inf
// pattern where one exists (fp16/fp32) and saturates otherwise.
std::uint32_t encode(double x, const NumberFormat& fmt);

// Exact real value of a pattern; inverse of encode on representable
// values. NaN patterns decode to NaN, inf patterns to +-inf.
double decode(std::uint32_t bits, const NumberFormat& fmt);

// decode(encode(x)): the nearest representable value.
double quantize(double x, const NumberFormat& fmt);

// Ordering of the decoded real values; -0 equals +0.
// Throws std::invalid_argument if either pattern is NaN.
Ordering ordered_compare(std::uint32_t a, std::uint32_t b, const NumberFormat& fmt);

// Spacing of representable values at 1.0.
double ulp_at_one(const NumberFormat& fmt);

// decode(m)*decode(x)+decode(q) computed exactly, then rounded once
// (fused MADD). Saturates like encode. Throws on NaN operands.
std::uint32_t fma_quantized(std::uint32_t m_bits, std::uint32_t x_bits,
                            std::uint32_t q_bits, const NumberFormat& fmt);

// Largest positive finite pattern (the BST padding sentinel).
std::uint32_t max_finite_bits(const NumberFormat& fmt);

bool is_nan_pattern(std::uint32_t bits, const NumberFormat& fmt);
bool is_inf_pattern(std::uint32_t bits, const NumberFormat& fmt);

// Mask selecting the low total_bits of a word.
std::uint32_t pattern_mask(const NumberFormat& fmt);

}  // namespace flexsfu
