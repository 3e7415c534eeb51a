// Copyright (C) 2026 The flexsfu authors
// SPDX-License-Identifier: Apache-2.0

#include "flexsfu/number_format.hpp"

#include <cassert>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace flexsfu {

namespace {

using u128 = unsigned __int128;

// Shift helpers tolerating counts >= 128 (plain << / >> would be UB).
inline u128 shl(u128 v, int s) { return s >= 128 ? u128{0} : v << s; }
inline u128 shr(u128 v, int s) { return s >= 128 ? u128{0} : v >> s; }

inline int bit_width_u128(u128 v) {
    const std::uint64_t hi = static_cast<std::uint64_t>(v >> 64);
    if (hi != 0) return 128 - __builtin_clzll(hi);
    const std::uint64_t lo = static_cast<std::uint64_t>(v);
    return lo != 0 ? 64 - __builtin_clzll(lo) : 0;
}

struct FloatLayout {
    int ebits;
    int mbits;
    int bias;
    bool e4m3;  // top exponent field still holds normals; no inf

    int emin() const { return 1 - bias; }
    std::uint32_t max_field() const { return (1u << ebits) - 1; }
    int sign_shift() const { return ebits + mbits; }

    std::uint32_t max_finite() const {
        if (e4m3) return (max_field() << mbits) | ((1u << mbits) - 2);
        return ((max_field() - 1) << mbits) | ((1u << mbits) - 1);
    }
    std::uint32_t inf_pattern() const { return max_field() << mbits; }
    std::uint32_t canonical_nan() const {
        if (e4m3) return (max_field() << mbits) | ((1u << mbits) - 1);
        return inf_pattern() | (1u << (mbits - 1));
    }
};

FloatLayout layout_of(const NumberFormat& fmt) {
    return FloatLayout{fmt.exp_bits, fmt.mant_bits, fmt.bias, fmt.total_bits == 8};
}

// Rounds mag.2^e0 (plus an excess in (0,1).2^e0 when sticky) to the
// quantum 2^(e0+sh), sh >= 1, round-to-nearest-even.
u128 rne_shift(u128 mag, int sh, bool sticky) {
    u128 sig = shr(mag, sh);
    const u128 rem = mag - shl(sig, sh);
    int cmp;  // rem relative to the halfway point 2^(sh-1)
    if (bit_width_u128(rem) < sh) {
        cmp = -1;
    } else {
        cmp = (rem - shl(u128{1}, sh - 1)) != 0 ? 1 : 0;
    }
    bool round_up;
    if (cmp > 0) round_up = true;
    else if (cmp < 0) round_up = false;
    else round_up = sticky || (sig & 1) != 0;
    return round_up ? sig + 1 : sig;
}

std::uint32_t pack_float(bool neg, std::uint32_t efield, std::uint32_t frac,
                         const FloatLayout& L) {
    return (static_cast<std::uint32_t>(neg) << L.sign_shift()) | (efield << L.mbits) | frac;
}

// Rounds the exact value (-1)^neg . mag . 2^e0 (sticky marking dropped
// low bits) into the float layout, saturating at max finite magnitude.
// Zero results are always +0.
std::uint32_t round_float(bool neg, u128 mag, int e0, bool sticky, const FloatLayout& L) {
    if (mag == 0) {
        assert(!sticky);
        return 0;
    }
    const int E = bit_width_u128(mag) - 1 + e0;
    int lsb_exp = std::max(E, L.emin()) - L.mbits;
    const int sh = lsb_exp - e0;
    u128 sig;
    if (sh <= 0) {
        assert(!sticky);
        sig = shl(mag, -sh);
    } else {
        sig = rne_shift(mag, sh, sticky);
    }
    if (sig == 0) return 0;
    if (bit_width_u128(sig) == L.mbits + 2) {  // rounding carry 0b10...0
        sig >>= 1;
        lsb_exp += 1;
    }
    if (bit_width_u128(sig) <= L.mbits) {
        assert(lsb_exp == L.emin() - L.mbits);
        return pack_float(neg, 0, static_cast<std::uint32_t>(sig), L);
    }
    const int efield = lsb_exp + L.mbits + L.bias;
    const std::uint32_t frac = static_cast<std::uint32_t>(sig) & ((1u << L.mbits) - 1);
    assert(efield >= 1);
    const int max_finite_field = L.e4m3 ? static_cast<int>(L.max_field())
                                        : static_cast<int>(L.max_field()) - 1;
    if (efield > max_finite_field ||
        (L.e4m3 && efield == max_finite_field && frac == (1u << L.mbits) - 1)) {
        return pack_float(neg, 0, 0, L) | L.max_finite();
    }
    return pack_float(neg, static_cast<std::uint32_t>(efield), frac, L);
}

// Same contract for fixed point: quantum 2^-frac_bits, two's complement
// saturation at [-2^(T-1), 2^(T-1)-1].
std::uint32_t round_fixed(bool neg, u128 mag, int e0, bool sticky, const NumberFormat& fmt) {
    const int sh = -fmt.frac_bits - e0;
    u128 sig;
    if (sh <= 0) {
        assert(!sticky);
        if (bit_width_u128(mag) - sh > 100) {
            sig = u128{1} << 99;  // far beyond any representable; saturates below
        } else {
            sig = shl(mag, -sh);
        }
    } else {
        sig = rne_shift(mag, sh, sticky);
    }
    if (sig == 0) return 0;
    const u128 limit = neg ? (u128{1} << (fmt.total_bits - 1))
                           : (u128{1} << (fmt.total_bits - 1)) - 1;
    if (sig > limit) sig = limit;
    const std::int64_t value = neg ? -static_cast<std::int64_t>(sig)
                                   : static_cast<std::int64_t>(sig);
    return static_cast<std::uint32_t>(value) & pattern_mask(fmt);
}

// Exact decomposition of a finite pattern: value = (-1)^neg . mag . 2^e
// with trailing zeros stripped so magnitudes stay narrow (<= 31 bits).
struct Unpacked {
    bool zero = false;
    bool neg = false;
    u128 mag = 0;
    int e = 0;
};

enum class PatternClass { finite, infinite, nan };

PatternClass classify(std::uint32_t bits, const NumberFormat& fmt, Unpacked& out) {
    bits &= pattern_mask(fmt);
    if (fmt.kind == FormatKind::fixed_point) {
        const int T = fmt.total_bits;
        std::int64_t sv = static_cast<std::int64_t>(bits);
        if (bits >> (T - 1)) sv -= (std::int64_t{1} << T);  // sign extend
        out.zero = sv == 0;
        out.neg = sv < 0;
        out.mag = static_cast<u128>(out.neg ? -sv : sv);
        out.e = -fmt.frac_bits;
    } else {
        const FloatLayout L = layout_of(fmt);
        const std::uint32_t e = (bits >> L.mbits) & L.max_field();
        const std::uint32_t f = bits & ((1u << L.mbits) - 1);
        out.neg = (bits >> L.sign_shift()) & 1u;
        if (e == L.max_field() && !L.e4m3) {
            return f == 0 ? PatternClass::infinite : PatternClass::nan;
        }
        if (L.e4m3 && e == L.max_field() && f == (1u << L.mbits) - 1) {
            return PatternClass::nan;
        }
        if (e == 0) {
            out.mag = f;
            out.e = L.emin() - L.mbits;
        } else {
            out.mag = (1u << L.mbits) | f;
            out.e = static_cast<int>(e) - L.bias - L.mbits;
        }
        out.zero = out.mag == 0;
    }
    if (!out.zero) {
        while ((out.mag & 1) == 0) {
            out.mag >>= 1;
            out.e += 1;
        }
    }
    return PatternClass::finite;
}

std::uint32_t saturated(bool neg, const NumberFormat& fmt) {
    if (fmt.kind == FormatKind::fixed_point) {
        if (neg) return (1u << (fmt.total_bits - 1)) & pattern_mask(fmt);
        return max_finite_bits(fmt);
    }
    const FloatLayout L = layout_of(fmt);
    return pack_float(neg, 0, 0, L) | L.max_finite();
}

std::uint32_t round_exact(bool neg, u128 mag, int e0, bool sticky, const NumberFormat& fmt) {
    if (fmt.kind == FormatKind::fixed_point) return round_fixed(neg, mag, e0, sticky, fmt);
    return round_float(neg, mag, e0, sticky, layout_of(fmt));
}

}  // namespace

NumberFormat NumberFormat::fp8_e4m3() {
    NumberFormat f;
    f.kind = FormatKind::floating_point;
    f.total_bits = 8;
    f.exp_bits = 4;
    f.mant_bits = 3;
    f.bias = 7;
    return f;
}

NumberFormat NumberFormat::fp16() {
    NumberFormat f;
    f.kind = FormatKind::floating_point;
    f.total_bits = 16;
    f.exp_bits = 5;
    f.mant_bits = 10;
    f.bias = 15;
    return f;
}

NumberFormat NumberFormat::fp32() {
    NumberFormat f;
    f.kind = FormatKind::floating_point;
    f.total_bits = 32;
    f.exp_bits = 8;
    f.mant_bits = 23;
    f.bias = 127;
    return f;
}

NumberFormat NumberFormat::fixed(int total_bits, int frac_bits) {
    if (total_bits != 8 && total_bits != 16 && total_bits != 32) {
        throw std::invalid_argument("NumberFormat: total_bits must be 8, 16, or 32");
    }
    if (frac_bits < 0 || frac_bits >= total_bits) {
        throw std::invalid_argument("NumberFormat: need 0 <= frac_bits < total_bits");
    }
    NumberFormat f;
    f.kind = FormatKind::fixed_point;
    f.total_bits = total_bits;
    f.frac_bits = frac_bits;
    return f;
}

NumberFormat NumberFormat::from_string(const std::string& s) {
    if (s == "fp8_e4m3") return fp8_e4m3();
    if (s == "fp16") return fp16();
    if (s == "fp32") return fp32();
    if (s.rfind("fx", 0) == 0) {
        const auto colon = s.find(':');
        if (colon != std::string::npos && colon > 2 && colon + 1 < s.size()) {
            try {
                const int total = std::stoi(s.substr(2, colon - 2));
                const int frac = std::stoi(s.substr(colon + 1));
                return fixed(total, frac);
            } catch (const std::logic_error&) {
                // fall through to the common error
            }
        }
    }
    throw std::invalid_argument("unknown number format: " + s);
}

std::string NumberFormat::to_string() const {
    if (kind == FormatKind::fixed_point) {
        return "fx" + std::to_string(total_bits) + ":" + std::to_string(frac_bits);
    }
    switch (total_bits) {
        case 8: return "fp8_e4m3";
        case 16: return "fp16";
        case 32: return "fp32";
    }
    return "fp?";
}

std::uint32_t pattern_mask(const NumberFormat& fmt) {
    return fmt.total_bits == 32 ? 0xFFFFFFFFu : (1u << fmt.total_bits) - 1;
}

std::uint32_t max_finite_bits(const NumberFormat& fmt) {
    if (fmt.kind == FormatKind::fixed_point) {
        return (1u << (fmt.total_bits - 1)) - 1;
    }
    return layout_of(fmt).max_finite();
}

bool is_nan_pattern(std::uint32_t bits, const NumberFormat& fmt) {
    Unpacked u;
    return classify(bits, fmt, u) == PatternClass::nan;
}

bool is_inf_pattern(std::uint32_t bits, const NumberFormat& fmt) {
    Unpacked u;
    return classify(bits, fmt, u) == PatternClass::infinite;
}

std::uint32_t encode(double x, const NumberFormat& fmt) {
    if (std::isnan(x)) {
        throw std::invalid_argument("encode: NaN input");
    }
    if (std::isinf(x)) {
        if (fmt.kind == FormatKind::floating_point && !layout_of(fmt).e4m3) {
            const FloatLayout L = layout_of(fmt);
            return pack_float(x < 0, 0, 0, L) | L.inf_pattern();
        }
        return saturated(x < 0, fmt);
    }
    if (x == 0.0) return 0;  // covers -0.0
    int e = 0;
    const double m = std::frexp(std::fabs(x), &e);
    const auto mant = static_cast<std::uint64_t>(std::ldexp(m, 53));  // in [2^52, 2^53)
    return round_exact(std::signbit(x), mant, e - 53, false, fmt);
}

double decode(std::uint32_t bits, const NumberFormat& fmt) {
    Unpacked u;
    switch (classify(bits, fmt, u)) {
        case PatternClass::nan:
            return std::numeric_limits<double>::quiet_NaN();
        case PatternClass::infinite:
            return u.neg ? -std::numeric_limits<double>::infinity()
                         : std::numeric_limits<double>::infinity();
        case PatternClass::finite:
            break;
    }
    if (u.zero) return u.neg ? -0.0 : 0.0;
    const double mag = std::ldexp(static_cast<double>(static_cast<std::uint64_t>(u.mag)), u.e);
    return u.neg ? -mag : mag;
}

double quantize(double x, const NumberFormat& fmt) {
    return decode(encode(x, fmt), fmt);
}

Ordering ordered_compare(std::uint32_t a, std::uint32_t b, const NumberFormat& fmt) {
    if (is_nan_pattern(a, fmt) || is_nan_pattern(b, fmt)) {
        throw std::invalid_argument("ordered_compare: NaN operand");
    }
    const double da = decode(a, fmt);
    const double db = decode(b, fmt);
    if (da < db) return Ordering::less;
    if (da > db) return Ordering::greater;
    return Ordering::equal;
}

double ulp_at_one(const NumberFormat& fmt) {
    const int bits = fmt.kind == FormatKind::fixed_point ? fmt.frac_bits : fmt.mant_bits;
    return std::ldexp(1.0, -bits);
}

std::uint32_t fma_quantized(std::uint32_t m_bits, std::uint32_t x_bits,
                            std::uint32_t q_bits, const NumberFormat& fmt) {
    Unpacked m, x, q;
    const PatternClass cm = classify(m_bits, fmt, m);
    const PatternClass cx = classify(x_bits, fmt, x);
    const PatternClass cq = classify(q_bits, fmt, q);
    if (cm == PatternClass::nan || cx == PatternClass::nan || cq == PatternClass::nan) {
        throw std::invalid_argument("fma_quantized: NaN operand");
    }
    const FloatLayout L = fmt.kind == FormatKind::floating_point
                              ? layout_of(fmt)
                              : FloatLayout{};
    const bool prod_inf = cm == PatternClass::infinite || cx == PatternClass::infinite;
    if (prod_inf) {
        const bool factor_zero = (cm == PatternClass::finite && m.zero) ||
                                 (cx == PatternClass::finite && x.zero);
        if (factor_zero) throw std::invalid_argument("fma_quantized: inf * 0");
        const bool pneg = m.neg != x.neg;
        if (cq == PatternClass::infinite && q.neg != pneg) {
            throw std::invalid_argument("fma_quantized: inf - inf");
        }
        return pack_float(pneg, 0, 0, L) | L.inf_pattern();
    }
    if (cq == PatternClass::infinite) {
        return pack_float(q.neg, 0, 0, L) | L.inf_pattern();
    }

    if (m.zero || x.zero) {
        if (q.zero) return 0;
        return q_bits & pattern_mask(fmt);
    }
    const bool pneg = m.neg != x.neg;
    const u128 pmag = m.mag * x.mag;  // <= 2^62: stripped magnitudes are < 2^31
    const int pe = m.e + x.e;
    if (q.zero) {
        return round_exact(pneg, pmag, pe, false, fmt);
    }

    // Align the addends on a common base exponent. Within a 64-bit gap
    // the sum is exact; past it the low operand collapses into a
    // sticky contribution below the base.
    bool hi_neg, lo_neg;
    u128 hi_mag, lo_mag;
    int hi_e, lo_e;
    if (pe >= q.e) {
        hi_neg = pneg; hi_mag = pmag; hi_e = pe;
        lo_neg = q.neg; lo_mag = q.mag; lo_e = q.e;
    } else {
        hi_neg = q.neg; hi_mag = q.mag; hi_e = q.e;
        lo_neg = pneg; lo_mag = pmag; lo_e = pe;
    }
    const int gap = hi_e - lo_e;
    bool neg_r;
    u128 mag_r;
    int base;
    bool sticky = false;
    if (gap <= 64) {
        base = lo_e;
        const u128 hi = hi_mag << gap;
        if (hi_neg == lo_neg) {
            neg_r = hi_neg;
            mag_r = hi + lo_mag;
        } else if (hi >= lo_mag) {
            neg_r = hi_neg;
            mag_r = hi - lo_mag;
        } else {
            neg_r = lo_neg;
            mag_r = lo_mag - hi;
        }
        if (mag_r == 0) return 0;
    } else {
        base = hi_e - 64;
        const u128 hi = hi_mag << 64;
        const int drop = gap - 64;
        const u128 lo = shr(lo_mag, drop);
        sticky = (lo_mag - shl(lo, drop)) != 0;
        neg_r = hi_neg;
        if (hi_neg == lo_neg) {
            mag_r = hi + lo;
        } else {
            // True magnitude is hi - lo - eps with eps in (0,1) units of
            // the base quantum; fold eps into the sticky convention.
            mag_r = hi - lo - (sticky ? 1 : 0);
        }
    }
    return round_exact(neg_r, mag_r, base, sticky, fmt);
}

}  // namespace flexsfu
