// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "qaq/outlier_filter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace qaq {

bool OutlierSet::contains(uint32_t dim) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), dim,
                               [](const auto& e, uint32_t d) { return e.first < d; });
    return it != entries.end() && it->first == dim;
}

ExtractResult extract_outliers(const Tensor1D& values, double alpha_per_end) {
    const size_t d = values.len();
    if (d == 0) {
        throw std::invalid_argument("extract_outliers: empty token");
    }
    if (alpha_per_end < 0.0 || alpha_per_end >= 0.5) {
        throw std::invalid_argument("extract_outliers: alpha must be in [0, 0.5)");
    }

    ExtractResult res;
    auto [mn, mx] = std::minmax_element(values.data.begin(), values.data.end());

    // ceil with a small guard so binary round-up of alpha*d (e.g. 0.2*5) does
    // not inflate the count.
    size_t per_end = 0;
    if (alpha_per_end > 0.0 && *mn != *mx) {
        per_end = static_cast<size_t>(
            std::ceil(alpha_per_end * static_cast<double>(d) - 1e-9));
        per_end = std::max<size_t>(per_end, 1);
    }

    if (per_end == 0) {
        res.inliers = values;
        res.kept_index.resize(d);
        std::iota(res.kept_index.begin(), res.kept_index.end(), 0u);
        res.vmin = *mn;
        res.vmax = *mx;
        return res;
    }

    // Sort dims by value; ties resolve toward the lower index, so the
    // selection is deterministic.
    std::vector<uint32_t> order(d);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        if (values[a] != values[b]) {
            return values[a] < values[b];
        }
        return a < b;
    });

    std::vector<char> is_outlier(d, 0);
    size_t low_take = std::min(per_end, d);
    for (size_t i = 0; i < low_take; ++i) {
        is_outlier[order[i]] = 1;
    }
    // The top end takes from the remaining dims, largest first, lower index
    // preferred among equals: scan the descending tail, skipping dims the low
    // end already claimed, and collect candidates per distinct value.
    size_t high_taken = 0;
    for (size_t i = d; i-- > 0 && high_taken < per_end;) {
        uint32_t dim = order[i];
        if (is_outlier[dim]) {
            continue;
        }
        // Among equal values the ascending sort puts lower indices first;
        // walking backwards would pick higher indices, so gather the run of
        // equals and take from its front.
        size_t run_begin = i;
        while (run_begin > 0 && values[order[run_begin - 1]] == values[order[i]]) {
            --run_begin;
        }
        for (size_t r = run_begin; r <= i && high_taken < per_end; ++r) {
            if (!is_outlier[order[r]]) {
                is_outlier[order[r]] = 1;
                ++high_taken;
            }
        }
        i = run_begin; // loop decrement steps past the run
    }

    res.kept_index.reserve(d);
    for (uint32_t dim = 0; dim < d; ++dim) {
        if (is_outlier[dim]) {
            res.outliers.entries.emplace_back(dim, values[dim]);
        } else {
            res.inliers.data.push_back(values[dim]);
            res.kept_index.push_back(dim);
        }
    }
    if (!res.inliers.data.empty()) {
        auto [imn, imx] = std::minmax_element(res.inliers.data.begin(), res.inliers.data.end());
        res.vmin = *imn;
        res.vmax = *imx;
    }
    return res;
}

Tensor1D merge_outliers(const Tensor1D& inlier_recon, const std::vector<uint32_t>& kept_index,
                        const OutlierSet& outliers) {
    if (inlier_recon.len() != kept_index.size()) {
        throw std::invalid_argument("merge_outliers: inlier/index size mismatch");
    }
    const size_t d = inlier_recon.len() + outliers.count();
    Tensor1D out(d);
    std::vector<char> placed(d, 0);
    for (size_t i = 0; i < kept_index.size(); ++i) {
        uint32_t dim = kept_index[i];
        if (dim >= d || placed[dim]) {
            throw std::runtime_error("corrupt outlier set");
        }
        out[dim] = inlier_recon[i];
        placed[dim] = 1;
    }
    for (const auto& [dim, value] : outliers.entries) {
        if (dim >= d || placed[dim]) {
            throw std::runtime_error("corrupt outlier set");
        }
        out[dim] = value;
        placed[dim] = 1;
    }
    return out;
}

namespace {

void append_value(std::vector<uint8_t>& bytes, double value, int baseline_bits) {
    if (baseline_bits == 64) {
        uint64_t u;
        std::memcpy(&u, &value, 8);
        for (int i = 0; i < 8; ++i) {
            bytes.push_back(static_cast<uint8_t>(u >> (8 * i)));
        }
    } else if (baseline_bits == 32) {
        float f = static_cast<float>(value);
        uint32_t u;
        std::memcpy(&u, &f, 4);
        for (int i = 0; i < 4; ++i) {
            bytes.push_back(static_cast<uint8_t>(u >> (8 * i)));
        }
    } else if (baseline_bits == 16) {
        // IEEE binary16 with round-to-nearest-even, via the float route.
        float f = static_cast<float>(value);
        uint32_t u;
        std::memcpy(&u, &f, 4);
        uint32_t sign = (u >> 16) & 0x8000u;
        int32_t exp = static_cast<int32_t>((u >> 23) & 0xffu) - 127 + 15;
        uint32_t mant = u & 0x7fffffu;
        uint16_t h;
        if (((u >> 23) & 0xffu) == 0xffu) {
            h = static_cast<uint16_t>(sign | 0x7c00u | (mant ? 0x200u : 0u));
        } else if (exp >= 0x1f) {
            h = static_cast<uint16_t>(sign | 0x7c00u);
        } else if (exp <= 0) {
            // Subnormal or zero; shift the implicit bit into the mantissa.
            if (exp < -10) {
                h = static_cast<uint16_t>(sign);
            } else {
                mant |= 0x800000u;
                int shift = 14 - exp;
                uint32_t half = mant >> shift;
                uint32_t rem = mant & ((1u << shift) - 1u);
                uint32_t halfway = 1u << (shift - 1);
                if (rem > halfway || (rem == halfway && (half & 1u))) {
                    ++half;
                }
                h = static_cast<uint16_t>(sign | half);
            }
        } else {
            uint32_t half = (static_cast<uint32_t>(exp) << 10) | (mant >> 13);
            uint32_t rem = mant & 0x1fffu;
            if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) {
                ++half; // carries into the exponent correctly
            }
            h = static_cast<uint16_t>(sign | half);
        }
        bytes.push_back(static_cast<uint8_t>(h & 0xffu));
        bytes.push_back(static_cast<uint8_t>(h >> 8));
    } else {
        throw std::invalid_argument("serialize_outliers: baseline_bits must be 16, 32 or 64");
    }
}

double read_value(const std::vector<uint8_t>& bytes, size_t& pos, int baseline_bits) {
    if (baseline_bits == 64) {
        uint64_t u = 0;
        for (int i = 0; i < 8; ++i) {
            u |= static_cast<uint64_t>(bytes.at(pos++)) << (8 * i);
        }
        double d;
        std::memcpy(&d, &u, 8);
        return d;
    }
    if (baseline_bits == 32) {
        uint32_t u = 0;
        for (int i = 0; i < 4; ++i) {
            u |= static_cast<uint32_t>(bytes.at(pos++)) << (8 * i);
        }
        float f;
        std::memcpy(&f, &u, 4);
        return static_cast<double>(f);
    }
    if (baseline_bits == 16) {
        uint16_t h = static_cast<uint16_t>(bytes.at(pos) | (bytes.at(pos + 1) << 8));
        pos += 2;
        uint32_t sign = static_cast<uint32_t>(h & 0x8000u) << 16;
        uint32_t exp = (h >> 10) & 0x1fu;
        uint32_t mant = h & 0x3ffu;
        uint32_t u;
        if (exp == 0x1f) {
            u = sign | 0x7f800000u | (mant << 13);
        } else if (exp == 0) {
            if (mant == 0) {
                u = sign;
            } else {
                int e = -1;
                do {
                    mant <<= 1;
                    ++e;
                } while ((mant & 0x400u) == 0);
                u = sign | (static_cast<uint32_t>(127 - 15 - e) << 23) | ((mant & 0x3ffu) << 13);
            }
        } else {
            u = sign | ((exp - 15 + 127) << 23) | (mant << 13);
        }
        float f;
        std::memcpy(&f, &u, 4);
        return static_cast<double>(f);
    }
    throw std::invalid_argument("deserialize_outliers: baseline_bits must be 16, 32 or 64");
}

} // namespace

std::vector<uint8_t> serialize_outliers(const OutlierSet& outliers, int baseline_bits) {
    std::vector<uint8_t> bytes;
    auto count = static_cast<uint32_t>(outliers.count());
    for (int i = 0; i < 4; ++i) {
        bytes.push_back(static_cast<uint8_t>(count >> (8 * i)));
    }
    for (const auto& [dim, value] : outliers.entries) {
        for (int i = 0; i < 4; ++i) {
            bytes.push_back(static_cast<uint8_t>(dim >> (8 * i)));
        }
        append_value(bytes, value, baseline_bits);
    }
    return bytes;
}

OutlierSet deserialize_outliers(const std::vector<uint8_t>& bytes, int baseline_bits) {
    if (bytes.size() < 4) {
        throw std::runtime_error("deserialize_outliers: truncated buffer");
    }
    size_t pos = 0;
    uint32_t count = 0;
    for (int i = 0; i < 4; ++i) {
        count |= static_cast<uint32_t>(bytes.at(pos++)) << (8 * i);
    }
    const size_t entry_bytes = 4 + static_cast<size_t>(baseline_bits) / 8;
    if (bytes.size() - 4 < static_cast<size_t>(count) * entry_bytes) {
        throw std::runtime_error("deserialize_outliers: truncated buffer");
    }
    OutlierSet set;
    set.entries.reserve(count);
    for (uint32_t n = 0; n < count; ++n) {
        uint32_t dim = 0;
        for (int i = 0; i < 4; ++i) {
            dim |= static_cast<uint32_t>(bytes.at(pos++)) << (8 * i);
        }
        set.entries.emplace_back(dim, read_value(bytes, pos, baseline_bits));
    }
    return set;
}

} // namespace qaq
