// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "qaq/quantizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qaq/normal.hpp"

namespace qaq {

std::vector<uint32_t> uniform_quantize(const Tensor1D& values, int bits, double vmin, double vmax) {
    if (bits < 1 || bits > 31) {
        throw std::invalid_argument("uniform_quantize: bits must be in 1..31, got " +
                                    std::to_string(bits));
    }
    if (!(vmin < vmax)) {
        throw std::invalid_argument("degenerate range");
    }
    const double range = vmax - vmin;
    const double segments = static_cast<double>(1u << bits);
    const uint32_t top = (1u << bits) - 1u;
    std::vector<uint32_t> codes(values.len());
    for (size_t i = 0; i < values.len(); ++i) {
        double x = values[i];
        if (x < vmin) {
            x = vmin;
        } else if (x > vmax) {
            x = vmax;
        }
        double pos = (x - vmin) / range * segments;
        auto code = static_cast<uint32_t>(pos);
        // Values at vmax land in the closed last segment.
        codes[i] = code > top ? top : code;
    }
    return codes;
}

Tensor1D dequantize(const QuantizedToken& qt) {
    if (qt.full_precision) {
        Tensor1D out(qt.dim);
        out.data = qt.raw;
        return out;
    }
    const size_t inlier_count = qt.dim - qt.outliers.count();
    Tensor1D inliers(inlier_count);
    if (qt.bits > 0) {
        if (qt.codes.size() != inlier_count) {
            throw std::runtime_error("dequantize: code count " + std::to_string(qt.codes.size()) +
                                     " does not cover " + std::to_string(inlier_count) +
                                     " inlier dims");
        }
        const double seg = (qt.vmax - qt.vmin) / static_cast<double>(1u << qt.bits);
        const uint32_t limit = 1u << qt.bits;
        for (size_t i = 0; i < qt.codes.size(); ++i) {
            if (qt.codes[i] >= limit) {
                throw std::runtime_error("dequantize: corrupted code " +
                                         std::to_string(qt.codes[i]) + " for " +
                                         std::to_string(qt.bits) + " bits");
            }
            inliers[i] = qt.vmin + (static_cast<double>(qt.codes[i]) + 0.5) * seg;
        }
    } else {
        // Constant token: every inlier dim reconstructs to the stored value.
        for (size_t i = 0; i < inliers.len(); ++i) {
            inliers[i] = qt.vmin;
        }
    }

    std::vector<uint32_t> kept;
    kept.reserve(qt.dim - qt.outliers.count());
    size_t next_outlier = 0;
    for (uint32_t d = 0; d < qt.dim; ++d) {
        if (next_outlier < qt.outliers.entries.size() &&
            qt.outliers.entries[next_outlier].first == d) {
            ++next_outlier;
        } else {
            kept.push_back(d);
        }
    }
    return merge_outliers(inliers, kept, qt.outliers);
}

namespace {

BitChoice clamp_choice(double needed, int bmin, int bmax, int baseline_bits) {
    int bits;
    if (needed <= static_cast<double>(bmin)) {
        bits = bmin;
    } else if (needed >= static_cast<double>(bmax)) {
        bits = bmax;
    } else {
        bits = static_cast<int>(std::ceil(needed));
    }
    return {bits, bits >= baseline_bits};
}

} // namespace

BitChoice bits_for_std(double range, double sigma_target, int bmin, int bmax, int baseline_bits) {
    if (range < 0.0) {
        throw std::invalid_argument("bits_for_std: negative range");
    }
    if (range == 0.0) {
        return {0, false};
    }
    if (sigma_target <= 0.0) {
        // Zero (or negative) allowed error: nothing short of the raw values
        // satisfies it.
        return {bmax, true};
    }
    if (std::isinf(sigma_target)) {
        return {bmin, false};
    }
    double needed = std::ceil(std::log2(range / (2.0 * std::sqrt(3.0) * sigma_target)));
    return clamp_choice(needed, bmin, bmax, baseline_bits);
}

BitChoice bits_for_mae_uniform(double range, double mae_target, int bmin, int bmax,
                               int baseline_bits) {
    if (range < 0.0) {
        throw std::invalid_argument("bits_for_mae_uniform: negative range");
    }
    if (range == 0.0) {
        return {0, false};
    }
    if (mae_target <= 0.0) {
        return {bmax, true};
    }
    if (std::isinf(mae_target)) {
        return {bmin, false};
    }
    double needed = std::ceil(std::log2(range / (2.0 * mae_target) + 1.0));
    return clamp_choice(needed, bmin, bmax, baseline_bits);
}

const NormalCoeffTable& NormalCoeffTable::standard() {
    static const NormalCoeffTable table{{0.473222, 0.271204, 0.151629, 0.0832674, 0.0451210,
                                         0.0242022, 0.0128782, 0.00680873}};
    return table;
}

double NormalCoeffTable::at(int b) const {
    if (b < 1 || b > 8) {
        throw std::invalid_argument("unsupported bit width " + std::to_string(b));
    }
    return coeff[static_cast<size_t>(b - 1)];
}

double normal_coeff(int b) {
    return NormalCoeffTable::standard().at(b);
}

BitChoice bits_for_mae_normal(double sigma, double mae_target, int bmax,
                              int /*baseline_bits: kept for signature symmetry*/,
                              const NormalCoeffTable& table) {
    if (sigma <= 0.0 || mae_target <= 0.0) {
        throw std::invalid_argument("bits_for_mae_normal: sigma and mae_target must be positive");
    }
    for (int b = 1; b <= 8; ++b) {
        if (table.at(b) * sigma <= mae_target) {
            return {b, false};
        }
    }
    return {bmax, true};
}

std::vector<uint32_t> normal_quantize(const Tensor1D& values, int b, double sigma) {
    if (b < 1 || b > 8) {
        throw std::invalid_argument("normal_quantize: b outside 1..8");
    }
    if (sigma <= 0.0) {
        throw std::invalid_argument("normal_quantize: sigma must be positive");
    }
    const double buckets = static_cast<double>(1u << b);
    const uint32_t top = (1u << b) - 1u;
    std::vector<uint32_t> codes(values.len());
    for (size_t i = 0; i < values.len(); ++i) {
        double p = normal::cdf(values[i] / sigma);
        auto code = static_cast<uint32_t>(p * buckets);
        codes[i] = code > top ? top : code;
    }
    return codes;
}

Tensor1D normal_dequantize(const std::vector<uint32_t>& codes, int b, double sigma) {
    if (b < 1 || b > 8) {
        throw std::invalid_argument("normal_dequantize: b outside 1..8");
    }
    const double buckets = static_cast<double>(1u << b);
    const uint32_t limit = 1u << b;
    Tensor1D out(codes.size());
    for (size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] >= limit) {
            throw std::runtime_error("normal_dequantize: corrupted code " +
                                     std::to_string(codes[i]));
        }
        out[i] = sigma * normal::inverse_cdf((static_cast<double>(codes[i]) + 0.5) / buckets);
    }
    return out;
}

std::vector<uint8_t> pack_codes(const std::vector<uint32_t>& codes, int bits) {
    if (bits < 0 || bits > 31) {
        throw std::invalid_argument("pack_codes: bits outside 0..31");
    }
    std::vector<uint8_t> bytes((codes.size() * static_cast<size_t>(bits) + 7) / 8, 0);
    size_t bitpos = 0;
    for (uint32_t code : codes) {
        if (bits < 32 && (code >> bits) != 0) {
            throw std::invalid_argument("pack_codes: code exceeds bit width");
        }
        for (int b = 0; b < bits; ++b) {
            if ((code >> b) & 1u) {
                bytes[bitpos / 8] |= static_cast<uint8_t>(1u << (bitpos % 8));
            }
            ++bitpos;
        }
    }
    return bytes;
}

std::vector<uint32_t> unpack_codes(const std::vector<uint8_t>& bytes, int bits, size_t count) {
    if (bits < 0 || bits > 31) {
        throw std::invalid_argument("unpack_codes: bits outside 0..31");
    }
    if (bytes.size() < (count * static_cast<size_t>(bits) + 7) / 8) {
        throw std::invalid_argument("unpack_codes: byte buffer too short");
    }
    std::vector<uint32_t> codes(count, 0);
    size_t bitpos = 0;
    for (size_t i = 0; i < count; ++i) {
        for (int b = 0; b < bits; ++b) {
            if ((bytes[bitpos / 8] >> (bitpos % 8)) & 1u) {
                codes[i] |= 1u << b;
            }
            ++bitpos;
        }
    }
    return codes;
}

} // namespace qaq
