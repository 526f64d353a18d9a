#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "netmatrix/sessionizer.hpp"

namespace netmatrix {

struct WrongLengthError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Serialized row size: 5 packets x (2-byte length + 1-byte TTL + 3-byte IAT).
inline constexpr size_t kRowBytes = 30;
inline constexpr size_t kPacketsPerRow = 5;
inline constexpr size_t kFeatureCount = 15;

/// Inter-arrival times saturate at the 3-byte ceiling (~16.78 s).
inline constexpr uint32_t kIatMaxUs = 16'777'215;

/// Per-session representation: per selected packet, IP total length, TTL and
/// microsecond inter-arrival time. iat_us[0] is 0 by construction.
struct NetMatrixRow {
    std::array<uint16_t, kPacketsPerRow> total_length{};
    std::array<uint8_t, kPacketsPerRow> ttl{};
    std::array<uint32_t, kPacketsPerRow> iat_us{};

    bool operator==(const NetMatrixRow&) const = default;
};

/// Packet-major flattening: [len_1, ttl_1, iat_1, ..., len_5, ttl_5, iat_5].
using FeatureVector = std::array<double, kFeatureCount>;

struct LabeledExample {
    FeatureVector features{};
    std::string label;

    bool operator==(const LabeledExample&) const = default;
};

NetMatrixRow build_row(const SelectedPackets& selected);

/// Exactly 30 bytes, big-endian multi-byte fields.
std::array<uint8_t, kRowBytes> serialize_row(const NetMatrixRow& row);

/// Inverse of serialize_row; throws WrongLengthError unless input is 30 bytes.
NetMatrixRow deserialize_row(std::span<const uint8_t> bytes);

FeatureVector to_features(const NetMatrixRow& row);
NetMatrixRow from_features(const FeatureVector& features);

}  // namespace netmatrix
