#include "netmatrix/netmatrix.hpp"

#include <cmath>

namespace netmatrix {

NetMatrixRow build_row(const SelectedPackets& selected) {
    NetMatrixRow row;
    for (size_t i = 0; i < kPacketsPerRow; ++i) {
        const PacketRecord& pkt = *selected.packets[i];
        row.total_length[i] = pkt.ip_total_length;
        row.ttl[i] = pkt.ttl;
        if (i == 0) {
            row.iat_us[i] = 0;
        } else {
            const uint64_t delta = pkt.ts_us - selected.packets[i - 1]->ts_us;
            row.iat_us[i] = delta > kIatMaxUs ? kIatMaxUs : static_cast<uint32_t>(delta);
        }
    }
    return row;
}

std::array<uint8_t, kRowBytes> serialize_row(const NetMatrixRow& row) {
    std::array<uint8_t, kRowBytes> out{};
    size_t off = 0;
    for (size_t i = 0; i < kPacketsPerRow; ++i) {
        out[off++] = static_cast<uint8_t>(row.total_length[i] >> 8);
        out[off++] = static_cast<uint8_t>(row.total_length[i]);
        out[off++] = row.ttl[i];
        out[off++] = static_cast<uint8_t>(row.iat_us[i] >> 16);
        out[off++] = static_cast<uint8_t>(row.iat_us[i] >> 8);
        out[off++] = static_cast<uint8_t>(row.iat_us[i]);
    }
    static_assert(kRowBytes == kPacketsPerRow * 6);
    return out;
}

NetMatrixRow deserialize_row(std::span<const uint8_t> bytes) {
    if (bytes.size() != kRowBytes) {
        throw WrongLengthError("NetMatrix row must be exactly 30 bytes, got " +
                               std::to_string(bytes.size()));
    }
    NetMatrixRow row;
    size_t off = 0;
    for (size_t i = 0; i < kPacketsPerRow; ++i) {
        row.total_length[i] = static_cast<uint16_t>(bytes[off] << 8 | bytes[off + 1]);
        row.ttl[i] = bytes[off + 2];
        row.iat_us[i] = static_cast<uint32_t>(bytes[off + 3]) << 16 |
                        static_cast<uint32_t>(bytes[off + 4]) << 8 | bytes[off + 5];
        off += 6;
    }
    return row;
}

FeatureVector to_features(const NetMatrixRow& row) {
    FeatureVector features{};
    for (size_t i = 0; i < kPacketsPerRow; ++i) {
        features[i * 3 + 0] = static_cast<double>(row.total_length[i]);
        features[i * 3 + 1] = static_cast<double>(row.ttl[i]);
        features[i * 3 + 2] = static_cast<double>(row.iat_us[i]);
    }
    return features;
}

NetMatrixRow from_features(const FeatureVector& features) {
    NetMatrixRow row;
    for (size_t i = 0; i < kPacketsPerRow; ++i) {
        row.total_length[i] = static_cast<uint16_t>(std::llround(features[i * 3 + 0]));
        row.ttl[i] = static_cast<uint8_t>(std::llround(features[i * 3 + 1]));
        row.iat_us[i] = static_cast<uint32_t>(std::llround(features[i * 3 + 2]));
    }
    return row;
}

}  // namespace netmatrix
