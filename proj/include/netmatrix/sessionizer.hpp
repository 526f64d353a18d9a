#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netmatrix/capture.hpp"

namespace netmatrix {

struct Endpoint {
    uint32_t ip = 0;
    uint16_t port = 0;

    auto operator<=>(const Endpoint&) const = default;
};

/// Canonical bidirectional flow key: the lower (ip, port) endpoint first, so
/// both directions of a connection map to the same key.
struct FlowKey {
    Endpoint lo;
    Endpoint hi;
    uint8_t protocol = 6;

    auto operator<=>(const FlowKey&) const = default;
};

FlowKey canonical_key(uint32_t src_ip, uint16_t src_port, uint32_t dst_ip,
                      uint16_t dst_port, uint8_t protocol);
FlowKey canonical_key(const PacketRecord& pkt);

struct FlowKeyHash {
    size_t operator()(const FlowKey& k) const noexcept {
        uint64_t h = 14695981039346656037ull;
        auto mix = [&h](uint64_t v) { h = (h ^ v) * 1099511628211ull; };
        mix(static_cast<uint64_t>(k.lo.ip) << 32 | k.hi.ip);
        mix(static_cast<uint64_t>(k.lo.port) << 24 |
            static_cast<uint64_t>(k.hi.port) << 8 | k.protocol);
        return static_cast<size_t>(h);
    }
};

struct Session {
    FlowKey key;
    std::vector<PacketRecord> packets;  // ts_us ascending, file order on ties
    std::optional<std::string> label;
};

/// The five packets that define a session's row. Pointers borrow from the
/// Session they were selected from.
struct SelectedPackets {
    std::array<const PacketRecord*, 5> packets{};
};

/// Group packets into bidirectional sessions. Sessions come out ordered by
/// first-packet timestamp (arrival order on ties); packets within a session
/// are time-sorted with file order breaking ties.
std::vector<Session> sessionize(std::span<const PacketRecord> packets);

/// True iff the payload begins a TLS application_data record: content type
/// 0x17, legacy version 0x0303, record length in 1..16640.
bool is_encrypted_payload(const PacketRecord& pkt);

/// First five encrypted-payload packets in arrival order. Non-encrypted
/// packets in between are skipped; fewer than five qualifying packets means
/// the session has no row.
std::optional<SelectedPackets> select_netmatrix_packets(const Session& session);

}  // namespace netmatrix
