#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace netmatrix {

// ---------------------------------------------------------------------------
// Errors. File-level problems are typed exceptions; per-packet problems are
// skip reasons counted in CaptureStats.
// ---------------------------------------------------------------------------

struct CaptureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FileNotFoundError : CaptureError {
    using CaptureError::CaptureError;
};
struct BadMagicError : CaptureError {
    using CaptureError::CaptureError;
};
struct UnsupportedLinkTypeError : CaptureError {
    using CaptureError::CaptureError;
};
struct TruncatedHeaderError : CaptureError {
    using CaptureError::CaptureError;
};

enum class ByteOrder { big, little };
enum class TimestampUnit { microsecond, nanosecond };

/// Decoded pcap global header. link_type must be 1 (Ethernet).
struct PcapHeader {
    ByteOrder byte_order = ByteOrder::little;
    TimestampUnit timestamp_unit = TimestampUnit::microsecond;
    uint32_t snaplen = 0;
    uint32_t link_type = 0;
};

/// One decoded IPv4/TCP packet. Addresses and ports are host byte order;
/// ip_total_length and ttl are copied verbatim from the IP header.
struct PacketRecord {
    uint64_t ts_us = 0;
    uint32_t src_ip = 0;
    uint32_t dst_ip = 0;
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    uint8_t protocol = 6;
    uint16_t ip_total_length = 0;
    uint8_t ttl = 0;
    uint8_t tcp_flags = 0;
    std::vector<uint8_t> payload;

    bool operator==(const PacketRecord&) const = default;
};

enum class SkipReason {
    not_ipv4,       // ethertype or IP version mismatch
    not_tcp,        // IP protocol != 6
    truncated,      // frame shorter than the headers claim
    bad_header,     // internally inconsistent header lengths
    fragmented,     // IP fragment, TCP header not decodable
    vlan_nested,    // more than one VLAN tag
};

using DecodeResult = std::variant<PacketRecord, SkipReason>;

struct CaptureStats {
    uint64_t records_total = 0;
    uint64_t packets_decoded = 0;
    uint64_t skipped_not_ipv4 = 0;
    uint64_t skipped_not_tcp = 0;
    uint64_t skipped_truncated = 0;
    uint64_t skipped_bad_header = 0;
    uint64_t skipped_fragmented = 0;
    uint64_t skipped_vlan_nested = 0;

    uint64_t skipped_total() const {
        return skipped_not_ipv4 + skipped_not_tcp + skipped_truncated +
               skipped_bad_header + skipped_fragmented + skipped_vlan_nested;
    }
};

struct CaptureResult {
    PcapHeader header;
    std::vector<PacketRecord> packets;
    CaptureStats stats;
};

/// Decode one Ethernet frame into a PacketRecord. A single 802.1Q tag is
/// unwrapped; anything that is not Ethernet/IPv4/TCP or is shorter than its
/// headers claim comes back as a SkipReason.
DecodeResult decode_ethernet_ipv4_tcp(std::span<const uint8_t> frame, uint64_t ts_us);

/// Parse a classic pcap capture. Per-packet problems are counted and
/// skipped; only a broken global header is fatal. Nanosecond timestamps are
/// divided down to microseconds.
CaptureResult read_capture(const std::filesystem::path& path);

/// Same parser over an in-memory buffer.
CaptureResult read_capture_bytes(std::span<const uint8_t> data);

std::string to_string(SkipReason r);

}  // namespace netmatrix
