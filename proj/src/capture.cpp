#include "netmatrix/capture.hpp"

#include <cstring>
#include <fstream>

namespace netmatrix {

namespace {

constexpr uint32_t kMagicUsec = 0xa1b2c3d4u;
constexpr uint32_t kMagicUsecSwapped = 0xd4c3b2a1u;
constexpr uint32_t kMagicNsec = 0xa1b23c4du;
constexpr uint32_t kMagicNsecSwapped = 0x4d3cb2a1u;
constexpr uint32_t kMagicPcapng = 0x0a0d0d0au;

constexpr uint16_t kEthertypeIpv4 = 0x0800;
constexpr uint16_t kEthertypeVlan = 0x8100;
constexpr uint8_t kProtoTcp = 6;

constexpr size_t kGlobalHeaderLen = 24;
constexpr size_t kRecordHeaderLen = 16;
constexpr size_t kEthernetHeaderLen = 14;

// Reject record lengths no sane capture produces; keeps fuzzed inputs from
// driving huge allocations.
constexpr uint32_t kMaxFrameLen = 256 * 1024 * 1024;

uint16_t be16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] << 8 | p[1]);
}

uint32_t be32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) << 24 | static_cast<uint32_t>(p[1]) << 16 |
           static_cast<uint32_t>(p[2]) << 8 | static_cast<uint32_t>(p[3]);
}

uint32_t le32(const uint8_t* p) {
    return static_cast<uint32_t>(p[3]) << 24 | static_cast<uint32_t>(p[2]) << 16 |
           static_cast<uint32_t>(p[1]) << 8 | static_cast<uint32_t>(p[0]);
}

struct FileReader {
    ByteOrder order = ByteOrder::little;

    uint32_t u32(const uint8_t* p) const {
        return order == ByteOrder::little ? le32(p) : be32(p);
    }
};

void count_skip(CaptureStats& stats, SkipReason r) {
    switch (r) {
        case SkipReason::not_ipv4: ++stats.skipped_not_ipv4; break;
        case SkipReason::not_tcp: ++stats.skipped_not_tcp; break;
        case SkipReason::truncated: ++stats.skipped_truncated; break;
        case SkipReason::bad_header: ++stats.skipped_bad_header; break;
        case SkipReason::fragmented: ++stats.skipped_fragmented; break;
        case SkipReason::vlan_nested: ++stats.skipped_vlan_nested; break;
    }
}

}  // namespace

DecodeResult decode_ethernet_ipv4_tcp(std::span<const uint8_t> frame, uint64_t ts_us) {
    if (frame.size() < kEthernetHeaderLen) return SkipReason::truncated;

    size_t off = 12;  // skip MACs
    uint16_t ethertype = be16(&frame[off]);
    off += 2;

    if (ethertype == kEthertypeVlan) {
        if (frame.size() < off + 4) return SkipReason::truncated;
        ethertype = be16(&frame[off + 2]);
        off += 4;
        if (ethertype == kEthertypeVlan) return SkipReason::vlan_nested;
    }
    if (ethertype != kEthertypeIpv4) return SkipReason::not_ipv4;

    if (frame.size() < off + 20) return SkipReason::truncated;
    const uint8_t* ip = &frame[off];

    const uint8_t version = ip[0] >> 4;
    if (version != 4) return SkipReason::not_ipv4;
    const size_t ihl = static_cast<size_t>(ip[0] & 0x0f) * 4;
    if (ihl < 20) return SkipReason::bad_header;

    const uint16_t total_length = be16(ip + 2);
    if (total_length < ihl) return SkipReason::bad_header;
    if (off + total_length > frame.size()) return SkipReason::truncated;
    if (total_length < ihl + 20) return SkipReason::bad_header;

    // Fragments past the first carry no TCP header; the first fragment of a
    // split datagram has an incomplete payload. Both are skipped.
    const uint16_t frag = be16(ip + 6);
    if ((frag & 0x1fff) != 0 || (frag & 0x2000) != 0) return SkipReason::fragmented;

    if (ip[9] != kProtoTcp) return SkipReason::not_tcp;

    const uint8_t* tcp = ip + ihl;
    const size_t data_offset = static_cast<size_t>(tcp[12] >> 4) * 4;
    if (data_offset < 20) return SkipReason::bad_header;
    if (total_length < ihl + data_offset) return SkipReason::bad_header;

    PacketRecord rec;
    rec.ts_us = ts_us;
    rec.src_ip = be32(ip + 12);
    rec.dst_ip = be32(ip + 16);
    rec.ip_total_length = total_length;
    rec.ttl = ip[8];
    rec.protocol = kProtoTcp;
    rec.src_port = be16(tcp);
    rec.dst_port = be16(tcp + 2);
    rec.tcp_flags = tcp[13];

    const size_t payload_begin = off + ihl + data_offset;
    const size_t payload_end = off + total_length;
    rec.payload.assign(frame.begin() + payload_begin, frame.begin() + payload_end);
    return rec;
}

CaptureResult read_capture_bytes(std::span<const uint8_t> data) {
    if (data.size() < kGlobalHeaderLen) {
        throw TruncatedHeaderError("capture shorter than the 24-byte pcap global header");
    }

    CaptureResult result;
    FileReader rd;

    const uint32_t raw_magic = le32(data.data());
    switch (raw_magic) {
        case kMagicUsec:
            rd.order = ByteOrder::little;
            result.header.timestamp_unit = TimestampUnit::microsecond;
            break;
        case kMagicUsecSwapped:
            rd.order = ByteOrder::big;
            result.header.timestamp_unit = TimestampUnit::microsecond;
            break;
        case kMagicNsec:
            rd.order = ByteOrder::little;
            result.header.timestamp_unit = TimestampUnit::nanosecond;
            break;
        case kMagicNsecSwapped:
            rd.order = ByteOrder::big;
            result.header.timestamp_unit = TimestampUnit::nanosecond;
            break;
        case kMagicPcapng:
            throw BadMagicError("pcapng is not supported; convert to classic pcap first");
        default: {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "unrecognized pcap magic 0x%08x", raw_magic);
            throw BadMagicError(buf);
        }
    }
    result.header.byte_order = rd.order;
    result.header.snaplen = rd.u32(&data[16]);
    result.header.link_type = rd.u32(&data[20]);
    if (result.header.link_type != 1) {
        throw UnsupportedLinkTypeError("pcap link type " +
                                       std::to_string(result.header.link_type) +
                                       " is not Ethernet");
    }

    const bool nanos = result.header.timestamp_unit == TimestampUnit::nanosecond;
    size_t off = kGlobalHeaderLen;
    bool tail_truncated = false;
    while (off + kRecordHeaderLen <= data.size()) {
        const uint32_t ts_sec = rd.u32(&data[off]);
        const uint32_t ts_sub = rd.u32(&data[off + 4]);
        const uint32_t incl_len = rd.u32(&data[off + 8]);
        off += kRecordHeaderLen;

        if (incl_len > kMaxFrameLen || incl_len > data.size() - off) {
            // Trailing record cut off mid-write; count and stop.
            tail_truncated = true;
            break;
        }

        ++result.stats.records_total;
        const uint64_t ts_us =
            static_cast<uint64_t>(ts_sec) * 1000000ull + (nanos ? ts_sub / 1000 : ts_sub);

        DecodeResult decoded =
            decode_ethernet_ipv4_tcp(std::span(&data[off], incl_len), ts_us);
        if (auto* rec = std::get_if<PacketRecord>(&decoded)) {
            result.packets.push_back(std::move(*rec));
            ++result.stats.packets_decoded;
        } else {
            count_skip(result.stats, std::get<SkipReason>(decoded));
        }
        off += incl_len;
    }
    if (tail_truncated || off != data.size()) {
        // Partial record at the tail.
        ++result.stats.records_total;
        ++result.stats.skipped_truncated;
    }
    return result;
}

CaptureResult read_capture(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FileNotFoundError("cannot open capture file: " + path.string());
    }
    std::vector<uint8_t> data((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    return read_capture_bytes(data);
}

std::string to_string(SkipReason r) {
    switch (r) {
        case SkipReason::not_ipv4: return "not_ipv4";
        case SkipReason::not_tcp: return "not_tcp";
        case SkipReason::truncated: return "truncated";
        case SkipReason::bad_header: return "bad_header";
        case SkipReason::fragmented: return "fragmented";
        case SkipReason::vlan_nested: return "vlan_nested";
    }
    return "unknown";
}

}  // namespace netmatrix
