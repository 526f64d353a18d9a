#include "netmatrix/sessionizer.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace netmatrix {

FlowKey canonical_key(uint32_t src_ip, uint16_t src_port, uint32_t dst_ip,
                      uint16_t dst_port, uint8_t protocol) {
    const Endpoint a{src_ip, src_port};
    const Endpoint b{dst_ip, dst_port};
    FlowKey key;
    key.protocol = protocol;
    if (a <= b) {
        key.lo = a;
        key.hi = b;
    } else {
        key.lo = b;
        key.hi = a;
    }
    return key;
}

FlowKey canonical_key(const PacketRecord& pkt) {
    return canonical_key(pkt.src_ip, pkt.src_port, pkt.dst_ip, pkt.dst_port,
                         pkt.protocol);
}

std::vector<Session> sessionize(std::span<const PacketRecord> packets) {
    std::vector<Session> sessions;
    std::unordered_map<FlowKey, size_t, FlowKeyHash> index;
    // file order per session, kept so the time sort can break ties stably
    std::vector<std::vector<size_t>> file_order;

    for (size_t i = 0; i < packets.size(); ++i) {
        const FlowKey key = canonical_key(packets[i]);
        auto [it, inserted] = index.try_emplace(key, sessions.size());
        if (inserted) {
            sessions.push_back(Session{key, {}, std::nullopt});
            file_order.emplace_back();
        }
        sessions[it->second].packets.push_back(packets[i]);
        file_order[it->second].push_back(i);
    }

    for (size_t s = 0; s < sessions.size(); ++s) {
        auto& pkts = sessions[s].packets;
        const auto& order = file_order[s];
        std::vector<size_t> perm(pkts.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::sort(perm.begin(), perm.end(), [&](size_t a, size_t b) {
            if (pkts[a].ts_us != pkts[b].ts_us) return pkts[a].ts_us < pkts[b].ts_us;
            return order[a] < order[b];
        });
        std::vector<PacketRecord> sorted;
        sorted.reserve(pkts.size());
        for (size_t p : perm) sorted.push_back(std::move(pkts[p]));
        pkts = std::move(sorted);
    }

    // Emit by first-packet timestamp; creation order (= first file index)
    // breaks ties.
    std::vector<size_t> perm(sessions.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](size_t a, size_t b) {
        return sessions[a].packets.front().ts_us < sessions[b].packets.front().ts_us;
    });
    std::vector<Session> out;
    out.reserve(sessions.size());
    for (size_t p : perm) out.push_back(std::move(sessions[p]));
    return out;
}

bool is_encrypted_payload(const PacketRecord& pkt) {
    const auto& p = pkt.payload;
    if (p.size() < 5) return false;
    if (p[0] != 0x17 || p[1] != 0x03 || p[2] != 0x03) return false;
    const uint32_t record_len = static_cast<uint32_t>(p[3]) << 8 | p[4];
    return record_len >= 1 && record_len <= 16640;
}

std::optional<SelectedPackets> select_netmatrix_packets(const Session& session) {
    SelectedPackets selected;
    size_t found = 0;
    for (const auto& pkt : session.packets) {
        if (!is_encrypted_payload(pkt)) continue;
        selected.packets[found++] = &pkt;
        if (found == 5) return selected;
    }
    return std::nullopt;
}

}  // namespace netmatrix
