#include "trafficbench/cleaning.hpp"

#include "trafficbench/errors.hpp"

namespace trafficbench {

PortTable PortTable::defaults() {
  PortTable t;
  auto tcp = [&](std::uint16_t p, const char* tag) { t.entries[{'t', p}] = tag; };
  auto udp = [&](std::uint16_t p, const char* tag) { t.entries[{'u', p}] = tag; };
  auto both = [&](std::uint16_t p, const char* tag) {
    tcp(p, tag);
    udp(p, tag);
  };
  // kept task traffic
  tcp(443, "tls");
  tcp(80, "http");
  both(53, "dns");
  udp(443, "quic");
  // link-local
  udp(5355, "llmnr");
  udp(137, "nbns");
  udp(5353, "mdns");
  udp(6771, "lsd");
  // network management
  udp(67, "dhcp");
  udp(68, "dhcp");
  udp(546, "dhcpv6");
  udp(547, "dhcpv6");
  both(161, "snmp");
  both(162, "snmp");
  tcp(3288, "cops");
  // nat
  udp(5351, "nat-pmp");
  both(4555, "rsip");
  both(3478, "stun");
  // route management
  both(17500, "db-lsp");
  udp(3792, "pathport");
  udp(3785, "bfd echo");
  tcp(179, "bgp");
  both(3863, "asap");
  // service management
  udp(1900, "ssdp");
  both(427, "srvloc");
  tcp(48049, "cbsp");
  // real time / network time
  udp(5005, "rtcp");
  udp(123, "ntp");
  // distributed
  tcp(9090, "thrift");
  tcp(135, "dcerpc");
  tcp(1099, "rmi");
  // security
  both(19, "chargen");
  udp(708, "egd");
  // industrial
  both(44818, "enip");
  tcp(1153, "c1222");
  // remote access
  tcp(5900, "vnc");
  tcp(6000, "x11");
  tcp(1863, "msnms");
  // file
  udp(8611, "bjnp");
  udp(8612, "bjnp");
  tcp(4155, "bzr");
  tcp(2401, "cvspserver");
  tcp(515, "spoolss");
  // quake
  udp(26000, "quake");
  udp(27910, "quake2");
  udp(27960, "quake3");
  udp(27500, "quakeworld");
  // mobile
  udp(2123, "gtp");
  udp(2152, "gtp");
  // iot management
  both(9999, "tplink-smarthome");
  udp(5683, "coap");
  tcp(1883, "mqtt");
  // others
  tcp(1433, "tds");
  tcp(8333, "bitcoin");
  return t;
}

const std::string* PortTable::lookup(char transport, std::uint16_t port) const {
  auto it = entries.find({transport, port});
  return it == entries.end() ? nullptr : &it->second;
}

FilterSet FilterSet::defaults() {
  FilterSet f;
  f.groups = {
      {"link-local protocols", {"llmnr", "nbns", "mdns", "lsd"}},
      {"network management protocols",
       {"icmp", "icmpv6", "dhcp", "dhcpv6", "igmp", "snmp", "arp", "cops"}},
      {"nat protocols", {"nat-pmp", "rsip", "stun"}},
      {"route management protocols",
       {"db-lsp", "db-lsp-disc", "pathport", "stp", "bfd echo", "bgp", "ecmp", "asap"}},
      {"service management protocols", {"ssdp", "lldp", "srvloc", "opa", "cbsp"}},
      {"real time protocols", {"rtcp"}},
      {"network time protocols", {"ntp"}},
      {"link management protocols", {"llc", "ipxsap"}},
      {"distributed protocols", {"thrift", "dcerpc", "rmi"}},
      {"security protocols", {"ocsp", "pkix-cert", "egd", "chargen", "tpm", "knet"}},
      {"industrial protocols",
       {"r-goose", "dcp-pft", "dcp-af", "vicp", "nxp 802154 sniffer", "enip", "c1222",
        "ax4000"}},
      {"remote access protocols", {"vnc", "x11", "msnms"}},
      {"file protocols",
       {"lanman", "bjnp", "spoolss", "ndps", "laplink", "bzr", "cvspserver"}},
      {"quake protocols", {"quake", "quake2", "quake3", "quakeworld"}},
      {"mobile protocols", {"gsm", "ipa", "gtp"}},
      {"iot management protocols", {"bat.vis", "tplink-smarthome", "coap", "mqtt"}},
      {"others protocols", {"tds", "bitcoin"}},
  };
  for (const auto& [name, tags] : f.groups) f.enabled_groups.insert(name);
  f.index();
  return f;
}

FilterSet FilterSet::from_json(const nlohmann::json& j) {
  FilterSet f = FilterSet::defaults();
  if (j.contains("groups")) {
    f.groups.clear();
    for (const auto& [name, tags] : j.at("groups").items()) {
      f.groups[name] = tags.get<std::vector<std::string>>();
    }
  }
  if (j.contains("enabled_groups")) {
    f.enabled_groups.clear();
    for (const auto& g : j.at("enabled_groups")) {
      const std::string name = g.get<std::string>();
      if (!f.groups.count(name)) {
        throw ValidationError("filter config enables unknown group: " + name);
      }
      f.enabled_groups.insert(name);
    }
  } else {
    f.enabled_groups.clear();
    for (const auto& [name, tags] : f.groups) f.enabled_groups.insert(name);
  }
  if (j.contains("min_packet_bytes")) {
    f.min_packet_bytes = j.at("min_packet_bytes").get<std::size_t>();
  }
  f.tag_to_group_.clear();
  f.index();
  return f;
}

nlohmann::ordered_json FilterSet::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json grp;
  for (const auto& [name, tags] : groups) grp[name] = tags;
  j["groups"] = grp;
  j["enabled_groups"] = std::vector<std::string>(enabled_groups.begin(), enabled_groups.end());
  j["min_packet_bytes"] = min_packet_bytes;
  return j;
}

void FilterSet::index() const {
  if (!tag_to_group_.empty()) return;
  for (const auto& [name, tags] : groups) {
    for (const auto& tag : tags) {
      auto [it, inserted] = tag_to_group_.emplace(tag, name);
      if (!inserted) {
        throw ValidationError("filter tag '" + tag + "' appears in groups '" + it->second +
                              "' and '" + name + "'");
      }
    }
  }
}

const std::string* FilterSet::group_of(const std::string& tag) const {
  index();
  auto it = tag_to_group_.find(tag);
  return it == tag_to_group_.end() ? nullptr : &it->second;
}

std::string classify_protocol(const ParsedPacket& pkt, const PortTable& ports) {
  // link/net level tags fall straight through from decode
  if (!pkt.tcp && !pkt.udp) return pkt.protocol_tag;
  char transport;
  std::uint16_t a, b;
  if (pkt.tcp) {
    transport = 't';
    a = pkt.tcp->src_port;
    b = pkt.tcp->dst_port;
  } else {
    transport = 'u';
    a = pkt.udp->src_port;
    b = pkt.udp->dst_port;
  }
  // prefer the destination port, then the source port
  if (const auto* tag = ports.lookup(transport, b)) return *tag;
  if (const auto* tag = ports.lookup(transport, a)) return *tag;
  return pkt.tcp ? "tcp" : "udp";
}

std::pair<std::vector<ParsedPacket>, CleaningReport> apply_filters(
    std::vector<ParsedPacket> packets, const FilterSet& filters, const PortTable& ports) {
  CleaningReport report;
  report.total = packets.size();
  std::vector<ParsedPacket> kept;
  kept.reserve(packets.size());
  for (auto& pkt : packets) {
    pkt.protocol_tag = classify_protocol(pkt, ports);
    bool remove = false;
    if (const auto* group = filters.group_of(pkt.protocol_tag)) {
      if (filters.enabled_groups.count(*group)) {
        remove = true;
        ++report.removed_by_group[*group];
        ++report.removed_by_protocol[pkt.protocol_tag];
      }
    }
    if (!remove && filters.min_packet_bytes > 0 &&
        pkt.raw.bytes.size() < filters.min_packet_bytes) {
      remove = true;
      ++report.removed_by_group["minimum size"];
      ++report.removed_by_protocol[pkt.protocol_tag];
    }
    if (!remove) kept.push_back(std::move(pkt));
  }
  report.kept = kept.size();
  return {std::move(kept), report};
}

nlohmann::ordered_json CleaningReport::to_json() const {
  nlohmann::ordered_json j;
  j["total"] = total;
  j["kept"] = kept;
  j["removed_by_group"] = removed_by_group;
  j["removed_by_protocol"] = removed_by_protocol;
  return j;
}

}  // namespace trafficbench
