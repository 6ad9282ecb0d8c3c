#include "trafficbench/features.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "trafficbench/errors.hpp"

namespace trafficbench {

namespace {

struct IdName {
  FeatureId id;
  const char* name;
};

constexpr IdName kScalarNames[] = {
    {FeatureId::ipv4_present, "ipv4_present"},
    {FeatureId::ipv4_tos, "ipv4_tos"},
    {FeatureId::ipv4_ihl, "ipv4_ihl"},
    {FeatureId::ipv4_id, "ipv4_id"},
    {FeatureId::ipv4_checksum, "ipv4_checksum"},
    {FeatureId::ipv4_flags, "ipv4_flags"},
    {FeatureId::ipv4_length, "ipv4_length"},
    {FeatureId::ipv4_protocol, "ipv4_protocol"},
    {FeatureId::ipv4_version, "ipv4_version"},
    {FeatureId::ipv4_ttl, "ipv4_ttl"},
    {FeatureId::ipv4_frag, "ipv4_frag"},
    {FeatureId::ipv6_present, "ipv6_present"},
    {FeatureId::ipv6_flow_label, "ipv6_flow_label"},
    {FeatureId::ipv6_version, "ipv6_version"},
    {FeatureId::ipv6_payload_length, "ipv6_payload_length"},
    {FeatureId::ipv6_hop_limit, "ipv6_hop_limit"},
    {FeatureId::ipv6_traffic_class, "ipv6_traffic_class"},
    {FeatureId::ipv6_next_header, "ipv6_next_header"},
    {FeatureId::udp_present, "udp_present"},
    {FeatureId::udp_sport, "udp_sport"},
    {FeatureId::udp_dport, "udp_dport"},
    {FeatureId::udp_checksum, "udp_checksum"},
    {FeatureId::udp_length, "udp_length"},
    {FeatureId::tcp_present, "tcp_present"},
    {FeatureId::tcp_sport, "tcp_sport"},
    {FeatureId::tcp_dport, "tcp_dport"},
    {FeatureId::tcp_tsval, "tcp_tsval"},
    {FeatureId::tcp_tsecr, "tcp_tsecr"},
    {FeatureId::tcp_window, "tcp_window"},
    {FeatureId::tcp_urgent, "tcp_urgent"},
    {FeatureId::tcp_data_offset, "tcp_data_offset"},
    {FeatureId::tcp_flags, "tcp_flags"},
    {FeatureId::tcp_checksum, "tcp_checksum"},
    {FeatureId::tcp_seq, "tcp_seq"},
    {FeatureId::tcp_ack, "tcp_ack"},
    {FeatureId::tcp_opts, "tcp_opts"},
};

const char* scalar_name(FeatureId id) {
  for (const auto& e : kScalarNames) {
    if (e.id == id) return e.name;
  }
  return nullptr;
}

bool is_octet_id(FeatureId id) {
  return id == FeatureId::ipv4_src_octet || id == FeatureId::ipv4_dst_octet ||
         id == FeatureId::ipv6_src_octet || id == FeatureId::ipv6_dst_octet;
}

FeatureField octet_field(FeatureId id, int octet) {
  std::string name;
  switch (id) {
    case FeatureId::ipv4_src_octet: name = "SRC IP" + std::to_string(octet); break;
    case FeatureId::ipv4_dst_octet: name = "DST IP" + std::to_string(octet); break;
    case FeatureId::ipv6_src_octet: name = "SRC IP6_" + std::to_string(octet); break;
    case FeatureId::ipv6_dst_octet: name = "DST IP6_" + std::to_string(octet); break;
    default: break;
  }
  return {name, id, octet};
}

FeatureField field_from_name(const std::string& name) {
  for (const auto& e : kScalarNames) {
    if (name == e.name) return {name, e.id, 0};
  }
  auto octet_of = [&](const std::string& prefix) -> int {
    if (name.rfind(prefix, 0) != 0) return -1;
    int v = -1;
    const char* b = name.data() + prefix.size();
    const char* e = name.data() + name.size();
    if (std::from_chars(b, e, v).ptr != e) return -1;
    return v;
  };
  if (int o = octet_of("SRC IP6_"); o >= 0 && o < 16) {
    return octet_field(FeatureId::ipv6_src_octet, o);
  }
  if (int o = octet_of("DST IP6_"); o >= 0 && o < 16) {
    return octet_field(FeatureId::ipv6_dst_octet, o);
  }
  if (int o = octet_of("SRC IP"); o >= 0 && o < 4) {
    return octet_field(FeatureId::ipv4_src_octet, o);
  }
  if (int o = octet_of("DST IP"); o >= 0 && o < 4) {
    return octet_field(FeatureId::ipv4_dst_octet, o);
  }
  throw ValidationError("unknown feature: " + name);
}

}  // namespace

FeatureSchema FeatureSchema::defaults() {
  FeatureSchema s;
  auto scalar = [&](FeatureId id) { s.fields.push_back({scalar_name(id), id, 0}); };
  scalar(FeatureId::ipv4_present);
  for (int i = 0; i < 4; ++i) s.fields.push_back(octet_field(FeatureId::ipv4_src_octet, i));
  for (int i = 0; i < 4; ++i) s.fields.push_back(octet_field(FeatureId::ipv4_dst_octet, i));
  scalar(FeatureId::ipv4_tos);
  scalar(FeatureId::ipv4_ihl);
  scalar(FeatureId::ipv4_id);
  scalar(FeatureId::ipv4_checksum);
  scalar(FeatureId::ipv4_flags);
  scalar(FeatureId::ipv4_length);
  scalar(FeatureId::ipv4_protocol);
  scalar(FeatureId::ipv4_version);
  scalar(FeatureId::ipv4_ttl);
  scalar(FeatureId::ipv4_frag);
  scalar(FeatureId::ipv6_present);
  for (int i = 0; i < 16; ++i) s.fields.push_back(octet_field(FeatureId::ipv6_src_octet, i));
  for (int i = 0; i < 16; ++i) s.fields.push_back(octet_field(FeatureId::ipv6_dst_octet, i));
  scalar(FeatureId::ipv6_flow_label);
  scalar(FeatureId::ipv6_version);
  scalar(FeatureId::ipv6_payload_length);
  scalar(FeatureId::ipv6_hop_limit);
  scalar(FeatureId::ipv6_traffic_class);
  scalar(FeatureId::ipv6_next_header);
  scalar(FeatureId::udp_present);
  scalar(FeatureId::udp_sport);
  scalar(FeatureId::udp_dport);
  scalar(FeatureId::udp_checksum);
  scalar(FeatureId::udp_length);
  scalar(FeatureId::tcp_present);
  scalar(FeatureId::tcp_sport);
  scalar(FeatureId::tcp_dport);
  scalar(FeatureId::tcp_tsval);
  scalar(FeatureId::tcp_tsecr);
  scalar(FeatureId::tcp_window);
  scalar(FeatureId::tcp_urgent);
  scalar(FeatureId::tcp_data_offset);
  scalar(FeatureId::tcp_flags);
  scalar(FeatureId::tcp_checksum);
  scalar(FeatureId::tcp_seq);
  scalar(FeatureId::tcp_ack);
  scalar(FeatureId::tcp_opts);
  return s;
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
  FeatureSchema s;
  for (const auto& name : j.at("fields")) {
    s.fields.push_back(field_from_name(name.get<std::string>()));
  }
  return s;
}

nlohmann::ordered_json FeatureSchema::to_json() const {
  nlohmann::ordered_json j;
  j["fields"] = names();
  return j;
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(fields.size());
  for (const auto& f : fields) out.push_back(f.name);
  return out;
}

std::optional<std::size_t> FeatureSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].name == name) return i;
  }
  return std::nullopt;
}

FeatureSchema FeatureSchema::without(const std::vector<std::string>& drop) const {
  std::unordered_set<std::string> gone;
  for (const auto& name : drop) {
    if (name == "ip-octets") {
      for (const auto& f : fields) {
        if (is_octet_id(f.id)) gone.insert(f.name);
      }
      continue;
    }
    if (!index_of(name)) throw ValidationError("unknown feature: " + name);
    gone.insert(name);
  }
  FeatureSchema out;
  for (const auto& f : fields) {
    if (!gone.count(f.name)) out.fields.push_back(f);
  }
  return out;
}

std::vector<std::string> expand_feature_names(const FeatureSchema& schema,
                                              const std::string& csv_list) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(csv_list);
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "ip-octets") {
      for (const auto& f : schema.fields) {
        if (is_octet_id(f.id)) out.push_back(f.name);
      }
    } else {
      out.push_back(item);
    }
  }
  return out;
}

std::vector<double> extract_features(const ParsedPacket& pkt, const FeatureSchema& schema) {
  std::vector<double> out(schema.width(), 0.0);
  const Ipv4Header* v4 = pkt.ipv4 ? &*pkt.ipv4 : nullptr;
  const Ipv6Header* v6 = pkt.ipv6 ? &*pkt.ipv6 : nullptr;
  const TcpHeader* tcp = pkt.tcp ? &*pkt.tcp : nullptr;
  const UdpHeader* udp = pkt.udp ? &*pkt.udp : nullptr;
  for (std::size_t i = 0; i < schema.fields.size(); ++i) {
    const auto& f = schema.fields[i];
    double v = 0.0;
    switch (f.id) {
      case FeatureId::ipv4_present: v = v4 ? 1 : 0; break;
      case FeatureId::ipv4_src_octet: v = v4 ? v4->src[static_cast<std::size_t>(f.octet)] : 0; break;
      case FeatureId::ipv4_dst_octet: v = v4 ? v4->dst[static_cast<std::size_t>(f.octet)] : 0; break;
      case FeatureId::ipv4_tos: v = v4 ? v4->tos : 0; break;
      case FeatureId::ipv4_ihl: v = v4 ? v4->ihl : 0; break;
      case FeatureId::ipv4_id: v = v4 ? v4->id : 0; break;
      case FeatureId::ipv4_checksum: v = v4 ? v4->header_checksum : 0; break;
      case FeatureId::ipv4_flags: v = v4 ? v4->flags : 0; break;
      case FeatureId::ipv4_length: v = v4 ? v4->total_length : 0; break;
      case FeatureId::ipv4_protocol: v = v4 ? v4->protocol : 0; break;
      case FeatureId::ipv4_version: v = v4 ? v4->version : 0; break;
      case FeatureId::ipv4_ttl: v = v4 ? v4->ttl : 0; break;
      case FeatureId::ipv4_frag: v = v4 ? v4->frag_offset : 0; break;
      case FeatureId::ipv6_present: v = v6 ? 1 : 0; break;
      case FeatureId::ipv6_src_octet: v = v6 ? v6->src[static_cast<std::size_t>(f.octet)] : 0; break;
      case FeatureId::ipv6_dst_octet: v = v6 ? v6->dst[static_cast<std::size_t>(f.octet)] : 0; break;
      case FeatureId::ipv6_flow_label: v = v6 ? v6->flow_label : 0; break;
      case FeatureId::ipv6_version: v = v6 ? v6->version : 0; break;
      case FeatureId::ipv6_payload_length: v = v6 ? v6->payload_length : 0; break;
      case FeatureId::ipv6_hop_limit: v = v6 ? v6->hop_limit : 0; break;
      case FeatureId::ipv6_traffic_class: v = v6 ? v6->traffic_class : 0; break;
      case FeatureId::ipv6_next_header: v = v6 ? v6->final_next_header : 0; break;
      case FeatureId::udp_present: v = udp ? 1 : 0; break;
      case FeatureId::udp_sport: v = udp ? udp->src_port : 0; break;
      case FeatureId::udp_dport: v = udp ? udp->dst_port : 0; break;
      case FeatureId::udp_checksum: v = udp ? udp->checksum : 0; break;
      case FeatureId::udp_length: v = udp ? udp->length : 0; break;
      case FeatureId::tcp_present: v = tcp ? 1 : 0; break;
      case FeatureId::tcp_sport: v = tcp ? tcp->src_port : 0; break;
      case FeatureId::tcp_dport: v = tcp ? tcp->dst_port : 0; break;
      case FeatureId::tcp_tsval: v = tcp && tcp->ts_present ? tcp->tsval : 0; break;
      case FeatureId::tcp_tsecr: v = tcp && tcp->ts_present ? tcp->tsecr : 0; break;
      case FeatureId::tcp_window: v = tcp ? tcp->window : 0; break;
      case FeatureId::tcp_urgent: v = tcp ? tcp->urgent_ptr : 0; break;
      case FeatureId::tcp_data_offset: v = tcp ? tcp->data_offset : 0; break;
      case FeatureId::tcp_flags: v = tcp ? tcp->flags : 0; break;
      case FeatureId::tcp_checksum: v = tcp ? tcp->checksum : 0; break;
      case FeatureId::tcp_seq: v = tcp ? tcp->seq_no : 0; break;
      case FeatureId::tcp_ack: v = tcp ? tcp->ack_no : 0; break;
      case FeatureId::tcp_opts: v = tcp ? tcp->options_kinds : 0; break;
    }
    out[i] = v;
  }
  return out;
}

FeatureTable FeatureTable::drop(const std::vector<std::string>& drop_names) const {
  std::unordered_set<std::string> gone;
  for (const auto& name : drop_names) {
    if (name == "ip-octets") {
      for (const auto& col : names) {
        if (col.rfind("SRC IP", 0) == 0 || col.rfind("DST IP", 0) == 0) gone.insert(col);
      }
      continue;
    }
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw ValidationError("unknown feature: " + name);
    }
    gone.insert(name);
  }
  std::vector<std::size_t> keep;
  FeatureTable out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!gone.count(names[i])) {
      keep.push_back(i);
      out.names.push_back(names[i]);
    }
  }
  out.rows.reserve(rows.size());
  for (const auto& row : rows) {
    FeatureRecord r = row;
    r.values.clear();
    r.values.reserve(keep.size());
    for (std::size_t i : keep) r.values.push_back(row.values[i]);
    out.rows.push_back(std::move(r));
  }
  return out;
}

namespace {

void require_plain(const std::string& s, const char* what) {
  if (s.find_first_of(",\"\n\r") != std::string::npos) {
    throw ValidationError(std::string(what) + " contains a csv delimiter: " + s);
  }
}

std::string format_value(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void FeatureTable::write_csv(std::ostream& out) const {
  for (const auto& name : names) {
    require_plain(name, "feature name");
    out << name << ',';
  }
  out << "packet_uid,flow_uid,label,partition,fold\n";
  for (const auto& row : rows) {
    if (row.values.size() != names.size()) {
      throw ValidationError("feature row width mismatch at packet_uid " +
                            std::to_string(row.packet_uid));
    }
    require_plain(row.label, "label");
    for (double v : row.values) out << format_value(v) << ',';
    out << row.packet_uid << ',' << row.flow_uid << ',' << row.label << ','
        << partition_name(row.partition) << ',';
    if (row.fold >= 0) {
      out << row.fold;
    }
    out << '\n';
  }
}

void FeatureTable::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  write_csv(out);
}

FeatureTable FeatureTable::read_csv(std::istream& in) {
  FeatureTable table;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("features csv is empty");
  auto header = split_csv_line(line);
  const std::vector<std::string> meta = {"packet_uid", "flow_uid", "label", "partition",
                                         "fold"};
  if (header.size() < meta.size()) {
    throw ValidationError("features csv header too short, offending key: packet_uid");
  }
  const std::size_t n_features = header.size() - meta.size();
  for (std::size_t i = 0; i < meta.size(); ++i) {
    if (header[n_features + i] != meta[i]) {
      throw ValidationError("features csv header mismatch, offending key: " + meta[i]);
    }
  }
  table.names.assign(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(n_features));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ValidationError("features csv row " + std::to_string(line_no) +
                            " has wrong column count");
    }
    FeatureRecord row;
    row.values.reserve(n_features);
    auto parse_double = [&](const std::string& s) -> double {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ValidationError("features csv row " + std::to_string(line_no) +
                              " has a non-numeric cell: " + s);
      }
      return v;
    };
    auto parse_u64 = [&](const std::string& s) -> std::uint64_t {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ValidationError("features csv row " + std::to_string(line_no) +
                              " has a non-integer cell: " + s);
      }
      return v;
    };
    for (std::size_t i = 0; i < n_features; ++i) row.values.push_back(parse_double(cells[i]));
    row.packet_uid = parse_u64(cells[n_features]);
    row.flow_uid = parse_u64(cells[n_features + 1]);
    row.label = cells[n_features + 2];
    row.partition = partition_from(cells[n_features + 3]);
    const std::string& fold = cells[n_features + 4];
    row.fold = fold.empty() ? -1 : static_cast<int>(parse_u64(fold));
    table.rows.push_back(std::move(row));
  }
  return table;
}

FeatureTable FeatureTable::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  return read_csv(in);
}

FeatureTable build_feature_table(const std::vector<ParsedPacket>& packets,
                                 const DatasetManifest& manifest,
                                 const FeatureSchema& schema) {
  std::unordered_map<std::uint64_t, const ParsedPacket*> by_uid;
  by_uid.reserve(packets.size());
  for (const auto& pkt : packets) by_uid[pkt.raw.uid] = &pkt;
  FeatureTable table;
  table.names = schema.names();
  table.rows.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) {
    auto it = by_uid.find(row.packet_uid);
    if (it == by_uid.end()) {
      throw ValidationError("manifest names a missing packet, offending key: packet_uid=" +
                            std::to_string(row.packet_uid));
    }
    FeatureRecord rec;
    rec.packet_uid = row.packet_uid;
    rec.flow_uid = row.flow_uid;
    rec.label = row.label;
    rec.partition = row.partition;
    rec.fold = row.fold;
    rec.values = extract_features(*it->second, schema);
    table.rows.push_back(std::move(rec));
  }
  return table;
}

}  // namespace trafficbench
