#include "trafficbench/qa.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "trafficbench/dataset.hpp"
#include "trafficbench/errors.hpp"
#include "trafficbench/log.hpp"

namespace trafficbench {

namespace {

constexpr char kHexDigits[] = "0123456789ABCDEF";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

}  // namespace

std::string hex_tokenize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.empty()) throw ValidationError("cannot tokenize an empty packet");
  std::string out;
  out.reserve(bytes.size() * 5 / 2 + 4);
  for (std::size_t i = 0; i < bytes.size(); i += 2) {
    if (i) out += ' ';
    out += kHexDigits[bytes[i] >> 4];
    out += kHexDigits[bytes[i] & 0xF];
    if (i + 1 < bytes.size()) {
      out += kHexDigits[bytes[i + 1] >> 4];
      out += kHexDigits[bytes[i + 1] & 0xF];
    }
  }
  return out;
}

std::vector<std::uint8_t> hex_detokenize(const std::string& text) {
  std::vector<std::uint8_t> out;
  std::size_t word = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == ' ') {
      ++i;
      continue;
    }
    std::size_t len = 0;
    while (i + len < text.size() && text[i + len] != ' ') ++len;
    if (len != 2 && len != 4) {
      throw ValidationError("hex word " + std::to_string(word) + " has length " +
                            std::to_string(len) + ", expected 2 or 4");
    }
    for (std::size_t j = 0; j < len; j += 2) {
      const int hi = hex_value(text[i + j]);
      const int lo = hex_value(text[i + j + 1]);
      if (hi < 0 || lo < 0) {
        throw ValidationError("hex word " + std::to_string(word) +
                              " has a non-hex character");
      }
      out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    i += len;
    ++word;
  }
  if (out.empty()) throw ValidationError("hex text holds no bytes");
  return out;
}

namespace {

struct TypeName {
  QaType type;
  const char* name;
};

constexpr TypeName kTypeNames[] = {
    {QaType::tcp_checksum, "tcp_checksum"},
    {QaType::dst_address, "dst_address"},
    {QaType::src_address, "src_address"},
    {QaType::ip_id, "ip_id"},
    {QaType::time_to_live, "time_to_live"},
    {QaType::checksum_correct, "checksum_correct"},
    {QaType::last_header_byte, "last_header_byte"},
    {QaType::payload_length, "payload_length"},
    {QaType::autoencode, "autoencode"},
};

std::string format_hex16(std::uint16_t v) {
  std::string s(4, '0');
  for (int i = 3; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kHexDigits[v & 0xF];
    v >>= 4;
  }
  return s;
}

std::string format_ipv4(const std::array<std::uint8_t, 4>& a) {
  return std::to_string(a[0]) + '.' + std::to_string(a[1]) + '.' + std::to_string(a[2]) +
         '.' + std::to_string(a[3]);
}

std::string format_ipv6(const std::array<std::uint8_t, 16>& a) {
  std::string s;
  for (std::size_t g = 0; g < 8; ++g) {
    if (g) s += ':';
    const std::uint16_t v =
        static_cast<std::uint16_t>((a[2 * g] << 8) | a[2 * g + 1]);
    char buf[4];
    for (int i = 3; i >= 0; --i) {
      buf[i] = "0123456789abcdef"[(v >> (4 * (3 - i))) & 0xF];
    }
    s.append(buf, 4);
  }
  return s;
}

/// Declared application payload length (after the transport header).
std::optional<std::size_t> declared_payload_length(const ParsedPacket& pkt) {
  if (!pkt.tcp && !pkt.udp) return std::nullopt;
  const auto seg = declared_segment_length(pkt);
  if (!seg) return std::nullopt;
  const std::size_t hdr = pkt.payload_offset - pkt.transport_offset;
  if (*seg < hdr) return std::nullopt;
  return *seg - hdr;
}

bool qa_supported(const ParsedPacket& pkt, QaType type) {
  if (pkt.malformed != MalformKind::none) return false;
  switch (type) {
    case QaType::tcp_checksum:
      return pkt.tcp.has_value();
    case QaType::dst_address:
    case QaType::src_address:
      return pkt.ipv4 || pkt.ipv6;
    case QaType::ip_id:
    case QaType::checksum_correct:
      return pkt.ipv4.has_value();
    case QaType::time_to_live:
      return pkt.ipv4 || pkt.ipv6;
    case QaType::last_header_byte:
      return pkt.net_kind() != NetKind::none && pkt.transport_offset > pkt.net_offset &&
             pkt.transport_offset <= pkt.raw.bytes.size();
    case QaType::payload_length:
      return declared_payload_length(pkt).has_value();
    case QaType::autoencode:
      return !pkt.raw.bytes.empty();
  }
  return false;
}

}  // namespace

const char* qa_type_name(QaType t) {
  for (const auto& e : kTypeNames) {
    if (e.type == t) return e.name;
  }
  return "?";
}

QaType qa_type_from(const std::string& name) {
  for (const auto& e : kTypeNames) {
    if (name == e.name) return e.type;
  }
  throw ValidationError("unknown question type: " + name);
}

std::string QaInstance::rendered() const { return question + "</s>" + context; }

std::optional<QaInstance> generate_qa(const ParsedPacket& pkt, QaType type, Rng& rng) {
  if (!qa_supported(pkt, type)) return std::nullopt;
  QaInstance inst;
  inst.type = type;
  inst.uid = pkt.raw.uid;
  inst.context = hex_tokenize(pkt.raw.bytes);
  const char* family = pkt.ipv4 ? "IPv4" : "IPv6";
  switch (type) {
    case QaType::tcp_checksum:
      inst.question = "Which is the TCP checksum?";
      inst.answer = format_hex16(pkt.tcp->checksum);
      break;
    case QaType::dst_address:
      inst.question = std::string("Which is the destination ") + family + " of the packet?";
      inst.answer = pkt.ipv4 ? format_ipv4(pkt.ipv4->dst) : format_ipv6(pkt.ipv6->dst);
      break;
    case QaType::src_address:
      inst.question = std::string("Which is the source ") + family + " of the packet?";
      inst.answer = pkt.ipv4 ? format_ipv4(pkt.ipv4->src) : format_ipv6(pkt.ipv6->src);
      break;
    case QaType::ip_id:
      inst.question = std::string("Which is the id of ") + family + "?";
      inst.answer = std::to_string(pkt.ipv4->id);
      break;
    case QaType::time_to_live:
      inst.question = std::string("Which is the time to live of ") + family + "?";
      inst.answer =
          std::to_string(pkt.ipv4 ? pkt.ipv4->ttl : pkt.ipv6->hop_limit);
      break;
    case QaType::checksum_correct: {
      inst.question = std::string("Is the packet's ") + family + " checksum correct?";
      ParsedPacket subject = pkt;
      if (rng.chance(0.5)) {
        // flip one byte of the checksum/address region: always breaks the sum
        // and never harms decoding
        const std::size_t pos = pkt.net_offset + 10 + rng.below(10);
        subject.raw.bytes[pos] ^= static_cast<std::uint8_t>(1 + rng.below(255));
        subject = decode(subject.raw);
        inst.context = hex_tokenize(subject.raw.bytes);
      }
      const auto report = verify_checksums(subject);
      inst.answer = report.ip == CheckState::ok ? "yes" : "no";
      break;
    }
    case QaType::last_header_byte:
      inst.question = "Which is the last byte of the header in the third layer?";
      inst.answer = std::to_string(pkt.raw.bytes[pkt.transport_offset - 1]);
      break;
    case QaType::payload_length:
      inst.question = "Which is the length of the payload in the third layer?";
      inst.answer = std::to_string(*declared_payload_length(pkt));
      break;
    case QaType::autoencode:
      inst.question = "Reconstruct the packet.";
      inst.answer = inst.context;
      break;
  }
  return inst;
}

std::vector<QaInstance> build_qa_corpus(const std::vector<ParsedPacket>& packets,
                                        std::size_t count, const QaMix& mix,
                                        std::uint64_t seed) {
  if (mix.shares.size() != kQaTypeCount) {
    throw ValidationError("question mix must list " + std::to_string(kQaTypeCount) +
                          " shares");
  }
  for (double s : mix.shares) {
    if (s < 0.0) throw ValidationError("question mix shares must be >= 0");
  }

  std::vector<std::vector<std::size_t>> eligible(kQaTypeCount);
  for (std::size_t i = 0; i < packets.size(); ++i) {
    for (std::size_t t = 0; t < kQaTypeCount; ++t) {
      if (qa_supported(packets[i], static_cast<QaType>(t))) eligible[t].push_back(i);
    }
  }

  std::vector<double> shares = mix.shares;
  for (std::size_t t = 0; t < kQaTypeCount; ++t) {
    if (shares[t] > 0.0 && eligible[t].empty()) {
      log_warn(std::string("no packet supports question type ") +
               qa_type_name(static_cast<QaType>(t)) + ", redistributing its share");
      shares[t] = 0.0;
    }
  }
  double total_share = 0.0;
  for (double s : shares) total_share += s;
  if (total_share <= 0.0) {
    throw ValidationError("no question type has both a positive share and eligible packets");
  }
  for (auto& s : shares) s /= total_share;
  const auto counts = largest_remainder(count, shares);

  std::vector<QaInstance> out;
  out.reserve(count);
  for (std::size_t t = 0; t < kQaTypeCount; ++t) {
    if (counts[t] == 0) continue;
    Rng rng(derive_seed(seed, "qa", t));
    for (std::size_t i = 0; i < counts[t]; ++i) {
      const auto& pkt = packets[eligible[t][rng.below(eligible[t].size())]];
      auto inst = generate_qa(pkt, static_cast<QaType>(t), rng);
      if (!inst) {
        throw ValidationError("eligibility probe disagrees with the generator");
      }
      out.push_back(std::move(*inst));
    }
  }
  return out;
}

void write_qa_jsonl(std::ostream& out, const std::vector<QaInstance>& instances) {
  for (const auto& inst : instances) {
    nlohmann::ordered_json j;
    j["question"] = inst.question;
    j["context"] = inst.context;
    j["answer"] = inst.answer;
    j["type"] = qa_type_name(inst.type);
    j["uid"] = inst.uid;
    j["text"] = inst.rendered();
    out << j.dump() << '\n';
  }
}

void write_qa_jsonl_file(const std::string& path, const std::vector<QaInstance>& instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  write_qa_jsonl(out, instances);
}

}  // namespace trafficbench
