#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trafficbench/packet.hpp"
#include "trafficbench/rng.hpp"

namespace trafficbench {

/// Space-separated uppercase hex, 2 bytes per word (a trailing odd byte
/// becomes a 2-digit word).
std::string hex_tokenize(const std::vector<std::uint8_t>& bytes);

/// Exact inverse; malformed input throws ValidationError naming the word
/// position.
std::vector<std::uint8_t> hex_detokenize(const std::string& text);

enum class QaType {
  tcp_checksum,
  dst_address,
  src_address,
  ip_id,
  time_to_live,
  checksum_correct,
  last_header_byte,
  payload_length,
  autoencode,  // phase-1 dummy question, not part of the 8-type mix
};

inline constexpr std::size_t kQaTypeCount = 8;  // autoencode excluded

const char* qa_type_name(QaType t);
QaType qa_type_from(const std::string& name);

struct QaInstance {
  std::string question;
  std::string context;  // hex tokenization of the packet the answer refers to
  std::string answer;
  QaType type = QaType::autoencode;
  std::uint64_t uid = 0;

  /// question + "</s>" + context.
  std::string rendered() const;
};

/// Answers come from the decoded fields and verify_checksums, never from the
/// tokenized text. checksum_correct corrupts one header byte with
/// probability 0.5 so both answers occur. Returns nullopt when the packet
/// lacks the queried layer or field.
std::optional<QaInstance> generate_qa(const ParsedPacket& pkt, QaType type, Rng& rng);

struct QaMix {
  // shares over the 8 question types, normalized internally
  std::vector<double> shares = std::vector<double>(kQaTypeCount, 1.0);
};

/// Type-stratified corpus, sampled with replacement per type. Types with no
/// eligible packet get a warning and their share redistributed.
std::vector<QaInstance> build_qa_corpus(const std::vector<ParsedPacket>& packets,
                                        std::size_t count, const QaMix& mix,
                                        std::uint64_t seed);

/// JSON Lines: {question, context, answer, type, uid, text}.
void write_qa_jsonl(std::ostream& out, const std::vector<QaInstance>& instances);
void write_qa_jsonl_file(const std::string& path, const std::vector<QaInstance>& instances);

}  // namespace trafficbench
