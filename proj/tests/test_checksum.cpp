#include <doctest.h>

#include <cstdint>
#include <vector>

#include "test_util.hpp"
#include "trafficbench/checksum.hpp"
#include "trafficbench/packet.hpp"
#include "trafficbench/rng.hpp"

using namespace trafficbench;

TEST_CASE("matches a hand-worked classic header") {
  // 45 00 00 3c 1c 46 40 00 40 06 [sum] ac 10 0a 63 ac 10 0a 0c -> 0xB1E6
  std::vector<std::uint8_t> header = {0x45, 0x00, 0x00, 0x3c, 0x1c, 0x46, 0x40,
                                      0x00, 0x40, 0x06, 0x00, 0x00, 0xac, 0x10,
                                      0x0a, 0x63, 0xac, 0x10, 0x0a, 0x0c};
  CHECK(internet_checksum(header) == 0xB1E6);
  header[10] = 0xB1;
  header[11] = 0xE6;
  CHECK(internet_checksum(header) == 0x0000);
}

TEST_CASE("agrees with an independent implementation on random buffers") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> data(1 + rng.below(97));
    for (auto& b : data) b = static_cast<std::uint8_t>(rng.below(256));
    CHECK(internet_checksum(data) == tbtest::ref_checksum(data));
  }
}

TEST_CASE("odd trailing byte pads with zero") {
  std::vector<std::uint8_t> odd = {0x12, 0x34, 0x56};
  std::vector<std::uint8_t> padded = {0x12, 0x34, 0x56, 0x00};
  CHECK(internet_checksum(odd) == internet_checksum(padded));
}

TEST_CASE("accumulator splits odd chunks like one flat buffer") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint8_t> data(3 + rng.below(64));
    for (auto& b : data) b = static_cast<std::uint8_t>(rng.below(256));
    ChecksumAccumulator acc;
    std::size_t cut = 1 + rng.below(data.size() - 1);
    acc.add(std::span(data.data(), cut));
    acc.add(std::span(data.data() + cut, data.size() - cut));
    CHECK(acc.finish() == internet_checksum(data));
  }
}

TEST_CASE("verify_checksums agrees with the reference frame builder") {
  tbtest::FrameSpec spec;
  spec.payload = {1, 2, 3, 4, 5};

  SUBCASE("intact tcp frame verifies ok") {
    const auto pkt = decode(tbtest::raw_of(tbtest::tcp_frame(spec), 0));
    const auto report = verify_checksums(pkt);
    CHECK(report.ip == CheckState::ok);
    CHECK(report.tcp == CheckState::ok);
    CHECK(report.udp == CheckState::not_applicable);
  }

  SUBCASE("broken ip checksum is flagged") {
    spec.break_ip_checksum = true;
    const auto pkt = decode(tbtest::raw_of(tbtest::tcp_frame(spec), 0));
    CHECK(verify_checksums(pkt).ip == CheckState::bad);
  }

  SUBCASE("broken tcp checksum is flagged") {
    spec.break_transport_checksum = true;
    const auto pkt = decode(tbtest::raw_of(tbtest::tcp_frame(spec), 0));
    CHECK(verify_checksums(pkt).tcp == CheckState::bad);
  }

  SUBCASE("ethernet trailer padding does not poison the sum") {
    spec.payload = {9};
    spec.pad_to = 60;
    const auto pkt = decode(tbtest::raw_of(tbtest::tcp_frame(spec), 0));
    const auto report = verify_checksums(pkt);
    CHECK(report.ip == CheckState::ok);
    CHECK(report.tcp == CheckState::ok);
  }

  SUBCASE("udp checksum verifies and zero means not_applicable") {
    auto pkt = decode(tbtest::raw_of(tbtest::udp_frame(spec), 0));
    CHECK(verify_checksums(pkt).udp == CheckState::ok);
    auto zero = decode(tbtest::raw_of(tbtest::udp_frame(spec, true), 0));
    CHECK(verify_checksums(zero).udp == CheckState::not_applicable);
  }
}

TEST_CASE("set_checksums_valid repairs corrupted frames") {
  tbtest::FrameSpec spec;
  spec.payload = {7, 7, 7};
  spec.break_ip_checksum = true;
  spec.break_transport_checksum = true;
  auto pkt = decode(tbtest::raw_of(tbtest::tcp_frame(spec), 0));
  REQUIRE(verify_checksums(pkt).ip == CheckState::bad);
  set_checksums_valid(pkt);
  const auto report = verify_checksums(pkt);
  CHECK(report.ip == CheckState::ok);
  CHECK(report.tcp == CheckState::ok);

  // the repaired bytes must equal the reference builder's correct frame
  spec.break_ip_checksum = false;
  spec.break_transport_checksum = false;
  CHECK(pkt.raw.bytes == tbtest::tcp_frame(spec));
}
