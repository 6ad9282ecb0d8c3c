#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "trafficbench/dataset.hpp"
#include "trafficbench/errors.hpp"
#include "trafficbench/flow.hpp"

using namespace trafficbench;

namespace {

// synthetic flow table: n flows per class, each flow `len` packets
std::vector<FlowRecord> make_flows(std::size_t classes, std::size_t per_class,
                                   std::size_t len) {
  std::vector<FlowRecord> flows;
  std::uint64_t next_uid = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t f = 0; f < per_class; ++f) {
      FlowRecord flow;
      flow.flow_uid = flows.size();
      flow.label = "c" + std::to_string(c);
      flow.trace_id = "t";
      for (std::size_t p = 0; p < len; ++p) flow.packet_uids.push_back(next_uid++);
      flows.push_back(std::move(flow));
    }
  }
  return flows;
}

std::map<Partition, std::set<std::uint64_t>> flows_by_partition(
    const DatasetManifest& m) {
  std::map<Partition, std::set<std::uint64_t>> out;
  for (const auto& row : m.rows) out[row.partition].insert(row.flow_uid);
  return out;
}

}  // namespace

TEST_CASE("parse_ratios normalizes and validates") {
  std::size_t parts = 0;
  auto two = parse_ratios("7:1", &parts);
  CHECK(parts == 2);
  CHECK(two[0] == doctest::Approx(0.875));
  CHECK(two[1] == doctest::Approx(0.125));
  auto three = parse_ratios("8:1:1", &parts);
  CHECK(parts == 3);
  CHECK(three[0] == doctest::Approx(0.8));
  CHECK_THROWS_AS(parse_ratios("8", nullptr), ValidationError);
  CHECK_THROWS_AS(parse_ratios("1:2:3:4", nullptr), ValidationError);
  CHECK_THROWS_AS(parse_ratios("a:b", nullptr), ValidationError);
  CHECK_THROWS_AS(parse_ratios("0:0", nullptr), ValidationError);
}

TEST_CASE("largest remainder apportions exactly") {
  CHECK(largest_remainder(10, {0.875, 0.125}) == std::vector<std::size_t>{9, 1});
  CHECK(largest_remainder(10, {0.8, 0.1, 0.1}) == std::vector<std::size_t>{8, 1, 1});
  // remainders tie at .5: lower index wins the spare unit
  CHECK(largest_remainder(3, {0.5, 0.5}) == std::vector<std::size_t>{2, 1});
  for (std::size_t n : {1u, 7u, 99u, 1000u}) {
    const auto counts = largest_remainder(n, {0.61, 0.29, 0.10});
    std::size_t sum = 0;
    for (auto c : counts) sum += c;
    CHECK(sum == n);
  }
}

TEST_CASE("per-flow split never straddles a flow across partitions") {
  const auto flows = make_flows(4, 10, 6);
  const auto manifest = split_per_flow(flows, "8:1:1", 5);
  CHECK(manifest.split_policy == "per-flow");
  CHECK(manifest.rows.size() == 4 * 10 * 6);

  std::map<std::uint64_t, std::set<Partition>> partitions_of;
  for (const auto& row : manifest.rows) partitions_of[row.flow_uid].insert(row.partition);
  for (const auto& [uid, parts] : partitions_of) CHECK(parts.size() == 1);

  // per class: 10 flows -> 8 train, 1 val, 1 test by largest remainder
  std::map<std::string, std::map<Partition, std::set<std::uint64_t>>> split_count;
  for (const auto& row : manifest.rows) {
    split_count[row.label][row.partition].insert(row.flow_uid);
  }
  for (const auto& [label, by_part] : split_count) {
    CHECK(by_part.at(Partition::train).size() == 8);
    CHECK(by_part.at(Partition::val).size() == 1);
    CHECK(by_part.at(Partition::test).size() == 1);
  }
}

TEST_CASE("two-way ratios leave validation empty") {
  const auto flows = make_flows(2, 8, 4);
  const auto manifest = split_per_flow(flows, "7:1", 5);
  const auto by_part = flows_by_partition(manifest);
  CHECK(by_part.count(Partition::val) == 0);
  CHECK(by_part.at(Partition::train).size() == 14);
  CHECK(by_part.at(Partition::test).size() == 2);
}

TEST_CASE("per-packet split straddles flows by design") {
  const auto flows = make_flows(2, 4, 50);
  const auto manifest = split_per_packet(flows, "8:1:1", 7);
  CHECK(manifest.split_policy == "per-packet");

  std::map<std::uint64_t, std::set<Partition>> partitions_of;
  for (const auto& row : manifest.rows) partitions_of[row.flow_uid].insert(row.partition);
  std::size_t straddling = 0;
  for (const auto& [uid, parts] : partitions_of) straddling += parts.size() > 1;
  CHECK(straddling > 0);

  // packet counts per class follow the ratios exactly
  std::map<std::string, std::map<Partition, std::size_t>> counts;
  for (const auto& row : manifest.rows) ++counts[row.label][row.partition];
  for (const auto& [label, by_part] : counts) {
    CHECK(by_part.at(Partition::train) == 160);
    CHECK(by_part.at(Partition::val) == 20);
    CHECK(by_part.at(Partition::test) == 20);
  }
}

TEST_CASE("splits are deterministic in the seed") {
  const auto flows = make_flows(3, 7, 5);
  std::ostringstream a, b, c;
  split_per_flow(flows, "7:1", 11).write(a);
  split_per_flow(flows, "7:1", 11).write(b);
  split_per_flow(flows, "7:1", 12).write(c);
  CHECK(a.str() == b.str());
  CHECK(a.str() != c.str());
}

TEST_CASE("manifest json lines roundtrip with null folds") {
  const auto flows = make_flows(2, 4, 3);
  auto manifest = split_per_flow(flows, "7:1", 3);
  std::ostringstream out;
  manifest.write(out);
  const std::string text = out.str();
  CHECK(text.find("\"split_policy\":\"per-flow\"") != std::string::npos);
  CHECK(text.find("\"tool_version\"") != std::string::npos);
  CHECK(text.find("\"fold\":null") != std::string::npos);

  std::istringstream in(text);
  const auto again = DatasetManifest::read(in);
  CHECK(again.split_policy == manifest.split_policy);
  CHECK(again.seed == manifest.seed);
  CHECK(again.ratios == manifest.ratios);
  REQUIRE(again.rows.size() == manifest.rows.size());
  for (std::size_t i = 0; i < again.rows.size(); ++i) {
    CHECK(again.rows[i].packet_uid == manifest.rows[i].packet_uid);
    CHECK(again.rows[i].flow_uid == manifest.rows[i].flow_uid);
    CHECK(again.rows[i].label == manifest.rows[i].label);
    CHECK(again.rows[i].partition == manifest.rows[i].partition);
    CHECK(again.rows[i].fold == manifest.rows[i].fold);
  }
}

TEST_CASE("manifest reader names the offending key") {
  std::istringstream in(
      "{\"split_policy\":\"per-flow\",\"seed\":1,\"ratios\":\"7:1\",\"tool_version\":\"x\"}\n"
      "{\"packet_uid\":0,\"flow_uid\":0,\"label\":\"a\",\"partitio\":\"train\",\"fold\":null}\n");
  try {
    (void)DatasetManifest::read(in);
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("offending key") != std::string::npos);
  }
}

TEST_CASE("kfold covers train rows at unit granularity") {
  const auto flows = make_flows(3, 10, 4);
  auto manifest = split_per_flow(flows, "7:1", 9);
  kfold(manifest, 4, 9);

  std::map<std::uint64_t, std::set<int>> folds_of_flow;
  std::map<int, std::map<std::string, std::set<std::uint64_t>>> flows_in_fold;
  for (const auto& row : manifest.rows) {
    if (row.partition == Partition::train) {
      CHECK(row.fold >= 0);
      CHECK(row.fold < 4);
      folds_of_flow[row.flow_uid].insert(row.fold);
      flows_in_fold[row.fold][row.label].insert(row.flow_uid);
    } else {
      CHECK(row.fold == -1);
    }
  }
  // per-flow policy: a flow sits inside one fold
  for (const auto& [uid, folds] : folds_of_flow) CHECK(folds.size() == 1);
  // 3 classes x 9 train flows over 4 folds: per class 3:2:2:2
  for (const auto& [fold, by_label] : flows_in_fold) {
    for (const auto& [label, uids] : by_label) {
      CHECK(uids.size() >= 2);
      CHECK(uids.size() <= 3);
    }
  }
  CHECK_THROWS_AS(kfold(manifest, 1, 9), ValidationError);
}

TEST_CASE("balance_undersample equalizes class sizes in units") {
  // class c0 has 12 flows, c1 has 4
  std::vector<FlowRecord> flows;
  std::uint64_t next_uid = 0;
  for (std::size_t i = 0; i < 16; ++i) {
    FlowRecord flow;
    flow.flow_uid = i;
    flow.label = i < 12 ? "c0" : "c1";
    for (std::size_t p = 0; p < 3; ++p) flow.packet_uids.push_back(next_uid++);
    flows.push_back(std::move(flow));
  }
  auto manifest = split_per_flow(flows, "3:1", 2);
  SamplingReport report;
  balance_undersample(manifest, 2, &report);

  std::map<std::string, std::set<std::uint64_t>> train_flows;
  std::map<std::string, std::size_t> test_rows;
  for (const auto& row : manifest.rows) {
    if (row.partition == Partition::train) {
      train_flows[row.label].insert(row.flow_uid);
    } else {
      ++test_rows[row.label];
    }
  }
  CHECK(train_flows.at("c0").size() == train_flows.at("c1").size());
  // test rows are untouched: 3 test flows for c0, 1 for c1, 3 packets each
  CHECK(test_rows.at("c0") == 9);
  CHECK(test_rows.at("c1") == 3);
  CHECK(report.steps.size() == 1);
}

TEST_CASE("stratified_sample keeps class shares") {
  const auto flows = make_flows(2, 10, 10);
  auto manifest = split_per_packet(flows, "7:1", 4);
  stratified_sample(manifest, 0.5, 4);
  std::map<std::string, std::size_t> counts;
  for (const auto& row : manifest.rows) ++counts[row.label];
  CHECK(counts.at("c0") == 50);
  CHECK(counts.at("c1") == 50);
  CHECK_THROWS_AS(stratified_sample(manifest, 0.0, 4), ValidationError);
  CHECK_THROWS_AS(stratified_sample(manifest, 1.5, 4), ValidationError);
}

TEST_CASE("cap_long_flows keeps order and caps length") {
  auto flows = make_flows(1, 3, 20);
  SamplingReport report;
  const auto capped = cap_long_flows(flows, 8, 77, &report);
  for (std::size_t i = 0; i < capped.size(); ++i) {
    CHECK(capped[i].packet_uids.size() == 8);
    CHECK(std::is_sorted(capped[i].packet_uids.begin(), capped[i].packet_uids.end()));
    // subset of the original
    for (auto uid : capped[i].packet_uids) {
      CHECK(std::find(flows[i].packet_uids.begin(), flows[i].packet_uids.end(), uid) !=
            flows[i].packet_uids.end());
    }
  }
  const auto untouched = cap_long_flows(flows, 50, 77);
  CHECK(untouched[0].packet_uids.size() == 20);
}

TEST_CASE("filter_min_class_support drops sparse classes") {
  std::vector<FlowRecord> flows = make_flows(2, 6, 2);
  // add a class with a single flow
  FlowRecord odd;
  odd.flow_uid = flows.size();
  odd.label = "rare";
  odd.packet_uids = {1000, 1001};
  flows.push_back(odd);
  auto manifest = split_per_flow(flows, "3:1", 6);
  filter_min_class_support(manifest, 2);
  for (const auto& row : manifest.rows) CHECK(row.label != "rare");
}
