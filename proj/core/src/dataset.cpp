#include "trafficbench/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "trafficbench/errors.hpp"
#include "trafficbench/log.hpp"
#include "trafficbench/rng.hpp"
#include "trafficbench/version.hpp"

namespace trafficbench {

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::val: return "val";
    case Partition::test: return "test";
  }
  return "?";
}

Partition partition_from(const std::string& name) {
  if (name == "train") return Partition::train;
  if (name == "val") return Partition::val;
  if (name == "test") return Partition::test;
  throw ValidationError("unknown partition: " + name);
}

void DatasetManifest::write(std::ostream& out) const {
  nlohmann::ordered_json header;
  header["split_policy"] = split_policy;
  header["seed"] = seed;
  header["ratios"] = ratios;
  header["tool_version"] = kToolVersion;
  out << header.dump() << "\n";
  for (const auto& row : rows) {
    nlohmann::ordered_json j;
    j["packet_uid"] = row.packet_uid;
    j["flow_uid"] = row.flow_uid;
    j["label"] = row.label;
    j["partition"] = partition_name(row.partition);
    if (row.fold >= 0) {
      j["fold"] = row.fold;
    } else {
      j["fold"] = nullptr;
    }
    out << j.dump() << "\n";
  }
}

DatasetManifest DatasetManifest::read(std::istream& in) {
  DatasetManifest m;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("manifest line " + std::to_string(line_no) +
                            " is not valid JSON: " + e.what());
    }
    if (!header_seen) {
      for (const char* key : {"split_policy", "seed", "ratios"}) {
        if (!j.contains(key)) {
          throw ValidationError(
              std::string("manifest header is incomplete, offending key: ") + key);
        }
      }
      m.split_policy = j.at("split_policy").get<std::string>();
      m.seed = j.at("seed").get<std::uint64_t>();
      m.ratios = j.at("ratios").get<std::string>();
      header_seen = true;
      continue;
    }
    for (const char* key : {"packet_uid", "flow_uid", "label", "partition"}) {
      if (!j.contains(key)) {
        throw ValidationError("manifest line " + std::to_string(line_no) +
                              " is incomplete, offending key: " + key);
      }
    }
    ManifestRow row;
    row.packet_uid = j.at("packet_uid").get<std::uint64_t>();
    row.flow_uid = j.at("flow_uid").get<std::uint64_t>();
    row.label = j.at("label").get<std::string>();
    row.partition = partition_from(j.at("partition").get<std::string>());
    if (j.contains("fold") && !j.at("fold").is_null()) {
      row.fold = j.at("fold").get<int>();
    }
    m.rows.push_back(std::move(row));
  }
  if (!header_seen) throw ValidationError("manifest has no header line");
  return m;
}

void DatasetManifest::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot create manifest: " + path);
  write(out);
}

DatasetManifest DatasetManifest::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open manifest: " + path);
  return read(in);
}

nlohmann::ordered_json SamplingReport::to_json() const {
  nlohmann::ordered_json j;
  j["steps"] = steps;
  return j;
}

std::vector<double> parse_ratios(const std::string& ratios, std::size_t* n_parts) {
  std::vector<double> parts;
  std::stringstream ss(ratios);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      parts.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("bad ratio component '" + item + "' in '" + ratios + "'");
    }
    if (parts.back() <= 0) {
      throw ValidationError("ratio components must be positive: " + ratios);
    }
  }
  if (parts.size() != 2 && parts.size() != 3) {
    throw ValidationError("ratios must have 2 or 3 components: " + ratios);
  }
  const double total = std::accumulate(parts.begin(), parts.end(), 0.0);
  for (auto& p : parts) p /= total;
  if (n_parts) *n_parts = parts.size();
  return parts;
}

std::vector<std::size_t> largest_remainder(std::size_t n, const std::vector<double>& shares) {
  std::vector<std::size_t> counts(shares.size());
  std::vector<std::pair<double, std::size_t>> fracs;  // (-fraction, index)
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double exact = static_cast<double>(n) * shares[i];
    counts[i] = static_cast<std::size_t>(exact);
    assigned += counts[i];
    fracs.push_back({-(exact - static_cast<double>(counts[i])), i});
  }
  std::sort(fracs.begin(), fracs.end());
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) {
    counts[fracs[r % fracs.size()].second] += 1;
  }
  return counts;
}

namespace {

std::vector<Partition> partition_layout(std::size_t n_parts) {
  if (n_parts == 2) return {Partition::train, Partition::test};
  return {Partition::train, Partition::val, Partition::test};
}

std::map<std::string, std::vector<std::size_t>> group_by_label(
    const std::vector<FlowRecord>& flows) {
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    by_label[flows[i].label].push_back(i);
  }
  return by_label;
}

}  // namespace

DatasetManifest split_per_flow(const std::vector<FlowRecord>& flows,
                               const std::string& ratios, std::uint64_t seed) {
  std::size_t n_parts = 0;
  const auto shares = parse_ratios(ratios, &n_parts);
  const auto layout = partition_layout(n_parts);

  DatasetManifest manifest;
  manifest.split_policy = "per-flow";
  manifest.seed = seed;
  manifest.ratios = ratios;

  std::vector<Partition> assignment(flows.size(), Partition::train);
  std::size_t class_idx = 0;
  for (const auto& [label, members] : group_by_label(flows)) {
    Rng rng(derive_seed(seed, "split.per-flow", class_idx++));
    if (members.size() < n_parts) {
      log_warn("class '" + label + "' has " + std::to_string(members.size()) +
               " flow(s), fewer than partitions; all assigned to train");
      continue;  // already train
    }
    std::vector<std::size_t> order = members;
    rng.shuffle(order);
    const auto slots = largest_remainder(order.size(), shares);

    // Long flows first so packet mass spreads evenly; the seeded shuffle
    // breaks ties among equal-size flows.
    std::vector<std::size_t> rank(order.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
      return flows[order[a]].packet_uids.size() > flows[order[b]].packet_uids.size();
    });

    std::vector<std::size_t> used(n_parts, 0);
    std::vector<double> packets_assigned(n_parts, 0.0);
    for (const std::size_t r : rank) {
      const std::size_t flow_index = order[r];
      // partition furthest below its packet-share target, among those with
      // flow slots left
      std::size_t best = n_parts;
      double best_load = 0.0;
      for (std::size_t p = 0; p < n_parts; ++p) {
        if (used[p] >= slots[p]) continue;
        const double load = packets_assigned[p] / shares[p];
        if (best == n_parts || load < best_load) {
          best = p;
          best_load = load;
        }
      }
      assignment[flow_index] = layout[best];
      used[best] += 1;
      packets_assigned[best] += static_cast<double>(flows[flow_index].packet_uids.size());
    }
  }

  for (std::size_t i = 0; i < flows.size(); ++i) {
    for (const std::uint64_t uid : flows[i].packet_uids) {
      manifest.rows.push_back(
          {uid, flows[i].flow_uid, flows[i].label, assignment[i], -1});
    }
  }
  std::sort(manifest.rows.begin(), manifest.rows.end(),
            [](const ManifestRow& a, const ManifestRow& b) {
              return a.packet_uid < b.packet_uid;
            });
  return manifest;
}

DatasetManifest split_per_packet(const std::vector<FlowRecord>& flows,
                                 const std::string& ratios, std::uint64_t seed) {
  std::size_t n_parts = 0;
  const auto shares = parse_ratios(ratios, &n_parts);
  const auto layout = partition_layout(n_parts);

  DatasetManifest manifest;
  manifest.split_policy = "per-packet";
  manifest.seed = seed;
  manifest.ratios = ratios;

  struct Item {
    std::uint64_t packet_uid;
    std::uint64_t flow_uid;
    const std::string* label;
  };
  std::map<std::string, std::vector<Item>> by_label;
  for (const auto& flow : flows) {
    for (const std::uint64_t uid : flow.packet_uids) {
      by_label[flow.label].push_back({uid, flow.flow_uid, &flow.label});
    }
  }

  std::size_t class_idx = 0;
  for (auto& [label, items] : by_label) {
    Rng rng(derive_seed(seed, "split.per-packet", class_idx++));
    rng.shuffle(items);
    const auto counts = largest_remainder(items.size(), shares);
    std::size_t cursor = 0;
    for (std::size_t p = 0; p < n_parts; ++p) {
      for (std::size_t i = 0; i < counts[p]; ++i, ++cursor) {
        const Item& item = items[cursor];
        manifest.rows.push_back({item.packet_uid, item.flow_uid, *item.label, layout[p], -1});
      }
    }
  }
  std::sort(manifest.rows.begin(), manifest.rows.end(),
            [](const ManifestRow& a, const ManifestRow& b) {
              return a.packet_uid < b.packet_uid;
            });
  return manifest;
}

FlowRecord cap_long_flow(const FlowRecord& flow, std::size_t cap, std::uint64_t seed) {
  if (cap < 1) throw ValidationError("flow cap must be >= 1");
  if (flow.packet_uids.size() <= cap) return flow;
  Rng rng(derive_seed(seed, "cap", flow.flow_uid));
  const auto picks = rng.sample_k(flow.packet_uids.size(), cap);
  FlowRecord out = flow;
  out.packet_uids.clear();
  out.packet_uids.reserve(cap);
  for (const std::size_t i : picks) out.packet_uids.push_back(flow.packet_uids[i]);
  return out;
}

std::vector<FlowRecord> cap_long_flows(const std::vector<FlowRecord>& flows,
                                       std::size_t cap, std::uint64_t seed,
                                       SamplingReport* report) {
  std::vector<FlowRecord> out;
  out.reserve(flows.size());
  std::uint64_t removed = 0, capped = 0;
  for (const auto& flow : flows) {
    out.push_back(cap_long_flow(flow, cap, seed));
    if (out.back().packet_uids.size() < flow.packet_uids.size()) {
      removed += flow.packet_uids.size() - out.back().packet_uids.size();
      ++capped;
    }
  }
  if (report) {
    nlohmann::ordered_json step;
    step["op"] = "cap_long_flows";
    step["cap"] = cap;
    step["flows_capped"] = capped;
    step["packets_removed"] = removed;
    report->steps.push_back(std::move(step));
  }
  return out;
}

namespace {

bool per_flow_policy(const DatasetManifest& m) { return m.split_policy == "per-flow"; }

void erase_rows(DatasetManifest& manifest, const std::set<std::size_t>& drop) {
  if (drop.empty()) return;
  std::vector<ManifestRow> kept;
  kept.reserve(manifest.rows.size() - drop.size());
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    if (!drop.count(i)) kept.push_back(std::move(manifest.rows[i]));
  }
  manifest.rows = std::move(kept);
}

}  // namespace

void balance_undersample(DatasetManifest& manifest, std::uint64_t seed,
                         SamplingReport* report) {
  const bool flow_unit = per_flow_policy(manifest);
  // class -> ordered unit ids (flow uids or row indices), non-test rows only
  std::map<std::string, std::vector<std::uint64_t>> units;
  std::map<std::string, std::set<std::uint64_t>> seen_flows;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& row = manifest.rows[i];
    if (row.partition == Partition::test) continue;
    if (flow_unit) {
      if (seen_flows[row.label].insert(row.flow_uid).second) {
        units[row.label].push_back(row.flow_uid);
      }
    } else {
      units[row.label].push_back(i);
    }
  }
  if (units.empty()) return;
  std::size_t minority = SIZE_MAX;
  for (const auto& [label, u] : units) minority = std::min(minority, u.size());

  std::set<std::size_t> drop_rows;
  std::set<std::uint64_t> drop_flows;
  nlohmann::ordered_json removed_per_class;
  std::size_t class_idx = 0;
  for (auto& [label, u] : units) {
    Rng rng(derive_seed(seed, "balance", class_idx++));
    std::vector<std::uint64_t> order = u;
    rng.shuffle(order);
    for (std::size_t i = minority; i < order.size(); ++i) {
      if (flow_unit) {
        drop_flows.insert(order[i]);
      } else {
        drop_rows.insert(static_cast<std::size_t>(order[i]));
      }
    }
    removed_per_class[label] = order.size() - minority;
  }
  if (flow_unit) {
    for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
      const auto& row = manifest.rows[i];
      if (row.partition != Partition::test && drop_flows.count(row.flow_uid)) {
        drop_rows.insert(i);
      }
    }
  }
  erase_rows(manifest, drop_rows);
  if (report) {
    nlohmann::ordered_json step;
    step["op"] = "balance_undersample";
    step["unit"] = flow_unit ? "flow" : "packet";
    step["minority"] = minority;
    step["removed_units_per_class"] = removed_per_class;
    report->steps.push_back(std::move(step));
  }
}

void stratified_sample(DatasetManifest& manifest, double fraction, std::uint64_t seed,
                       SamplingReport* report) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw ValidationError("stratified sample fraction must be in (0, 1]");
  }
  if (fraction == 1.0) return;
  // groups are (partition, class) so both the class mix and the split shares
  // survive the sampling
  std::map<std::pair<int, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    groups[{static_cast<int>(manifest.rows[i].partition), manifest.rows[i].label}]
        .push_back(i);
  }
  std::set<std::size_t> drop;
  std::size_t group_idx = 0;
  for (const auto& [key, members] : groups) {
    Rng rng(derive_seed(seed, "stratify", group_idx++));
    // round half up, then clamp to at least one row so no class vanishes
    std::size_t keep = static_cast<std::size_t>(
        static_cast<double>(members.size()) * fraction + 0.5);
    keep = std::max<std::size_t>(1, std::min(keep, members.size()));
    const auto picks = rng.sample_k(members.size(), keep);
    std::set<std::size_t> keep_set;
    for (const std::size_t p : picks) keep_set.insert(members[p]);
    for (const std::size_t m : members) {
      if (!keep_set.count(m)) drop.insert(m);
    }
  }
  const std::size_t before = manifest.rows.size();
  erase_rows(manifest, drop);
  if (report) {
    nlohmann::ordered_json step;
    step["op"] = "stratified_sample";
    step["fraction"] = fraction;
    step["rows_before"] = before;
    step["rows_after"] = manifest.rows.size();
    report->steps.push_back(std::move(step));
  }
}

void kfold(DatasetManifest& manifest, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("k-fold requires k >= 2");
  const bool flow_unit = per_flow_policy(manifest);

  // class -> train-partition units
  std::map<std::string, std::vector<std::uint64_t>> units;
  std::map<std::string, std::set<std::uint64_t>> seen_flows;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& row = manifest.rows[i];
    if (row.partition != Partition::train) continue;
    if (flow_unit) {
      if (seen_flows[row.label].insert(row.flow_uid).second) {
        units[row.label].push_back(row.flow_uid);
      }
    } else {
      units[row.label].push_back(i);
    }
  }

  std::map<std::uint64_t, int> flow_fold;
  std::size_t class_idx = 0;
  for (auto& [label, u] : units) {
    if (u.size() < static_cast<std::size_t>(k)) {
      log_warn("class '" + label + "' has fewer train units than folds; it will be " +
               "absent from some validation folds");
    }
    Rng rng(derive_seed(seed, "kfold", class_idx));
    std::vector<std::uint64_t> order = u;
    rng.shuffle(order);
    // round-robin with a rotating start keeps totals even across classes
    for (std::size_t i = 0; i < order.size(); ++i) {
      const int fold = static_cast<int>((i + class_idx) % static_cast<std::size_t>(k));
      if (flow_unit) {
        flow_fold[order[i]] = fold;
      } else {
        manifest.rows[static_cast<std::size_t>(order[i])].fold = fold;
      }
    }
    ++class_idx;
  }
  if (flow_unit) {
    for (auto& row : manifest.rows) {
      if (row.partition != Partition::train) continue;
      auto it = flow_fold.find(row.flow_uid);
      if (it != flow_fold.end()) row.fold = it->second;
    }
  }
}

void filter_min_class_support(DatasetManifest& manifest, std::size_t min_units,
                              SamplingReport* report) {
  if (min_units == 0) return;
  const bool flow_unit = per_flow_policy(manifest);
  std::map<std::string, std::set<std::uint64_t>> flows_per_class;
  std::map<std::string, std::size_t> count;
  for (const auto& row : manifest.rows) {
    if (flow_unit) {
      flows_per_class[row.label].insert(row.flow_uid);
    } else {
      ++count[row.label];
    }
  }
  if (flow_unit) {
    for (const auto& [label, f] : flows_per_class) count[label] = f.size();
  }
  std::set<std::size_t> drop;
  std::vector<std::string> dropped_classes;
  for (const auto& [label, n] : count) {
    if (n < min_units) dropped_classes.push_back(label);
  }
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    for (const auto& label : dropped_classes) {
      if (manifest.rows[i].label == label) {
        drop.insert(i);
        break;
      }
    }
  }
  erase_rows(manifest, drop);
  if (report) {
    nlohmann::ordered_json step;
    step["op"] = "filter_min_class_support";
    step["min_units"] = min_units;
    step["dropped_classes"] = dropped_classes;
    report->steps.push_back(std::move(step));
  }
}

}  // namespace trafficbench
