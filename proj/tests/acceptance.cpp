// Acceptance gate: ten end-to-end criteria, one PASS/FAIL line each.
// Exit code is the number of failed criteria.
//
// Where a criterion checks values the library also computes (features, QA
// answers, checksums), the expected side comes from a local flat byte parser
// written here, not from the library's decoder.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trafficbench/cleaning.hpp"
#include "trafficbench/dataset.hpp"
#include "trafficbench/embedding.hpp"
#include "trafficbench/features.hpp"
#include "trafficbench/flow.hpp"
#include "trafficbench/forest.hpp"
#include "trafficbench/metrics.hpp"
#include "trafficbench/packet.hpp"
#include "trafficbench/pcap.hpp"
#include "trafficbench/pipeline.hpp"
#include "trafficbench/qa.hpp"
#include "trafficbench/rng.hpp"
#include "trafficbench/synth.hpp"
#include "trafficbench/transforms.hpp"

namespace fs = std::filesystem;
using namespace trafficbench;

namespace {

// ---------------------------------------------------------------------------
// Independent flat parser for ethernet/IPv4/TCP frames. Deliberately naive:
// fixed offsets, no validation beyond bounds, no shared code with the library.

std::uint16_t rd16(const std::vector<std::uint8_t>& b, std::size_t i) {
  return static_cast<std::uint16_t>((b.at(i) << 8) | b.at(i + 1));
}

std::uint32_t rd32(const std::vector<std::uint8_t>& b, std::size_t i) {
  return (static_cast<std::uint32_t>(b.at(i)) << 24) |
         (static_cast<std::uint32_t>(b.at(i + 1)) << 16) |
         (static_cast<std::uint32_t>(b.at(i + 2)) << 8) |
         static_cast<std::uint32_t>(b.at(i + 3));
}

struct Flat {
  bool ok = false;
  std::size_t net = 0;        // first IPv4 header byte
  std::size_t ihl = 0;        // IPv4 header length in bytes
  std::size_t transport = 0;  // first TCP header byte
  std::size_t thl = 0;        // TCP header length in bytes
};

Flat flat_parse(const std::vector<std::uint8_t>& b) {
  Flat f;
  if (b.size() < 14 + 20) return f;
  if (rd16(b, 12) != 0x0800) return f;
  f.net = 14;
  f.ihl = static_cast<std::size_t>(b[f.net] & 0x0F) * 4;
  if (b[f.net + 9] != 6) return f;  // acceptance corpora are TCP only
  f.transport = f.net + f.ihl;
  if (b.size() < f.transport + 20) return f;
  f.thl = static_cast<std::size_t>(b[f.transport + 12] >> 4) * 4;
  f.ok = true;
  return f;
}

// RFC 1071 over the IPv4 header including the stored checksum: the folded
// sum of a valid header is 0xFFFF.
bool flat_ip_checksum_ok(const std::vector<std::uint8_t>& b, const Flat& f) {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i + 1 < f.ihl; i += 2) {
    sum += (static_cast<std::uint64_t>(b[f.net + i]) << 8) | b[f.net + i + 1];
  }
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  return sum == 0xFFFF;
}

std::string dotted(const std::vector<std::uint8_t>& b, std::size_t i) {
  return std::to_string(b[i]) + "." + std::to_string(b[i + 1]) + "." +
         std::to_string(b[i + 2]) + "." + std::to_string(b[i + 3]);
}

// ---------------------------------------------------------------------------

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::vector<ParsedPacket> decode_all(const std::vector<RawPacket>& raws) {
  std::vector<ParsedPacket> out;
  out.reserve(raws.size());
  for (const auto& r : raws) out.push_back(decode(r));
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Gate {
  int failures = 0;

  void run(int id, const std::string& what,
           const std::function<std::pair<bool, std::string>()>& fn) {
    bool ok = false;
    std::string detail;
    try {
      auto r = fn();
      ok = r.first;
      detail = r.second;
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    if (!ok) ++failures;
    std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what.c_str(),
                detail.c_str());
    std::fflush(stdout);
  }
};

fs::path make_trace(const fs::path& dir, const SynthSpec& spec) {
  fs::create_directories(dir);
  write_synth(generate_trace(spec), dir.string());
  return dir;
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "trafficbench-acceptance";
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::create_directories(root);

  Gate gate;

  // ------------------------------------------------------------------ 1
  gate.run(1, "per-packet splits reward shortcut features, per-flow splits do not", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    SynthSpec spec;
    spec.n_classes = 20;
    spec.flows_per_class = 50;
    spec.packets_per_flow = 20;
    spec.signal = ClassSignal::none;  // no real class signal at all
    spec.seed = 401;
    const fs::path trace = make_trace(root / "c1" / "trace", spec);

    RunConfig base;
    base.inputs = {(trace / "synth.pcap").string()};
    base.labels_path = (trace / "labels.json").string();
    base.policy = "per-packet";
    base.ratios = "8:1:1";
    base.seed = 402;
    base.transforms = {TransformSpec::preset("anonymize-explicit-ids", TransformScope::both, 403)};
    base.model.n_trees = 50;

    RunConfig leaky = base;
    leaky.out_dir = (root / "c1" / "per-packet").string();
    fs::create_directories(leaky.out_dir);
    const double acc_leaky = run_pipeline(leaky).test_result->accuracy;

    RunConfig honest = base;
    honest.policy = "per-flow";
    honest.ratios = "7:1";
    honest.out_dir = (root / "c1" / "per-flow").string();
    fs::create_directories(honest.out_dir);
    const double acc_honest = run_pipeline(honest).test_result->accuracy;

    RunConfig cueless = leaky;
    cueless.transforms.push_back(TransformSpec::preset("table5", TransformScope::test_only, 404));
    cueless.out_dir = (root / "c1" / "per-packet-cue-removed").string();
    fs::create_directories(cueless.out_dir);
    const double acc_cueless = run_pipeline(cueless).test_result->accuracy;

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = acc_leaky >= 0.90 && acc_honest <= 0.15 &&
                    (acc_leaky - acc_cueless) >= 0.60 && secs <= 180.0;
    return std::make_pair(ok, "label signal none, chance 0.05: per-packet " + fmt(acc_leaky) +
                                  ", per-flow " + fmt(acc_honest) + ", cue-removed test " +
                                  fmt(acc_cueless) + ", " + fmt(secs) + "s");
  });

  // ------------------------------------------------------------------ 2
  gate.run(2, "feature importance names the shortcut and follows it when dropped", [&] {
    SynthSpec spec;
    spec.n_classes = 10;
    spec.flows_per_class = 30;
    spec.packets_per_flow = 12;
    spec.signal = ClassSignal::server_ip_per_class;
    spec.seed = 501;
    const fs::path trace = make_trace(root / "c2" / "trace", spec);

    RunConfig base;
    base.inputs = {(trace / "synth.pcap").string()};
    base.labels_path = (trace / "labels.json").string();
    base.policy = "per-flow";
    base.ratios = "7:1";
    base.seed = 502;
    base.model.n_trees = 30;
    base.model.features_per_split = -1;

    RunConfig full = base;
    full.out_dir = (root / "c2" / "full").string();
    fs::create_directories(full.out_dir);
    const RunReport rep_full = run_pipeline(full);
    double ip_share = 0.0;
    for (std::size_t i = 0; i < rep_full.feature_names.size(); ++i) {
      const std::string& n = rep_full.feature_names[i];
      if (n.rfind("SRC IP", 0) == 0 || n.rfind("DST IP", 0) == 0) {
        ip_share += rep_full.importance[i];
      }
    }
    const double acc_full = rep_full.test_result->accuracy;

    RunConfig dropped = base;
    dropped.drop_features = {"ip-octets"};
    dropped.out_dir = (root / "c2" / "dropped").string();
    fs::create_directories(dropped.out_dir);
    const RunReport rep_drop = run_pipeline(dropped);
    std::map<std::string, double> imp;
    for (std::size_t i = 0; i < rep_drop.feature_names.size(); ++i) {
      imp[rep_drop.feature_names[i]] = rep_drop.importance[i];
    }
    std::string top;
    double top_v = -1.0;
    for (const auto& [name, v] : imp) {
      if (v > top_v) {
        top_v = v;
        top = name;
      }
    }
    const double chk = imp["ipv4_checksum"];
    const double seq_ack = imp["tcp_seq"] + imp["tcp_ack"];
    const double ts = imp["tcp_tsval"] + imp["tcp_tsecr"];
    const double ports = imp["tcp_sport"] + imp["tcp_dport"];
    const double flow_id = chk + seq_ack + ts + ports;
    const double acc_drop = rep_drop.test_result->accuracy;

    const bool ok = ip_share >= 0.5 && acc_full >= 0.8 && acc_drop <= 0.3 && flow_id >= 0.8 &&
                    top == "ipv4_checksum" && chk >= 0.2 && (seq_ack + ts) > ports;
    return std::make_pair(
        ok, "planted server-ip cue: IP-octet share " + fmt(ip_share) + " acc " + fmt(acc_full) +
                "; octets dropped: acc " + fmt(acc_drop) + ", flow-id share " + fmt(flow_id) +
                ", top " + top + " " + fmt(top_v) + ", seq/ack+ts " + fmt(seq_ack + ts) +
                " vs ports " + fmt(ports));
  });

  // ------------------------------------------------------------------ 3
  gate.run(3, "cleaning removes the filtered groups exactly, conservatively, idempotently", [&] {
    SynthSpec spec;
    spec.n_classes = 1;
    spec.flows_per_class = 5;
    spec.packets_per_flow = 19;
    spec.seed = 601;
    spec.extraneous = {{"arp", 2}, {"mdns", 3}};
    auto packets = decode_all(generate_trace(spec).packets);
    auto [kept, rep] = apply_filters(packets, FilterSet::defaults());
    bool ok = rep.total == 100 && rep.kept == 95 && kept.size() == 95 &&
              rep.removed_by_protocol.at("mdns") == 3 && rep.removed_by_protocol.at("arp") == 2 &&
              rep.removed_by_group.at("link-local protocols") == 3 &&
              rep.removed_by_group.at("network management protocols") == 2;

    auto [kept2, rep2] = apply_filters(kept, FilterSet::defaults());
    ok = ok && rep2.total == 95 && rep2.kept == 95 && rep2.removed_by_group.empty();

    // conservation + idempotence over randomized corpora
    Rng rng(602);
    std::size_t fuzzed = 0;
    for (int t = 0; t < 100 && ok; ++t) {
      SynthSpec fz;
      fz.n_classes = 1 + rng.below(3);
      fz.flows_per_class = 1 + rng.below(3);
      fz.packets_per_flow = 1 + rng.below(5);
      fz.seed = rng.next_u64();
      for (const char* tag : {"arp", "mdns", "ntp"}) {
        const std::size_t n = rng.below(4);
        if (n > 0) fz.extraneous[tag] = n;
      }
      auto pkts = decode_all(generate_trace(fz).packets);
      auto [k1, r1] = apply_filters(pkts, FilterSet::defaults());
      std::uint64_t removed = 0;
      for (const auto& [g, n] : r1.removed_by_group) removed += n;
      ok = ok && r1.total == pkts.size() && r1.kept + removed == r1.total &&
           r1.kept == k1.size();
      auto [k2, r2] = apply_filters(k1, FilterSet::defaults());
      ok = ok && r2.kept == r2.total && r2.removed_by_group.empty() && k2.size() == k1.size();
      ++fuzzed;
    }
    return std::make_pair(ok, "100 packets -> kept 95, mdns 3 + arp 2 removed; " +
                                  std::to_string(fuzzed) + " fuzzed corpora conserved");
  });

  // ------------------------------------------------------------------ 4
  gate.run(4, "per-flow splits never straddle, per-packet splits do, counts are exact", [&] {
    SynthSpec spec;
    spec.n_classes = 6;
    spec.flows_per_class = 10;
    spec.packets_per_flow = 8;
    spec.seed = 701;
    auto res = generate_trace(spec);
    auto packets = decode_all(res.packets);
    auto flows = assemble_flows(packets, LabelMap::from_json(res.labels));

    auto pf = split_per_flow(flows, "7:1", 702);
    std::map<std::uint64_t, std::set<Partition>> parts_of;
    std::map<std::string, std::map<Partition, std::set<std::uint64_t>>> class_flows;
    for (const auto& row : pf.rows) {
      parts_of[row.flow_uid].insert(row.partition);
      class_flows[row.label][row.partition].insert(row.flow_uid);
    }
    bool ok = pf.rows.size() == 480;
    for (const auto& [fid, parts] : parts_of) ok = ok && parts.size() == 1;
    for (const auto& [label, by_part] : class_flows) {
      ok = ok && by_part.at(Partition::train).size() == 9 &&
           by_part.at(Partition::test).size() == 1;
    }

    auto pp = split_per_packet(flows, "8:1:1", 702);
    std::map<std::string, std::map<Partition, std::size_t>> class_counts;
    std::map<std::uint64_t, std::set<Partition>> pp_parts_of;
    for (const auto& row : pp.rows) {
      class_counts[row.label][row.partition]++;
      pp_parts_of[row.flow_uid].insert(row.partition);
    }
    std::size_t straddling = 0;
    for (const auto& [fid, parts] : pp_parts_of) {
      if (parts.size() > 1) ++straddling;
    }
    ok = ok && pp.rows.size() == 480 && straddling > 0;
    for (const auto& [label, counts] : class_counts) {
      ok = ok && counts.at(Partition::train) == 64 && counts.at(Partition::val) == 8 &&
           counts.at(Partition::test) == 8;
    }

    kfold(pf, 5, 703);
    std::map<std::uint64_t, std::set<int>> folds_of;
    std::map<std::string, std::map<int, std::set<std::uint64_t>>> class_fold_flows;
    bool fold_ok = true;
    for (const auto& row : pf.rows) {
      folds_of[row.flow_uid].insert(row.fold);
      if (row.partition == Partition::test) {
        fold_ok = fold_ok && row.fold == -1;
      } else {
        fold_ok = fold_ok && row.fold >= 0 && row.fold < 5;
        class_fold_flows[row.label][row.fold].insert(row.flow_uid);
      }
    }
    for (const auto& [fid, fs_] : folds_of) fold_ok = fold_ok && fs_.size() == 1;
    for (const auto& [label, by_fold] : class_fold_flows) {
      fold_ok = fold_ok && by_fold.size() == 5;
      for (const auto& [fold, fl] : by_fold) {
        fold_ok = fold_ok && (fl.size() == 1 || fl.size() == 2);  // 9 flows over 5 folds
      }
    }
    ok = ok && fold_ok;

    std::ostringstream a1, a2, b1;
    split_per_flow(flows, "7:1", 702).write(a1);
    split_per_flow(flows, "7:1", 702).write(a2);
    split_per_flow(flows, "7:1", 703).write(b1);
    ok = ok && a1.str() == a2.str() && a1.str() != b1.str();

    return std::make_pair(ok, "60 flows: per-flow 9+1 per class, per-packet 64/8/8 with " +
                                  std::to_string(straddling) +
                                  " straddling flows, 5-fold whole-flow, seeds reproducible");
  });

  // ------------------------------------------------------------------ 5
  gate.run(5, "transforms keep flow-consistent structure or destroy it as specified", [&] {
    SynthSpec spec;
    spec.n_classes = 3;
    spec.flows_per_class = 4;
    spec.packets_per_flow = 6;
    spec.seed = 801;
    auto res = generate_trace(spec);
    auto packets = decode_all(res.packets);
    auto flows = assemble_flows(packets, LabelMap::from_json(res.labels));
    std::map<std::uint64_t, std::uint64_t> flow_of;
    for (const auto& f : flows) {
      for (auto uid : f.packet_uids) flow_of[uid] = f.flow_uid;
    }
    auto payload_len = [](const ParsedPacket& p) {
      return static_cast<std::uint32_t>(p.raw.bytes.size() - p.payload_offset);
    };

    bool ok = true;

    // randomize_ip per-flow-consistent: one address map per flow, applied to
    // both directions, and still checksum-clean.
    TransformSpec rip;
    rip.ops = {{TransformKind::randomize_ip, TransformMode::per_flow_consistent}};
    rip.seed = 802;
    for (const auto& f : flows) {
      const auto& first = packets[f.packet_uids[0]];
      const auto client = first.ipv4->src;
      std::array<std::uint8_t, 4> fwd_src{}, fwd_dst{};
      bool have = false;
      for (auto uid : f.packet_uids) {
        const auto& orig = packets[uid];
        auto tp = apply_transforms(orig, rip, f.flow_uid);
        const bool forward = orig.ipv4->src == client;
        if (!have) {
          fwd_src = forward ? tp.ipv4->src : tp.ipv4->dst;
          fwd_dst = forward ? tp.ipv4->dst : tp.ipv4->src;
          have = true;
        }
        if (forward) {
          ok = ok && tp.ipv4->src == fwd_src && tp.ipv4->dst == fwd_dst;
        } else {
          ok = ok && tp.ipv4->src == fwd_dst && tp.ipv4->dst == fwd_src;
        }
        auto sums = verify_checksums(tp);
        ok = ok && sums.ip == CheckState::ok && sums.tcp == CheckState::ok;
      }
    }

    // randomize_seq_ack per-flow-consistent preserves same-direction deltas
    // and the cross-direction seq/ack coupling.
    TransformSpec rsa;
    rsa.ops = {{TransformKind::randomize_seq_ack, TransformMode::per_flow_consistent}};
    rsa.seed = 803;
    for (const auto& f : flows) {
      std::vector<ParsedPacket> orig, tr;
      for (auto uid : f.packet_uids) {
        orig.push_back(packets[uid]);
        tr.push_back(apply_transforms(packets[uid], rsa, f.flow_uid));
      }
      for (std::size_t p = 2; p < orig.size(); ++p) {  // synth strictly alternates
        const std::uint32_t want_seq = orig[p].tcp->seq_no - orig[p - 2].tcp->seq_no;
        const std::uint32_t got_seq = tr[p].tcp->seq_no - tr[p - 2].tcp->seq_no;
        ok = ok && want_seq == got_seq;
      }
      for (std::size_t p = 1; p < orig.size(); ++p) {
        ok = ok && tr[p].tcp->ack_no ==
                       static_cast<std::uint32_t>(tr[p - 1].tcp->seq_no + payload_len(orig[p - 1]));
      }
    }

    // the same op per-packet must break same-direction deltas somewhere
    TransformSpec rsa_pp;
    rsa_pp.ops = {{TransformKind::randomize_seq_ack, TransformMode::per_packet}};
    rsa_pp.seed = 804;
    bool broke = false;
    for (const auto& f : flows) {
      std::vector<ParsedPacket> orig, tr;
      for (auto uid : f.packet_uids) {
        orig.push_back(packets[uid]);
        tr.push_back(apply_transforms(packets[uid], rsa_pp, f.flow_uid));
      }
      for (std::size_t p = 2; p < orig.size(); ++p) {
        if (static_cast<std::uint32_t>(orig[p].tcp->seq_no - orig[p - 2].tcp->seq_no) !=
            static_cast<std::uint32_t>(tr[p].tcp->seq_no - tr[p - 2].tcp->seq_no)) {
          broke = true;
        }
      }
    }
    ok = ok && broke;

    // zero_ports, strip_payload, strip_ip_header on every packet
    TransformSpec zp;
    zp.ops = {{TransformKind::zero_ports}};
    zp.seed = 805;
    TransformSpec sp;
    sp.ops = {{TransformKind::strip_payload}};
    sp.seed = 806;
    TransformSpec sih;
    sih.ops = {{TransformKind::strip_ip_header}};
    sih.seed = 807;
    for (const auto& f : flows) {
      for (auto uid : f.packet_uids) {
        const auto& orig = packets[uid];

        auto zport = apply_transforms(orig, zp, f.flow_uid);
        auto zsums = verify_checksums(zport);
        ok = ok && zport.tcp->src_port == 0 && zport.tcp->dst_port == 0 &&
             zsums.ip == CheckState::ok && zsums.tcp == CheckState::ok;

        auto nopay = apply_transforms(orig, sp, f.flow_uid);
        auto nsums = verify_checksums(nopay);
        ok = ok && nopay.size() == orig.payload_offset && payload_len(orig) > 0 &&
             nopay.tcp->seq_no == orig.tcp->seq_no && nsums.ip == CheckState::ok &&
             nsums.tcp == CheckState::ok;

        auto noip = apply_transforms(orig, sih, f.flow_uid);
        ok = ok && noip.size() == orig.size() - orig.transport_offset;
        const std::size_t plen = orig.size() - orig.payload_offset;
        ok = ok && std::equal(orig.raw.bytes.end() - static_cast<std::ptrdiff_t>(plen),
                              orig.raw.bytes.end(),
                              noip.raw.bytes.end() - static_cast<std::ptrdiff_t>(plen));
      }
    }

    return std::make_pair(ok,
                          "flow-consistent ip map swaps with direction, seq/ack deltas survive "
                          "pfc and break per-packet, strips and port zeroing stay checksum-clean");
  });

  // ------------------------------------------------------------------ 6
  gate.run(6, "header features match an independent flat parse and survive CSV", [&] {
    SynthSpec spec;
    spec.n_classes = 4;
    spec.flows_per_class = 5;
    spec.packets_per_flow = 6;
    spec.seed = 901;
    auto res = generate_trace(spec);
    auto packets = decode_all(res.packets);
    auto flows = assemble_flows(packets, LabelMap::from_json(res.labels));
    auto manifest = split_per_packet(flows, "8:1:1", 902);
    auto table = build_feature_table(packets, manifest, FeatureSchema::defaults());

    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < table.names.size(); ++i) col[table.names[i]] = i;

    std::size_t mismatches = 0;
    auto expect = [&](const FeatureRecord& row, const char* name, double want) {
      if (table.rows.empty()) return;
      const double got = row.values.at(col.at(name));
      if (got != want) ++mismatches;
    };
    bool ok = table.rows.size() == 120;
    for (const auto& row : table.rows) {
      const auto& b = packets.at(row.packet_uid).raw.bytes;
      const Flat f = flat_parse(b);
      ok = ok && f.ok;
      if (!f.ok) break;
      expect(row, "ipv4_present", 1.0);
      expect(row, "tcp_present", 1.0);
      expect(row, "udp_present", 0.0);
      expect(row, "ipv4_ttl", b[f.net + 8]);
      expect(row, "ipv4_length", rd16(b, f.net + 2));
      expect(row, "ipv4_id", rd16(b, f.net + 4));
      expect(row, "ipv4_protocol", b[f.net + 9]);
      expect(row, "ipv4_checksum", rd16(b, f.net + 10));
      for (int o = 0; o < 4; ++o) {
        expect(row, ("SRC IP" + std::to_string(o)).c_str(), b[f.net + 12 + o]);
        expect(row, ("DST IP" + std::to_string(o)).c_str(), b[f.net + 16 + o]);
      }
      expect(row, "tcp_sport", rd16(b, f.transport));
      expect(row, "tcp_dport", rd16(b, f.transport + 2));
      expect(row, "tcp_seq", rd32(b, f.transport + 4));
      expect(row, "tcp_ack", rd32(b, f.transport + 8));
      expect(row, "tcp_data_offset", b[f.transport + 12] >> 4);
      expect(row, "tcp_window", rd16(b, f.transport + 14));
      expect(row, "tcp_checksum", rd16(b, f.transport + 16));
      // synth option layout is NOP NOP TIMESTAMP
      ok = ok && b[f.transport + 20] == 1 && b[f.transport + 21] == 1 &&
           b[f.transport + 22] == 8;
      expect(row, "tcp_tsval", rd32(b, f.transport + 24));
      expect(row, "tcp_tsecr", rd32(b, f.transport + 28));
    }
    ok = ok && mismatches == 0;

    const fs::path csv = root / "c6-features.csv";
    table.write_file(csv.string());
    auto back = FeatureTable::read_file(csv.string());
    ok = ok && back.names == table.names && back.rows.size() == table.rows.size();
    for (std::size_t i = 0; ok && i < table.rows.size(); ++i) {
      const auto& a = table.rows[i];
      const auto& b = back.rows[i];
      ok = a.packet_uid == b.packet_uid && a.flow_uid == b.flow_uid && a.label == b.label &&
           a.partition == b.partition && a.fold == b.fold && a.values == b.values;
    }
    return std::make_pair(ok, "120 packets x 25 checked columns, " +
                                  std::to_string(mismatches) +
                                  " mismatches, CSV round trip exact");
  });

  // ------------------------------------------------------------------ 7
  gate.run(7, "purity separates random embeddings from clustered ones, engines agree", [&] {
    Rng rng(1001);
    EmbeddingSet noise;
    noise.d = 16;
    for (std::size_t i = 0; i < 1000; ++i) {
      PooledEmbedding p;
      p.packet_uid = i;
      p.label = "c" + std::to_string(i % 120);
      p.r.resize(noise.d);
      for (auto& v : p.r) v = rng.unit();
      noise.points.push_back(std::move(p));
    }
    auto brute = knn_purity(noise, 5, PurityMetric::euclidean, PurityEngine::brute);
    auto indexed = knn_purity(noise, 5, PurityMetric::euclidean, PurityEngine::indexed);
    bool ok = brute.per_point == indexed.per_point && brute.histogram == indexed.histogram &&
              brute.mean_purity <= 0.3 && brute.fraction_at(0) >= 0.7;

    auto cos_b = knn_purity(noise, 5, PurityMetric::cosine, PurityEngine::brute);
    auto cos_i = knn_purity(noise, 5, PurityMetric::cosine, PurityEngine::indexed);
    ok = ok && cos_b.per_point == cos_i.per_point && cos_b.histogram == cos_i.histogram;

    EmbeddingSet clustered;
    clustered.d = 16;
    for (std::size_t c = 0; c < 40; ++c) {
      std::vector<double> center(clustered.d);
      for (auto& v : center) v = rng.unit() * 100.0;
      for (std::size_t i = 0; i < 10; ++i) {
        PooledEmbedding p;
        p.packet_uid = c * 10 + i;
        p.label = "c" + std::to_string(c);
        p.r = center;
        for (auto& v : p.r) v += rng.unit() * 0.001;
        clustered.points.push_back(std::move(p));
      }
    }
    auto tight = knn_purity(clustered, 5);
    ok = ok && tight.mean_purity >= 4.5;

    return std::make_pair(ok, "120-class noise mean " + fmt(brute.mean_purity) +
                                  " fraction-at-0 " + fmt(brute.fraction_at(0)) +
                                  ", clustered mean " + fmt(tight.mean_purity) +
                                  ", brute == indexed");
  });

  // ------------------------------------------------------------------ 8
  gate.run(8, "QA answers re-derive from the hex context alone", [&] {
    SynthSpec spec;
    spec.n_classes = 3;
    spec.flows_per_class = 4;
    spec.packets_per_flow = 6;
    spec.seed = 1101;
    auto packets = decode_all(generate_trace(spec).packets);
    auto corpus = build_qa_corpus(packets, 400, QaMix{}, 1102);

    std::size_t mismatches = 0, yes = 0, no = 0;
    std::map<QaType, std::size_t> seen;
    bool ok = corpus.size() == 400;
    for (const auto& inst : corpus) {
      seen[inst.type]++;
      const auto bytes = hex_detokenize(inst.context);
      const Flat f = flat_parse(bytes);
      if (!f.ok) {
        ++mismatches;
        continue;
      }
      std::string want;
      switch (inst.type) {
        case QaType::tcp_checksum: {
          char buf[8];
          std::snprintf(buf, sizeof buf, "%02X%02X", bytes[f.transport + 16],
                        bytes[f.transport + 17]);
          want = buf;
          break;
        }
        case QaType::dst_address:
          want = dotted(bytes, f.net + 16);
          break;
        case QaType::src_address:
          want = dotted(bytes, f.net + 12);
          break;
        case QaType::ip_id:
          want = std::to_string(rd16(bytes, f.net + 4));
          break;
        case QaType::time_to_live:
          want = std::to_string(bytes[f.net + 8]);
          break;
        case QaType::checksum_correct:
          want = flat_ip_checksum_ok(bytes, f) ? "yes" : "no";
          (want == "yes" ? yes : no)++;
          break;
        case QaType::last_header_byte:
          want = std::to_string(bytes[f.transport - 1]);
          break;
        case QaType::payload_length:
          want = std::to_string(rd16(bytes, f.net + 2) - f.ihl - f.thl);
          break;
        case QaType::autoencode:
          want = inst.context;
          break;
      }
      if (want != inst.answer) ++mismatches;
    }
    ok = ok && mismatches == 0 && yes >= 5 && no >= 5;
    for (int t = 0; t < kQaTypeCount; ++t) {
      ok = ok && seen[static_cast<QaType>(t)] == 50;
    }

    // autoencode sits outside the sampled mix; check it directly
    Rng rng(1103);
    for (std::size_t i = 0; i < 10; ++i) {
      auto inst = generate_qa(packets[i], QaType::autoencode, rng);
      ok = ok && inst && inst->answer == inst->context &&
           hex_detokenize(inst->context) == packets[i].raw.bytes;
    }
    return std::make_pair(ok, "400 instances, 50 per type, " + std::to_string(mismatches) +
                                  " mismatches, checksum yes/no " + std::to_string(yes) + "/" +
                                  std::to_string(no));
  });

  // ------------------------------------------------------------------ 9
  gate.run(9, "evaluation metrics reproduce hand-computed confusion matrices", [&] {
    struct Case {
      std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
      double accuracy;
      double macro_f1;
    };
    const std::vector<Case> cases = {
        {{{5, 0}, {0, 5}}, 1.0, 1.0},
        {{{5, 0}, {5, 0}}, 0.5, 1.0 / 3.0},
        {{{2, 1}, {1, 2}}, 2.0 / 3.0, 2.0 / 3.0},
        {{{2, 1, 0}, {0, 3, 0}, {0, 1, 2}}, 7.0 / 9.0, 47.0 / 60.0},
        {{{4, 1, 0}, {2, 3, 0}, {0, 0, 0}}, 0.7, 46.0 / 99.0},
        {{{0, 3}, {0, 7}}, 0.7, 7.0 / 17.0},
    };
    bool ok = true;
    for (const auto& c : cases) {
      std::vector<int> y_true, y_pred;
      std::vector<std::string> classes;
      for (std::size_t i = 0; i < c.confusion.size(); ++i) {
        classes.push_back("class" + std::to_string(i));
        for (std::size_t j = 0; j < c.confusion[i].size(); ++j) {
          for (std::size_t n = 0; n < c.confusion[i][j]; ++n) {
            y_true.push_back(static_cast<int>(i));
            y_pred.push_back(static_cast<int>(j));
          }
        }
      }
      const auto ev = evaluate(y_true, y_pred, classes);
      ok = ok && std::fabs(ev.accuracy - c.accuracy) < 1e-12 &&
           std::fabs(ev.macro_f1 - c.macro_f1) < 1e-12;
      for (std::size_t i = 0; ok && i < c.confusion.size(); ++i) {
        for (std::size_t j = 0; j < c.confusion[i].size(); ++j) {
          ok = ok && ev.confusion[i][j] == c.confusion[i][j];
        }
      }
    }

    // majority voting: plurality, then summed probability, then lowest index
    Matrix flat = {{0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}, {0.5, 0.3, 0.2}};
    ok = ok && flow_majority_vote({0, 1, 1, 2}, flat, 3) == 1;
    Matrix lean1 = {{0.6, 0.4}, {0.6, 0.4}, {0.05, 0.95}, {0.05, 0.95}};
    ok = ok && flow_majority_vote({0, 0, 1, 1}, lean1, 2) == 1;
    Matrix even = {{0.5, 0.5}, {0.5, 0.5}};
    ok = ok && flow_majority_vote({0, 1}, even, 2) == 0;

    return std::make_pair(ok, "6 frozen matrices exact, vote tie breaks by proba then index");
  });

  // ------------------------------------------------------------------ 10
  gate.run(10, "random forest learns XOR and survives a save/load round trip", [&] {
    Matrix X;
    std::vector<int> y;
    for (int a = 0; a <= 1; ++a) {
      for (int b = 0; b <= 1; ++b) {
        for (int n = 0; n < 25; ++n) {
          X.push_back({static_cast<double>(a), static_cast<double>(b)});
          y.push_back(a ^ b);
        }
      }
    }
    ForestParams params;
    params.n_trees = 30;
    params.features_per_split = 1;
    const auto model = train_forest(X, y, {"left", "right"}, params, 1201);

    const Matrix corners = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    const std::vector<int> want = {0, 1, 1, 0};
    bool ok = predict(model, corners) == want;

    const auto proba = predict_proba(model, corners);
    for (const auto& row : proba) {
      double s = 0.0;
      for (double v : row) s += v;
      ok = ok && std::fabs(s - 1.0) <= 1e-9;
    }

    const auto imp = feature_importance(model);
    double isum = 0.0;
    for (double v : imp) isum += v;
    ok = ok && imp.size() == 2 && std::fabs(isum - 1.0) <= 1e-9;

    const fs::path pa = root / "c10-a.json";
    const fs::path pb = root / "c10-b.json";
    model.save(pa.string());
    const auto loaded = ForestModel::load(pa.string());
    loaded.save(pb.string());
    ok = ok && slurp(pa) == slurp(pb) && !slurp(pa).empty();
    ok = ok && predict(loaded, corners) == want;

    return std::make_pair(ok, "4/4 XOR corners, proba rows sum to 1, importance sum " +
                                  fmt(isum) + ", model file byte-stable");
  });

  std::printf("%d/10 criteria passed\n", 10 - gate.failures);
  return gate.failures;
}
