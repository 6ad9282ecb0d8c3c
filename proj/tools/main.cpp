// trafficbench command line: dataset construction, shortcut-removal
// transforms, header-feature models, and diagnostics, one subcommand each.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trafficbench/cleaning.hpp"
#include "trafficbench/dataset.hpp"
#include "trafficbench/embedding.hpp"
#include "trafficbench/errors.hpp"
#include "trafficbench/features.hpp"
#include "trafficbench/flow.hpp"
#include "trafficbench/forest.hpp"
#include "trafficbench/knn.hpp"
#include "trafficbench/log.hpp"
#include "trafficbench/metrics.hpp"
#include "trafficbench/packet.hpp"
#include "trafficbench/pcap.hpp"
#include "trafficbench/pipeline.hpp"
#include "trafficbench/qa.hpp"
#include "trafficbench/rng.hpp"
#include "trafficbench/synth.hpp"
#include "trafficbench/transforms.hpp"
#include "trafficbench/version.hpp"

namespace {

namespace fs = std::filesystem;
using namespace trafficbench;

std::vector<ParsedPacket> decode_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  const auto raws = read_pcap_files(paths);
  std::vector<ParsedPacket> packets;
  packets.reserve(raws.size());
  for (const auto& raw : raws) packets.push_back(decode(raw));
  return packets;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = csv.find(',', start);
    const auto end = comma == std::string::npos ? csv.size() : comma;
    if (end > start) parts.push_back(csv.substr(start, end - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return parts;
}

std::map<std::string, std::string> parse_kv_list(const std::string& csv) {
  std::map<std::string, std::string> out;
  for (const auto& part : split_csv(csv)) {
    const auto eq = part.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == part.size()) {
      throw ValidationError("expected key=value, got " + part);
    }
    out[part.substr(0, eq)] = part.substr(eq + 1);
  }
  return out;
}

std::vector<RawPacket> raw_of(const std::vector<ParsedPacket>& packets) {
  std::vector<RawPacket> raws;
  raws.reserve(packets.size());
  for (const auto& pkt : packets) raws.push_back(pkt.raw);
  return raws;
}

void print_json(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << '\n'; }

void cmd_ingest(const std::vector<std::string>& inputs, const std::string& out_dir) {
  const auto packets = decode_inputs(inputs);
  std::size_t malformed = 0;
  std::size_t truncated = 0;
  std::map<std::string, std::size_t> protocols;
  for (const auto& pkt : packets) {
    if (pkt.malformed != MalformKind::none) ++malformed;
    if (pkt.raw.truncated) ++truncated;
    ++protocols[classify_protocol(pkt, PortTable::defaults())];
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_pcap_file(fs::path(out_dir) / "ingested.pcap", raw_of(packets),
                    PcapPrecision::nano);
  }
  nlohmann::ordered_json j;
  j["packets"] = packets.size();
  j["malformed"] = malformed;
  j["truncated"] = truncated;
  j["protocols"] = protocols;
  print_json(j);
}

void cmd_clean(const std::vector<std::string>& inputs, const std::string& config,
               const std::string& out_dir) {
  FilterSet filters = FilterSet::defaults();
  if (!config.empty()) {
    const auto j = read_json_file(config);
    filters = FilterSet::from_json(j.contains("filters") ? j.at("filters") : j);
  }
  auto [kept, report] = apply_filters(decode_inputs(inputs), filters);
  fs::create_directories(out_dir);
  write_pcap_file(fs::path(out_dir) / "cleaned.pcap", raw_of(kept), PcapPrecision::nano);
  print_json(report.to_json());
}

void cmd_flows(const std::vector<std::string>& inputs, const std::string& labels_path,
               const std::string& out_dir) {
  const auto packets = decode_inputs(inputs);
  const LabelMap labels = LabelMap::from_file(labels_path);
  const auto flows = assemble_flows(packets, labels);
  std::size_t degenerate = 0;
  std::map<std::string, std::size_t> per_label;
  nlohmann::ordered_json listing = nlohmann::ordered_json::array();
  for (const auto& flow : flows) {
    if (flow.degenerate) ++degenerate;
    ++per_label[flow.label];
    nlohmann::ordered_json f;
    f["flow_uid"] = flow.flow_uid;
    f["key"] = flow_key_string(flow.key);
    f["label"] = flow.label;
    f["packets"] = flow.packet_uids.size();
    f["trace"] = flow.trace_id;
    listing.push_back(std::move(f));
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(out_dir + "/flows.json", listing.dump(2) + "\n");
  }
  nlohmann::ordered_json j;
  j["flows"] = flows.size();
  j["degenerate"] = degenerate;
  j["labels"] = per_label;
  print_json(j);
}

void cmd_split(const std::vector<std::string>& inputs, const std::string& labels_path,
               const std::string& policy, const std::string& ratios, int folds,
               std::uint64_t seed, std::size_t flow_cap, const std::string& out_dir) {
  const auto packets = decode_inputs(inputs);
  const LabelMap labels = LabelMap::from_file(labels_path);
  auto flows = assemble_flows(packets, labels);
  if (flow_cap > 0) flows = cap_long_flows(flows, flow_cap, seed);
  DatasetManifest manifest;
  if (policy == "per-flow") {
    manifest = split_per_flow(flows, ratios, seed);
  } else if (policy == "per-packet") {
    manifest = split_per_packet(flows, ratios, seed);
  } else {
    throw ValidationError("policy must be per-flow or per-packet, got " + policy);
  }
  if (folds >= 2) kfold(manifest, folds, seed);
  fs::create_directories(out_dir);
  manifest.write_file(out_dir + "/manifest.jsonl");

  std::map<std::string, std::size_t> per_partition;
  for (const auto& row : manifest.rows) ++per_partition[partition_name(row.partition)];
  nlohmann::ordered_json j;
  j["rows"] = manifest.rows.size();
  j["partitions"] = per_partition;
  print_json(j);
}

void cmd_sample(const std::string& manifest_path, bool balance, double fraction,
                std::size_t min_class_support, std::uint64_t seed,
                const std::string& out_dir) {
  DatasetManifest manifest = DatasetManifest::read_file(manifest_path);
  SamplingReport report;
  if (min_class_support > 0) filter_min_class_support(manifest, min_class_support, &report);
  if (balance) balance_undersample(manifest, seed, &report);
  if (fraction < 1.0) stratified_sample(manifest, fraction, seed, &report);
  fs::create_directories(out_dir);
  manifest.write_file(out_dir + "/manifest.jsonl");
  print_json(report.to_json());
}

void cmd_transform(const std::vector<std::string>& inputs, const std::string& preset,
                   const std::string& config, const std::string& scope_name,
                   std::uint64_t seed, const std::string& manifest_path,
                   const std::string& out_dir) {
  const auto packets = decode_inputs(inputs);
  const TransformScope scope = transform_scope_from(scope_name);
  TransformSpec spec;
  if (!config.empty()) {
    spec = TransformSpec::from_json(read_json_file(config));
  } else if (!preset.empty()) {
    spec = TransformSpec::preset(preset, scope, seed);
  } else {
    throw ValidationError("transform needs --transform <preset> or --config <spec.json>");
  }

  TransformReport report;
  std::vector<ParsedPacket> transformed;
  if (!manifest_path.empty()) {
    const auto manifest = DatasetManifest::read_file(manifest_path);
    transformed = apply_transform_stage(packets, manifest, {spec}, &report);
  } else {
    if (spec.scope != TransformScope::both) {
      throw ValidationError("scoped transforms need --manifest to know partitions");
    }
    const LabelMap labels{{}, {}, {}, std::string("unlabeled")};
    const auto flows = assemble_flows(packets, labels);
    std::unordered_map<std::uint64_t, std::uint64_t> flow_of;
    for (const auto& flow : flows) {
      for (std::uint64_t uid : flow.packet_uids) flow_of[uid] = flow.flow_uid;
    }
    transformed.reserve(packets.size());
    for (const auto& pkt : packets) {
      transformed.push_back(apply_transforms(pkt, spec, flow_of.at(pkt.raw.uid), &report));
    }
  }
  fs::create_directories(out_dir);
  write_pcap_file(fs::path(out_dir) / "transformed.pcap", raw_of(transformed),
                  PcapPrecision::nano);
  print_json(report.to_json());
}

void cmd_featurize(const std::vector<std::string>& inputs, const std::string& manifest_path,
                   const std::string& drop_csv, const std::string& out_dir) {
  const auto packets = decode_inputs(inputs);
  const auto manifest = DatasetManifest::read_file(manifest_path);
  const FeatureSchema schema = FeatureSchema::defaults().without(split_csv(drop_csv));
  const FeatureTable table = build_feature_table(packets, manifest, schema);
  fs::create_directories(out_dir);
  table.write_file(out_dir + "/features.csv");
  nlohmann::ordered_json j;
  j["rows"] = table.rows.size();
  j["columns"] = table.names.size();
  print_json(j);
}

void cmd_train(const std::string& features_path, const std::string& config,
               std::uint64_t seed, int threads, const std::string& out_dir) {
  const FeatureTable table = FeatureTable::read_file(features_path);
  ForestParams params;
  if (!config.empty()) {
    const auto j = read_json_file(config);
    params = ForestParams::from_json(j.contains("model") ? j.at("model") : j);
  }
  params.n_threads = threads;
  const auto classes = class_list(table);
  const auto train_m = matrix_of(table, classes, Partition::train);
  if (train_m.y.empty()) throw ValidationError("train partition is empty");
  ForestModel model = train_forest(train_m.x, train_m.y, classes, params, seed);
  model.feature_names = table.names;
  model.schema_fingerprint = schema_fingerprint(table.names);
  fs::create_directories(out_dir);
  model.save(out_dir + "/model.json");
  nlohmann::ordered_json j;
  j["classes"] = classes;
  j["trees"] = model.trees.size();
  j["features"] = table.names.size();
  print_json(j);
}

void cmd_eval(const std::string& features_path, const std::string& model_path,
              const std::string& partition_name_arg, const std::string& out_dir) {
  const FeatureTable table = FeatureTable::read_file(features_path);
  const ForestModel model = ForestModel::load(model_path);
  if (schema_fingerprint(table.names) != model.schema_fingerprint) {
    throw ValidationError(
        "feature schema does not match the model, offending key: schema_fingerprint");
  }
  const Partition partition = partition_from(partition_name_arg);
  const auto m = matrix_of(table, model.classes, partition);
  if (m.y.empty()) {
    throw ValidationError(std::string("no rows in partition ") + partition_name_arg);
  }
  const auto result = evaluate(m.y, predict(model, m.x), model.classes);
  fs::create_directories(out_dir);
  write_text(out_dir + "/report.json", result.to_json().dump(2) + "\n");
  std::ofstream conf(out_dir + "/confusion.csv", std::ios::binary);
  conf << "true\\pred";
  for (const auto& c : result.classes) conf << ',' << c;
  conf << '\n';
  for (std::size_t i = 0; i < result.classes.size(); ++i) {
    conf << result.classes[i];
    for (std::size_t k = 0; k < result.classes.size(); ++k) {
      conf << ',' << result.confusion[i][k];
    }
    conf << '\n';
  }
  print_json(result.to_json());
}

void cmd_purity(const std::string& emb_path, std::size_t k, const std::string& metric_name,
                const std::string& pool, const std::string& engine_name,
                const std::string& out_dir) {
  PurityMetric metric;
  if (metric_name == "euclidean") {
    metric = PurityMetric::euclidean;
  } else if (metric_name == "cosine") {
    metric = PurityMetric::cosine;
  } else {
    throw ValidationError("metric must be euclidean or cosine, got " + metric_name);
  }
  PurityEngine engine;
  if (engine_name == "auto") {
    engine = PurityEngine::auto_select;
  } else if (engine_name == "brute") {
    engine = PurityEngine::brute;
  } else if (engine_name == "indexed") {
    engine = PurityEngine::indexed;
  } else {
    throw ValidationError("engine must be auto, brute, or indexed, got " + engine_name);
  }

  std::ifstream probe(emb_path, std::ios::binary);
  if (!probe) throw ValidationError("cannot read " + emb_path);
  std::string magic;
  probe >> magic;
  probe.close();

  EmbeddingSet set;
  if (magic == "EMB") {
    set = EmbeddingSet::read_file(emb_path);
  } else if (magic == "EMBM") {
    const auto mats = read_embedding_matrices_file(emb_path);
    for (const auto& mat : mats) {
      PooledEmbedding p;
      p.packet_uid = mat.packet_uid;
      p.label = mat.label;
      if (pool == "first") {
        p.r = pool_first(mat);
      } else if (pool == "mean") {
        p.r = pool_mean(mat);
      } else if (pool == "luong") {
        p.r = pool_luong(mat, pool_mean(mat)).r;
      } else {
        throw ValidationError("pool must be first, mean, or luong, got " + pool);
      }
      set.d = p.r.size();
      set.points.push_back(std::move(p));
    }
  } else {
    throw ValidationError(emb_path + ": expected an EMB or EMBM header, got " + magic);
  }

  const auto result = knn_purity(set, k, metric, engine);
  nlohmann::ordered_json j;
  j["points"] = set.points.size();
  j["k"] = result.k;
  j["metric"] = metric_name;
  j["mean_purity"] = result.mean_purity;
  j["histogram"] = result.histogram;
  j["fraction_at_zero"] = result.fraction_at(0);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(out_dir + "/purity.json", j.dump(2) + "\n");
  }
  print_json(j);
}

void cmd_qagen(const std::vector<std::string>& inputs, std::size_t count,
               const std::string& shares_csv, std::uint64_t seed,
               const std::string& out_dir) {
  const auto packets = decode_inputs(inputs);
  QaMix mix;
  if (!shares_csv.empty()) {
    mix.shares.assign(kQaTypeCount, 0.0);
    for (const auto& [name, value] : parse_kv_list(shares_csv)) {
      const QaType type = qa_type_from(name);
      if (type == QaType::autoencode) {
        throw ValidationError("autoencode is not part of the question mix");
      }
      mix.shares[static_cast<std::size_t>(type)] = std::stod(value);
    }
  }
  const auto corpus = build_qa_corpus(packets, count, mix, seed);
  fs::create_directories(out_dir);
  write_qa_jsonl_file(out_dir + "/qa.jsonl", corpus);
  std::map<std::string, std::size_t> per_type;
  for (const auto& qa : corpus) ++per_type[qa_type_name(qa.type)];
  nlohmann::ordered_json j;
  j["written"] = corpus.size();
  j["types"] = per_type;
  print_json(j);
}

void cmd_synth(const std::string& config, std::size_t classes, std::size_t flows,
               std::size_t length, double geometric_mean, std::size_t cap,
               const std::string& signal, const std::string& extraneous_csv,
               std::uint64_t seed, const std::string& out_dir) {
  SynthSpec spec;
  if (!config.empty()) {
    spec = SynthSpec::from_json(read_json_file(config));
  } else {
    spec.n_classes = classes;
    spec.flows_per_class = flows;
    spec.packets_per_flow = length;
    spec.geometric_mean = geometric_mean;
    spec.packets_cap = cap;
    spec.signal = class_signal_from(signal);
    spec.seed = seed;
    for (const auto& [tag, value] : parse_kv_list(extraneous_csv)) {
      spec.extraneous[tag] = static_cast<std::size_t>(std::stoull(value));
    }
  }
  const auto result = generate_trace(spec);
  fs::create_directories(out_dir);
  write_synth(result, out_dir);
  nlohmann::ordered_json j;
  j["packets"] = result.packets.size();
  j["classes"] = spec.n_classes;
  j["flows_per_class"] = spec.flows_per_class;
  j["extraneous"] = result.extraneous_written;
  print_json(j);
}

void cmd_pipeline(const std::string& config_path, const CLI::App* sub, std::uint64_t seed,
                  const std::string& policy, const std::string& ratios, int folds,
                  int threads, const std::string& out_dir) {
  RunConfig config = RunConfig::from_file(config_path);
  if (sub->count("--seed") > 0) config.seed = seed;
  if (sub->count("--policy") > 0) config.policy = policy;
  if (sub->count("--ratios") > 0) config.ratios = ratios;
  if (sub->count("--folds") > 0) config.folds = folds;
  if (sub->count("--threads") > 0) config.threads = threads;
  if (sub->count("--out") > 0) config.out_dir = out_dir;
  const auto report = run_pipeline(config);
  print_json(report.to_json());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"leakage-aware benchmarking toolkit for traffic classification"};
  app.set_version_flag("--version", std::string(trafficbench::kToolVersion));
  app.require_subcommand(1);

  std::vector<std::string> inputs;
  std::string labels_path;
  std::string config;
  std::string manifest_path;
  std::string features_path;
  std::string model_path;
  std::string emb_path;
  std::string out_dir = ".";
  std::string policy = "per-flow";
  std::string ratios = "7:1";
  std::string scope = "both";
  std::string preset;
  std::string drop_csv;
  std::string partition = "test";
  std::string metric = "euclidean";
  std::string pool = "mean";
  std::string engine = "auto";
  std::string signal = "none";
  std::string shares_csv;
  std::string extraneous_csv;
  std::uint64_t seed = 1;
  int folds = 0;
  int threads = 1;
  std::size_t flow_cap = 0;
  std::size_t min_class_support = 0;
  std::size_t count = 1000;
  std::size_t k = 5;
  std::size_t classes = 2;
  std::size_t flows = 10;
  std::size_t length = 10;
  std::size_t cap = 0;
  double fraction = 1.0;
  double geometric_mean = 0.0;
  bool balance = false;

  auto* ingest = app.add_subcommand("ingest", "decode captures and summarize them");
  ingest->add_option("inputs", inputs, "pcap files")->required();
  ingest->add_option("--out", out_dir, "directory for the normalized pcap");

  auto* clean = app.add_subcommand("clean", "drop filtered packets");
  clean->add_option("inputs", inputs, "pcap files")->required();
  clean->add_option("--config", config, "filter set json");
  clean->add_option("--out", out_dir, "output directory");

  auto* flows_cmd = app.add_subcommand("flows", "assemble and summarize flows");
  flows_cmd->add_option("inputs", inputs, "pcap files")->required();
  flows_cmd->add_option("--labels", labels_path, "label map json")->required();
  flows_cmd->add_option("--out", out_dir, "directory for flows.json");

  auto* split = app.add_subcommand("split", "partition packets into train/val/test");
  split->add_option("inputs", inputs, "pcap files")->required();
  split->add_option("--labels", labels_path, "label map json")->required();
  split->add_option("--policy", policy, "per-flow or per-packet");
  split->add_option("--ratios", ratios, "partition ratios, e.g. 7:1 or 8:1:1");
  split->add_option("--folds", folds, "k-fold count over the train partition");
  split->add_option("--seed", seed, "master seed");
  split->add_option("--flow-cap", flow_cap, "cap packets kept per flow");
  split->add_option("--out", out_dir, "directory for manifest.jsonl");

  auto* sample = app.add_subcommand("sample", "subsample an existing manifest");
  sample->add_option("manifest", manifest_path, "manifest.jsonl")->required();
  sample->add_flag("--balance", balance, "undersample to the smallest class");
  sample->add_option("--fraction", fraction, "stratified keep fraction");
  sample->add_option("--min-class-support", min_class_support,
                     "drop classes with fewer units");
  sample->add_option("--seed", seed, "master seed");
  sample->add_option("--out", out_dir, "directory for manifest.jsonl");

  auto* transform = app.add_subcommand("transform", "apply shortcut-removal transforms");
  transform->add_option("inputs", inputs, "pcap files")->required();
  transform->add_option("--transform", preset, "preset name");
  transform->add_option("--config", config, "transform spec json");
  transform->add_option("--scope", scope, "train, test, or both");
  transform->add_option("--seed", seed, "master seed");
  transform->add_option("--manifest", manifest_path, "manifest for scope filtering");
  transform->add_option("--out", out_dir, "directory for transformed.pcap");

  auto* featurize = app.add_subcommand("featurize", "extract the header feature table");
  featurize->add_option("inputs", inputs, "pcap files")->required();
  featurize->add_option("--manifest", manifest_path, "manifest.jsonl")->required();
  featurize->add_option("--drop-features", drop_csv, "comma list, e.g. ip-octets");
  featurize->add_option("--out", out_dir, "directory for features.csv");

  auto* train = app.add_subcommand("train", "fit a random forest on train rows");
  train->add_option("--features", features_path, "features.csv")->required();
  train->add_option("--config", config, "forest parameter json");
  train->add_option("--seed", seed, "master seed");
  train->add_option("--threads", threads, "tree-training threads");
  train->add_option("--out", out_dir, "directory for model.json");

  auto* eval = app.add_subcommand("eval", "evaluate a model on a partition");
  eval->add_option("--features", features_path, "features.csv")->required();
  eval->add_option("--model", model_path, "model.json")->required();
  eval->add_option("--partition", partition, "train, val, or test");
  eval->add_option("--out", out_dir, "directory for report.json and confusion.csv");

  auto* purity = app.add_subcommand("purity", "k-NN label purity of an embedding file");
  purity->add_option("embeddings", emb_path, "EMB or EMBM file")->required();
  purity->add_option("--k", k, "neighbor count");
  purity->add_option("--metric", metric, "euclidean or cosine");
  purity->add_option("--pool", pool, "first, mean, or luong (EMBM input)");
  purity->add_option("--engine", engine, "auto, brute, or indexed");
  purity->add_option("--out", out_dir, "directory for purity.json")->default_val("");

  auto* qagen = app.add_subcommand("qagen", "generate header question-answer pairs");
  qagen->add_option("inputs", inputs, "pcap files")->required();
  qagen->add_option("--count", count, "instances to draw");
  qagen->add_option("--shares", shares_csv, "type=weight list over question types");
  qagen->add_option("--seed", seed, "master seed");
  qagen->add_option("--out", out_dir, "directory for qa.jsonl");

  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled capture");
  synth->add_option("--config", config, "generator spec json");
  synth->add_option("--classes", classes, "number of classes");
  synth->add_option("--flows", flows, "flows per class");
  synth->add_option("--length", length, "packets per flow");
  synth->add_option("--geometric-mean", geometric_mean, "geometric flow-length mean");
  synth->add_option("--cap", cap, "flow-length cap for geometric lengths");
  synth->add_option("--signal", signal, "none, server-ip, or payload-length");
  synth->add_option("--extraneous", extraneous_csv, "tag=count list (arp, mdns, ntp)");
  synth->add_option("--seed", seed, "master seed");
  synth->add_option("--out", out_dir, "directory for synth.pcap and labels.json");

  auto* pipeline = app.add_subcommand("pipeline", "run the full benchmark pipeline");
  pipeline->add_option("--config", config, "run config json")->required();
  pipeline->add_option("--seed", seed, "override the config seed");
  pipeline->add_option("--policy", policy, "override the split policy");
  pipeline->add_option("--ratios", ratios, "override the ratios");
  pipeline->add_option("--folds", folds, "override the fold count");
  pipeline->add_option("--threads", threads, "override the thread count");
  pipeline->add_option("--out", out_dir, "override the output directory");

  ingest->callback([&] { cmd_ingest(inputs, ingest->count("--out") ? out_dir : ""); });
  clean->callback([&] { cmd_clean(inputs, config, out_dir); });
  flows_cmd->callback(
      [&] { cmd_flows(inputs, labels_path, flows_cmd->count("--out") ? out_dir : ""); });
  split->callback(
      [&] { cmd_split(inputs, labels_path, policy, ratios, folds, seed, flow_cap, out_dir); });
  sample->callback(
      [&] { cmd_sample(manifest_path, balance, fraction, min_class_support, seed, out_dir); });
  transform->callback(
      [&] { cmd_transform(inputs, preset, config, scope, seed, manifest_path, out_dir); });
  featurize->callback([&] { cmd_featurize(inputs, manifest_path, drop_csv, out_dir); });
  train->callback([&] { cmd_train(features_path, config, seed, threads, out_dir); });
  eval->callback([&] { cmd_eval(features_path, model_path, partition, out_dir); });
  purity->callback([&] { cmd_purity(emb_path, k, metric, pool, engine, out_dir); });
  qagen->callback([&] { cmd_qagen(inputs, count, shares_csv, seed, out_dir); });
  synth->callback([&] {
    cmd_synth(config, classes, flows, length, geometric_mean, cap, signal, extraneous_csv,
              seed, out_dir);
  });
  pipeline->callback(
      [&] { cmd_pipeline(config, pipeline, seed, policy, ratios, folds, threads, out_dir); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const trafficbench::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
