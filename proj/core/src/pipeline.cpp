#include "trafficbench/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <unordered_map>

#include "trafficbench/errors.hpp"
#include "trafficbench/flow.hpp"
#include "trafficbench/knn.hpp"
#include "trafficbench/log.hpp"
#include "trafficbench/pcap.hpp"
#include "trafficbench/rng.hpp"
#include "trafficbench/version.hpp"

namespace trafficbench {

SamplingSpec SamplingSpec::from_json(const nlohmann::json& j) {
  SamplingSpec s;
  if (j.contains("flow_cap")) s.flow_cap = j.at("flow_cap").get<std::size_t>();
  if (j.contains("balance")) s.balance = j.at("balance").get<bool>();
  if (j.contains("fraction")) s.fraction = j.at("fraction").get<double>();
  if (j.contains("min_class_support")) {
    s.min_class_support = j.at("min_class_support").get<std::size_t>();
  }
  return s;
}

nlohmann::ordered_json SamplingSpec::to_json() const {
  nlohmann::ordered_json j;
  j["flow_cap"] = flow_cap;
  j["balance"] = balance;
  j["fraction"] = fraction;
  j["min_class_support"] = min_class_support;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  if (j.contains("inputs")) c.inputs = j.at("inputs").get<std::vector<std::string>>();
  if (j.contains("labels")) c.labels_path = j.at("labels").get<std::string>();
  if (j.contains("clean")) c.clean = j.at("clean").get<bool>();
  if (j.contains("filters")) c.filters = FilterSet::from_json(j.at("filters"));
  if (j.contains("policy")) c.policy = j.at("policy").get<std::string>();
  if (j.contains("ratios")) c.ratios = j.at("ratios").get<std::string>();
  if (j.contains("folds")) c.folds = j.at("folds").get<int>();
  if (!j.contains("seed")) throw ValidationError("run config needs a seed");
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("sampling")) c.sampling = SamplingSpec::from_json(j.at("sampling"));
  if (j.contains("transforms")) {
    std::size_t stage = 0;
    for (const auto& t : j.at("transforms")) {
      TransformSpec spec = TransformSpec::from_json(t);
      if (!t.contains("seed")) {
        spec.seed = derive_seed(c.seed, "transform.stage", stage);
      }
      c.transforms.push_back(std::move(spec));
      ++stage;
    }
  }
  if (j.contains("drop_features")) {
    c.drop_features = j.at("drop_features").get<std::vector<std::string>>();
  }
  if (j.contains("model")) c.model = ForestParams::from_json(j.at("model"));
  if (j.contains("knn_k")) c.knn_k = j.at("knn_k").get<std::size_t>();
  if (j.contains("vote_first_n")) c.vote_first_n = j.at("vote_first_n").get<std::size_t>();
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
  if (c.policy != "per-flow" && c.policy != "per-packet") {
    throw ValidationError("policy must be per-flow or per-packet, got " + c.policy);
  }
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config parse failure: ") + e.what());
  }
  return from_json(j);
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["inputs"] = inputs;
  j["labels"] = labels_path;
  j["clean"] = clean;
  j["filters"] = filters.to_json();
  j["policy"] = policy;
  j["ratios"] = ratios;
  j["folds"] = folds;
  j["seed"] = seed;
  j["sampling"] = sampling.to_json();
  nlohmann::ordered_json transforms_j = nlohmann::ordered_json::array();
  for (const auto& t : transforms) transforms_j.push_back(t.to_json());
  j["transforms"] = std::move(transforms_j);
  j["drop_features"] = drop_features;
  j["model"] = model.to_json();
  j["knn_k"] = knn_k;
  j["vote_first_n"] = vote_first_n;
  j["threads"] = threads;
  j["out"] = out_dir;
  return j;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(to_json().dump()); }

nlohmann::ordered_json RunReport::to_json() const {
  nlohmann::ordered_json j;
  j["tool_version"] = tool_version;
  j["config_hash"] = config_hash;
  j["cleaning"] = cleaning.is_null() ? nlohmann::ordered_json() : cleaning;
  j["sampling"] = sampling.is_null() ? nlohmann::ordered_json() : sampling;
  j["transforms"] = transform_counts.is_null() ? nlohmann::ordered_json() : transform_counts;
  nlohmann::ordered_json folds_j;
  nlohmann::ordered_json fold_list = nlohmann::ordered_json::array();
  for (const auto& r : fold_results) fold_list.push_back(r.to_json());
  folds_j["results"] = std::move(fold_list);
  folds_j["accuracy_mean"] = fold_accuracy_mean;
  folds_j["accuracy_std"] = fold_accuracy_std;
  folds_j["macro_f1_mean"] = fold_macro_f1_mean;
  folds_j["macro_f1_std"] = fold_macro_f1_std;
  j["folds"] = std::move(folds_j);
  j["val"] = val_result ? val_result->to_json() : nlohmann::ordered_json();
  j["test"] = test_result ? test_result->to_json() : nlohmann::ordered_json();
  j["knn"] = knn_result ? knn_result->to_json() : nlohmann::ordered_json();
  j["vote"] = vote_result ? vote_result->to_json() : nlohmann::ordered_json();
  nlohmann::ordered_json imp;
  double imp_sum = 0.0;
  for (double v : importance) imp_sum += v;
  if (imp_sum > 0.0) {
    for (std::size_t i = 0; i < importance.size(); ++i) {
      imp[feature_names[i]] = importance[i];
    }
  }
  j["importance"] = std::move(imp);
  return j;
}

std::vector<ParsedPacket> apply_transform_stage(const std::vector<ParsedPacket>& packets,
                                                const DatasetManifest& manifest,
                                                const std::vector<TransformSpec>& specs,
                                                TransformReport* report) {
  if (specs.empty()) return packets;
  std::unordered_map<std::uint64_t, const ManifestRow*> row_of;
  row_of.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) row_of[row.packet_uid] = &row;

  std::vector<ParsedPacket> out;
  out.reserve(packets.size());
  for (const auto& pkt : packets) {
    auto it = row_of.find(pkt.raw.uid);
    if (it == row_of.end()) {
      out.push_back(pkt);
      continue;
    }
    const ManifestRow& row = *it->second;
    ParsedPacket cur = pkt;
    for (const auto& spec : specs) {
      const bool applies = spec.scope == TransformScope::both ||
                           (spec.scope == TransformScope::test_only &&
                            row.partition == Partition::test) ||
                           (spec.scope == TransformScope::train_only &&
                            row.partition != Partition::test);
      if (applies) cur = apply_transforms(cur, spec, row.flow_uid, report);
    }
    out.push_back(std::move(cur));
  }
  return out;
}

std::vector<std::string> class_list(const FeatureTable& table) {
  std::vector<std::string> classes;
  for (const auto& row : table.rows) classes.push_back(row.label);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

LabeledMatrix matrix_of(const FeatureTable& table, const std::vector<std::string>& classes,
                        Partition partition, int fold, bool exclude_fold) {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    index[classes[i]] = static_cast<int>(i);
  }
  LabeledMatrix m;
  for (const auto& row : table.rows) {
    if (row.partition != partition) continue;
    if (fold >= 0 && (exclude_fold ? row.fold == fold : row.fold != fold)) continue;
    auto it = index.find(row.label);
    if (it == index.end()) {
      throw ValidationError("label absent from the class list, offending key: label=" +
                            row.label);
    }
    m.x.push_back(row.values);
    m.y.push_back(it->second);
    m.packet_uids.push_back(row.packet_uid);
    m.flow_uids.push_back(row.flow_uid);
  }
  return m;
}

namespace {

void write_confusion_csv(const std::string& path, const EvalResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << "true\\pred";
  for (const auto& c : result.classes) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < result.classes.size(); ++i) {
    out << result.classes[i];
    for (std::size_t k = 0; k < result.classes.size(); ++k) {
      out << ',' << result.confusion[i][k];
    }
    out << '\n';
  }
}

}  // namespace

RunReport run_pipeline(const RunConfig& config) {
  namespace fs = std::filesystem;
  if (config.inputs.empty()) throw ValidationError("run config lists no inputs");
  if (config.labels_path.empty()) throw ValidationError("run config needs a label map");
  fs::create_directories(config.out_dir);

  RunReport report;
  report.tool_version = kToolVersion;
  report.config_hash = config.hash();

  std::vector<fs::path> paths(config.inputs.begin(), config.inputs.end());
  const auto raws = read_pcap_files(paths);
  std::vector<ParsedPacket> packets;
  packets.reserve(raws.size());
  for (const auto& raw : raws) packets.push_back(decode(raw));
  log_info("decoded " + std::to_string(packets.size()) + " packets");

  if (config.clean) {
    auto [kept, cleaning_report] = apply_filters(std::move(packets), config.filters);
    packets = std::move(kept);
    report.cleaning = cleaning_report.to_json();
  }

  const LabelMap labels = LabelMap::from_file(config.labels_path);
  auto flows = assemble_flows(packets, labels);

  SamplingReport sampling_report;
  if (config.sampling.flow_cap > 0) {
    flows = cap_long_flows(flows, config.sampling.flow_cap, config.seed, &sampling_report);
  }

  DatasetManifest manifest = config.policy == "per-flow"
                                 ? split_per_flow(flows, config.ratios, config.seed)
                                 : split_per_packet(flows, config.ratios, config.seed);

  if (config.sampling.min_class_support > 0) {
    filter_min_class_support(manifest, config.sampling.min_class_support, &sampling_report);
  }
  if (config.sampling.balance) {
    balance_undersample(manifest, config.seed, &sampling_report);
  }
  if (config.sampling.fraction < 1.0) {
    stratified_sample(manifest, config.sampling.fraction, config.seed, &sampling_report);
  }
  if (config.folds >= 2) kfold(manifest, config.folds, config.seed);
  report.sampling = sampling_report.to_json();

  manifest.write_file(config.out_dir + "/manifest.jsonl");

  TransformReport transform_report;
  const auto transformed =
      apply_transform_stage(packets, manifest, config.transforms, &transform_report);
  report.transform_counts = transform_report.to_json();

  const FeatureSchema schema = FeatureSchema::defaults().without(config.drop_features);
  const FeatureTable table = build_feature_table(transformed, manifest, schema);
  table.write_file(config.out_dir + "/features.csv");

  const auto classes = class_list(table);
  if (classes.empty()) throw ValidationError("no labeled rows survived the pipeline");

  ForestParams params = config.model;
  params.n_threads = config.threads;

  if (config.folds >= 2) {
    double acc_sum = 0.0;
    double f1_sum = 0.0;
    for (int f = 0; f < config.folds; ++f) {
      const auto train_m = matrix_of(table, classes, Partition::train, f, true);
      const auto held_m = matrix_of(table, classes, Partition::train, f, false);
      if (train_m.y.empty() || held_m.y.empty()) {
        log_warn("fold " + std::to_string(f) + " is empty, skipping");
        continue;
      }
      const auto fold_model =
          train_forest(train_m.x, train_m.y, classes, params,
                       derive_seed(config.seed, "train.fold", static_cast<std::uint64_t>(f)));
      const auto result = evaluate(held_m.y, predict(fold_model, held_m.x), classes);
      acc_sum += result.accuracy;
      f1_sum += result.macro_f1;
      report.fold_results.push_back(result);
    }
    const double n = static_cast<double>(report.fold_results.size());
    if (n > 0) {
      report.fold_accuracy_mean = acc_sum / n;
      report.fold_macro_f1_mean = f1_sum / n;
      double acc_var = 0.0;
      double f1_var = 0.0;
      for (const auto& r : report.fold_results) {
        acc_var += (r.accuracy - report.fold_accuracy_mean) *
                   (r.accuracy - report.fold_accuracy_mean);
        f1_var += (r.macro_f1 - report.fold_macro_f1_mean) *
                  (r.macro_f1 - report.fold_macro_f1_mean);
      }
      report.fold_accuracy_std = std::sqrt(acc_var / n);
      report.fold_macro_f1_std = std::sqrt(f1_var / n);
    }
  }

  const auto train_m = matrix_of(table, classes, Partition::train);
  if (train_m.y.empty()) throw ValidationError("train partition is empty");
  ForestModel model = train_forest(train_m.x, train_m.y, classes, params,
                                   derive_seed(config.seed, "train.final"));
  model.feature_names = schema.names();
  model.schema_fingerprint = schema_fingerprint(model.feature_names);
  model.save(config.out_dir + "/model.json");

  report.feature_names = model.feature_names;
  report.importance = feature_importance(model);

  const auto val_m = matrix_of(table, classes, Partition::val);
  if (!val_m.y.empty()) {
    report.val_result = evaluate(val_m.y, predict(model, val_m.x), classes);
  }

  const auto test_m = matrix_of(table, classes, Partition::test);
  if (!test_m.y.empty()) {
    const auto preds = predict(model, test_m.x);
    report.test_result = evaluate(test_m.y, preds, classes);
    write_confusion_csv(config.out_dir + "/confusion.csv", *report.test_result);

    if (config.knn_k > 0) {
      const auto knn_preds =
          knn_classify(train_m.x, train_m.y, test_m.x, config.knn_k, classes.size());
      report.knn_result = evaluate(test_m.y, knn_preds, classes);
    }

    if (config.vote_first_n > 0) {
      const auto probas = predict_proba(model, test_m.x);
      std::vector<std::uint64_t> flow_order;
      std::unordered_map<std::uint64_t, std::vector<std::size_t>> rows_of;
      for (std::size_t i = 0; i < test_m.flow_uids.size(); ++i) {
        auto [it, inserted] = rows_of.try_emplace(test_m.flow_uids[i]);
        if (inserted) flow_order.push_back(test_m.flow_uids[i]);
        it->second.push_back(i);
      }
      std::vector<int> flow_true;
      std::vector<int> flow_pred;
      for (std::uint64_t flow_uid : flow_order) {
        const auto& rows = rows_of[flow_uid];
        std::vector<int> votes;
        std::vector<std::vector<double>> vote_probas;
        for (std::size_t i = 0; i < rows.size() && i < config.vote_first_n; ++i) {
          votes.push_back(preds[rows[i]]);
          vote_probas.push_back(probas[rows[i]]);
        }
        flow_true.push_back(test_m.y[rows.front()]);
        flow_pred.push_back(flow_majority_vote(votes, vote_probas, classes.size()));
      }
      report.vote_result = evaluate(flow_true, flow_pred, classes);
    }
  }

  std::ofstream out(config.out_dir + "/report.json", std::ios::binary);
  if (!out) throw ValidationError("cannot write " + config.out_dir + "/report.json");
  out << report.to_json().dump(2) << '\n';
  return report;
}

}  // namespace trafficbench
