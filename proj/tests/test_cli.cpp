#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "tb_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Runs the installed binary with stdout/stderr captured to files.
RunResult run_cli(const std::string& args) {
  const char* cli = std::getenv("TRAFFICBENCH_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "TRAFFICBENCH_CLI must point at the binary");
  const auto out_file = work_dir() / "stdout.txt";
  const auto err_file = work_dir() / "stderr.txt";
  const std::string cmd = std::string("\"") + cli + "\" " + args + " > \"" +
                          out_file.string() + "\" 2> \"" + err_file.string() + "\"";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

json parse_stdout(const RunResult& r) {
  INFO("stdout: ", r.out);
  INFO("stderr: ", r.err);
  REQUIRE(r.code == 0);
  return json::parse(r.out);  // throws if anything but json reached stdout
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

/// Generates the shared trace on first use so the tests do not depend on
/// execution order.
fs::path trace_dir() {
  const auto dir = work_dir() / "trace";
  if (!fs::exists(dir / "synth.pcap")) {
    const auto r = run_cli(
        "synth --classes 3 --flows 6 --length 5 --seed 11 --extraneous arp=2,ntp=1 --out " +
        q(dir));
    REQUIRE(r.code == 0);
  }
  return dir;
}

}  // namespace

TEST_CASE("exit codes distinguish usage, validation, and success") {
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("--version").code == 0);
  CHECK(run_cli("frobnicate").code == 2);            // unknown subcommand
  CHECK(run_cli("split").code == 2);                 // missing required options
  CHECK(run_cli("ingest definitely-missing.pcap").code == 2);

  const auto bad_policy = run_cli("split definitely-missing.pcap --labels x --policy per-byte");
  CHECK(bad_policy.code == 2);
  CHECK(bad_policy.out.empty());
  CHECK(bad_policy.err.find("error:") != std::string::npos);
}

TEST_CASE("the subcommands chain into a full experiment") {
  const auto dir = work_dir();

  const auto synth = parse_stdout(run_cli(
      "synth --classes 3 --flows 6 --length 5 --seed 11 --extraneous arp=2,ntp=1 --out " +
      q(dir / "synth_out")));
  CHECK(synth.at("packets") == 3 * 6 * 5 + 3);
  CHECK(synth.at("extraneous").at("arp") == 2);
  REQUIRE(fs::exists(dir / "synth_out" / "synth.pcap"));
  REQUIRE(fs::exists(dir / "synth_out" / "labels.json"));

  const auto pcap = q(dir / "synth_out" / "synth.pcap");
  const auto labels = q(dir / "synth_out" / "labels.json");

  const auto ingest = parse_stdout(run_cli("ingest " + pcap));
  CHECK(ingest.at("packets") == 93);
  CHECK(ingest.at("malformed") == 0);
  CHECK(ingest.at("protocols").at("tls") == 90);
  CHECK(ingest.at("protocols").at("arp") == 2);

  const auto clean = parse_stdout(run_cli("clean " + pcap + " --out " + q(dir / "clean")));
  CHECK(clean.at("total") == 93);
  CHECK(clean.at("kept") == 90);
  REQUIRE(fs::exists(dir / "clean" / "cleaned.pcap"));
  const auto cleaned = q(dir / "clean" / "cleaned.pcap");

  const auto flows = parse_stdout(run_cli("flows " + cleaned + " --labels " + labels));
  CHECK(flows.at("flows") == 18);

  const auto split = parse_stdout(
      run_cli("split " + cleaned + " --labels " + labels +
              " --policy per-packet --ratios 8:1:1 --seed 2 --out " + q(dir / "split")));
  CHECK(split.at("rows") == 90);
  CHECK(split.at("partitions").at("train") == 72);
  CHECK(split.at("partitions").at("val") == 9);
  CHECK(split.at("partitions").at("test") == 9);
  const auto manifest = q(dir / "split" / "manifest.jsonl");

  const auto transform = parse_stdout(
      run_cli("transform " + cleaned + " --transform anonymize-explicit-ids --manifest " +
              manifest + " --seed 2 --out " + q(dir / "transform")));
  REQUIRE(transform.is_array());
  CHECK(transform[0].at("affected") == 90);
  const auto transformed = q(dir / "transform" / "transformed.pcap");

  const auto featurize = parse_stdout(
      run_cli("featurize " + transformed + " --manifest " + manifest +
              " --drop-features ip-octets --out " + q(dir / "features")));
  CHECK(featurize.at("rows") == 90);
  CHECK(featurize.at("columns") == 36);
  const auto features = q(dir / "features" / "features.csv");

  const auto train = parse_stdout(run_cli(
      "train --features " + features + " --seed 7 --out " + q(dir / "model")));
  CHECK(train.at("classes").size() == 3);
  CHECK(train.at("trees") == 100);

  const auto eval = parse_stdout(
      run_cli("eval --features " + features + " --model " + q(dir / "model" / "model.json") +
              " --partition test --out " + q(dir / "eval")));
  CHECK(eval.at("accuracy").is_number());
  CHECK(eval.at("confusion").size() == 3);
  REQUIRE(fs::exists(dir / "eval" / "confusion.csv"));
  const auto confusion = slurp(dir / "eval" / "confusion.csv");
  CHECK(confusion.rfind("true\\pred,", 0) == 0);

  SUBCASE("eval rejects a feature file whose schema differs") {
    const auto mismatched = parse_stdout(
        run_cli("featurize " + transformed + " --manifest " + manifest + " --out " +
                q(dir / "features_full")));
    CHECK(mismatched.at("columns") == 76);
    const auto r = run_cli("eval --features " + q(dir / "features_full" / "features.csv") +
                           " --model " + q(dir / "model" / "model.json"));
    CHECK(r.code == 2);
    CHECK(r.err.find("schema_fingerprint") != std::string::npos);
  }
}

TEST_CASE("qagen writes a parsable jsonl corpus") {
  const auto dir = work_dir();
  const auto pcap = q(trace_dir() / "synth.pcap");

  const auto result = parse_stdout(
      run_cli("qagen " + pcap + " --count 24 --shares tcp_checksum=1,ip_id=2 --seed 4 --out " +
              q(dir / "qa")));
  CHECK(result.at("written") == 24);
  CHECK(result.at("types").at("tcp_checksum") == 8);
  CHECK(result.at("types").at("ip_id") == 16);

  std::ifstream in(dir / "qa" / "qa.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = json::parse(line);
    CHECK(j.at("text").get<std::string>().find("</s>") != std::string::npos);
    ++lines;
  }
  CHECK(lines == 24);
}

TEST_CASE("purity reads a hand-written embedding file") {
  const auto dir = work_dir();
  const auto emb = dir / "points.emb";
  {
    std::ofstream out(emb);
    out << "EMB v1 6 2\n";
    out << "0 a 0.0 0.0\n";
    out << "1 a 0.1 0.0\n";
    out << "2 a 0.2 0.0\n";
    out << "3 b 9.0 0.0\n";
    out << "4 b 9.1 0.0\n";
    out << "5 b 9.2 0.0\n";
  }
  const auto result = parse_stdout(run_cli("purity " + q(emb) + " --k 2 --out " + q(dir / "purity")));
  CHECK(result.at("points") == 6);
  CHECK(result.at("mean_purity") == 2.0);
  CHECK(result.at("fraction_at_zero") == 0.0);
  CHECK(fs::exists(dir / "purity" / "purity.json"));

  SUBCASE("token matrices pool before scoring") {
    const auto embm = dir / "tokens.embm";
    {
      std::ofstream out(embm);
      out << "EMBM v1\n";
      out << "0 a 2 2\n1.0 1.0\n3.0 1.0\n";    // mean (2, 1)
      out << "1 a 1 2\n2.0 1.2\n";
      out << "2 b 2 2\n8.0 0.0\n10.0 0.0\n";   // mean (9, 0)
      out << "3 b 1 2\n9.3 0.1\n";
    }
    const auto pooled = parse_stdout(run_cli("purity " + q(embm) + " --k 1 --pool mean"));
    CHECK(pooled.at("points") == 4);
    CHECK(pooled.at("mean_purity") == 1.0);

    const auto first = parse_stdout(run_cli("purity " + q(embm) + " --k 1 --pool first"));
    CHECK(first.at("mean_purity") == 1.0);

    const auto luong = parse_stdout(run_cli("purity " + q(embm) + " --k 1 --pool luong"));
    CHECK(luong.at("points") == 4);
  }

  SUBCASE("a bad magic line is a validation error") {
    const auto bogus = dir / "bogus.emb";
    std::ofstream(bogus) << "NOPE v1\n";
    const auto r = run_cli("purity " + q(bogus));
    CHECK(r.code == 2);
  }
}

TEST_CASE("pipeline runs from a config file with overrides") {
  const auto dir = work_dir();
  const auto trace = trace_dir();

  const json config = {
      {"inputs", {(trace / "synth.pcap").string()}},
      {"labels", (trace / "labels.json").string()},
      {"policy", "per-packet"},
      {"ratios", "8:1:1"},
      {"seed", 3},
      {"model", {{"n_trees", 10}}},
      {"out", (dir / "run").string()},
  };
  const auto config_path = dir / "run.json";
  std::ofstream(config_path) << config.dump(2);

  const auto report = parse_stdout(run_cli("pipeline --config " + q(config_path)));
  CHECK(report.at("test").at("accuracy").is_number());
  CHECK(report.at("config_hash").is_number());
  REQUIRE(fs::exists(dir / "run" / "report.json"));
  REQUIRE(fs::exists(dir / "run" / "model.json"));

  SUBCASE("overrides change the effective config") {
    const auto overridden = parse_stdout(
        run_cli("pipeline --config " + q(config_path) + " --policy per-flow --ratios 7:1 --out " +
                q(dir / "run2")));
    CHECK(overridden.at("config_hash") != report.at("config_hash"));
    CHECK(overridden.at("val").is_null());  // a 7:1 split has no val partition
  }
}
