// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lid/cli.hpp"
#include "lid/error.hpp"

using namespace lid;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result lid_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lid");
  std::ostringstream out, err;
  const int code = cli::main(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("lid_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Four synthetic classes in two steps, one epoch: fast enough for unit tests.
const std::vector<std::string> kSmall{"--synthetic", "--classes", "4", "--epochs", "1", "--seed", "3"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help exits cleanly") {
    const auto r = lid_cli({"--help"});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find("ablate") != std::string::npos);
  }

  TEST_CASE("a subcommand is required and unknown flags are config errors") {
    CHECK(lid_cli({}).code == cli::kExitConfig);
    CHECK(lid_cli({"run", "--bogus"}).code == cli::kExitConfig);
  }

  TEST_CASE("prepare writes five synthetic steps") {
    const auto dir = scratch("prep");
    const auto r = lid_cli({"prepare", "--synthetic", "--seed", "1", "--out", dir.string()});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(r.out.find("step 5:") != std::string::npos);
    CHECK(r.out.find("step 6:") == std::string::npos);
    const json m = load(dir / "manifest.json");
    CHECK(m.at("steps").size() == 5);
    CHECK(fs::exists(dir / "step_05" / "test.jsonl"));
    fs::remove_all(dir);
  }

  TEST_CASE("a missing dataset exits 2 and names the path") {
    const auto r = lid_cli({"prepare", "--data", "/nonexistent/intents.jsonl", "--out", scratch("x").string()});
    CHECK(r.code == cli::kExitConfig);
    CHECK(r.err.find("/nonexistent/intents.jsonl") != std::string::npos);
  }

  TEST_CASE("prepare from a JSONL file then run on the schedule") {
    const auto dir = scratch("jsonl");
    fs::create_directories(dir);
    {
      std::ofstream f(dir / "data.jsonl");
      const char* words[] = {"alarm wake morning", "weather rain sunny", "music play song"};
      const char* labels[] = {"alarm", "weather", "music"};
      for (int i = 0; i < 30; ++i) {
        f << R"({"text": ")" << words[i % 3] << " x" << i << R"(", "label": ")" << labels[i % 3] << "\"}\n";
      }
    }
    const auto prep = lid_cli({"prepare", "--data", (dir / "data.jsonl").string(), "--per-step", "2", "--out",
                               (dir / "sched").string()});
    REQUIRE(prep.code == cli::kExitOk);
    const auto run = lid_cli({"run", "--schedule", (dir / "sched").string(), "--strategy", "emr", "--epochs", "2",
                              "--out", (dir / "run").string()});
    REQUIRE(run.code == cli::kExitOk);
    CHECK(load(dir / "run" / "report.json").at("acc").size() == 2);
    CHECK(lid_cli({"run", "--schedule", (dir / "sched").string(), "--per-step", "1"}).code == cli::kExitConfig);
    fs::remove_all(dir);
  }

  TEST_CASE("run writes artefacts and repeats byte-identically") {
    const auto a = scratch("run_a"), b = scratch("run_b"), c = scratch("run_c");
    REQUIRE(lid_cli(with({"run", "--strategy", "msr", "--out", a.string()}, kSmall)).code == cli::kExitOk);
    REQUIRE(lid_cli(with({"run", "--strategy", "msr", "--out", b.string()}, kSmall)).code == cli::kExitOk);
    for (const char* f : {"report.json", "curve.csv", "timings.json", "memory/step_01.json", "memory/step_02.json"}) {
      CHECK(fs::exists(a / f));
    }
    CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
    CHECK(slurp(a / "curve.csv") == slurp(b / "curve.csv"));
    CHECK(slurp(a / "memory/step_02.json") == slurp(b / "memory/step_02.json"));

    // the stored config reproduces the run on its own
    const auto r = lid_cli({"run", "--config", (a / "report.json").string(), "--out", c.string()});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(slurp(a / "report.json") == slurp(c / "report.json"));
    for (const auto& d : {a, b, c}) fs::remove_all(d);
  }

  TEST_CASE("component flags show up in the config echo") {
    const auto dir = scratch("noicml");
    REQUIRE(lid_cli(with({"run", "--no-icml", "--beta1", "0.5", "--out", dir.string()}, kSmall)).code ==
            cli::kExitOk);
    const json cfg = load(dir / "report.json").at("config");
    CHECK(cfg.at("strategy").at("use_icml") == false);
    CHECK(cfg.at("strategy").at("use_fkd") == true);
    CHECK(cfg.at("strategy").at("name") == "msr-no-icml");
    CHECK(cfg.at("hyperparams").at("beta1") == 0.5);
    CHECK_FALSE(cfg.contains("out_dir"));
    fs::remove_all(dir);
  }

  TEST_CASE("bad values are config errors") {
    CHECK(lid_cli(with({"run", "--strategy", "nope"}, kSmall)).code == cli::kExitConfig);
    CHECK(lid_cli(with({"run", "--lr", "-1"}, kSmall)).code == cli::kExitConfig);
    CHECK(lid_cli({"run", "--synthetic", "--data", "x.jsonl"}).code == cli::kExitConfig);
    CHECK(lid_cli({"run", "--config", "/nonexistent/cfg.json"}).code == cli::kExitConfig);
  }

  TEST_CASE("ablate runs every variant and averages seeds") {
    const auto dir = scratch("ablate");
    const auto r = lid_cli(with({"ablate", "--seeds", "3,4", "--out", dir.string()}, kSmall));
    REQUIRE(r.code == cli::kExitOk);
    const std::string csv = slurp(dir / "ablation.csv");
    CHECK(line_count(csv) == 1 + 8);
    CHECK(csv.rfind("variant,strategy,seeds,average_acc,whole_acc\n", 0) == 0);
    const json base = load(dir / "msr" / "seed_3" / "report.json").at("config").at("strategy");
    for (const auto& v : ablation_variants()) {
      for (const char* seed : {"seed_3", "seed_4"}) REQUIRE(fs::exists(dir / v.preset / seed / "report.json"));
      const json echo = load(dir / v.preset / "seed_3" / "report.json").at("config").at("strategy");
      std::vector<std::string> diff;
      for (const auto& [k, val] : echo.items()) {
        if (k != "name" && base.at(k) != val) diff.push_back(k);
      }
      std::vector<std::string> want = v.removed;
      std::sort(want.begin(), want.end());
      std::sort(diff.begin(), diff.end());
      CHECK_MESSAGE(diff == want, v.name);
    }
    fs::remove_all(dir);
  }

  TEST_CASE("ablate accepts labels and preset keys and rejects unknown variants") {
    const auto dir = scratch("ablate2");
    const auto r = lid_cli(with({"ablate", "--variants=-ICML,msr-no-cn", "--out", dir.string()}, kSmall));
    REQUIRE(r.code == cli::kExitOk);
    CHECK(line_count(slurp(dir / "ablation.csv")) == 3);
    const auto bad = lid_cli(with({"ablate", "--variants=-XYZ", "--out", dir.string()}, kSmall));
    CHECK(bad.code == cli::kExitConfig);
    CHECK(bad.err.find("-CN&HKD") != std::string::npos);
    fs::remove_all(dir);
  }

  TEST_CASE("report merges curves") {
    const auto a = scratch("rep_a"), b = scratch("rep_b"), c = scratch("rep_c"), out = scratch("rep_out");
    REQUIRE(lid_cli(with({"run", "--strategy", "finetune", "--out", a.string()}, kSmall)).code == cli::kExitOk);
    REQUIRE(lid_cli(with({"run", "--strategy", "emr", "--out", b.string()}, kSmall)).code == cli::kExitOk);
    auto r = lid_cli({"report", a.string(), (b / "report.json").string(), "--out", out.string()});
    REQUIRE(r.code == cli::kExitOk);
    const std::string curves = slurp(out / "curves.csv");
    CHECK(line_count(curves) == 1 + 2 * 2);
    CHECK(curves.rfind("strategy,seed,step,acc\n", 0) == 0);
    CHECK(r.out.find("WholeAcc") != std::string::npos);
    CHECK(r.out.find("finetune") != std::string::npos);

    r = lid_cli({"report", a.string(), "--out", out.string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(line_count(slurp(out / "curves.csv")) == 1 + 2);

    // a three-step run cannot be merged with a two-step one
    REQUIRE(lid_cli({"run", "--synthetic", "--classes", "6", "--epochs", "1", "--strategy", "finetune", "--out",
                     c.string()})
                .code == cli::kExitOk);
    r = lid_cli({"report", a.string(), c.string(), "--out", out.string()});
    CHECK(r.code == cli::kExitConfig);
    CHECK(lid_cli({"report", "/nonexistent/run"}).code == cli::kExitConfig);
    for (const auto& d : {a, b, c, out}) fs::remove_all(d);
  }

  TEST_CASE("apply_seed reseeds synthetic sources only") {
    RunConfig c;
    cli::apply_seed(c, 42);
    CHECK(c.seed == 42);
    CHECK(c.source.synth.seed == 42);
    CHECK(c.source.params.seed == 42);
    c.source.kind = ScheduleSource::Kind::Manifest;
    cli::apply_seed(c, 43);
    CHECK(c.seed == 43);
    CHECK(c.source.params.seed == 42);
  }
}
