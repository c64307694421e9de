#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgnd/dataset.hpp"
#include "pgnd/dynamics.hpp"
#include "pgnd/metrics.hpp"
#include "pgnd/skinning.hpp"
#include "pgnd/train.hpp"

using namespace pgnd;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Spawn the real executable through the shell, capturing exit code and both
// streams. `env` is a prefix like "PGND_THREADS=2 ".
RunResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string out_path = "/tmp/pgnd_cli_stdout.txt";
  const std::string err_path = "/tmp/pgnd_cli_stderr.txt";
  const std::string cmd = env + std::string(PGND_CLI_PATH) + " " + args +
                          " >" + out_path + " 2>" + err_path;
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

// Fresh scratch directory per test case.
std::string scratch(const std::string& name) {
  const std::string dir = "/tmp/pgnd_cli_" + name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

int count_of(const std::string& hay, const std::string& needle) {
  int n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

const char* kSmallConfig =
    R"({"grid_l": 22, "grid_dx": 0.05, "radius": 0.15, "history": 1, "horizon": 2, "dt": 0.1})";

std::string write_small_config(const std::string& dir) {
  const std::string path = dir + "/small.json";
  std::ofstream(path) << kSmallConfig;
  return path;
}

// Tiny but real training setup shared by the train/eval/plan tests.
std::string tiny_train_flags(const std::string& data,
                             const std::string& config,
                             const std::string& out) {
  return "train --data " + data + " --config " + config +
         " --steps 3 --val-every 0 --batch 4 --feat 8 --enc-hidden 8 "
         "--field-hidden 12 --freqs 2 --out " +
         out;
}

}  // namespace

TEST_CASE("help and usage errors") {
  RunResult top = run_cli("--help");
  CHECK(top.code == 0);
  for (const char* sub : {"gen", "train", "eval", "plan", "skin", "plot"}) {
    CHECK(contains(top.out, sub));
  }

  const std::vector<std::pair<std::string, std::vector<std::string>>> flags = {
      {"gen", {"--kind", "--duration", "--dt", "--seed", "--cameras",
               "--views", "--out"}},
      {"train", {"--data", "--config", "--views", "--mode", "--steps",
                 "--seed", "--lr", "--batch", "--val-every", "--val-rollout",
                 "--val-clips", "--feat", "--enc-hidden", "--field-hidden",
                 "--freqs", "--out"}},
      {"eval", {"--model", "--data", "--config", "--mode", "--views",
                "--report"}},
      {"plan", {"--model", "--task", "--config", "--seed", "--samples",
                "--iterations", "--mpc-steps", "--horizon", "--trans-std",
                "--beta", "--out"}},
      {"skin", {"--kernels", "--tracks", "--out"}},
      {"plot", {"--report", "--out"}},
  };
  for (const auto& [sub, opts] : flags) {
    RunResult help = run_cli(sub + " --help");
    CHECK(help.code == 0);
    for (const auto& opt : opts) CHECK(contains(help.out, opt));
  }

  RunResult bare = run_cli("");
  CHECK(bare.code == 1);
  CHECK(!bare.err.empty());

  RunResult missing = run_cli("gen --kind rope");
  CHECK(missing.code == 1);
  CHECK(contains(missing.err, "--out"));

  RunResult unknown_flag = run_cli("gen --kind rope --out /tmp/x --bogus 1");
  CHECK(unknown_flag.code == 1);

  RunResult unknown_sub = run_cli("frobnicate");
  CHECK(unknown_sub.code == 1);
}

TEST_CASE("trajectory generation") {
  const std::string dir = scratch("gen");

  RunResult r = run_cli("gen --kind rope --duration 3 --seed 7 --out " + dir +
                        "/rope.jsonl");
  REQUIRE(r.code == 0);
  Trajectory traj = load_trajectory(dir + "/rope.jsonl");
  CHECK(traj.num_frames() == 31);
  CHECK(traj.frames.front().size() == 64);
  CHECK(traj.dt == 0.1);

  SUBCASE("same seed reproduces the file; another seed does not") {
    RunResult again = run_cli("gen --kind rope --duration 3 --seed 7 --out " +
                              dir + "/rope2.jsonl");
    REQUIRE(again.code == 0);
    CHECK(slurp(dir + "/rope.jsonl") == slurp(dir + "/rope2.jsonl"));
    RunResult other = run_cli("gen --kind rope --duration 3 --seed 8 --out " +
                              dir + "/rope3.jsonl");
    REQUIRE(other.code == 0);
    CHECK(slurp(dir + "/rope.jsonl") != slurp(dir + "/rope3.jsonl"));
  }

  SUBCASE("reduced views produce fixed-cardinality tracks") {
    RunResult partial = run_cli(
        "gen --kind rope --duration 1 --seed 3 --views 2 --out " + dir +
        "/partial.jsonl");
    REQUIRE(partial.code == 0);
    Trajectory p = load_trajectory(dir + "/partial.jsonl");
    CHECK(p.num_frames() == 11);
    const std::size_t n = p.frames.front().size();
    CHECK(n > 0);
    CHECK(n <= 64);
    for (const auto& f : p.frames) CHECK(f.size() == n);
  }

  SUBCASE("cloth scenes generate too") {
    RunResult cloth = run_cli(
        "gen --kind cloth --duration 0.5 --seed 2 --out " + dir +
        "/cloth.jsonl");
    REQUIRE(cloth.code == 0);
    Trajectory c = load_trajectory(dir + "/cloth.jsonl");
    CHECK(c.num_frames() == 6);
    CHECK(c.frames.front().size() == 256);
  }

  SUBCASE("bad flags exit 1 with a reason") {
    CHECK(run_cli("gen --kind boat --out " + dir + "/x.jsonl").code == 1);
    RunResult kind = run_cli("gen --kind boat --out " + dir + "/x.jsonl");
    CHECK(contains(kind.err, "rope or cloth"));
    CHECK(run_cli("gen --kind rope --views 5 --out " + dir + "/x.jsonl")
              .code == 1);
  }

  SUBCASE("the thread cap is validated") {
    RunResult bad = run_cli(
        "gen --kind rope --duration 0.5 --out " + dir + "/t.jsonl",
        "PGND_THREADS=abc ");
    CHECK(bad.code == 1);
    CHECK(contains(bad.err, "PGND_THREADS"));
    RunResult ok = run_cli(
        "gen --kind rope --duration 0.5 --out " + dir + "/t.jsonl",
        "PGND_THREADS=2 ");
    CHECK(ok.code == 0);
  }
}

TEST_CASE("training and evaluation") {
  const std::string dir = scratch("train");
  const std::string config = write_small_config(dir);
  fs::create_directories(dir + "/data");
  REQUIRE(run_cli("gen --kind rope --duration 1 --seed 11 --out " + dir +
                  "/data/a.jsonl")
              .code == 0);
  REQUIRE(run_cli("gen --kind rope --duration 1 --seed 12 --out " + dir +
                  "/data/b.jsonl")
              .code == 0);

  RunResult trained =
      run_cli(tiny_train_flags(dir + "/data", config, dir + "/m.bin"));
  REQUIRE(trained.code == 0);
  CHECK(contains(trained.out, "trained 3 steps"));
  DynamicsModel model = load_model(dir + "/m.bin");
  CHECK(model.mode == ModelMode::Grid);
  CHECK(model.dims.history == 1);
  CHECK(model.dims.feat == 8);
  CHECK(model.dims.field_hidden == 12);

  SUBCASE("training is byte-reproducible") {
    RunResult again =
        run_cli(tiny_train_flags(dir + "/data", config, dir + "/m2.bin"));
    REQUIRE(again.code == 0);
    CHECK(slurp(dir + "/m.bin") == slurp(dir + "/m2.bin"));
    // Everything before the "wrote <path>" line must match exactly.
    const auto head = [](const std::string& s) {
      return s.substr(0, s.find("wrote "));
    };
    CHECK(head(trained.out) == head(again.out));
  }

  SUBCASE("the grid-free composition trains through the same flags") {
    RunResult part = run_cli(
        tiny_train_flags(dir + "/data", config, dir + "/mp.bin") +
        " --mode particle");
    REQUIRE(part.code == 0);
    CHECK(load_model(dir + "/mp.bin").mode == ModelMode::Particle);
  }

  SUBCASE("evaluation writes a parsable report") {
    RunResult ev = run_cli("eval --model " + dir + "/m.bin --data " + dir +
                           "/data --config " + config + " --report " + dir +
                           "/r.json");
    REQUIRE(ev.code == 0);
    CHECK(contains(ev.out, "mde"));
    MetricReport rep = load_report_json(dir + "/r.json");
    CHECK(rep.mde.per_clip.size() == 2);
    CHECK(rep.chamfer.per_clip.size() == 2);
    CHECK(rep.emd.per_clip.size() == 2);
    CHECK(rep.mde.mean > 0.0);

    RunResult ev2 = run_cli("eval --model " + dir + "/m.bin --data " + dir +
                            "/data --config " + config + " --views 2 "
                            "--report " + dir + "/r2.json");
    CHECK(ev2.code == 0);

    RunResult ev3 = run_cli("eval --model " + dir + "/m.bin --data " + dir +
                            "/data --config " + config +
                            " --mode particle --report " + dir + "/r3.json");
    CHECK(ev3.code == 0);
    CHECK(slurp(dir + "/r.json") != slurp(dir + "/r3.json"));
  }

  SUBCASE("mismatched history between config and checkpoint is refused") {
    const std::string big = dir + "/hist2.json";
    std::ofstream(big)
        << R"({"grid_l": 22, "grid_dx": 0.05, "radius": 0.15, "history": 2, "horizon": 2, "dt": 0.1})";
    RunResult ev = run_cli("eval --model " + dir + "/m.bin --data " + dir +
                           "/data --config " + big + " --report " + dir +
                           "/rh.json");
    CHECK(ev.code == 1);
    CHECK(contains(ev.err, "history"));
  }

  SUBCASE("missing inputs exit 1") {
    CHECK(run_cli(tiny_train_flags(dir + "/nodir", config, dir + "/x.bin"))
              .code == 1);
    fs::create_directories(dir + "/empty");
    CHECK(run_cli(tiny_train_flags(dir + "/empty", config, dir + "/x.bin"))
              .code == 1);
    CHECK(run_cli(tiny_train_flags(dir + "/data", config, dir + "/x.bin") +
                  " --views sideways")
              .code == 1);
    CHECK(run_cli("eval --model " + dir + "/missing.bin --data " + dir +
                  "/data --config " + config + " --report " + dir + "/x.json")
              .code == 1);
  }
}

TEST_CASE("planning") {
  const std::string dir = scratch("plan");
  const std::string config = write_small_config(dir);
  fs::create_directories(dir + "/data");
  REQUIRE(run_cli("gen --kind rope --duration 1 --seed 11 --out " + dir +
                  "/data/a.jsonl")
              .code == 0);
  REQUIRE(
      run_cli(tiny_train_flags(dir + "/data", config, dir + "/m.bin")).code ==
      0);

  const std::string plan_flags =
      "plan --model " + dir + "/m.bin --config " + config +
      " --seed 5 --samples 4 --iterations 1 --mpc-steps 2 --out ";

  RunResult lift = run_cli(plan_flags + dir + "/lift.json --task lift");
  REQUIRE(lift.code == 0);
  nlohmann::json j = nlohmann::json::parse(slurp(dir + "/lift.json"));
  CHECK(j["actions"].size() == 2);
  CHECK(j["error_curve"].size() == 3);
  CHECK(j["actions"][0]["arms"][0]["mode"] == "grasped");

  SUBCASE("plans are byte-reproducible") {
    RunResult again = run_cli(plan_flags + dir + "/lift2.json --task lift");
    REQUIRE(again.code == 0);
    CHECK(slurp(dir + "/lift.json") == slurp(dir + "/lift2.json"));
  }

  SUBCASE("every named task runs") {
    CHECK(run_cli(plan_flags + dir + "/s.json --task straighten").code == 0);
    CHECK(run_cli(plan_flags + dir + "/r.json --task relocate").code == 0);
  }

  SUBCASE("unknown tasks exit 1") {
    RunResult bad = run_cli(plan_flags + dir + "/x.json --task fly");
    CHECK(bad.code == 1);
    CHECK(contains(bad.err, "lift"));
  }
}

TEST_CASE("skinning through the pipeline") {
  const std::string dir = scratch("skin");
  REQUIRE(run_cli("gen --kind rope --duration 0.5 --seed 4 --out " + dir +
                  "/t.jsonl")
              .code == 0);

  KernelSet ks;
  for (int i = 0; i < 5; ++i) {
    ks.centers.emplace_back(0.2 + 0.01 * i, 0.3, 0.02);
    ks.quats.push_back(Quat::Identity());
  }
  ks.extra = nlohmann::json{{"scales", {0.01, 0.01, 0.01, 0.01, 0.01}}};
  save_kernels(dir + "/k.json", ks);

  RunResult r = run_cli("skin --kernels " + dir + "/k.json --tracks " + dir +
                        "/t.jsonl --out " + dir + "/frames");
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "6 kernel frames"));
  for (int t = 0; t < 6; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "/frames/kernels_%04d.json", t);
    KernelSet frame = load_kernels(dir + name);
    CHECK(frame.size() == 5);
    CHECK(frame.extra == ks.extra);
  }

  SUBCASE("output frames are byte-reproducible") {
    RunResult again = run_cli("skin --kernels " + dir + "/k.json --tracks " +
                              dir + "/t.jsonl --out " + dir + "/frames2");
    REQUIRE(again.code == 0);
    for (int t = 0; t < 6; ++t) {
      char a[40], b[40];
      std::snprintf(a, sizeof(a), "/frames/kernels_%04d.json", t);
      std::snprintf(b, sizeof(b), "/frames2/kernels_%04d.json", t);
      CHECK(slurp(dir + a) == slurp(dir + b));
    }
  }

  SUBCASE("bad inputs exit 1") {
    std::ofstream(dir + "/broken.json") << "{nope";
    CHECK(run_cli("skin --kernels " + dir + "/broken.json --tracks " + dir +
                  "/t.jsonl --out " + dir + "/x")
              .code == 1);
    CHECK(run_cli("skin --kernels " + dir + "/k.json --tracks " + dir +
                  "/missing.jsonl --out " + dir + "/x")
              .code == 1);
  }
}

TEST_CASE("report plotting") {
  const std::string dir = scratch("plot");

  // A two-method comparison file built from hand numbers.
  MetricReport a;
  a.mde = summarize({0.01, 0.02});
  a.chamfer = summarize({0.005, 0.007});
  a.emd = summarize({0.012, 0.016});
  MetricReport b;
  b.mde = summarize({0.03, 0.05});
  b.chamfer = summarize({0.01, 0.02});
  b.emd = summarize({0.04, 0.02});
  save_comparison_json(dir + "/cmp.json", {{"grid", a}, {"particle", b}});

  RunResult r = run_cli("plot --report " + dir + "/cmp.json --out " + dir +
                        "/fig.svg");
  REQUIRE(r.code == 0);
  const std::string svg = slurp(dir + "/fig.svg");
  CHECK(contains(svg, "<svg"));
  CHECK(contains(svg, "grid"));
  CHECK(contains(svg, "particle"));
  CHECK(contains(svg, "mde"));
  CHECK(contains(svg, "chamfer"));
  CHECK(contains(svg, "emd"));
  // 1 background + 2 methods x 3 metrics bars + 2 legend swatches.
  CHECK(count_of(svg, "<rect") == 9);
  CHECK(!contains(svg, "no data"));

  const std::string csv = slurp(dir + "/fig.csv");
  CHECK(contains(csv, "method,metric,mean,std,clips"));
  CHECK(count_of(csv, "\n") == 7);
  CHECK(contains(csv, "grid,mde,"));
  CHECK(contains(csv, "particle,emd,"));

  SUBCASE("plots are byte-reproducible") {
    RunResult again = run_cli("plot --report " + dir + "/cmp.json --out " +
                              dir + "/fig2.svg");
    REQUIRE(again.code == 0);
    CHECK(slurp(dir + "/fig.svg") == slurp(dir + "/fig2.svg"));
    CHECK(slurp(dir + "/fig.csv") == slurp(dir + "/fig2.csv"));
  }

  SUBCASE("a single-method report plots as one method") {
    save_report_json(dir + "/single.json", a);
    RunResult single = run_cli("plot --report " + dir + "/single.json --out " +
                               dir + "/one.svg");
    REQUIRE(single.code == 0);
    const std::string one = slurp(dir + "/one.svg");
    CHECK(contains(one, "model"));
    CHECK(count_of(one, "<rect") == 5);  // background + 3 bars + 1 swatch
  }

  SUBCASE("an empty report renders the placeholder") {
    MetricReport empty;
    save_report_json(dir + "/empty.json", empty);
    RunResult placeholder = run_cli("plot --report " + dir +
                                    "/empty.json --out " + dir + "/empty.svg");
    REQUIRE(placeholder.code == 0);
    CHECK(contains(slurp(dir + "/empty.svg"), "no data"));
  }

  SUBCASE("malformed reports name the offending field") {
    std::ofstream(dir + "/bad0.json") << R"({"mde": 3})";
    RunResult bad0 = run_cli("plot --report " + dir + "/bad0.json --out " +
                             dir + "/x.svg");
    CHECK(bad0.code == 1);
    CHECK(contains(bad0.err, "chamfer"));

    std::ofstream(dir + "/bad1.json")
        << R"({"mde": 3, "chamfer": {"mean": 0.1, "std": 0.0, "per_clip": [0.1]}, "emd": {"mean": 0.1, "std": 0.0, "per_clip": [0.1]}})";
    RunResult bad1 = run_cli("plot --report " + dir + "/bad1.json --out " +
                             dir + "/x.svg");
    CHECK(bad1.code == 1);
    CHECK(contains(bad1.err, "mde"));

    std::ofstream(dir + "/bad2.json")
        << R"({"methods": {"a": {"mde": {"mean": 0.1, "std": 0.0, "per_clip": [0.1]}, "emd": {"mean": 0.1, "std": 0.0, "per_clip": [0.1]}}}})";
    RunResult bad2 = run_cli("plot --report " + dir + "/bad2.json --out " +
                             dir + "/x.svg");
    CHECK(bad2.code == 1);
    CHECK(contains(bad2.err, "methods.a.chamfer"));

    CHECK(run_cli("plot --report " + dir + "/nothere.json --out " + dir +
                  "/x.svg")
              .code == 1);
  }
}
