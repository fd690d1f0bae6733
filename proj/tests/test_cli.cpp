#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "neuedit/neuedit.hpp"

using namespace neuedit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
  const char* env = std::getenv("NEUEDIT_CLI");
  REQUIRE_MESSAGE(env != nullptr, "NEUEDIT_CLI must point at the CLI binary");
  return env;
}

struct RunOut {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunOut run_cli(const std::string& args, const std::string& extra_env = "") {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / "neuedit_cli_io";
  fs::create_directories(dir);
  const fs::path out = dir / ("out" + std::to_string(counter));
  const fs::path err = dir / ("err" + std::to_string(counter));
  ++counter;
  const std::string cmd = extra_env + (extra_env.empty() ? "" : " ") + cli_path() + " " + args +
                          " >" + out.string() + " 2>" + err.string();
  const int rc = std::system(cmd.c_str());
  RunOut r;
  r.exit_code = WEXITSTATUS(rc);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path work_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("neuedit_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small, fast configuration for CLI end-to-end runs.
fs::path write_small_config(const fs::path& dir) {
  const json cfg{
      {"schema_version", 1},
      {"seed", 1234},
      {"world", {{"frames", 2}, {"height", 16}, {"width", 16}, {"patch", 8}}},
      {"schedule", {{"t_steps", 24}, {"kind", "cosine"}}},
      {"model", {{"d_model", 24}, {"temporal_mixing", true}}},
      {"pretrain", {{"n_clips", 4}, {"epochs", 10}, {"lr", 0.004}, {"render_seed", 12001}}},
      {"edit",
       {{"variant", "deform"}, {"tuning_steps", 40}, {"lr", 0.004}, {"n_ddim_steps", 6},
        {"sigma", 2.0}}}};
  const fs::path p = dir / "config.json";
  write_json_file(p, cfg);
  return p;
}

}  // namespace

TEST_CASE("gen-data is deterministic per seed") {
  const auto dir = work_dir("gendata");
  const auto r1 = run_cli("gen-data --out " + (dir / "a").string() + " --n 3 --seed 5");
  REQUIRE(r1.exit_code == 0);
  const auto r2 = run_cli("gen-data --out " + (dir / "b").string() + " --n 3 --seed 5");
  REQUIRE(r2.exit_code == 0);
  CHECK(hash_directory(dir / "a") == hash_directory(dir / "b"));

  const auto r3 = run_cli("gen-data --out " + (dir / "c").string() + " --n 3 --seed 6");
  REQUIRE(r3.exit_code == 0);
  CHECK(hash_directory(dir / "a") != hash_directory(dir / "c"));
}

TEST_CASE("gen-data tasks carry prompts and masks") {
  const auto dir = work_dir("gentasks");
  const auto r = run_cli("gen-data --out " + (dir / "t").string() + " --n 2 --seed 9 --kind tasks");
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(dir / "t" / "task_000" / "clip.json"));
  REQUIRE(fs::exists(dir / "t" / "task_000" / "mask_000.pgm"));
  const json meta = read_json_file(dir / "t" / "task_000" / "clip.json");
  CHECK(meta.contains("target_prompt"));
  CHECK(meta.contains("kind"));
  const json manifest = read_json_file(dir / "t" / "manifest.json");
  CHECK(manifest.at("command") == "gen-data");
  CHECK(manifest.at("outputs").size() >= 2);
}

TEST_CASE("errors leave as machine-readable json with nonzero exit") {
  const auto dir = work_dir("errors");
  const auto r = run_cli("edit --video /nonexistent --prompt x --ckpt /nonexistent.json --out " +
                         (dir / "run").string());
  CHECK(r.exit_code == 1);
  const json err = json::parse(r.err);
  CHECK(err.contains("error"));
  CHECK(err.at("error").contains("code"));
  CHECK(err.at("error").contains("message"));
}

TEST_CASE("unknown config keys are rejected") {
  const auto dir = work_dir("badcfg");
  write_json_file(dir / "bad.json", json{{"seed", 1}, {"unknown_knob", true}});
  const auto r = run_cli("--config " + (dir / "bad.json").string() + " gen-data --out " +
                         (dir / "out").string() + " --n 1");
  CHECK(r.exit_code == 1);
  const json err = json::parse(r.err);
  CHECK(err.at("error").at("code") == "bad-config");
}

TEST_CASE("NEUEDIT_SEED overrides the config seed") {
  const auto dir = work_dir("envseed");
  const auto r1 = run_cli("gen-data --out " + (dir / "a").string() + " --n 2 --kind tasks",
                          "NEUEDIT_SEED=111");
  const auto r2 = run_cli("gen-data --out " + (dir / "b").string() + " --n 2 --kind tasks",
                          "NEUEDIT_SEED=222");
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  CHECK(hash_directory(dir / "a") != hash_directory(dir / "b"));
  const json m = read_json_file(dir / "a" / "manifest.json");
  CHECK(m.at("config").at("seed").get<std::uint64_t>() == 111);
}

TEST_CASE("full pipeline: pretrain, edit both arms, eval, sweep, inspect") {
  const auto dir = work_dir("e2e");
  const auto cfg = write_small_config(dir);
  const std::string c = "--config " + cfg.string() + " ";

  REQUIRE(run_cli(c + "gen-data --out " + (dir / "clips").string() + " --n 4 --seed 3").exit_code == 0);
  REQUIRE(run_cli(c + "pretrain --data " + (dir / "clips").string() + " --out " +
                  (dir / "ckpt").string()).exit_code == 0);
  REQUIRE(fs::exists(dir / "ckpt" / "checkpoint.json"));
  REQUIRE(fs::exists(dir / "ckpt" / "loss_curve.csv"));

  // Find a generated 16x16 task (large-motion sources may not fit the frame).
  fs::path task_dir;
  std::string prompt;
  for (int seed = 0; seed < 40 && task_dir.empty(); ++seed) {
    const auto r = run_cli(c + "gen-data --out " + (dir / ("t" + std::to_string(seed))).string() +
                           " --n 1 --seed " + std::to_string(seed) + " --kind tasks");
    if (r.exit_code != 0) continue;
    task_dir = dir / ("t" + std::to_string(seed)) / "task_000";
    prompt = read_json_file(task_dir / "clip.json").at("target_prompt").get<std::string>();
  }
  REQUIRE_FALSE(task_dir.empty());

  const std::string ckpt = (dir / "ckpt" / "checkpoint.json").string();
  REQUIRE(run_cli(c + "edit --video " + task_dir.string() + " --prompt \"" + prompt +
                  "\" --ckpt " + ckpt + " --out " + (dir / "runs" / "ne").string()).exit_code == 0);
  REQUIRE(run_cli(c + "edit --baseline --video " + task_dir.string() + " --prompt \"" + prompt +
                  "\" --ckpt " + ckpt + " --out " + (dir / "runs" / "bl").string()).exit_code == 0);

  // Run outputs: edited frames, neutral video, z_v dumps, metrics, manifest.
  REQUIRE(fs::exists(dir / "runs" / "ne" / "edited" / "frame_000.ppm"));
  REQUIRE(fs::exists(dir / "runs" / "ne" / "neutral_video" / "frame_000.ppm"));
  REQUIRE(fs::exists(dir / "runs" / "ne" / "z_v" / "z_v.f64"));
  REQUIRE(fs::exists(dir / "runs" / "ne" / "metrics.json"));
  REQUIRE(fs::exists(dir / "runs" / "ne" / "manifest.json"));

  // Replay: identical command reproduces identical content hashes.
  REQUIRE(run_cli(c + "edit --video " + task_dir.string() + " --prompt \"" + prompt +
                  "\" --ckpt " + ckpt + " --out " + (dir / "runs2" / "ne").string()).exit_code == 0);
  CHECK(hash_directory(dir / "runs" / "ne" / "edited") ==
        hash_directory(dir / "runs2" / "ne" / "edited"));

  // Eval aggregates both arms.
  const auto ev = run_cli(c + "eval --runs " + (dir / "runs").string() + " --out " +
                          (dir / "table.csv").string());
  REQUIRE(ev.exit_code == 0);
  std::ifstream csv(dir / "table.csv");
  std::string line;
  int rows = 0;
  bool has_mean = false;
  while (std::getline(csv, line)) {
    ++rows;
    if (line.rfind("MEAN,", 0) == 0) has_mean = true;
  }
  CHECK(rows >= 4);  // header + 2 runs + aggregates
  CHECK(has_mean);

  // Sweep over sigma emits CSV plus curve plots.
  REQUIRE(run_cli(c + "sweep --param sigma --grid 1,3 --video " + task_dir.string() + " --ckpt " +
                  ckpt + " --out " + (dir / "sweep").string()).exit_code == 0);
  REQUIRE(fs::exists(dir / "sweep" / "sweep.csv"));
  REQUIRE(fs::exists(dir / "sweep" / "alignment_curve.pgm"));
  REQUIRE(fs::exists(dir / "sweep" / "change_curve.pgm"));

  // Attention heatmaps from the neuedit run.
  REQUIRE(run_cli(c + "inspect-attn --run " + (dir / "runs" / "ne").string()).exit_code == 0);
  bool any_pgm = false;
  for (const auto& e : fs::directory_iterator(dir / "runs" / "ne" / "attention_pgm"))
    if (e.path().extension() == ".pgm") any_pgm = true;
  CHECK(any_pgm);

  // Degenerate collapse through the CLI: alpha=1 + zero_visual equals the
  // baseline tuned on the target prompt.
  json collapse_cfg = read_json_file(cfg);
  collapse_cfg["edit"]["alpha"] = 1.0;
  collapse_cfg["edit"]["zero_visual"] = true;
  write_json_file(dir / "collapse.json", collapse_cfg);
  const std::string cc = "--config " + (dir / "collapse.json").string() + " ";
  REQUIRE(run_cli(cc + "edit --video " + task_dir.string() + " --prompt \"" + prompt +
                  "\" --ckpt " + ckpt + " --out " + (dir / "col" / "ne").string()).exit_code == 0);
  REQUIRE(run_cli(cc + "edit --baseline --source \"" + prompt + "\" --video " + task_dir.string() +
                  " --prompt \"" + prompt + "\" --ckpt " + ckpt + " --out " +
                  (dir / "col" / "bl").string()).exit_code == 0);
  CHECK(hash_directory(dir / "col" / "ne" / "edited") ==
        hash_directory(dir / "col" / "bl" / "edited"));
}
