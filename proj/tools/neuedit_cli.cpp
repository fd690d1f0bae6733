// Command-line front end: dataset generation, base-model pretraining,
// per-task tuning/editing, evaluation aggregation, parameter sweeps and
// attention inspection. Every command writes a manifest with content hashes
// of its inputs and outputs; errors leave as machine-readable JSON on stderr.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "neuedit/neuedit.hpp"

using namespace neuedit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Run configuration (strict schema; unknown keys rejected)

struct RunConfig {
  std::uint64_t seed = 1234;
  WorldConfig world{8, 64, 64, 8};
  int t_steps = 200;
  ScheduleKind schedule_kind = ScheduleKind::kCosine;
  std::uint64_t codec_seed = 4242;
  int embed_dim = 32;
  std::uint64_t codebook_seed = 97;
  int d_model = 64;
  bool temporal_mixing = true;
  int pretrain_clips = 64;
  int pretrain_epochs = 600;
  double pretrain_lr = 3e-3;
  std::uint64_t pretrain_render_seed = 12001;
  EditConfig edit;

  json to_json() const {
    return json{
        {"schema_version", 1},
        {"seed", seed},
        {"world",
         {{"frames", world.frames}, {"height", world.height}, {"width", world.width},
          {"patch", world.patch}}},
        {"schedule", {{"t_steps", t_steps}, {"kind", schedule_kind_name(schedule_kind)}}},
        {"codec", {{"seed", codec_seed}}},
        {"embed", {{"dim", embed_dim}, {"codebook_seed", codebook_seed}}},
        {"model", {{"d_model", d_model}, {"temporal_mixing", temporal_mixing}}},
        {"pretrain",
         {{"n_clips", pretrain_clips}, {"epochs", pretrain_epochs}, {"lr", pretrain_lr},
          {"render_seed", pretrain_render_seed}}},
        {"edit",
         {{"variant", neutral_variant_name(edit.variant)}, {"s", edit.s}, {"alpha", edit.alpha},
          {"sigma", edit.sigma}, {"tau", edit.tau}, {"tuning_steps", edit.tuning_steps},
          {"lr", edit.lr}, {"n_ddim_steps", edit.n_ddim_steps}, {"probe_fracs", edit.probe_fracs},
          {"probe_seed", edit.probe_seed}, {"tune_seed", edit.tune_seed},
          {"blur_seed", edit.blur_seed}, {"invert_with_target", edit.invert_with_target},
          {"zero_visual", edit.zero_visual}}}};
  }
};

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  const json j = read_json_file(path);
  check_keys(j, {"schema_version", "seed", "world", "schedule", "codec", "embed", "model",
                 "pretrain", "edit"},
             "config");
  if (j.contains("schema_version"))
    require(j.at("schema_version").get<int>() == 1, "bad-config",
            "config: unsupported schema_version");
  maybe(j, "seed", cfg.seed);
  if (j.contains("world")) {
    const auto& w = j.at("world");
    check_keys(w, {"frames", "height", "width", "patch"}, "config.world");
    maybe(w, "frames", cfg.world.frames);
    maybe(w, "height", cfg.world.height);
    maybe(w, "width", cfg.world.width);
    maybe(w, "patch", cfg.world.patch);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    check_keys(s, {"t_steps", "kind"}, "config.schedule");
    maybe(s, "t_steps", cfg.t_steps);
    if (s.contains("kind"))
      cfg.schedule_kind = schedule_kind_from_name(s.at("kind").get<std::string>());
  }
  if (j.contains("codec")) {
    check_keys(j.at("codec"), {"seed"}, "config.codec");
    maybe(j.at("codec"), "seed", cfg.codec_seed);
  }
  if (j.contains("embed")) {
    const auto& e = j.at("embed");
    check_keys(e, {"dim", "codebook_seed"}, "config.embed");
    maybe(e, "dim", cfg.embed_dim);
    maybe(e, "codebook_seed", cfg.codebook_seed);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, {"d_model", "temporal_mixing"}, "config.model");
    maybe(m, "d_model", cfg.d_model);
    maybe(m, "temporal_mixing", cfg.temporal_mixing);
  }
  if (j.contains("pretrain")) {
    const auto& p = j.at("pretrain");
    check_keys(p, {"n_clips", "epochs", "lr", "render_seed"}, "config.pretrain");
    maybe(p, "n_clips", cfg.pretrain_clips);
    maybe(p, "epochs", cfg.pretrain_epochs);
    maybe(p, "lr", cfg.pretrain_lr);
    maybe(p, "render_seed", cfg.pretrain_render_seed);
  }
  if (j.contains("edit")) {
    const auto& e = j.at("edit");
    check_keys(e, {"variant", "s", "alpha", "sigma", "tau", "tuning_steps", "lr", "n_ddim_steps",
                   "probe_fracs", "probe_seed", "tune_seed", "blur_seed", "invert_with_target",
                   "zero_visual"},
               "config.edit");
    if (e.contains("variant"))
      cfg.edit.variant = neutral_variant_from_name(e.at("variant").get<std::string>());
    maybe(e, "s", cfg.edit.s);
    maybe(e, "alpha", cfg.edit.alpha);
    maybe(e, "sigma", cfg.edit.sigma);
    maybe(e, "tau", cfg.edit.tau);
    maybe(e, "tuning_steps", cfg.edit.tuning_steps);
    maybe(e, "lr", cfg.edit.lr);
    maybe(e, "n_ddim_steps", cfg.edit.n_ddim_steps);
    maybe(e, "probe_fracs", cfg.edit.probe_fracs);
    maybe(e, "probe_seed", cfg.edit.probe_seed);
    maybe(e, "tune_seed", cfg.edit.tune_seed);
    maybe(e, "blur_seed", cfg.edit.blur_seed);
    maybe(e, "invert_with_target", cfg.edit.invert_with_target);
    maybe(e, "zero_visual", cfg.edit.zero_visual);
  }
  return cfg;
}

void apply_env_seed(RunConfig& cfg) {
  if (const char* s = std::getenv("NEUEDIT_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    require(end != nullptr && *end == '\0' && *s != '\0', "bad-config",
            "NEUEDIT_SEED must be an integer");
    cfg.seed = static_cast<std::uint64_t>(v);
  }
}

// ---------------------------------------------------------------------------
// Manifest handling

class Manifest {
 public:
  Manifest(std::string command, const fs::path& out_dir, const RunConfig& cfg)
      : command_(std::move(command)), out_dir_(out_dir) {
    j_["command"] = command_;
    j_["config"] = cfg.to_json();
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
  }

  void add_input(const std::string& label, const fs::path& path) {
    j_["inputs"][label] = {
        {"path", path.generic_string()},
        {"hash", fs::is_directory(path) ? hash_directory(path) : hash_file(path)}};
  }

  void add_output(const fs::path& path) {
    const std::string rel = fs::relative(path, out_dir_).generic_string();
    j_["outputs"][rel] = fs::is_directory(path) ? hash_directory(path) : hash_file(path);
  }

  void set(const std::string& key, json value) { j_[key] = std::move(value); }

  void write() { write_json_file(out_dir_ / "manifest.json", j_); }

 private:
  std::string command_;
  fs::path out_dir_;
  json j_;
};

PipelineContext context_from_config(const RunConfig& cfg) {
  ContextParams p;
  p.world = cfg.world;
  p.t_steps = cfg.t_steps;
  p.schedule_kind = cfg.schedule_kind;
  p.codec_seed = cfg.codec_seed;
  p.embed_dim = cfg.embed_dim;
  p.codebook_seed = cfg.codebook_seed;
  p.d_model = cfg.d_model;
  return make_context(p);
}

struct LoadedCheckpoint {
  Checkpoint ck;
  PipelineContext ctx;
  DenoiserModel model;
};

LoadedCheckpoint load_model_checkpoint(const fs::path& path) {
  LoadedCheckpoint lc;
  lc.ck = load_checkpoint(path);
  lc.ctx.world = lc.ck.world;
  lc.ctx.sched = make_schedule(lc.ck.schedule_t, lc.ck.schedule_kind);
  lc.ctx.codec = lc.ck.codec;
  lc.ctx.codebook = Codebook(lc.ck.embed_dim, lc.ck.codebook_seed);
  lc.ctx.d_model = lc.ck.model_cfg.d_model;
  lc.model = DenoiserModel(lc.ck.model_cfg, lc.ctx.sched);
  lc.model.params() = lc.ck.params;
  return lc;
}

// ---------------------------------------------------------------------------
// Tiny PGM line-plot rasterizer for sweep curves.

void write_curve_pgm(const fs::path& path, const std::vector<double>& xs,
                     const std::vector<double>& ys) {
  const int W = 256, H = 160, margin = 12;
  std::vector<std::uint8_t> img(static_cast<std::size_t>(W) * H, 255);
  auto put = [&](int x, int y, std::uint8_t v) {
    if (x >= 0 && x < W && y >= 0 && y < H) img[static_cast<std::size_t>(y) * W + x] = v;
  };
  for (int x = margin; x < W - margin; ++x) put(x, H - margin, 0);
  for (int y = margin; y < H - margin; ++y) put(margin, y, 0);

  if (!xs.empty()) {
    double x_lo = xs.front(), x_hi = xs.front(), y_lo = ys.front(), y_hi = ys.front();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      x_lo = std::min(x_lo, xs[i]);
      x_hi = std::max(x_hi, xs[i]);
      y_lo = std::min(y_lo, ys[i]);
      y_hi = std::max(y_hi, ys[i]);
    }
    if (x_hi - x_lo < 1e-12) x_hi = x_lo + 1.0;
    if (y_hi - y_lo < 1e-12) y_hi = y_lo + 1.0;
    auto px = [&](double x) {
      return margin + static_cast<int>((x - x_lo) / (x_hi - x_lo) * (W - 2 * margin));
    };
    auto py = [&](double y) {
      return H - margin - static_cast<int>((y - y_lo) / (y_hi - y_lo) * (H - 2 * margin));
    };
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      int x0 = px(xs[i]), y0 = py(ys[i]), x1 = px(xs[i + 1]), y1 = py(ys[i + 1]);
      const int steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1;
      for (int k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) / steps;
        put(static_cast<int>(x0 + t * (x1 - x0)), static_cast<int>(y0 + t * (y1 - y0)), 0);
      }
    }
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) put(px(xs[i]) + dx, py(ys[i]) + dy, 0);
  }
  write_pgm(path, img, W, H);
}

// ---------------------------------------------------------------------------
// Edit-run persistence shared by cmd_edit and cmd_sweep.

struct TaskInputs {
  VideoClip video;
  json clip_meta;
  Mask gt_mask;
  bool has_mask = false;
};

TaskInputs load_task_dir(const fs::path& dir) {
  TaskInputs t;
  t.video = load_video_dir(dir, &t.clip_meta);
  if (fs::exists(dir / "mask_000.pgm")) {
    t.gt_mask = Mask(t.video.frames, t.video.height, t.video.width);
    for (int l = 0; l < t.video.frames; ++l) {
      char name[32];
      std::snprintf(name, sizeof(name), "mask_%03d.pgm", l);
      int w = 0, h = 0;
      const auto gray = read_pgm(dir / name, w, h);
      require(w == t.video.width && h == t.video.height, "io-error", "task mask size mismatch");
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          t.gt_mask.at(l, y, x) = gray[static_cast<std::size_t>(y) * w + x] >= 128 ? 1 : 0;
    }
    t.has_mask = true;
  }
  return t;
}

json neutral_prompt_json(const NeutralPrompt& np) {
  return json{{"variant", neutral_variant_name(np.variant)},
              {"tokens", np.tokens},
              {"z_t", np.z_t},
              {"s", np.s},
              {"alpha", np.alpha},
              {"seed", np.seed},
              {"swap_count", np.swap_count},
              {"zero_swaps", np.zero_swaps},
              {"features_file", "neutral_prompt.f64"}};
}

void save_edit_run(const fs::path& out, const EditResult& res, const std::string& target_prompt,
                   const TaskInputs& task, const PipelineContext& ctx, const EditConfig& cfg,
                   Manifest& manifest) {
  fs::create_directories(out);
  save_video_dir(out / "edited", res.edited, {{"role", "edited"}});
  save_video_dir(out / "neutral_video", res.neutral_video.frames,
                 {{"role", "neutral-video"},
                  {"sigma", res.neutral_video.sigma},
                  {"video_hash", res.neutral_video.video_hash},
                  {"score_hash", res.neutral_video.score_hash}});
  manifest.add_output(out / "edited");
  manifest.add_output(out / "neutral_video");

  if (res.arm == "neuedit") {
    write_json_file(out / "neutral_prompt.json", neutral_prompt_json(res.neutral_prompt));
    write_f64_blob(out / "neutral_prompt.f64", res.neutral_prompt.w_n.data());
    manifest.add_output(out / "neutral_prompt.json");
    manifest.add_output(out / "neutral_prompt.f64");

    save_scalar_field(out / "z_v", res.z_v, "z_v");
    manifest.add_output(out / "z_v");

    if (!res.attention.empty()) {
      std::vector<double> blob;
      for (const auto& m : res.attention)
        blob.insert(blob.end(), m.data().begin(), m.data().end());
      write_f64_blob(out / "attention.f64", blob);
      write_json_file(out / "attention.json",
                      json{{"frames", static_cast<int>(res.attention.size())},
                           {"patches", res.attention[0].rows()},
                           {"words", res.attention[0].cols()},
                           {"wp", res.tuned_model.config().wp},
                           {"hp", res.tuned_model.config().hp},
                           {"file", "attention.f64"}});
      manifest.add_output(out / "attention.f64");
      manifest.add_output(out / "attention.json");
    }
  }

  write_loss_csv(out / "tuning_loss.csv", res.tuning_curve);
  manifest.add_output(out / "tuning_loss.csv");

  MetricReport r;
  r.task_id = out.filename().string();
  r.arm = res.arm;
  r.kind =
      task.clip_meta.contains("kind") ? task.clip_meta.at("kind").get<std::string>() : "unknown";
  r.alignment = textual_alignment(res.edited, target_prompt, ctx.codebook);
  if (res.edited.frames >= 2) r.frame_consistency = frame_consistency(res.edited, ctx.codebook);
  const int dilation = static_cast<int>(std::ceil(3.0 * cfg.sigma));
  const Mask auto_mask = edit_region_mask_from_scores(res.z_v, dilation);
  try {
    r.masked_psnr_auto = masked_psnr(res.input, res.edited, auto_mask);
    r.masked_ssim_auto = masked_ssim(res.input, res.edited, auto_mask);
    r.mask_provenance = "zv-support-dilated";
  } catch (const Error&) {
    r.mask_provenance = "zv-mask-degenerate";
  }
  if (task.has_mask) {
    try {
      r.masked_psnr_gt = masked_psnr(res.input, res.edited, task.gt_mask);
      r.masked_ssim_gt = masked_ssim(res.input, res.edited, task.gt_mask);
      r.mask_provenance += "+ground-truth";
    } catch (const Error&) {
      r.mask_provenance += "+gt-mask-degenerate";
    }
  }
  json mj{{"task_id", r.task_id},
          {"arm", r.arm},
          {"kind", r.kind},
          {"alignment", r.alignment},
          {"masked_psnr_auto", r.masked_psnr_auto},
          {"masked_ssim_auto", r.masked_ssim_auto},
          {"masked_psnr_gt", r.masked_psnr_gt},
          {"masked_ssim_gt", r.masked_ssim_gt},
          {"frame_consistency", r.frame_consistency},
          {"mask_provenance", r.mask_provenance},
          {"target_prompt", target_prompt}};
  write_json_file(out / "metrics.json", mj);
  write_text_file(out / "metrics.csv", MetricReport::csv_header() + "\n" + r.csv_row() + "\n");
  manifest.add_output(out / "metrics.json");
  manifest.add_output(out / "metrics.csv");
}

// ---------------------------------------------------------------------------
// Commands

int cmd_gen_data(const fs::path& out, int n, std::uint64_t seed, const std::string& kind,
                 const RunConfig& cfg) {
  fs::create_directories(out);
  Manifest manifest("gen-data", out, cfg);
  manifest.set("seed", seed);
  manifest.set("kind", kind);

  json items = json::array();
  if (kind == "clips") {
    const auto specs = sample_pretrain_specs(n, cfg.world, seed);
    require(static_cast<int>(specs.size()) == n, "bad-config",
            "gen-data: requested more clips than distinct attribute combinations");
    for (std::size_t i = 0; i < specs.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "clip_%03zu", i);
      const VideoClip clip = render_scene(specs[i], cfg.pretrain_render_seed, cfg.world.patch);
      save_video_dir(out / name, clip,
                     {{"description", describe(specs[i])},
                      {"render_seed", cfg.pretrain_render_seed},
                      {"spec",
                       {{"shape", shape_word(specs[i].shape)},
                        {"color", color_word(specs[i].color)},
                        {"motion", motion_word(specs[i].motion)},
                        {"background", background_word(specs[i].background)}}}});
      manifest.add_output(out / name);
      items.push_back({{"dir", name}, {"description", describe(specs[i])}});
    }
  } else if (kind == "tasks") {
    for (int i = 0; i < n; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "task_%03d", i);
      const EditTask task =
          sample_edit_task(derive_seed(seed, "gen.task", static_cast<std::uint64_t>(i)), cfg.world);
      save_video_dir(out / name, task.video,
                     {{"description", task.source_description},
                      {"target_prompt", task.target_prompt},
                      {"edit_word_index", task.edit_word_index},
                      {"kind", task_kind_name(task.kind)},
                      {"render_seed", task.render_seed}});
      save_mask_pgm(out / name, task.edit_region_mask);
      manifest.add_output(out / name);
      items.push_back({{"dir", name},
                       {"target_prompt", task.target_prompt},
                       {"kind", task_kind_name(task.kind)}});
    }
  } else {
    fail("bad-config", "gen-data: kind must be 'clips' or 'tasks'");
  }
  manifest.set("items", items);
  manifest.write();
  return 0;
}

int cmd_pretrain(const fs::path& data, const fs::path& out, const RunConfig& cfg) {
  require(fs::exists(data / "manifest.json"), "missing-input",
          "pretrain: no manifest in data directory " + data.string());
  const json dm = read_json_file(data / "manifest.json");
  require(dm.at("kind").get<std::string>() == "clips", "bad-config",
          "pretrain: data directory must hold clips (gen-data --kind clips)");

  PipelineContext ctx = context_from_config(cfg);
  std::vector<TrainExample> dataset;
  for (const auto& item : dm.at("items")) {
    const VideoClip clip = load_video_dir(data / item.at("dir").get<std::string>());
    dataset.push_back({encode(clip, ctx.codec),
                       embed_prompt(item.at("description").get<std::string>(), ctx.codebook).w});
  }
  require(!dataset.empty(), "empty-dataset", "pretrain: no clips found");

  DenoiserModel model(ctx.model_config(cfg.temporal_mixing), ctx.sched);
  model.init_params(derive_seed(cfg.seed, "pretrain.init"));
  TrainOptions opt;
  opt.epochs = cfg.pretrain_epochs;
  opt.lr = cfg.pretrain_lr;
  opt.seed = derive_seed(cfg.seed, "pretrain.train");
  const TrainResult tr = train(model, dataset, ctx.sched, opt);

  fs::create_directories(out);
  Manifest manifest("pretrain", out, cfg);
  manifest.add_input("data", data);

  Checkpoint ck;
  ck.model_cfg = model.config();
  ck.params = model.params();
  ck.codec = ctx.codec;
  ck.schedule_t = cfg.t_steps;
  ck.schedule_kind = cfg.schedule_kind;
  ck.embed_dim = cfg.embed_dim;
  ck.codebook_seed = cfg.codebook_seed;
  ck.codebook_hash = ctx.codebook.hash();
  ck.world = cfg.world;
  ck.seed = cfg.seed;
  save_checkpoint(out / "checkpoint.json", ck);
  write_loss_csv(out / "loss_curve.csv", tr.loss_curve);
  save_codebook(out / "codebook.json", ctx.codebook);
  manifest.add_output(out / "checkpoint.json");
  manifest.add_output(out / "checkpoint.f64");
  manifest.add_output(out / "loss_curve.csv");
  manifest.add_output(out / "codebook.json");
  manifest.write();
  return 0;
}

int cmd_edit(const fs::path& video_dir, const std::string& prompt, const fs::path& ckpt,
             const fs::path& out, bool baseline, std::string source, const RunConfig& cfg) {
  const LoadedCheckpoint lc = load_model_checkpoint(ckpt);
  const TaskInputs task = load_task_dir(video_dir);
  require(task.video.height == lc.ctx.world.height && task.video.width == lc.ctx.world.width &&
              task.video.frames == lc.ctx.world.frames,
          "shape-mismatch", "edit: video shape does not match the checkpoint world");

  fs::create_directories(out);
  Manifest manifest("edit", out, cfg);
  manifest.add_input("video", video_dir);
  manifest.add_input("checkpoint", ckpt);
  manifest.set("prompt", prompt);
  manifest.set("arm", baseline ? "baseline" : "neuedit");

  EditResult res;
  if (baseline) {
    if (source.empty()) {
      require(task.clip_meta.contains("description"), "missing-input",
              "edit --baseline: no --source and the clip carries no description");
      source = task.clip_meta.at("description").get<std::string>();
    }
    manifest.set("source_prompt", source);
    res = plain_edit_baseline(lc.model, task.video, source, prompt, lc.ctx, cfg.edit);
  } else {
    res = edit(lc.model, task.video, prompt, lc.ctx, cfg.edit);
  }

  save_edit_run(out, res, prompt, task, lc.ctx, cfg.edit, manifest);

  Checkpoint tuned = lc.ck;
  tuned.model_cfg = res.tuned_model.config();
  tuned.params = res.tuned_model.params();
  save_checkpoint(out / "tuned_checkpoint.json", tuned);
  manifest.add_output(out / "tuned_checkpoint.json");
  manifest.add_output(out / "tuned_checkpoint.f64");
  manifest.write();
  return 0;
}

int cmd_eval(const fs::path& runs, const fs::path& out_csv, const RunConfig& cfg) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(runs))
    if (e.is_directory() && fs::exists(e.path() / "metrics.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  require(!dirs.empty(), "missing-input",
          "eval: no run directories with metrics.json under " + runs.string());

  std::string csv = MetricReport::csv_header() + "\n";
  std::map<std::string, std::vector<json>> by_arm;
  for (const auto& d : dirs) {
    const json m = read_json_file(d / "metrics.json");
    MetricReport r;
    r.task_id = m.at("task_id").get<std::string>();
    r.arm = m.at("arm").get<std::string>();
    r.kind = m.at("kind").get<std::string>();
    r.alignment = m.at("alignment").get<double>();
    r.masked_psnr_auto = m.at("masked_psnr_auto").get<double>();
    r.masked_ssim_auto = m.at("masked_ssim_auto").get<double>();
    r.masked_psnr_gt = m.at("masked_psnr_gt").get<double>();
    r.masked_ssim_gt = m.at("masked_ssim_gt").get<double>();
    r.frame_consistency = m.at("frame_consistency").get<double>();
    r.mask_provenance = m.at("mask_provenance").get<std::string>();
    csv += r.csv_row() + "\n";
    by_arm[r.arm].push_back(m);
  }
  for (const auto& [arm, rows] : by_arm) {
    double align = 0, psnr = 0, ssim = 0, fc = 0;
    for (const auto& m : rows) {
      align += m.at("alignment").get<double>() / static_cast<double>(rows.size());
      psnr += m.at("masked_psnr_gt").get<double>() / static_cast<double>(rows.size());
      ssim += m.at("masked_ssim_gt").get<double>() / static_cast<double>(rows.size());
      fc += m.at("frame_consistency").get<double>() / static_cast<double>(rows.size());
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf), "MEAN,%s,all,%.6g,,,%.6g,%.6g,%.6g,aggregate\n", arm.c_str(),
                  align, psnr, ssim, fc);
    csv += buf;
  }
  write_text_file(out_csv, csv);
  std::cout << json{{"out", out_csv.generic_string()}, {"hash", hash_file(out_csv)}}.dump() << "\n";
  (void)cfg;
  return 0;
}

int cmd_sweep(const std::string& param, const std::vector<double>& grid, const fs::path& video_dir,
              const fs::path& ckpt, const fs::path& out, const RunConfig& cfg) {
  require(param == "s" || param == "alpha" || param == "sigma", "bad-config",
          "sweep: param must be one of s|alpha|sigma");
  require(!grid.empty(), "bad-config", "sweep: empty grid");
  const LoadedCheckpoint lc = load_model_checkpoint(ckpt);
  const TaskInputs task = load_task_dir(video_dir);
  require(task.clip_meta.contains("target_prompt"), "missing-input",
          "sweep: video directory must be a generated task (with target_prompt)");
  const std::string prompt = task.clip_meta.at("target_prompt").get<std::string>();

  fs::create_directories(out);
  Manifest manifest("sweep", out, cfg);
  manifest.add_input("video", video_dir);
  manifest.add_input("checkpoint", ckpt);
  manifest.set("param", param);
  manifest.set("grid", grid);

  std::string csv =
      "param,value,swap_count,alignment,masked_ssim_gt,masked_psnr_gt,"
      "edit_region_change,frame_consistency\n";
  std::vector<double> xs, align_curve, swap_curve, change_curve;
  for (const double value : grid) {
    EditConfig ec = cfg.edit;
    if (param == "s") {
      ec.variant = NeutralVariant::kSwap;
      ec.s = value;
    } else if (param == "alpha") {
      ec.variant = NeutralVariant::kDeform;
      ec.alpha = value;
    } else {
      ec.sigma = value;
    }
    const EditResult res = edit(lc.model, task.video, prompt, lc.ctx, ec);

    // Mean absolute neutral-video change over the edit region.
    double change = 0.0;
    std::size_t n = 0;
    for (int l = 0; l < task.video.frames; ++l)
      for (int y = 0; y < task.video.height; ++y)
        for (int x = 0; x < task.video.width; ++x) {
          if (task.has_mask && !task.gt_mask.at(l, y, x)) continue;
          for (int c = 0; c < 3; ++c) {
            change +=
                std::abs(res.neutral_video.frames.at(l, y, x, c) - task.video.at(l, y, x, c));
            ++n;
          }
        }
    change /= static_cast<double>(std::max<std::size_t>(1, n));

    const double align = textual_alignment(res.edited, prompt, lc.ctx.codebook);
    double ssim = 0.0, psnr = 0.0;
    if (task.has_mask) {
      try {
        ssim = masked_ssim(res.edited, task.video, task.gt_mask);
        psnr = masked_psnr(res.edited, task.video, task.gt_mask);
      } catch (const Error&) {
        // Tiny frames can leave no unmasked window; report zeros.
      }
    }
    const double fc = res.edited.frames >= 2 ? frame_consistency(res.edited, lc.ctx.codebook) : 0.0;

    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%.6g,%d,%.6g,%.6g,%.6g,%.6g,%.6g\n", param.c_str(), value,
                  res.neutral_prompt.swap_count, align, ssim, psnr, change, fc);
    csv += buf;
    xs.push_back(value);
    align_curve.push_back(align);
    swap_curve.push_back(res.neutral_prompt.swap_count);
    change_curve.push_back(change);
  }
  write_text_file(out / "sweep.csv", csv);
  write_curve_pgm(out / "alignment_curve.pgm", xs, align_curve);
  const fs::path second = out / (param == "sigma" ? "change_curve.pgm" : "swap_count_curve.pgm");
  write_curve_pgm(second, xs, param == "sigma" ? change_curve : swap_curve);
  manifest.add_output(out / "sweep.csv");
  manifest.add_output(out / "alignment_curve.pgm");
  manifest.add_output(second);
  manifest.write();
  return 0;
}

int cmd_inspect_attn(const fs::path& run, const RunConfig& cfg) {
  require(fs::exists(run / "attention.json"), "missing-input",
          "inspect-attn: run has no attention.json (baseline runs carry none)");
  const json meta = read_json_file(run / "attention.json");
  const auto blob = read_f64_blob(run / meta.at("file").get<std::string>());
  const int frames = meta.at("frames").get<int>();
  const int patches = meta.at("patches").get<int>();
  const int words = meta.at("words").get<int>();
  const int wp = meta.at("wp").get<int>();
  const int hp = meta.at("hp").get<int>();
  require(static_cast<std::size_t>(frames) * patches * words == blob.size(), "io-error",
          "inspect-attn: attention blob size mismatch");

  const fs::path out = run / "attention_pgm";
  fs::create_directories(out);
  Manifest manifest("inspect-attn", run, cfg);
  manifest.add_input("attention", run / "attention.f64");

  const int scale = 8;
  for (int l = 0; l < frames; ++l) {
    for (int j = 0; j < words; ++j) {
      double peak = 1e-12;
      for (int p = 0; p < patches; ++p)
        peak = std::max(peak, blob[(static_cast<std::size_t>(l) * patches + p) * words + j]);
      std::vector<std::uint8_t> img(static_cast<std::size_t>(wp) * hp * scale * scale, 0);
      for (int py = 0; py < hp; ++py)
        for (int px = 0; px < wp; ++px) {
          const double v =
              blob[(static_cast<std::size_t>(l) * patches + py * wp + px) * words + j] / peak;
          const auto g = static_cast<std::uint8_t>(std::lround(255.0 * std::min(1.0, v)));
          for (int yy = 0; yy < scale; ++yy)
            for (int xx = 0; xx < scale; ++xx)
              img[(static_cast<std::size_t>(py) * scale + yy) * wp * scale + px * scale + xx] = g;
        }
      char name[48];
      std::snprintf(name, sizeof(name), "attn_f%02d_w%02d.pgm", l, j);
      write_pgm(out / name, img, wp * scale, hp * scale);
    }
  }
  manifest.add_output(out);
  manifest.write();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neuedit: desk-scale text-guided video editing via neutralization"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration (strict schema)");

  auto* gen = app.add_subcommand("gen-data", "generate a dataset of clips or labeled edit tasks");
  std::string gen_out, gen_kind = "clips";
  int gen_n = 16;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--n", gen_n, "number of items");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "dataset seed");
  gen->add_option("--kind", gen_kind, "clips|tasks");

  auto* pre = app.add_subcommand("pretrain", "train the base model on a clip dataset");
  std::string pre_data, pre_out;
  pre->add_option("--data", pre_data, "dataset directory from gen-data --kind clips")->required();
  pre->add_option("--out", pre_out, "checkpoint output directory")->required();

  auto* ed = app.add_subcommand("edit", "tune on one video and edit it toward a target prompt");
  std::string ed_video, ed_prompt, ed_ckpt, ed_out, ed_source;
  bool ed_baseline = false;
  ed->add_option("--video", ed_video, "video/task directory")->required();
  ed->add_option("--prompt", ed_prompt, "target prompt")->required();
  ed->add_option("--ckpt", ed_ckpt, "base checkpoint JSON path")->required();
  ed->add_option("--out", ed_out, "run output directory")->required();
  ed->add_flag("--baseline", ed_baseline, "run the source-prompt baseline pipeline instead");
  ed->add_option("--source", ed_source, "source caption for the baseline arm");

  auto* ev = app.add_subcommand("eval", "aggregate run metrics into a CSV table");
  std::string ev_runs, ev_out;
  ev->add_option("--runs", ev_runs, "directory of edit runs")->required();
  ev->add_option("--out", ev_out, "output CSV path")->required();

  auto* sw = app.add_subcommand("sweep", "sweep s, alpha or sigma over a grid");
  std::string sw_param, sw_grid, sw_video, sw_ckpt, sw_out;
  sw->add_option("--param", sw_param, "s|alpha|sigma")->required();
  sw->add_option("--grid", sw_grid, "comma-separated values")->required();
  sw->add_option("--video", sw_video, "task directory")->required();
  sw->add_option("--ckpt", sw_ckpt, "base checkpoint JSON path")->required();
  sw->add_option("--out", sw_out, "sweep output directory")->required();

  auto* ia = app.add_subcommand("inspect-attn", "render attention heatmaps from an edit run");
  std::string ia_run;
  ia->add_option("--run", ia_run, "edit run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_config(config_path);
    apply_env_seed(cfg);

    if (gen->parsed())
      return cmd_gen_data(gen_out, gen_n, gen_seed_opt->count() > 0 ? gen_seed : cfg.seed,
                          gen_kind, cfg);
    if (pre->parsed()) return cmd_pretrain(pre_data, pre_out, cfg);
    if (ed->parsed())
      return cmd_edit(ed_video, ed_prompt, ed_ckpt, ed_out, ed_baseline, ed_source, cfg);
    if (ev->parsed()) return cmd_eval(ev_runs, ev_out, cfg);
    if (sw->parsed()) {
      std::vector<double> grid;
      std::string tok;
      for (const char ch : sw_grid + ",") {
        if (ch == ',') {
          if (!tok.empty()) grid.push_back(std::stod(tok));
          tok.clear();
        } else {
          tok.push_back(ch);
        }
      }
      return cmd_sweep(sw_param, grid, sw_video, sw_ckpt, sw_out, cfg);
    }
    if (ia->parsed()) return cmd_inspect_attn(ia_run, cfg);
    return 2;
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"code", e.code()}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
}
