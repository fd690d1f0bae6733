#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "neuedit/codec.hpp"
#include "neuedit/common.hpp"
#include "neuedit/denoiser.hpp"
#include "neuedit/embeddings.hpp"
#include "neuedit/schedule.hpp"
#include "neuedit/video.hpp"
#include "neuedit/world.hpp"

namespace neuedit {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Raw file helpers

inline std::vector<unsigned char> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "io-error", "cannot open for reading: " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const fs::path& path, const void* data, std::size_t n) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "io-error", "cannot open for writing: " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  require(out.good(), "io-error", "write failed: " + path.string());
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  write_file_bytes(path, text.data(), text.size());
}

inline std::string hash_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return hash_hex(fnv1a(bytes.data(), bytes.size()));
}

// Content hash of a directory: hash of sorted (relative path, file hash) pairs.
inline std::string hash_directory(const fs::path& dir) {
  std::vector<std::string> entries;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    entries.push_back(fs::relative(e.path(), dir).generic_string() + ":" + hash_file(e.path()));
  }
  std::sort(entries.begin(), entries.end());
  std::uint64_t h = fnv1a("dir-v1");
  for (const auto& s : entries) h = fnv1a(s, h);
  return hash_hex(h);
}

// ---------------------------------------------------------------------------
// PPM / PGM

inline void write_ppm(const fs::path& path, const VideoClip& clip, int frame) {
  require(frame >= 0 && frame < clip.frames, "io-error", "write_ppm: frame out of range");
  std::string out = "P6\n" + std::to_string(clip.width) + " " + std::to_string(clip.height) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(clip.width) * clip.height * 3);
  for (int y = 0; y < clip.height; ++y)
    for (int x = 0; x < clip.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.push_back(static_cast<char>(quantize8(clip.at(frame, y, x, c))));
  write_file_bytes(path, out.data(), out.size());
}

namespace detail {

inline int pnm_read_int(const std::vector<unsigned char>& b, std::size_t& i) {
  auto is_space = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (i < b.size() && (is_space(b[i]) || b[i] == '#')) {
    if (b[i] == '#')
      while (i < b.size() && b[i] != '\n') ++i;
    else
      ++i;
  }
  int v = 0;
  bool any = false;
  while (i < b.size() && b[i] >= '0' && b[i] <= '9') {
    v = v * 10 + (b[i] - '0');
    ++i;
    any = true;
  }
  require(any, "io-error", "malformed PNM header");
  return v;
}

}  // namespace detail

// Reads one PPM frame into an L=1 clip.
inline VideoClip read_ppm(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  require(bytes.size() > 2 && bytes[0] == 'P' && bytes[1] == '6', "io-error",
          "read_ppm: not a P6 file: " + path.string());
  std::size_t i = 2;
  const int w = detail::pnm_read_int(bytes, i);
  const int h = detail::pnm_read_int(bytes, i);
  const int maxval = detail::pnm_read_int(bytes, i);
  require(maxval == 255, "io-error", "read_ppm: only maxval 255 supported");
  ++i;  // single whitespace after header
  require(bytes.size() - i >= static_cast<std::size_t>(w) * h * 3, "io-error",
          "read_ppm: truncated pixel data");
  VideoClip clip(1, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) clip.at(0, y, x, c) = bytes[i++] / 255.0;
  return clip;
}

inline void write_pgm(const fs::path& path, const std::vector<std::uint8_t>& gray, int width,
                      int height) {
  require(gray.size() == static_cast<std::size_t>(width) * height, "io-error",
          "write_pgm: size mismatch");
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(gray.data()), gray.size());
  write_file_bytes(path, out.data(), out.size());
}

inline std::vector<std::uint8_t> read_pgm(const fs::path& path, int& width, int& height) {
  const auto bytes = read_file_bytes(path);
  require(bytes.size() > 2 && bytes[0] == 'P' && bytes[1] == '5', "io-error",
          "read_pgm: not a P5 file: " + path.string());
  std::size_t i = 2;
  width = detail::pnm_read_int(bytes, i);
  height = detail::pnm_read_int(bytes, i);
  const int maxval = detail::pnm_read_int(bytes, i);
  require(maxval == 255, "io-error", "read_pgm: only maxval 255 supported");
  ++i;
  require(bytes.size() - i >= static_cast<std::size_t>(width) * height, "io-error",
          "read_pgm: truncated pixel data");
  return std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(i),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(i) +
                                       static_cast<std::ptrdiff_t>(width) * height);
}

// ---------------------------------------------------------------------------
// Float64 blobs (little-endian by construction; see common.hpp)

inline void write_f64_blob(const fs::path& path, const std::vector<double>& v) {
  write_file_bytes(path, v.data(), v.size() * sizeof(double));
}

inline std::vector<double> read_f64_blob(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  require(bytes.size() % sizeof(double) == 0, "io-error", "read_f64_blob: odd byte count");
  std::vector<double> v(bytes.size() / sizeof(double));
  std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

// ---------------------------------------------------------------------------
// JSON helpers

inline json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), "io-error", "cannot open JSON: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("bad-json", "parse error in " + path.string() + ": " + e.what());
  }
  return j;
}

inline void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// Rejects unknown keys; the config schema is closed.
inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& ctx) {
  require(j.is_object(), "bad-config", ctx + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    require(ok, "bad-config", ctx + ": unknown key '" + key + "'");
  }
}

// ---------------------------------------------------------------------------
// Video directory persistence: PPM frames + JSON manifest. Bit-exact round
// trip because renderer outputs sit on the 8-bit grid.

inline void save_video_dir(const fs::path& dir, const VideoClip& clip, json extra = json::object()) {
  fs::create_directories(dir);
  json j = std::move(extra);
  j["frames"] = clip.frames;
  j["height"] = clip.height;
  j["width"] = clip.width;
  json files = json::array();
  for (int l = 0; l < clip.frames; ++l) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.ppm", l);
    write_ppm(dir / name, clip, l);
    files.push_back(name);
  }
  j["frame_files"] = files;
  write_json_file(dir / "clip.json", j);
}

inline VideoClip load_video_dir(const fs::path& dir, json* manifest_out = nullptr) {
  const json j = read_json_file(dir / "clip.json");
  const int L = j.at("frames").get<int>();
  const int H = j.at("height").get<int>();
  const int W = j.at("width").get<int>();
  VideoClip clip(L, H, W);
  const auto files = j.at("frame_files");
  require(static_cast<int>(files.size()) == L, "io-error", "load_video_dir: frame count mismatch");
  for (int l = 0; l < L; ++l) {
    const VideoClip frame = read_ppm(dir / files.at(static_cast<std::size_t>(l)).get<std::string>());
    require(frame.height == H && frame.width == W, "io-error", "load_video_dir: frame size mismatch");
    std::copy(frame.data.begin(), frame.data.end(),
              clip.data.begin() + static_cast<std::ptrdiff_t>(clip.index(l, 0, 0, 0)));
  }
  if (manifest_out != nullptr) *manifest_out = j;
  return clip;
}

inline void save_mask_pgm(const fs::path& dir, const Mask& mask, const std::string& stem = "mask") {
  fs::create_directories(dir);
  for (int l = 0; l < mask.frames; ++l) {
    std::vector<std::uint8_t> gray(static_cast<std::size_t>(mask.height) * mask.width);
    for (int y = 0; y < mask.height; ++y)
      for (int x = 0; x < mask.width; ++x)
        gray[static_cast<std::size_t>(y) * mask.width + x] = mask.at(l, y, x) ? 255 : 0;
    char name[48];
    std::snprintf(name, sizeof(name), "%s_%03d.pgm", stem.c_str(), l);
    write_pgm(dir / name, gray, mask.width, mask.height);
  }
}

// Scalar fields persist as 8-bit PGM previews plus an exact float64 blob.
inline void save_scalar_field(const fs::path& dir, const ScalarField& field,
                              const std::string& stem) {
  fs::create_directories(dir);
  for (int l = 0; l < field.frames; ++l) {
    std::vector<std::uint8_t> gray(static_cast<std::size_t>(field.height) * field.width);
    for (int y = 0; y < field.height; ++y)
      for (int x = 0; x < field.width; ++x)
        gray[static_cast<std::size_t>(y) * field.width + x] = quantize8(field.at(l, y, x));
    char name[48];
    std::snprintf(name, sizeof(name), "%s_%03d.pgm", stem.c_str(), l);
    write_pgm(dir / name, gray, field.width, field.height);
  }
  write_f64_blob(dir / (stem + ".f64"), field.data);
  json j{{"frames", field.frames}, {"height", field.height}, {"width", field.width}};
  write_json_file(dir / (stem + ".json"), j);
}

// ---------------------------------------------------------------------------
// Codebook persistence: JSON {word -> d floats}; hash must match manifests.

inline void save_codebook(const fs::path& path, const Codebook& cb) {
  json words = json::object();
  for (std::size_t i = 0; i < cb.words().size(); ++i) {
    const double* row = cb.features().row(static_cast<int>(i));
    words[cb.words()[i]] = std::vector<double>(row, row + cb.dim());
  }
  json j{{"dim", cb.dim()},
         {"seed", cb.seed()},
         {"word_order", cb.words()},
         {"words", words},
         {"hash", cb.hash()}};
  write_json_file(path, j);
}

inline Codebook load_codebook(const fs::path& path) {
  const json j = read_json_file(path);
  const int dim = j.at("dim").get<int>();
  const auto order = j.at("word_order").get<std::vector<std::string>>();
  Matrix features(static_cast<int>(order.size()), dim);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto row = j.at("words").at(order[i]).get<std::vector<double>>();
    require(static_cast<int>(row.size()) == dim, "io-error", "load_codebook: row size mismatch");
    std::copy(row.begin(), row.end(), features.row(static_cast<int>(i)));
  }
  Codebook cb = Codebook::from_parts(dim, j.at("seed").get<std::uint64_t>(), order,
                                     std::move(features));
  require(cb.hash() == j.at("hash").get<std::string>(), "hash-mismatch",
          "load_codebook: content hash does not match manifest");
  return cb;
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON header + little-endian float64 blob (model parameters
// followed by the codec mixing matrix).

struct Checkpoint {
  DenoiserConfig model_cfg;
  std::vector<double> params;
  CodecConfig codec;
  int schedule_t = 200;
  ScheduleKind schedule_kind = ScheduleKind::kCosine;
  int embed_dim = 32;
  std::uint64_t codebook_seed = 0;
  std::string codebook_hash;
  WorldConfig world;
  std::uint64_t seed = 0;
};

inline void save_checkpoint(const fs::path& json_path, const Checkpoint& ck) {
  const fs::path blob_path = fs::path(json_path).replace_extension(".f64");
  std::vector<double> blob = ck.params;
  blob.insert(blob.end(), ck.codec.q.data().begin(), ck.codec.q.data().end());
  write_f64_blob(blob_path, blob);

  json j;
  j["format_version"] = 1;
  j["model"] = {{"d_lat", ck.model_cfg.d_lat},       {"d_model", ck.model_cfg.d_model},
                {"d_text", ck.model_cfg.d_text},     {"wp", ck.model_cfg.wp},
                {"hp", ck.model_cfg.hp},             {"frames", ck.model_cfg.frames},
                {"temporal_mixing", ck.model_cfg.temporal_mixing},
                {"n_params", static_cast<std::int64_t>(ck.params.size())}};
  j["schedule"] = {{"t_steps", ck.schedule_t}, {"kind", schedule_kind_name(ck.schedule_kind)}};
  j["codec"] = {{"patch", ck.codec.patch}, {"seed", ck.codec.seed}, {"d_lat", ck.codec.d_lat},
                {"hash", ck.codec.hash()}};
  j["embed"] = {{"dim", ck.embed_dim}, {"codebook_seed", ck.codebook_seed},
                {"codebook_hash", ck.codebook_hash}};
  j["world"] = {{"frames", ck.world.frames}, {"height", ck.world.height},
                {"width", ck.world.width}, {"patch", ck.world.patch}};
  j["seed"] = ck.seed;
  j["params_file"] = blob_path.filename().string();
  j["params_hash"] = hash_file(blob_path);
  write_json_file(json_path, j);
}

inline Checkpoint load_checkpoint(const fs::path& json_path) {
  const json j = read_json_file(json_path);
  require(j.at("format_version").get<int>() == 1, "io-error", "checkpoint: unsupported version");
  Checkpoint ck;
  const auto& jm = j.at("model");
  ck.model_cfg.d_lat = jm.at("d_lat").get<int>();
  ck.model_cfg.d_model = jm.at("d_model").get<int>();
  ck.model_cfg.d_text = jm.at("d_text").get<int>();
  ck.model_cfg.wp = jm.at("wp").get<int>();
  ck.model_cfg.hp = jm.at("hp").get<int>();
  ck.model_cfg.frames = jm.at("frames").get<int>();
  ck.model_cfg.temporal_mixing = jm.at("temporal_mixing").get<bool>();
  const auto n_params = jm.at("n_params").get<std::int64_t>();

  ck.schedule_t = j.at("schedule").at("t_steps").get<int>();
  ck.schedule_kind = schedule_kind_from_name(j.at("schedule").at("kind").get<std::string>());
  ck.embed_dim = j.at("embed").at("dim").get<int>();
  ck.codebook_seed = j.at("embed").at("codebook_seed").get<std::uint64_t>();
  ck.codebook_hash = j.at("embed").at("codebook_hash").get<std::string>();
  ck.world.frames = j.at("world").at("frames").get<int>();
  ck.world.height = j.at("world").at("height").get<int>();
  ck.world.width = j.at("world").at("width").get<int>();
  ck.world.patch = j.at("world").at("patch").get<int>();
  ck.seed = j.at("seed").get<std::uint64_t>();

  const fs::path blob_path = json_path.parent_path() / j.at("params_file").get<std::string>();
  require(hash_file(blob_path) == j.at("params_hash").get<std::string>(), "hash-mismatch",
          "checkpoint: parameter blob hash mismatch");
  const auto blob = read_f64_blob(blob_path);

  const int patch = j.at("codec").at("patch").get<int>();
  const int d_lat = j.at("codec").at("d_lat").get<int>();
  require(static_cast<std::int64_t>(blob.size()) ==
              n_params + static_cast<std::int64_t>(d_lat) * d_lat,
          "io-error", "checkpoint: blob size mismatch");
  ck.params.assign(blob.begin(), blob.begin() + static_cast<std::ptrdiff_t>(n_params));

  ck.codec.patch = patch;
  ck.codec.d_lat = d_lat;
  ck.codec.seed = j.at("codec").at("seed").get<std::uint64_t>();
  ck.codec.q = Matrix(d_lat, d_lat);
  std::copy(blob.begin() + static_cast<std::ptrdiff_t>(n_params), blob.end(),
            ck.codec.q.data().begin());
  require(ck.codec.hash() == j.at("codec").at("hash").get<std::string>(), "hash-mismatch",
          "checkpoint: codec hash mismatch");

  // The codebook regenerates from its seed; a mismatch means the checkpoint
  // was produced by a different vocabulary or constant set.
  const Codebook cb(ck.embed_dim, ck.codebook_seed);
  require(cb.hash() == ck.codebook_hash, "hash-mismatch",
          "checkpoint: codebook hash does not match this build");
  return ck;
}

// Writes loss curves: one value per line with a step index.
inline void write_loss_csv(const fs::path& path, const std::vector<double>& curve) {
  std::string out = "step,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu,%.12g\n", i, curve[i]);
    out += buf;
  }
  write_text_file(path, out);
}

}  // namespace neuedit
