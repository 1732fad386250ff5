#pragma once

#include <naptron/box.hpp>
#include <naptron/detail/le_io.hpp>
#include <naptron/error.hpp>
#include <naptron/extraction.hpp>
#include <naptron/records.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

namespace naptron::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kDatasetFormatVersion = 1;

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kDetectionsFile = "detections.jsonl";
inline constexpr const char* kAnnotationsFile = "annotations.jsonl";
inline constexpr const char* kActivationsFile = "activations.bin";
inline constexpr const char* kFeatureMapsFile = "feature_maps.bin";

/// Bytes of the W, H, C header that precedes every map in feature_maps.bin.
inline constexpr std::uint64_t kMapHeaderBytes = 12;

enum class ActivationMode { Vector, Map };

/// How a map-mode layer becomes one vector per detection.
enum class MapReduction {
  Cell,        // channel vector at the cell under the box center
  ChannelMean  // per-channel mean over the whole map
};

struct ActivationLayout {
  ActivationMode mode = ActivationMode::Vector;
  int layer_count = 1;
  std::vector<std::size_t> lengths;          // vector mode, per layer
  std::vector<std::size_t> channels;         // map mode, per layer
  std::vector<MapReduction> reductions;      // map mode, per layer

  /// Length of the activation vector a detection yields at `layer`.
  std::size_t vector_length(int layer) const {
    return mode == ActivationMode::Vector ? lengths.at(static_cast<std::size_t>(layer))
                                          : channels.at(static_cast<std::size_t>(layer));
  }
};

struct ClassInfo {
  int id = 0;
  std::string name;
};

struct ImageInfo {
  ImageId id = 0;
  double width = 0;
  double height = 0;
};

struct Manifest {
  int format_version = kDatasetFormatVersion;
  std::vector<ClassInfo> classes;
  std::vector<ImageInfo> images;
  ActivationLayout layout;

  std::vector<int> known_class_ids() const {
    std::vector<int> ids;
    for (const auto& c : classes) ids.push_back(c.id);
    return ids;
  }

  const ImageInfo* image(ImageId id) const {
    for (const auto& im : images)
      if (im.id == id) return &im;
    return nullptr;
  }

  /// Layer used when none is requested: the penultimate exported layer.
  int default_layer() const { return std::max(0, layout.layer_count - 2); }
};

struct Finding {
  std::string file;
  std::size_t line = 0;                 // 1-based, 0 when not line-oriented
  std::optional<std::uint64_t> byte;    // byte position for binary files
  std::string message;

  std::string to_string() const {
    std::string s = file;
    if (line > 0) s += ":" + std::to_string(line);
    if (byte) s += " @byte " + std::to_string(*byte);
    return s + ": " + message;
  }
};

struct ValidationReport {
  std::vector<Finding> findings;
  bool ok() const noexcept { return findings.empty(); }
};

/// Lazy reader of per-detection activations. Every fetch opens the blob
/// independently, so concurrent fetches need no locking.
class ActivationReader {
 public:
  ActivationReader() = default;
  ActivationReader(fs::path dir, ActivationLayout layout, std::map<ImageId, ImageInfo> images)
      : dir_(std::move(dir)), layout_(std::move(layout)), images_(std::move(images)) {}

  const ActivationLayout& layout() const noexcept { return layout_; }

  ActivationVector fetch(const DetectionRecord& det, int layer) const {
    const ActivationLocator* loc = det.locator(layer);
    if (!loc)
      throw DataError("detection " + std::to_string(det.det_id) + " has no activations for layer " +
                      std::to_string(layer));
    if (layout_.mode == ActivationMode::Vector) {
      const auto floats = read_floats(dir_ / kActivationsFile, loc->offset, loc->count, det.det_id);
      return ActivationVector(floats.begin(), floats.end());
    }
    const FeatureMap map = read_map(det, *loc);
    if (layout_.reductions.at(static_cast<std::size_t>(layer)) == MapReduction::ChannelMean)
      return channel_mean_flatten(map);
    return extract_conv_pattern(map, map_box_to_cell(det.box, map));
  }

  FeatureMap read_map(const DetectionRecord& det, const ActivationLocator& loc) const {
    const fs::path path = dir_ / kFeatureMapsFile;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    in.seekg(static_cast<std::streamoff>(loc.offset));
    std::uint32_t w = 0, h = 0, c = 0;
    if (!detail::get_le(in, w) || !detail::get_le(in, h) || !detail::get_le(in, c))
      throw DataError("feature map header past end of file for detection " +
                      std::to_string(det.det_id));
    FeatureMap map;
    map.width = w;
    map.height = h;
    map.channels = c;
    const auto floats = read_floats(path, loc.offset + kMapHeaderBytes,
                                    std::uint64_t{w} * h * c, det.det_id);
    map.values.assign(floats.begin(), floats.end());
    auto it = images_.find(det.image_id);
    if (it == images_.end())
      throw DataError("detection " + std::to_string(det.det_id) + " references unknown image");
    map.image_width = it->second.width;
    map.image_height = it->second.height;
    return map;
  }

 private:
  static std::vector<float> read_floats(const fs::path& path, std::uint64_t offset,
                                        std::uint64_t count, DetId det) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    in.seekg(static_cast<std::streamoff>(offset));
    std::vector<unsigned char> raw(count * 4);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::uint64_t>(in.gcount()) != raw.size())
      throw DataError("activation range past end of " + path.filename().string() +
                      " for detection " + std::to_string(det));
    std::vector<float> out(count);
    for (std::uint64_t i = 0; i < count; ++i) out[i] = detail::f32_from_le(&raw[4 * i]);
    return out;
  }

  fs::path dir_;
  ActivationLayout layout_;
  std::map<ImageId, ImageInfo> images_;
};

struct Dataset {
  fs::path dir;
  Manifest manifest;
  std::vector<DetectionRecord> detections;
  std::vector<GroundTruthRecord> ground_truths;
  ActivationReader activations;
  std::string fingerprint;

  /// N: number of known-class ground-truth objects.
  std::size_t known_object_count() const {
    return static_cast<std::size_t>(std::count_if(ground_truths.begin(), ground_truths.end(),
                                                  [](const auto& g) { return g.known; }));
  }
};

/// Content hash over every interchange file of a dataset directory.
inline std::string dataset_fingerprint(const fs::path& dir) {
  detail::Fnv1a h;
  for (const char* name :
       {kManifestFile, kDetectionsFile, kAnnotationsFile, kActivationsFile, kFeatureMapsFile})
    detail::hash_file(h, (dir / name).string(), name);
  return h.hex();
}

// ---------------------------------------------------------------------------
// Serialization helpers shared by writers (generator, exporters, tests).

inline json manifest_to_json(const Manifest& m) {
  json classes = json::array();
  for (const auto& c : m.classes) classes.push_back({{"id", c.id}, {"name", c.name}});
  json images = json::array();
  for (const auto& im : m.images)
    images.push_back({{"id", im.id}, {"width", im.width}, {"height", im.height}});
  json layout;
  layout["layer_count"] = m.layout.layer_count;
  if (m.layout.mode == ActivationMode::Vector) {
    layout["mode"] = "vector";
    layout["lengths"] = m.layout.lengths;
  } else {
    layout["mode"] = "map";
    layout["channels"] = m.layout.channels;
    json reds = json::array();
    for (auto r : m.layout.reductions) reds.push_back(r == MapReduction::Cell ? "cell" : "channel_mean");
    layout["reductions"] = reds;
  }
  return {{"format_version", m.format_version},
          {"classes", classes},
          {"images", images},
          {"activation_layout", layout}};
}

inline json detection_to_json(const DetectionRecord& d) {
  json j = {{"image_id", d.image_id},
            {"det_id", d.det_id},
            {"bbox", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}},
            {"label", d.label},
            {"score", d.score}};
  if (d.softmax) j["softmax"] = *d.softmax;
  if (d.logits) j["logits"] = *d.logits;
  if (d.activations.size() == 1) {
    j["act_offset"] = d.activations[0].offset;
    j["act_count"] = d.activations[0].count;
    j["layer"] = d.activations[0].layer;
  } else {
    json off = json::array(), cnt = json::array(), lay = json::array();
    for (const auto& a : d.activations) {
      off.push_back(a.offset);
      cnt.push_back(a.count);
      lay.push_back(a.layer);
    }
    j["act_offset"] = off;
    j["act_count"] = cnt;
    j["layer"] = lay;
  }
  return j;
}

inline json ground_truth_to_json(const GroundTruthRecord& g) {
  return {{"image_id", g.image_id},
          {"gt_id", g.gt_id},
          {"bbox", {g.box.x1, g.box.y1, g.box.x2, g.box.y2}},
          {"class_id", g.class_id},
          {"known", g.known}};
}

namespace detail {

using ::naptron::detail::f32_from_le;
using ::naptron::detail::get_le;

/// Collects findings while parsing; the same pass backs both validation and
/// loading.
class Checker {
 public:
  explicit Checker(ValidationReport& report) : report_(report) {}

  void add(std::string file, std::size_t line, std::string msg,
           std::optional<std::uint64_t> byte = std::nullopt) {
    report_.findings.push_back({std::move(file), line, byte, std::move(msg)});
  }

  std::size_t count() const { return report_.findings.size(); }

 private:
  ValidationReport& report_;
};

inline bool is_int(const json& j) { return j.is_number_integer(); }

inline std::optional<BoxGeometry> parse_box(const json& j) {
  if (!j.is_array() || j.size() != 4) return std::nullopt;
  for (const auto& v : j)
    if (!v.is_number()) return std::nullopt;
  return BoxGeometry{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline std::optional<std::vector<double>> parse_reals(const json& j) {
  if (!j.is_array()) return std::nullopt;
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) return std::nullopt;
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::optional<Manifest> parse_manifest(const fs::path& dir, Checker& chk) {
  const std::string file = kManifestFile;
  std::ifstream in(dir / file);
  if (!in) {
    chk.add(file, 0, "missing file");
    return std::nullopt;
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    chk.add(file, 0, std::string("malformed JSON: ") + e.what(), e.byte);
    return std::nullopt;
  } catch (const json::exception& e) {
    chk.add(file, 0, std::string("malformed JSON: ") + e.what());
    return std::nullopt;
  }
  const std::size_t before = chk.count();
  Manifest m;
  if (!j.is_object()) {
    chk.add(file, 0, "manifest must be a JSON object");
    return std::nullopt;
  }
  if (!j.contains("format_version") || !is_int(j["format_version"]))
    chk.add(file, 0, "missing integer field format_version");
  else if (j["format_version"].get<int>() != kDatasetFormatVersion)
    chk.add(file, 0, "format version mismatch: expected " + std::to_string(kDatasetFormatVersion) +
                         ", found " + j["format_version"].dump());

  std::set<int> class_ids;
  if (!j.contains("classes") || !j["classes"].is_array() || j["classes"].empty()) {
    chk.add(file, 0, "classes must be a non-empty array");
  } else {
    for (const auto& c : j["classes"]) {
      if (!c.is_object() || !c.contains("id") || !is_int(c["id"]) || c["id"].get<long long>() < 0 ||
          c["id"].get<long long>() > INT32_MAX) {
        chk.add(file, 0, "class entry needs a non-negative integer id");
        continue;
      }
      const int id = c["id"].get<int>();
      if (!class_ids.insert(id).second) chk.add(file, 0, "duplicate class id " + std::to_string(id));
      std::string name = c.contains("name") && c["name"].is_string() ? c["name"].get<std::string>() : "";
      m.classes.push_back({id, std::move(name)});
    }
  }

  std::set<ImageId> image_ids;
  if (!j.contains("images") || !j["images"].is_array()) {
    chk.add(file, 0, "images must be an array");
  } else {
    for (const auto& im : j["images"]) {
      if (!im.is_object() || !im.contains("id") || !is_int(im["id"]) || !im.contains("width") ||
          !im["width"].is_number() || !im.contains("height") || !im["height"].is_number()) {
        chk.add(file, 0, "image entry needs integer id and numeric width/height");
        continue;
      }
      ImageInfo info{im["id"].get<ImageId>(), im["width"].get<double>(), im["height"].get<double>()};
      if (!(info.width > 0 && info.height > 0 && std::isfinite(info.width) && std::isfinite(info.height)))
        chk.add(file, 0, "image " + std::to_string(info.id) + " has non-positive size");
      if (!image_ids.insert(info.id).second)
        chk.add(file, 0, "duplicate image id " + std::to_string(info.id));
      m.images.push_back(info);
    }
  }

  const json* lay = j.contains("activation_layout") ? &j["activation_layout"] : nullptr;
  if (!lay || !lay->is_object()) {
    chk.add(file, 0, "missing activation_layout object");
  } else {
    const std::string mode = lay->contains("mode") && (*lay)["mode"].is_string()
                                 ? (*lay)["mode"].get<std::string>()
                                 : "";
    if (!lay->contains("layer_count") || !is_int((*lay)["layer_count"]) ||
        (*lay)["layer_count"].get<long long>() < 1 || (*lay)["layer_count"].get<long long>() > 1024) {
      chk.add(file, 0, "activation_layout.layer_count must be an integer in [1, 1024]");
    } else {
      m.layout.layer_count = (*lay)["layer_count"].get<int>();
    }
    auto sizes = [&](const char* key, std::vector<std::size_t>& out) {
      if (!lay->contains(key) || !(*lay)[key].is_array() ||
          (*lay)[key].size() != static_cast<std::size_t>(m.layout.layer_count)) {
        chk.add(file, 0, std::string("activation_layout.") + key + " must list one size per layer");
        return;
      }
      for (const auto& v : (*lay)[key]) {
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0 || v.get<std::uint64_t>() > (1u << 24)) {
          chk.add(file, 0, std::string("activation_layout.") + key + " entries must be positive integers");
          out.clear();
          return;
        }
        out.push_back(v.get<std::size_t>());
      }
    };
    if (mode == "vector") {
      m.layout.mode = ActivationMode::Vector;
      sizes("lengths", m.layout.lengths);
    } else if (mode == "map") {
      m.layout.mode = ActivationMode::Map;
      sizes("channels", m.layout.channels);
      m.layout.reductions.assign(static_cast<std::size_t>(m.layout.layer_count), MapReduction::Cell);
      if (lay->contains("reductions")) {
        const auto& r = (*lay)["reductions"];
        if (!r.is_array() || r.size() != static_cast<std::size_t>(m.layout.layer_count)) {
          chk.add(file, 0, "activation_layout.reductions must list one entry per layer");
        } else {
          for (std::size_t i = 0; i < r.size(); ++i) {
            if (r[i] == "cell") m.layout.reductions[i] = MapReduction::Cell;
            else if (r[i] == "channel_mean") m.layout.reductions[i] = MapReduction::ChannelMean;
            else chk.add(file, 0, "unknown map reduction " + r[i].dump());
          }
        }
      }
    } else {
      chk.add(file, 0, "activation_layout.mode must be \"vector\" or \"map\"");
    }
  }
  if (chk.count() != before) return std::nullopt;
  return m;
}

/// Iterates the non-blank lines of a JSONL file.
template <typename Fn>
bool for_each_json_line(const fs::path& dir, const std::string& file, Checker& chk, Fn&& fn) {
  std::ifstream in(dir / file);
  if (!in) {
    chk.add(file, 0, "missing file");
    return false;
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      chk.add(file, lineno, std::string("malformed JSON: ") + e.what());
      continue;
    }
    if (!j.is_object()) {
      chk.add(file, lineno, "record must be a JSON object");
      continue;
    }
    fn(j, lineno);
  }
  return true;
}

inline std::optional<std::vector<ActivationLocator>> parse_locators(const json& j) {
  auto u64 = [](const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); };
  if (!j.contains("act_offset") || !j.contains("act_count") || !j.contains("layer")) return std::nullopt;
  const json &off = j["act_offset"], &cnt = j["act_count"], &lay = j["layer"];
  std::vector<ActivationLocator> out;
  if (off.is_array() || cnt.is_array() || lay.is_array()) {
    if (!off.is_array() || !cnt.is_array() || !lay.is_array() || off.size() != cnt.size() ||
        off.size() != lay.size() || off.empty())
      return std::nullopt;
    for (std::size_t i = 0; i < off.size(); ++i) {
      if (!u64(off[i]) || !u64(cnt[i]) || !is_int(lay[i])) return std::nullopt;
      out.push_back({lay[i].get<int>(), off[i].get<std::uint64_t>(), cnt[i].get<std::uint64_t>()});
    }
    return out;
  }
  if (!u64(off) || !u64(cnt) || !is_int(lay)) return std::nullopt;
  out.push_back({lay.get<int>(), off.get<std::uint64_t>(), cnt.get<std::uint64_t>()});
  return out;
}

inline std::optional<std::uint64_t> size_of(const fs::path& p) {
  std::error_code ec;
  auto n = fs::file_size(p, ec);
  if (ec) return std::nullopt;
  return n;
}

/// Offset of the first non-finite float in [offset, offset + 4 * count).
inline std::optional<std::uint64_t> first_non_finite(std::ifstream& in, std::uint64_t offset,
                                                     std::uint64_t count) {
  in.clear();
  in.seekg(static_cast<std::streamoff>(offset));
  std::vector<unsigned char> buf;
  std::uint64_t done = 0;
  while (done < count) {
    const std::uint64_t chunk = std::min<std::uint64_t>(count - done, 1 << 16);
    buf.resize(chunk * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::uint64_t>(in.gcount()) != buf.size()) return offset + 4 * done;
    for (std::uint64_t i = 0; i < chunk; ++i)
      if (!std::isfinite(f32_from_le(&buf[4 * i]))) return offset + 4 * (done + i);
    done += chunk;
  }
  return std::nullopt;
}

}  // namespace detail

/// Parses and checks a dataset directory. Returns the dataset only when no
/// finding was recorded.
inline std::optional<Dataset> parse_dataset(const fs::path& dir, ValidationReport& report) {
  using namespace detail;
  Checker chk(report);
  if (!fs::is_directory(dir)) {
    chk.add(dir.string(), 0, "not a directory");
    return std::nullopt;
  }
  auto manifest = parse_manifest(dir, chk);
  Dataset ds;
  ds.dir = dir;

  std::set<int> known;
  std::map<ImageId, ImageInfo> images;
  if (manifest) {
    for (const auto& c : manifest->classes) known.insert(c.id);
    for (const auto& im : manifest->images) images[im.id] = im;
  }
  const std::size_t class_count = manifest ? manifest->classes.size() : 0;

  // Activation files: vector mode needs activations.bin, map mode feature_maps.bin.
  const bool map_mode = manifest && manifest->layout.mode == ActivationMode::Map;
  const std::string blob_name = map_mode ? kFeatureMapsFile : kActivationsFile;
  const auto blob_size = size_of(dir / blob_name);
  if (!blob_size) chk.add(blob_name, 0, "missing file");
  std::ifstream blob(dir / blob_name, std::ios::binary);
  std::set<std::uint64_t> checked_maps;

  std::unordered_set<DetId> det_ids;
  for_each_json_line(dir, kDetectionsFile, chk, [&](const json& j, std::size_t line) {
    const std::string file = kDetectionsFile;
    const std::size_t before = chk.count();
    DetectionRecord d;
    if (!j.contains("det_id") || !is_int(j["det_id"])) {
      chk.add(file, line, "missing integer det_id");
      return;
    }
    d.det_id = j["det_id"].get<DetId>();
    const std::string who = "detection " + std::to_string(d.det_id) + ": ";
    if (!det_ids.insert(d.det_id).second) chk.add(file, line, who + "duplicated det id");
    if (!j.contains("image_id") || !is_int(j["image_id"])) chk.add(file, line, who + "missing integer image_id");
    else {
      d.image_id = j["image_id"].get<ImageId>();
      if (manifest && !images.contains(d.image_id))
        chk.add(file, line, who + "image " + std::to_string(d.image_id) + " not listed in manifest");
    }
    if (auto box = j.contains("bbox") ? parse_box(j["bbox"]) : std::nullopt; !box || !box->valid())
      chk.add(file, line, who + "bbox must be [x1,y1,x2,y2] with 0 <= x1 < x2, 0 <= y1 < y2");
    else d.box = *box;
    if (!j.contains("label") || !is_int(j["label"])) chk.add(file, line, who + "missing integer label");
    else {
      d.label = j["label"].get<int>();
      if (manifest && !known.contains(d.label))
        chk.add(file, line, who + "unknown class id " + std::to_string(d.label));
    }
    if (!j.contains("score") || !j["score"].is_number()) chk.add(file, line, who + "missing numeric score");
    else {
      d.score = j["score"].get<double>();
      if (!(d.score >= 0.0 && d.score <= 1.0)) chk.add(file, line, who + "score outside [0, 1]");
    }
    if (j.contains("softmax")) {
      auto sm = parse_reals(j["softmax"]);
      if (!sm || sm->size() != class_count || sm->empty()) {
        chk.add(file, line, who + "softmax must hold one probability per known class");
      } else {
        bool in_range = std::all_of(sm->begin(), sm->end(), [](double p) { return p >= 0.0 && p <= 1.0; });
        if (!in_range) chk.add(file, line, who + "softmax entries must lie in [0, 1]");
        else if (std::abs(*std::max_element(sm->begin(), sm->end()) - d.score) > 1e-6)
          chk.add(file, line, who + "score differs from max(softmax)");
        d.softmax = std::move(sm);
      }
    }
    if (j.contains("logits")) {
      auto lg = parse_reals(j["logits"]);
      if (!lg || lg->size() != class_count || lg->empty() ||
          !std::all_of(lg->begin(), lg->end(), [](double v) { return std::isfinite(v); }))
        chk.add(file, line, who + "logits must hold one finite value per known class");
      else d.logits = std::move(lg);
    }
    auto locs = parse_locators(j);
    if (!locs) {
      chk.add(file, line, who + "act_offset/act_count/layer missing or malformed");
    } else if (manifest) {
      std::set<int> seen_layers;
      for (const auto& loc : *locs) {
        if (loc.layer < 0 || loc.layer >= manifest->layout.layer_count) {
          chk.add(file, line, who + "layer " + std::to_string(loc.layer) + " outside manifest layer count");
          continue;
        }
        if (!seen_layers.insert(loc.layer).second) chk.add(file, line, who + "layer listed twice");
        if (loc.offset % 4 != 0) chk.add(file, line, who + "act_offset not 4-byte aligned", loc.offset);
        if (!blob_size) continue;
        if (!map_mode) {
          const auto expect = manifest->layout.lengths[static_cast<std::size_t>(loc.layer)];
          if (loc.count != expect)
            chk.add(file, line, who + "act_count " + std::to_string(loc.count) + " != layer length " +
                                    std::to_string(expect));
          if (loc.count > *blob_size / 4 || loc.offset > *blob_size - 4 * loc.count) {
            chk.add(file, line, who + "dangling locator: range ends at byte " +
                                    std::to_string(loc.offset + 4 * loc.count) + " beyond " + blob_name +
                                    " size " + std::to_string(*blob_size), *blob_size);
          } else if (auto bad = first_non_finite(blob, loc.offset, loc.count)) {
            chk.add(blob_name, 0, who + "non-finite activation value", *bad);
          }
        } else {
          if (loc.offset > *blob_size || *blob_size - loc.offset < kMapHeaderBytes) {
            chk.add(file, line, who + "dangling locator: map header beyond " + blob_name + " size " +
                                    std::to_string(*blob_size), *blob_size);
            continue;
          }
          blob.clear();
          blob.seekg(static_cast<std::streamoff>(loc.offset));
          std::uint32_t w = 0, h = 0, c = 0;
          get_le(blob, w);
          get_le(blob, h);
          get_le(blob, c);
          const std::uint64_t cells = std::uint64_t{w} * h * c;
          if (w == 0 || h == 0 || c == 0) {
            chk.add(blob_name, 0, who + "feature map with zero dimension", loc.offset);
            continue;
          }
          if (c != manifest->layout.channels[static_cast<std::size_t>(loc.layer)])
            chk.add(file, line, who + "feature map channel count " + std::to_string(c) +
                                    " != layer channels");
          if (loc.count != cells) chk.add(file, line, who + "act_count does not equal W*H*C of its map");
          const std::uint64_t body = loc.offset + kMapHeaderBytes;
          if (cells > (*blob_size - body) / 4) {
            chk.add(file, line, who + "dangling locator: map data ends at byte " +
                                    std::to_string(body + 4 * cells) + " beyond " + blob_name + " size " +
                                    std::to_string(*blob_size), *blob_size);
          } else if (checked_maps.insert(loc.offset).second) {
            if (auto bad = first_non_finite(blob, body, cells))
              chk.add(blob_name, 0, who + "non-finite feature map value", *bad);
          }
        }
      }
      d.activations = std::move(*locs);
    }
    if (chk.count() == before) ds.detections.push_back(std::move(d));
  });

  std::unordered_set<std::int64_t> gt_ids;
  for_each_json_line(dir, kAnnotationsFile, chk, [&](const json& j, std::size_t line) {
    const std::string file = kAnnotationsFile;
    const std::size_t before = chk.count();
    GroundTruthRecord g;
    if (!j.contains("gt_id") || !is_int(j["gt_id"])) {
      chk.add(file, line, "missing integer gt_id");
      return;
    }
    g.gt_id = j["gt_id"].get<std::int64_t>();
    const std::string who = "ground truth " + std::to_string(g.gt_id) + ": ";
    if (!gt_ids.insert(g.gt_id).second) chk.add(file, line, who + "duplicated gt id");
    if (!j.contains("image_id") || !is_int(j["image_id"])) chk.add(file, line, who + "missing integer image_id");
    else {
      g.image_id = j["image_id"].get<ImageId>();
      if (manifest && !images.contains(g.image_id))
        chk.add(file, line, who + "image " + std::to_string(g.image_id) + " not listed in manifest");
    }
    if (auto box = j.contains("bbox") ? parse_box(j["bbox"]) : std::nullopt; !box || !box->valid())
      chk.add(file, line, who + "bbox must be [x1,y1,x2,y2] with 0 <= x1 < x2, 0 <= y1 < y2");
    else g.box = *box;
    if (!j.contains("known") || !j["known"].is_boolean()) chk.add(file, line, who + "missing boolean known");
    else g.known = j["known"].get<bool>();
    if (!j.contains("class_id") || !is_int(j["class_id"])) chk.add(file, line, who + "missing integer class_id");
    else {
      g.class_id = j["class_id"].get<int>();
      if (manifest && j.contains("known") && j["known"].is_boolean()) {
        if (g.known && !known.contains(g.class_id))
          chk.add(file, line, who + "known ground truth with class " + std::to_string(g.class_id) +
                                  " not in the manifest");
        if (!g.known && known.contains(g.class_id))
          chk.add(file, line, who + "unknown ground truth uses known class " + std::to_string(g.class_id));
      }
    }
    if (chk.count() == before) ds.ground_truths.push_back(g);
  });

  if (!report.ok() || !manifest) return std::nullopt;
  ds.manifest = std::move(*manifest);
  ds.activations = ActivationReader(dir, ds.manifest.layout, std::move(images));
  ds.fingerprint = dataset_fingerprint(dir);
  return ds;
}

inline ValidationReport validate_dataset(const fs::path& dir) {
  ValidationReport report;
  parse_dataset(dir, report);
  return report;
}

/// Loads a dataset; throws ValidationError carrying the first finding when
/// the directory would not validate cleanly.
inline Dataset load_dataset(const fs::path& dir) {
  ValidationReport report;
  auto ds = parse_dataset(dir, report);
  if (!ds) {
    std::string msg = report.findings.empty() ? "invalid dataset" : report.findings.front().to_string();
    if (report.findings.size() > 1)
      msg += " (and " + std::to_string(report.findings.size() - 1) + " more findings)";
    throw ValidationError(msg);
  }
  return std::move(*ds);
}

}  // namespace naptron::io
