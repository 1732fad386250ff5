#pragma once

#include <naptron/detail/le_io.hpp>
#include <naptron/error.hpp>
#include <naptron/pattern_store.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace naptron::io {

// Store file layout, all little-endian:
//   "NAPS" | u32 version | u32 pattern_length | u32 class_count
//   | i32 layer | f64 p | f64 train_iou | f64 softmax_threshold
//   | class_count x ( u32 class_id | u64 pattern_count | packed u64 words )
inline constexpr char kStoreMagic[4] = {'N', 'A', 'P', 'S'};
inline constexpr std::uint32_t kStoreVersion = 1;

inline void write_store(std::ostream& out, const PatternStore& store) {
  if (!store.frozen()) throw StateError("only frozen stores can be saved");
  using namespace ::naptron::detail;
  out.write(kStoreMagic, 4);
  put_u32(out, kStoreVersion);
  put_u32(out, static_cast<std::uint32_t>(store.pattern_length()));
  const auto ids = store.class_ids();
  put_u32(out, static_cast<std::uint32_t>(ids.size()));
  const auto& cfg = store.config();
  put_i32(out, cfg.layer);
  put_f64(out, cfg.percentile);
  put_f64(out, cfg.train_iou);
  put_f64(out, cfg.softmax_threshold);
  for (int id : ids) {
    if (id < 0) throw InputError("class ids must be non-negative to persist");
    put_u32(out, static_cast<std::uint32_t>(id));
    put_u64(out, store.count(id));
    for (std::uint64_t w : store.packed(id)) put_u64(out, w);
  }
}

inline PatternStore read_store(std::istream& in) {
  using ::naptron::detail::get_le;
  auto fail = [](const std::string& what) -> ValidationError {
    return ValidationError("store file: " + what);
  };
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4) throw fail("truncated header");
  if (std::string_view(magic, 4) != std::string_view(kStoreMagic, 4)) throw fail("bad magic");
  std::uint32_t version = 0, length = 0, class_count = 0, layer = 0;
  std::uint64_t p = 0, train_iou = 0, s = 0;
  if (!get_le(in, version)) throw fail("truncated header");
  if (version != kStoreVersion)
    throw fail("unsupported format version " + std::to_string(version));
  if (!get_le(in, length) || !get_le(in, class_count) || !get_le(in, layer) ||
      !get_le(in, p) || !get_le(in, train_iou) || !get_le(in, s))
    throw fail("truncated header");

  StoreConfig cfg{static_cast<std::int32_t>(layer), std::bit_cast<double>(p),
                  std::bit_cast<double>(train_iou), std::bit_cast<double>(s)};
  PatternStore store(cfg, length);
  const std::size_t wpp = words_for_bits(length);
  const std::uint64_t tail_mask =
      length % 64 == 0 ? 0 : ~((std::uint64_t{1} << (length % 64)) - 1);
  for (std::uint32_t c = 0; c < class_count; ++c) {
    std::uint32_t id = 0;
    std::uint64_t count = 0;
    if (!get_le(in, id) || !get_le(in, count)) throw fail("truncated class header");
    if (id > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
      throw fail("class id out of range");
    if (store.has_class(static_cast<int>(id))) throw fail("duplicate class id " + std::to_string(id));
    if (count > 0 && length == 0) throw fail("patterns present but pattern length is 0");
    if (wpp > 0 && count > (std::numeric_limits<std::uint64_t>::max() / 8) / wpp)
      throw fail("pattern count overflows");
    std::vector<std::uint64_t> words;
    words.reserve(std::min<std::uint64_t>(count * wpp, 1 << 20));
    for (std::uint64_t i = 0; i < count * wpp; ++i) {
      std::uint64_t w = 0;
      if (!get_le(in, w)) throw fail("truncated pattern data for class " + std::to_string(id));
      if ((i + 1) % wpp == 0 && (w & tail_mask)) throw fail("non-zero padding bits");
      words.push_back(w);
    }
    store.register_class(static_cast<int>(id));
    store.insert_packed(static_cast<int>(id), std::move(words), count);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw fail("trailing bytes after last class");
  store.freeze();
  return store;
}

inline void save_store(const std::filesystem::path& path, const PatternStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open store file for writing: " + path.string());
  write_store(out, store);
  if (!out) throw DataError("failed writing store file: " + path.string());
}

inline PatternStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open store file: " + path.string());
  return read_store(in);
}

}  // namespace naptron::io
