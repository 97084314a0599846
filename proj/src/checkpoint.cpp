#include "zipfls/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace zipfls {
namespace {

constexpr char kMagic[4] = {'Z', 'L', 'S', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename V>
void write_raw(std::ostream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_raw(std::istream& in) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, MiniNet<float>& net,
                     const NormStats& stats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  const NetConfig& cfg = net.config();
  write_raw(out, kVersion);
  write_raw(out, static_cast<std::uint32_t>(cfg.num_classes));
  write_raw(out, static_cast<std::uint32_t>(cfg.in_channels));
  for (int w : cfg.widths) write_raw(out, static_cast<std::uint32_t>(w));
  for (float v : stats.mean) write_raw(out, v);
  for (float v : stats.stdev) write_raw(out, v);

  std::uint64_t count = 0;
  auto tensors = net.params();
  for (const auto& b : net.buffers()) tensors.push_back(b);
  for (const auto& t : tensors) count += t.value->size();
  write_raw(out, count);
  for (const auto& t : tensors) {
    out.write(reinterpret_cast<const char*>(t.value->data()),
              static_cast<std::streamsize>(t.value->size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

LoadedNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  if (read_raw<std::uint32_t>(in) != kVersion) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  NetConfig cfg;
  cfg.num_classes = static_cast<int>(read_raw<std::uint32_t>(in));
  cfg.in_channels = static_cast<int>(read_raw<std::uint32_t>(in));
  for (int i = 0; i < 3; ++i) cfg.widths[i] = static_cast<int>(read_raw<std::uint32_t>(in));
  NormStats stats;
  for (float& v : stats.mean) v = read_raw<float>(in);
  for (float& v : stats.stdev) v = read_raw<float>(in);

  LoadedNet loaded{MiniNet<float>(cfg, 0), stats};
  auto tensors = loaded.net.params();
  for (const auto& b : loaded.net.buffers()) tensors.push_back(b);
  std::uint64_t expect = 0;
  for (const auto& t : tensors) expect += t.value->size();
  if (read_raw<std::uint64_t>(in) != expect) {
    throw std::runtime_error("checkpoint parameter count mismatch");
  }
  for (auto& t : tensors) {
    in.read(reinterpret_cast<char*>(t.value->data()),
            static_cast<std::streamsize>(t.value->size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint");
  }
  return loaded;
}

}  // namespace zipfls
