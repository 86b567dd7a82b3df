#include "searnn/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace searnn {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'N', 'N'};

template <typename T>
void write_raw(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("truncated checkpoint file: " + path);
  return value;
}

}  // namespace

void save_checkpoint(const Model& model, const CheckpointMeta& meta,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_raw<std::uint32_t>(out, kCheckpointVersion);
  write_raw<std::uint64_t>(out, meta.src_vocab_hash);
  write_raw<std::uint64_t>(out, meta.tgt_vocab_hash);
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(meta.dims.src_vocab));
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(meta.dims.tgt_vocab));
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(meta.dims.embed));
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(meta.dims.hidden));

  const auto& params = model.params().params();
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) {
      write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      write_raw<float>(out, static_cast<float>(tensor[i]));
    }
  }
  if (!out) throw DataError("write failed for checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("not a checkpoint file (bad magic): " + path);
  }
  const auto version = read_raw<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version) + " in " + path);
  }

  CheckpointMeta meta;
  meta.src_vocab_hash = read_raw<std::uint64_t>(in, path);
  meta.tgt_vocab_hash = read_raw<std::uint64_t>(in, path);
  meta.dims.src_vocab = read_raw<std::uint32_t>(in, path);
  meta.dims.tgt_vocab = read_raw<std::uint32_t>(in, path);
  meta.dims.embed = read_raw<std::uint32_t>(in, path);
  meta.dims.hidden = read_raw<std::uint32_t>(in, path);

  Model model(meta.dims);
  ParamStore& store = model.mutable_params();
  const auto count = read_raw<std::uint32_t>(in, path);
  if (count != store.params().size()) {
    throw DataError("checkpoint parameter count " + std::to_string(count) +
                    " does not match model (" +
                    std::to_string(store.params().size()) + "): " + path);
  }
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name_len = read_raw<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw DataError("truncated checkpoint file: " + path);
    if (!store.has(name)) {
      throw DataError("unknown parameter '" + name + "' in " + path);
    }
    Tensor& dst = store.param(name);
    const auto rank = read_raw<std::uint32_t>(in, path);
    if (rank != dst.rank()) {
      throw DataError("rank mismatch for parameter '" + name + "' in " + path);
    }
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = read_raw<std::uint32_t>(in, path);
      if (dim != dst.shape()[d]) {
        throw DataError("shape mismatch for parameter '" + name + "' in " +
                        path + ": stored dim " + std::to_string(dim) +
                        " vs expected " + std::to_string(dst.shape()[d]));
      }
    }
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = static_cast<double>(read_raw<float>(in, path));
    }
  }
  return LoadedCheckpoint{meta, std::move(model)};
}

void require_vocab_match(const CheckpointMeta& meta,
                         std::uint64_t src_vocab_hash,
                         std::uint64_t tgt_vocab_hash) {
  if (meta.src_vocab_hash != src_vocab_hash ||
      meta.tgt_vocab_hash != tgt_vocab_hash) {
    throw DataError(
        "checkpoint was trained with a different vocabulary "
        "(content hash mismatch); refusing to load it with these vocab files");
  }
}

}  // namespace searnn
