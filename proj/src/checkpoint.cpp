#include "par/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "par/errors.hpp"
#include "par/io.hpp"

namespace par {

namespace {

constexpr char kMagic[8] = {'P', 'A', 'R', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::size_t count) const {
    if (bytes_.size() - pos_ < count) throw DataError("checkpoint is truncated");
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += 4;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto len = u64();
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  std::string raw(std::size_t len) {
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string Checkpoint::serialize() const {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_str(out, config_text);
  put_u64(out, epoch);
  put_u64(out, loss_history.size());
  for (double v : loss_history) put_f64(out, v);
  put_u64(out, tensors.size());
  for (const auto& t : tensors) {
    put_str(out, t.name);
    put_u64(out, t.shape.size());
    for (auto d : t.shape) put_u64(out, d);
    put_u64(out, t.values.size());
    for (double v : t.values) put_f64(out, v);
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  Reader r(bytes);
  if (r.raw(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw DataError("not a checkpoint file (bad magic)");
  const auto version = r.u32();
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.config_text = r.str();
  ck.epoch = r.u64();
  const auto losses = r.u64();
  r.need(losses * 8);
  for (std::uint64_t k = 0; k < losses; ++k) ck.loss_history.push_back(r.f64());
  const auto count = r.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    CheckpointTensor t;
    t.name = r.str();
    const auto rank = r.u64();
    r.need(rank * 8);
    for (std::uint64_t d = 0; d < rank; ++d) t.shape.push_back(r.u64());
    const auto numel = r.u64();
    if (numel != shape_numel(t.shape)) throw DataError("checkpoint tensor " + t.name + " has inconsistent size");
    r.need(numel * 8);
    t.values.reserve(numel);
    for (std::uint64_t v = 0; v < numel; ++v) t.values.push_back(r.f64());
    ck.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  return ck;
}

void Checkpoint::save(const std::string& path) const { write_file_atomic(path, serialize()); }

Checkpoint Checkpoint::load(const std::string& path) { return deserialize(read_file(path)); }

Checkpoint snapshot(const ParModel& model, const std::string& config_text, std::uint64_t epoch,
                    std::vector<double> loss_history) {
  Checkpoint ck;
  ck.config_text = config_text;
  ck.epoch = epoch;
  ck.loss_history = std::move(loss_history);
  for (const auto& e : model.parameters().entries()) {
    const auto& v = e.tensor.values();
    ck.tensors.push_back({e.name, e.tensor.shape(), std::vector<double>(v.begin(), v.end())});
  }
  return ck;
}

void restore(ParModel& model, const Checkpoint& checkpoint) {
  const auto& entries = model.parameters().entries();
  if (entries.size() != checkpoint.tensors.size()) {
    throw DataError("checkpoint holds " + std::to_string(checkpoint.tensors.size()) + " tensors, model has " +
                    std::to_string(entries.size()));
  }
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& src = checkpoint.tensors[k];
    Tensor dst = entries[k].tensor;
    if (src.name != entries[k].name || src.shape != dst.shape())
      throw DataError("checkpoint tensor " + src.name + " does not match model parameter " + entries[k].name);
    std::memcpy(dst.data().data(), src.values.data(), src.values.size() * sizeof(double));
  }
}

}  // namespace par
