#pragma once

// Self-describing binary checkpoint: magic "PARCKPT1", format version, the
// config text, epoch, loss history and named tensors. Every integer is a
// little-endian u64 (version u32) and every value a little-endian IEEE f64.

#include <cstdint>
#include <string>
#include <vector>

#include "par/model.hpp"

namespace par {

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;

  friend bool operator==(const CheckpointTensor&, const CheckpointTensor&) = default;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string config_text;
  std::uint64_t epoch = 0;
  std::vector<double> loss_history;
  std::vector<CheckpointTensor> tensors;

  std::string serialize() const;
  /// Throws DataError on a bad magic, version or truncated payload.
  static Checkpoint deserialize(const std::string& bytes);

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

Checkpoint snapshot(const ParModel& model, const std::string& config_text, std::uint64_t epoch,
                    std::vector<double> loss_history);

/// Copies checkpoint values into the model; names and shapes must match exactly.
void restore(ParModel& model, const Checkpoint& checkpoint);

}  // namespace par
