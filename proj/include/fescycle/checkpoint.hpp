#pragma once

/**
 * @file checkpoint.hpp
 * @brief Versioned binary policy checkpoints.
 *
 * Layout (all integers and floats little-endian):
 *
 *   magic      8 bytes  "FESPOLCY"
 *   version    u32
 *   mode       u8       0 = starter, 1 = tracker
 *   norm       4 x f64  theta, cadence, desired scales; max entry
 *   net_count  u32      1 (actor) or 2 (actor, critic)
 *   per net:   u32 layer count, u32 input dim,
 *              per layer u32 output dim + u8 activation,
 *              then per layer the weights (row-major f64) and biases (f64)
 *   metadata   u32 length + UTF-8 bytes (free-form JSON text)
 *   crc32      u32      over every preceding byte
 */

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fescycle/env.hpp"
#include "fescycle/nnet.hpp"

namespace fes {

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct PolicyCheckpoint {
  env::Mode mode = env::Mode::Starter;
  env::Normalization normalization{};
  nnet::DenseNet actor;
  std::optional<nnet::DenseNet> critic;
  std::string metadata = "{}";

  std::vector<std::uint8_t> serialize() const;

  /// Parses and validates a checkpoint. When `expected` is given, the mode tag
  /// and the actor input width must match that agent.
  static PolicyCheckpoint deserialize(const std::vector<std::uint8_t> &bytes,
                                      std::optional<env::Mode> expected = {});

  void save(const std::filesystem::path &path) const;
  static PolicyCheckpoint load(const std::filesystem::path &path,
                               std::optional<env::Mode> expected = {});

  /// Greedy policy closure over a copy of the actor.
  env::Policy policy() const;
};

std::uint32_t crc32(const std::uint8_t *data, std::size_t size);

} // namespace fes
