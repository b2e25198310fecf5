#pragma once

// Binary weights file:
//
//   "NNW1"                      4 magic bytes
//   u32 tensor_count            little-endian
//   per tensor:
//     u32 name_length, name     UTF-8, no terminator
//     u32 rank, rank x u32 dims
//     prod(dims) x f64          little-endian IEEE-754
//
// No padding, no alignment, nothing after the last tensor.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semtest/error.hpp"
#include "semtest/models.hpp"

namespace semtest {

class WeightsError : public Error {
 public:
  enum class Kind { Io, BadMagic, Truncated, InconsistentShape, TrailingData, MissingTensor, WrongModelKind };

  WeightsError(Kind kind, std::string tensor, const std::string& message)
      : Error(message), kind_(kind), tensor_(std::move(tensor)) {}

  Kind kind() const noexcept { return kind_; }
  /// Name of the tensor being processed when the error occurred, if any.
  const std::string& tensor() const noexcept { return tensor_; }

 private:
  Kind kind_;
  std::string tensor_;
};

std::vector<std::uint8_t> encode_weights(const NamedTensors& tensors);
NamedTensors decode_weights(std::span<const std::uint8_t> bytes);

void save_weights(const NamedTensors& tensors, const std::filesystem::path& path);
NamedTensors load_weights(const std::filesystem::path& path);

void save_weights(const GeneratorModel& model, const std::filesystem::path& path);
void save_weights(const ClassifierModel& model, const std::filesystem::path& path);
void save_weights(const DiscriminatorModel& model, const std::filesystem::path& path);

GeneratorModel load_generator(const std::filesystem::path& path);
ClassifierModel load_classifier(const std::filesystem::path& path);
DiscriminatorModel load_discriminator(const std::filesystem::path& path);

}  // namespace semtest
