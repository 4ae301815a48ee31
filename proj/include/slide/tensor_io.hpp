#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace slide {

/// One named float32 array of a checkpoint or dataset file.
struct NamedArray {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t numel() const;
};

/// Manifest (JSON) + little-endian float32 payload.
///
/// For a manifest at `run/actor.json` the payload lives at `run/actor.bin`.
/// Manifest layout:
///   {"format": "slide-tensors-v1", "payload": "actor.bin",
///    "arrays": [{"name", "shape", "offset"}], "meta": {...}}
/// where `offset` is the byte offset of the array inside the payload.
class TensorFile {
 public:
  std::vector<NamedArray> arrays;
  nlohmann::json meta = nlohmann::json::object();

  void add(std::string name, std::vector<std::int64_t> shape, std::span<const double> values);
  void add(std::string name, std::vector<std::int64_t> shape, std::vector<float> values);
  const NamedArray& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  void save(const std::filesystem::path& manifest) const;
  static TensorFile load(const std::filesystem::path& manifest);
};

std::filesystem::path payload_path(const std::filesystem::path& manifest);

/// Git blob hash (SHA-1 over "blob <size>\0" + content) of a file.
std::string git_blob_hash(const std::filesystem::path& file);

}  // namespace slide
