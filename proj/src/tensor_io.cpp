#include "slide/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include <openssl/evp.h>

#include "slide/error.hpp"

namespace slide {
namespace {

constexpr const char* kFormat = "slide-tensors-v1";

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SlideError(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::int64_t NamedArray::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

void TensorFile::add(std::string name, std::vector<std::int64_t> shape,
                     std::span<const double> values) {
  std::vector<float> data(values.begin(), values.end());
  add(std::move(name), std::move(shape), std::move(data));
}

void TensorFile::add(std::string name, std::vector<std::int64_t> shape, std::vector<float> values) {
  NamedArray arr{std::move(name), std::move(shape), std::move(values)};
  if (arr.numel() != static_cast<std::int64_t>(arr.data.size())) {
    throw SlideError(ErrorCode::DimensionMismatch, "shape does not match data for " + arr.name);
  }
  arrays.push_back(std::move(arr));
}

bool TensorFile::contains(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return true;
  }
  return false;
}

const NamedArray& TensorFile::get(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw SlideError(ErrorCode::Io, "array '" + name + "' not found");
}

std::filesystem::path payload_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

void TensorFile::save(const std::filesystem::path& manifest) const {
  if (manifest.has_parent_path()) std::filesystem::create_directories(manifest.parent_path());
  const auto payload = payload_path(manifest);
  nlohmann::json doc;
  doc["format"] = kFormat;
  doc["payload"] = payload.filename().string();
  doc["arrays"] = nlohmann::json::array();

  std::ofstream bin(payload, std::ios::binary);
  if (!bin) throw SlideError(ErrorCode::Io, "cannot write " + payload.string());
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    doc["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}});
    for (float f : a.data) {
      const std::uint32_t word = to_little(std::bit_cast<std::uint32_t>(f));
      bin.write(reinterpret_cast<const char*>(&word), sizeof word);
    }
    offset += a.data.size() * sizeof(float);
  }
  doc["meta"] = meta;
  std::ofstream out(manifest);
  if (!out) throw SlideError(ErrorCode::Io, "cannot write " + manifest.string());
  out << doc.dump(2) << '\n';
}

TensorFile TensorFile::load(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw SlideError(ErrorCode::Io, "cannot open " + manifest.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SlideError(ErrorCode::Io, "malformed manifest " + manifest.string() + ": " + e.what());
  }
  if (doc.value("format", "") != kFormat) {
    throw SlideError(ErrorCode::Io, "unsupported manifest format in " + manifest.string());
  }
  const auto bytes = read_file(manifest.parent_path() / doc.at("payload").get<std::string>());
  TensorFile file;
  file.meta = doc.value("meta", nlohmann::json::object());
  for (const auto& entry : doc.at("arrays")) {
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    a.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto n = static_cast<std::uint64_t>(a.numel());
    if (offset + n * sizeof(float) > bytes.size()) {
      throw SlideError(ErrorCode::Io, "payload too short for array " + a.name);
    }
    a.data.resize(n);
    for (std::uint64_t k = 0; k < n; ++k) {
      std::uint32_t word;
      std::memcpy(&word, bytes.data() + offset + k * sizeof(float), sizeof word);
      a.data[k] = std::bit_cast<float>(to_little(word));
    }
    file.arrays.push_back(std::move(a));
  }
  return file;
}

std::string git_blob_hash(const std::filesystem::path& file) {
  const auto bytes = read_file(file);
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    const unsigned char c = digest[k];
    out += hex[c >> 4];
    out += hex[c & 0xf];
  }
  return out;
}

}  // namespace slide
