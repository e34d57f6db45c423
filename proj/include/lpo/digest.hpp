#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

namespace lpo {

/// Incremental SHA-256 (OpenSSL EVP underneath). Digests are lowercase hex.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view bytes);
  void update_u64(std::uint64_t v);  // little-endian
  std::string hex_digest();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view bytes);
/// Throws std::runtime_error if the file cannot be read.
std::string sha256_file(const std::string& path);

}  // namespace lpo
