#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace brainage {

// FNV-1a 64-bit; used for stage cache keys, not for security.
class Hasher {
 public:
  void update(std::string_view bytes);
  void update_file(const std::filesystem::path& path);
  // Hashes every regular file below dir in sorted path order, including names.
  void update_tree(const std::filesystem::path& dir);
  std::uint64_t value() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_file(const std::filesystem::path& path);

}  // namespace brainage
