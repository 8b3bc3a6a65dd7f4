#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace plaba {

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

// SHA-256 of a file's contents; throws IoError when unreadable.
std::string file_sha256(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over the target, so readers
// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Reads a JSON Lines file into raw lines, skipping blank lines. A final
// line with no trailing newline is returned only if `keep_unterminated`.
std::vector<std::string> read_lines(const std::filesystem::path& path,
                                    bool keep_unterminated = true);

// Seeded generator with a platform-independent bounded draw.
// std::uniform_int_distribution and std::shuffle are implementation-defined,
// so the split and sampling code goes through this instead.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();

  // Uniform integer in [0, bound); bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Mixes two 64-bit values into one seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::string utc_timestamp();

}  // namespace plaba
