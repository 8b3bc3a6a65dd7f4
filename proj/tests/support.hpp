#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "plaba/corpus.hpp"

#ifndef PLABA_FIXTURE_DIR
#define PLABA_FIXTURE_DIR "tests/fixtures"
#endif
#ifndef PLABA_GOLDEN_DIR
#define PLABA_GOLDEN_DIR "tests/golden"
#endif

namespace testsupport {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(PLABA_FIXTURE_DIR) / name;
}

inline std::filesystem::path golden(const std::string& name) {
  return std::filesystem::path(PLABA_GOLDEN_DIR) / name;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("plaba-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Hand-rolled generators for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t size(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  bool coin() { return size(0, 1) == 1; }

  // Tokens drawn from a vocabulary of `vocab` words.
  std::vector<std::string> tokens(std::size_t min_len, std::size_t max_len, std::size_t vocab) {
    std::vector<std::string> out(size(min_len, max_len));
    for (auto& t : out) t = std::string(1, static_cast<char>('a' + size(0, vocab - 1)));
    return out;
  }

  // Random but valid corpus with the given shape limits.
  plaba::corpus::Corpus corpus(std::size_t max_questions, std::size_t max_abstracts,
                               std::size_t max_sentences, std::size_t max_adaptations) {
    using namespace plaba::corpus;
    std::vector<ConsumerQuestion> qs;
    std::vector<SourceAbstract> as;
    std::vector<Adaptation> ads;
    std::size_t nq = size(1, max_questions);
    std::size_t next_abstract = 0;
    for (std::size_t q = 0; q < nq; ++q) {
      std::string qid = "Q" + std::to_string(q);
      qs.push_back({qid, "question " + std::to_string(q) + "?", {}});
      std::size_t na = size(1, max_abstracts);
      for (std::size_t a = 0; a < na; ++a) {
        std::string aid = std::to_string(100000 + next_abstract++);
        SourceAbstract abs{aid, qid, {}};
        std::size_t ns = size(1, max_sentences);
        for (std::size_t s = 0; s < ns; ++s) abs.sentences.push_back("Source sentence " + std::to_string(s) + ".");
        std::size_t nad = size(0, max_adaptations);
        for (std::size_t d = 0; d < nad; ++d) {
          Adaptation ad{aid + ":A" + std::to_string(d), aid, "A" + std::to_string(d), {}};
          for (std::size_t s = 0; s < ns; ++s) {
            std::vector<std::string> cell;
            std::size_t pieces = size(0, 2);
            for (std::size_t p = 0; p < pieces; ++p) cell.push_back("Plain " + std::to_string(p) + ".");
            ad.alignment.push_back(cell);
          }
          ads.push_back(std::move(ad));
        }
        as.push_back(std::move(abs));
      }
    }
    return Corpus(std::move(qs), std::move(as), std::move(ads));
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace testsupport
