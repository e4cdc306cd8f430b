#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "pep/error.hpp"

#define EXPECT_ERROR_KIND(expr, expected_kind)                                        \
  do {                                                                                \
    try {                                                                             \
      (void)(expr);                                                                   \
      ADD_FAILURE() << "expected " << pep::to_string(expected_kind) << " from " #expr; \
    } catch (const pep::Error& e) {                                                   \
      EXPECT_EQ(e.kind(), expected_kind) << e.what();                                 \
    }                                                                                 \
  } while (0)

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("pep_test_" + std::to_string(rd()) + std::to_string(rd()));
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

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
