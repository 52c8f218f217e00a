#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace unimatch {

/// Self-describing binary container used for spectral/descriptor caches and
/// training checkpoints.
///
/// Layout (little endian): 8-byte magic "UNIMATCH", u32 format version,
/// string kind, u32 record count, then records of
/// (string name, u8 type, u64 rows, u64 cols, payload). Strings are stored as
/// u64 length followed by raw bytes. Matrices are column-major doubles.
class Container {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  Container() = default;
  explicit Container(std::string kind) : kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

  void put(const std::string& name, const Eigen::MatrixXd& m);
  void put(const std::string& name, const std::vector<std::int64_t>& values);
  void put(const std::string& name, const std::string& text);
  void put_u64(const std::string& name, std::uint64_t value);

  bool contains(const std::string& name) const;
  const Eigen::MatrixXd& matrix(const std::string& name) const;
  const std::vector<std::int64_t>& integers(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  std::uint64_t u64(const std::string& name) const;

  std::vector<std::string> names() const;

  void save(const std::filesystem::path& path) const;
  /// Throws ParseError on bad magic, unknown version or truncated data.
  static Container load(const std::filesystem::path& path);

 private:
  std::string kind_;
  std::map<std::string, Eigen::MatrixXd> matrices_;
  std::map<std::string, std::vector<std::int64_t>> integers_;
  std::map<std::string, std::string> texts_;
};

/// FNV-1a over raw bytes; stable across platforms with the same endianness.
std::uint64_t fnv1a(const void* data, std::size_t size,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace unimatch
