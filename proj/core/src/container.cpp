#include "unimatch/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "unimatch/errors.hpp"

namespace unimatch {

namespace {

constexpr char kMagic[8] = {'U', 'N', 'I', 'M', 'A', 'T', 'C', 'H'};

enum class RecordType : std::uint8_t { Matrix = 1, Integers = 2, Text = 3 };

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  void string(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

  template <typename T>
  T pod() {
    T v{};
    bytes(&v, sizeof(T));
    return v;
  }
  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw ParseError(origin_ + ": truncated container");
    }
  }
  std::string string() {
    auto n = pod<std::uint64_t>();
    if (n > (1ULL << 32)) throw ParseError(origin_ + ": corrupt string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& in_;
  std::string origin_;
};

}  // namespace

void Container::put(const std::string& name, const Eigen::MatrixXd& m) {
  matrices_[name] = m;
}

void Container::put(const std::string& name, const std::vector<std::int64_t>& values) {
  integers_[name] = values;
}

void Container::put(const std::string& name, const std::string& text) {
  texts_[name] = text;
}

void Container::put_u64(const std::string& name, std::uint64_t value) {
  integers_[name] = {std::bit_cast<std::int64_t>(value)};
}

bool Container::contains(const std::string& name) const {
  return matrices_.contains(name) || integers_.contains(name) || texts_.contains(name);
}

const Eigen::MatrixXd& Container::matrix(const std::string& name) const {
  auto it = matrices_.find(name);
  if (it == matrices_.end()) throw ParseError("container: missing matrix '" + name + "'");
  return it->second;
}

const std::vector<std::int64_t>& Container::integers(const std::string& name) const {
  auto it = integers_.find(name);
  if (it == integers_.end()) throw ParseError("container: missing integers '" + name + "'");
  return it->second;
}

const std::string& Container::text(const std::string& name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw ParseError("container: missing text '" + name + "'");
  return it->second;
}

std::uint64_t Container::u64(const std::string& name) const {
  const auto& v = integers(name);
  if (v.size() != 1) throw ParseError("container: '" + name + "' is not a scalar");
  return std::bit_cast<std::uint64_t>(v.front());
}

std::vector<std::string> Container::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : matrices_) out.push_back(k);
  for (const auto& [k, _] : integers_) out.push_back(k);
  for (const auto& [k, _] : texts_) out.push_back(k);
  return out;
}

void Container::save(const std::filesystem::path& path) const {
  // Written to a sibling temp file, then renamed over the target.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    Writer w(out);
    w.bytes(kMagic, sizeof(kMagic));
    w.pod(kFormatVersion);
    w.string(kind_);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(matrices_.size() + integers_.size() +
                                                    texts_.size()));
    for (const auto& [name, m] : matrices_) {
      w.string(name);
      w.pod(RecordType::Matrix);
      w.pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
      w.pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
      w.bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    }
    for (const auto& [name, v] : integers_) {
      w.string(name);
      w.pod(RecordType::Integers);
      w.pod<std::uint64_t>(v.size());
      w.pod<std::uint64_t>(1);
      w.bytes(v.data(), sizeof(std::int64_t) * v.size());
    }
    for (const auto& [name, s] : texts_) {
      w.string(name);
      w.pod(RecordType::Text);
      w.pod<std::uint64_t>(s.size());
      w.pod<std::uint64_t>(1);
      w.bytes(s.data(), s.size());
    }
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Container Container::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open container '" + path.string() + "'");
  Reader r(in, path.string());

  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(path.string() + ": not a unimatch container");
  }
  auto version = r.pod<std::uint32_t>();
  if (version != kFormatVersion) {
    throw ParseError(path.string() + ": unsupported container version " +
                     std::to_string(version));
  }
  Container c(r.string());
  auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.string();
    auto type = r.pod<RecordType>();
    auto rows = r.pod<std::uint64_t>();
    auto cols = r.pod<std::uint64_t>();
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) {
      throw ParseError(path.string() + ": corrupt record '" + name + "'");
    }
    switch (type) {
      case RecordType::Matrix: {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        r.bytes(m.data(), sizeof(double) * rows * cols);
        c.matrices_[name] = std::move(m);
        break;
      }
      case RecordType::Integers: {
        std::vector<std::int64_t> v(rows);
        r.bytes(v.data(), sizeof(std::int64_t) * rows);
        c.integers_[name] = std::move(v);
        break;
      }
      case RecordType::Text: {
        std::string s(rows, '\0');
        r.bytes(s.data(), rows);
        c.texts_[name] = std::move(s);
        break;
      }
      default:
        throw ParseError(path.string() + ": unknown record type in '" + name + "'");
    }
  }
  return c;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace unimatch
