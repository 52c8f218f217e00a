#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "unimatch/errors.hpp"
#include "unimatch/mesh.hpp"

namespace unimatch {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

MeshFormat resolve(const std::filesystem::path& path, MeshFormat format) {
  if (format != MeshFormat::Auto) return format;
  auto ext = lower(path.extension().string());
  if (ext == ".off") return MeshFormat::Off;
  if (ext == ".ply") return MeshFormat::PlyAscii;
  throw ParseError("cannot infer mesh format from extension '" + ext + "'");
}

// Token stream over a text file that skips '#' comments.
class Tokens {
 public:
  Tokens(std::istream& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

  bool next_line(std::istringstream& line) {
    std::string s;
    while (std::getline(in_, s)) {
      ++line_no_;
      auto hash = s.find('#');
      if (hash != std::string::npos) s.erase(hash);
      if (s.find_first_not_of(" \t\r") == std::string::npos) continue;
      line.clear();
      line.str(s);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(origin_ + ":" + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::string origin_;
  int line_no_ = 0;
};

TriangleMesh read_off(std::istream& in, const std::string& origin) {
  Tokens tok(in, origin);
  std::istringstream line;
  if (!tok.next_line(line)) tok.fail("empty file");
  std::string header;
  line >> header;
  if (header != "OFF") tok.fail("expected OFF header");

  long nv = -1, nf = -1;
  // Counts may follow the header on the same line.
  if (!(line >> nv >> nf)) {
    if (!tok.next_line(line) || !(line >> nv >> nf)) tok.fail("missing vertex/face counts");
  }
  if (nv <= 0 || nf <= 0) tok.fail("non-positive vertex or face count");

  Vertices V(nv, 3);
  for (long i = 0; i < nv; ++i) {
    if (!tok.next_line(line) || !(line >> V(i, 0) >> V(i, 1) >> V(i, 2))) {
      tok.fail("malformed vertex " + std::to_string(i));
    }
  }
  Faces F(nf, 3);
  for (long f = 0; f < nf; ++f) {
    int arity = 0;
    if (!tok.next_line(line) || !(line >> arity)) tok.fail("malformed face " + std::to_string(f));
    if (arity != 3) tok.fail("only triangular faces are supported");
    if (!(line >> F(f, 0) >> F(f, 1) >> F(f, 2))) tok.fail("malformed face " + std::to_string(f));
  }
  return TriangleMesh(std::move(V), std::move(F));
}

TriangleMesh read_ply(std::istream& in, const std::string& origin) {
  Tokens tok(in, origin);
  std::istringstream line;
  std::string word;
  if (!tok.next_line(line) || !(line >> word) || word != "ply") tok.fail("expected ply magic");

  long nv = -1, nf = -1;
  std::vector<std::string> vertex_props;
  std::string current;
  bool face_list_ok = false;
  for (;;) {
    if (!tok.next_line(line)) tok.fail("unterminated header");
    line >> word;
    if (word == "format") {
      std::string fmt;
      line >> fmt;
      if (fmt != "ascii") tok.fail("binary PLY is not supported (format " + fmt + ")");
    } else if (word == "comment" || word == "obj_info") {
      continue;
    } else if (word == "element") {
      long count = 0;
      line >> current >> count;
      if (current == "vertex") nv = count;
      if (current == "face") nf = count;
      if (current != "vertex" && current != "face" && count != 0) {
        tok.fail("unsupported element '" + current + "'");
      }
    } else if (word == "property") {
      std::string type;
      line >> type;
      if (current == "vertex") {
        if (type == "list") tok.fail("list property on vertices");
        std::string name;
        line >> name;
        vertex_props.push_back(name);
      } else if (current == "face") {
        if (type != "list") tok.fail("face property must be a list");
        std::string count_type, index_type, name;
        line >> count_type >> index_type >> name;
        if (name != "vertex_indices" && name != "vertex_index") {
          tok.fail("unsupported face property '" + name + "'");
        }
        face_list_ok = true;
      }
    } else if (word == "end_header") {
      break;
    } else {
      tok.fail("unexpected header keyword '" + word + "'");
    }
  }
  if (nv <= 0 || nf <= 0 || !face_list_ok) tok.fail("missing vertex or face element");

  auto find_prop = [&](const std::string& name) {
    auto it = std::find(vertex_props.begin(), vertex_props.end(), name);
    if (it == vertex_props.end()) tok.fail("vertex property '" + name + "' missing");
    return static_cast<std::size_t>(it - vertex_props.begin());
  };
  const std::size_t ix = find_prop("x"), iy = find_prop("y"), iz = find_prop("z");

  Vertices V(nv, 3);
  std::vector<double> values(vertex_props.size());
  for (long i = 0; i < nv; ++i) {
    if (!tok.next_line(line)) tok.fail("missing vertex " + std::to_string(i));
    for (auto& v : values) {
      if (!(line >> v)) tok.fail("malformed vertex " + std::to_string(i));
    }
    V.row(i) << values[ix], values[iy], values[iz];
  }
  Faces F(nf, 3);
  for (long f = 0; f < nf; ++f) {
    int arity = 0;
    if (!tok.next_line(line) || !(line >> arity)) tok.fail("malformed face " + std::to_string(f));
    if (arity != 3) tok.fail("only triangular faces are supported");
    if (!(line >> F(f, 0) >> F(f, 1) >> F(f, 2))) tok.fail("malformed face " + std::to_string(f));
  }
  return TriangleMesh(std::move(V), std::move(F));
}

}  // namespace

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  format = resolve(path, format);
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh '" + path.string() + "'");
  return format == MeshFormat::Off ? read_off(in, path.string()) : read_ply(in, path.string());
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
  format = resolve(path, format);
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17);
  const auto& V = mesh.vertices();
  const auto& F = mesh.faces();
  if (format == MeshFormat::Off) {
    out << "OFF\n" << V.rows() << ' ' << F.rows() << " 0\n";
  } else {
    out << "ply\nformat ascii 1.0\n"
        << "element vertex " << V.rows() << "\nproperty double x\nproperty double y\n"
        << "property double z\nelement face " << F.rows()
        << "\nproperty list uchar int vertex_indices\nend_header\n";
  }
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    out << V(i, 0) << ' ' << V(i, 1) << ' ' << V(i, 2) << '\n';
  }
  for (Eigen::Index f = 0; f < F.rows(); ++f) {
    out << "3 " << F(f, 0) << ' ' << F(f, 1) << ' ' << F(f, 2) << '\n';
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace unimatch
