#include "gdl/surface/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "gdl/core/error.hpp"

namespace gdl::surface {

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

// Next non-empty, non-comment line; false at end of input.
bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (!line.empty()) return true;
  }
  return false;
}

double parse_double(const std::string& token, const char* what) {
  double value = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ParseError(std::string("bad ") + what + " '" + token + "'");
  return value;
}

long long parse_int(const std::string& token, const char* what) {
  long long value = 0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ParseError(std::string("bad ") + what + " '" + token + "'");
  return value;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream ss(line);
  while (std::getline(ss, part, sep)) parts.push_back(trim(part));
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

void add_polygon(SurfaceMesh& mesh, const std::vector<long long>& idx) {
  if (idx.size() < 3) throw ParseError("polygon with fewer than 3 vertices");
  for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
    Face f{};
    const long long corners[3] = {idx[0], idx[k], idx[k + 1]};
    for (int c = 0; c < 3; ++c) {
      if (corners[c] < 0 || corners[c] > static_cast<long long>(UINT32_MAX))
        throw IndexRangeError("face index " + std::to_string(corners[c]) + " out of range");
      f[c] = static_cast<std::uint32_t>(corners[c]);
    }
    mesh.faces.push_back(f);
  }
}

}  // namespace

const std::vector<double>& SurfaceMesh::channel(const std::string& name) const {
  const auto it = channels.find(name);
  if (it == channels.end()) throw UnknownChannelError("unknown channel '" + name + "'");
  return it->second;
}

std::vector<Edge> unique_edges(const std::vector<Face>& faces) {
  std::vector<Edge> edges;
  std::unordered_map<std::uint64_t, std::size_t> seen;
  seen.reserve(faces.size() * 2);
  for (const auto& f : faces) {
    for (int c = 0; c < 3; ++c) {
      std::uint32_t a = f[c], b = f[(c + 1) % 3];
      if (seen.emplace(edge_key(a, b), edges.size()).second) edges.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  return edges;
}

long euler_characteristic(const SurfaceMesh& mesh) {
  return static_cast<long>(mesh.vertices.size()) - static_cast<long>(unique_edges(mesh.faces).size()) +
         static_cast<long>(mesh.faces.size());
}

bool is_closed(const SurfaceMesh& mesh) {
  std::unordered_map<std::uint64_t, int> count;
  for (const auto& f : mesh.faces)
    for (int c = 0; c < 3; ++c) ++count[edge_key(f[c], f[(c + 1) % 3])];
  return std::all_of(count.begin(), count.end(), [](const auto& kv) { return kv.second == 2; });
}

void validate_mesh(const SurfaceMesh& mesh) {
  const std::size_t n = mesh.vertices.size();
  std::unordered_map<std::uint64_t, int> count;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    for (auto v : f)
      if (v >= n)
        throw IndexRangeError("face " + std::to_string(i) + " references vertex " + std::to_string(v) +
                              " but the mesh has " + std::to_string(n));
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      throw DegenerateFaceError("face " + std::to_string(i) + " repeats a vertex");
    for (int c = 0; c < 3; ++c)
      if (++count[edge_key(f[c], f[(c + 1) % 3])] > 2)
        throw NonManifoldError("edge (" + std::to_string(f[c]) + ", " + std::to_string(f[(c + 1) % 3]) +
                               ") borders more than two faces");
  }
  for (const auto& [name, values] : mesh.channels)
    if (values.size() != n)
      throw ChannelLengthError("channel '" + name + "' has " + std::to_string(values.size()) +
                               " values for " + std::to_string(n) + " vertices");
}

SurfaceMesh read_off(std::istream& in) {
  std::string line;
  if (!next_content_line(in, line)) throw ParseError("empty OFF file");
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic != "OFF") throw ParseError("missing OFF header");
  std::vector<long long> counts;
  std::string tok;
  while (header >> tok) counts.push_back(parse_int(tok, "count"));
  while (counts.size() < 3) {
    if (!next_content_line(in, line)) throw ParseError("missing OFF counts");
    std::istringstream ss(line);
    while (ss >> tok) counts.push_back(parse_int(tok, "count"));
  }
  if (counts[0] < 0 || counts[1] < 0) throw ParseError("negative OFF counts");
  SurfaceMesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(counts[0]));
  for (long long i = 0; i < counts[0]; ++i) {
    if (!next_content_line(in, line)) throw ParseError("OFF ended after " + std::to_string(i) + " vertices");
    std::istringstream ss(line);
    Vec3 p{};
    for (auto& c : p) {
      if (!(ss >> tok)) throw ParseError("vertex line with fewer than 3 coordinates");
      c = parse_double(tok, "coordinate");
    }
    mesh.vertices.push_back(p);
  }
  for (long long i = 0; i < counts[1]; ++i) {
    if (!next_content_line(in, line)) throw ParseError("OFF ended after " + std::to_string(i) + " faces");
    std::istringstream ss(line);
    if (!(ss >> tok)) throw ParseError("empty face line");
    const long long k = parse_int(tok, "face size");
    std::vector<long long> idx;
    for (long long j = 0; j < k; ++j) {
      if (!(ss >> tok)) throw ParseError("face line shorter than its declared size");
      idx.push_back(parse_int(tok, "face index"));
    }
    add_polygon(mesh, idx);
  }
  return mesh;
}

SurfaceMesh read_obj(std::istream& in) {
  SurfaceMesh mesh;
  std::string line, tok;
  while (next_content_line(in, line)) {
    std::istringstream ss(line);
    ss >> tok;
    if (tok == "v") {
      Vec3 p{};
      for (auto& c : p) {
        if (!(ss >> tok)) throw ParseError("vertex line with fewer than 3 coordinates");
        c = parse_double(tok, "coordinate");
      }
      mesh.vertices.push_back(p);
    } else if (tok == "f") {
      std::vector<long long> idx;
      while (ss >> tok) {
        const long long raw = parse_int(tok.substr(0, tok.find('/')), "face index");
        if (raw == 0) throw IndexRangeError("OBJ face index 0");
        idx.push_back(raw > 0 ? raw - 1 : static_cast<long long>(mesh.vertices.size()) + raw);
      }
      add_polygon(mesh, idx);
    }
  }
  if (mesh.vertices.empty()) throw ParseError("OBJ file without vertices");
  return mesh;
}

std::map<std::string, std::vector<double>> read_sidecar(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty feature sidecar");
  const auto header = split(trim(line), ',');
  if (header.empty() || header[0] != "vertex_index") throw ParseError("sidecar header must start with vertex_index");
  std::map<std::string, std::vector<double>> channels;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].empty() || channels.count(header[c])) throw ParseError("bad sidecar column '" + header[c] + "'");
    channels[header[c]];
  }
  long long row = 0;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw ParseError("sidecar row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " cells");
    if (parse_int(cells[0], "vertex_index") != row)
      throw ParseError("sidecar row " + std::to_string(row) + " has vertex_index " + cells[0]);
    for (std::size_t c = 1; c < header.size(); ++c)
      channels[header[c]].push_back(parse_double(cells[c], "channel value"));
    ++row;
  }
  return channels;
}

SurfaceMesh load_mesh(const std::filesystem::path& mesh_file,
                      const std::optional<std::filesystem::path>& feature_file) {
  std::ifstream in(mesh_file, std::ios::binary);
  if (!in) throw IoError("cannot open mesh file " + mesh_file.string());
  std::string ext = mesh_file.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  bool off = ext == ".off";
  if (ext != ".off" && ext != ".obj") {
    std::string first;
    std::streampos start = in.tellg();
    next_content_line(in, first);
    off = first.rfind("OFF", 0) == 0;
    in.clear();
    in.seekg(start);
  }
  SurfaceMesh mesh = off ? read_off(in) : read_obj(in);
  if (feature_file) {
    std::ifstream fin(*feature_file, std::ios::binary);
    if (!fin) throw IoError("cannot open feature file " + feature_file->string());
    mesh.channels = read_sidecar(fin);
  }
  validate_mesh(mesh);
  return mesh;
}

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw IoError("number formatting failed");
  return std::string(buf, ptr);
}

void write_off(std::ostream& out, const SurfaceMesh& mesh) {
  out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.faces.size() << " 0\n";
  for (const auto& p : mesh.vertices)
    out << format_number(p[0]) << ' ' << format_number(p[1]) << ' ' << format_number(p[2]) << '\n';
  for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

void write_off(const std::filesystem::path& path, const SurfaceMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_off(out, mesh);
  if (!out) throw IoError("write failed for " + path.string());
}

void write_sidecar(std::ostream& out, const SurfaceMesh& mesh) {
  out << "vertex_index";
  for (const auto& name : sidecar_channels()) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    out << i;
    for (const auto& name : sidecar_channels()) {
      const auto it = mesh.channels.find(name);
      out << ',' << (it == mesh.channels.end() ? std::string("0") : format_number(it->second.at(i)));
    }
    out << '\n';
  }
}

void write_sidecar(const std::filesystem::path& path, const SurfaceMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_sidecar(out, mesh);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace gdl::surface
