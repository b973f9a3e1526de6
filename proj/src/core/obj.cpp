#include "obj.hpp"

#include "binary_io.hpp"
#include "error.hpp"

#include <charconv>
#include <cmath>
#include <optional>

namespace avf::assets {

namespace {

using Kind = ParseError::Kind;

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
      ++i;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') {
      ++i;
    }
    if (i > start) {
      out.push_back(line.substr(start, i - start));
    }
  }
  return out;
}

double number(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ParseError(Kind::BadNumber, line, "invalid number '" + std::string(tok) + "'");
  }
  return v;
}

long long integer(std::string_view tok, std::size_t line) {
  long long v = 0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(Kind::BadRecord, line, "invalid index '" + std::string(tok) + "'");
  }
  return v;
}

// Resolves a 1-based (or negative, relative) OBJ index against `count`.
std::size_t resolveIndex(long long idx, std::size_t count, std::size_t line, const char* what) {
  long long resolved = 0;
  if (idx > 0) {
    resolved = idx - 1;
  } else if (idx < 0) {
    resolved = static_cast<long long>(count) + idx;
  } else {
    throw ParseError(Kind::IndexRange, line, std::string(what) + " index 0 (OBJ is 1-based)");
  }
  if (resolved < 0 || resolved >= static_cast<long long>(count)) {
    throw ParseError(Kind::IndexRange, line, std::string(what) + " index " + std::to_string(idx) +
                                                 " out of range (" + std::to_string(count) + ")");
  }
  return static_cast<std::size_t>(resolved);
}

struct Corner {
  std::size_t v;
  std::optional<std::size_t> vt;
  std::optional<std::size_t> vn;
};

} // namespace

Mesh importObj(std::string_view text) {
  std::vector<Vec3> positions;
  std::vector<Vec2> texcoords;
  std::vector<Vec3> normalsIn;
  std::vector<std::vector<Corner>> polygons;

  std::size_t lineNo = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) {
      eol = text.size();
    }
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineNo;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const auto tok = tokens(line);
    if (tok.empty()) {
      if (eol == text.size()) {
        break;
      }
      continue;
    }
    const std::string_view key = tok[0];
    if (key == "v") {
      if (tok.size() != 4 && tok.size() != 5) {
        throw ParseError(Kind::BadRecord, lineNo, "vertex record needs 3 coordinates");
      }
      positions.emplace_back(number(tok[1], lineNo), number(tok[2], lineNo),
                             number(tok[3], lineNo));
    } else if (key == "vt") {
      if (tok.size() < 3 || tok.size() > 4) {
        throw ParseError(Kind::BadRecord, lineNo, "texture record needs 2 coordinates");
      }
      texcoords.emplace_back(number(tok[1], lineNo), number(tok[2], lineNo));
    } else if (key == "vn") {
      if (tok.size() != 4) {
        throw ParseError(Kind::BadRecord, lineNo, "normal record needs 3 components");
      }
      normalsIn.emplace_back(number(tok[1], lineNo), number(tok[2], lineNo),
                             number(tok[3], lineNo));
    } else if (key == "f") {
      if (tok.size() < 4) {
        throw ParseError(Kind::BadRecord, lineNo, "face needs at least 3 vertices");
      }
      std::vector<Corner> poly;
      for (std::size_t i = 1; i < tok.size(); ++i) {
        const std::string_view t = tok[i];
        const auto s1 = t.find('/');
        Corner c{};
        c.v = resolveIndex(integer(t.substr(0, s1), lineNo), positions.size(), lineNo, "vertex");
        if (s1 != std::string_view::npos) {
          const std::string_view rest = t.substr(s1 + 1);
          const auto s2 = rest.find('/');
          const std::string_view vtTok = rest.substr(0, s2);
          if (!vtTok.empty()) {
            c.vt = resolveIndex(integer(vtTok, lineNo), texcoords.size(), lineNo, "texture");
          }
          if (s2 != std::string_view::npos) {
            const std::string_view vnTok = rest.substr(s2 + 1);
            if (vnTok.empty()) {
              throw ParseError(Kind::BadRecord, lineNo, "empty normal index");
            }
            c.vn = resolveIndex(integer(vnTok, lineNo), normalsIn.size(), lineNo, "normal");
          }
        }
        poly.push_back(c);
      }
      for (std::size_t i = 0; i < poly.size(); ++i) {
        for (std::size_t j = i + 1; j < poly.size(); ++j) {
          if (poly[i].v == poly[j].v) {
            throw ParseError(Kind::BadRecord, lineNo, "face repeats a vertex");
          }
        }
      }
      polygons.push_back(std::move(poly));
    } else if (key == "o" || key == "g" || key == "s" || key == "usemtl" || key == "mtllib" ||
               key == "l" || key == "p") {
      // Grouping and material records carry no geometry.
    } else {
      throw ParseError(Kind::BadRecord, lineNo, "unknown record '" + std::string(key) + "'");
    }
    if (eol == text.size()) {
      break;
    }
  }

  Mesh mesh;
  mesh.vertices = std::move(positions);
  const std::size_t n = mesh.vertices.size();
  std::vector<bool> hasUv(n, false);
  std::vector<bool> hasNormal(n, false);
  bool anyUv = false;
  bool anyNormal = false;
  std::vector<Vec2> uvs(n, Vec2::Zero());
  std::vector<Vec3> normals(n, Vec3::Zero());

  for (const auto& poly : polygons) {
    for (const Corner& c : poly) {
      if (c.vt) {
        anyUv = true;
        if (!hasUv[c.v]) {
          uvs[c.v] = texcoords[*c.vt];
          hasUv[c.v] = true;
        }
      }
      if (c.vn) {
        anyNormal = true;
        if (!hasNormal[c.v]) {
          normals[c.v] = normalsIn[*c.vn];
          hasNormal[c.v] = true;
        }
      }
    }
    const auto idx = [&](std::size_t i) { return static_cast<std::uint32_t>(poly[i].v); };
    if (poly.size() == 3) {
      mesh.faces.push_back(Face::tri(idx(0), idx(1), idx(2)));
    } else if (poly.size() == 4) {
      mesh.faces.push_back(Face::quad(idx(0), idx(1), idx(2), idx(3)));
    } else {
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
        mesh.faces.push_back(Face::tri(idx(0), idx(i), idx(i + 1)));
      }
    }
  }
  if (anyUv) {
    mesh.uvs = std::move(uvs);
  }
  if (anyNormal) {
    const std::vector<Vec3> computed = computeVertexNormals(mesh);
    for (std::size_t i = 0; i < n; ++i) {
      const double len = normals[i].norm();
      if (!hasNormal[i] || !(len > 1e-12)) {
        normals[i] = computed[i];
      } else if (std::abs(len - 1.0) > 1e-12) {
        normals[i] /= len;
      }
    }
    mesh.normals = std::move(normals);
  }
  return mesh;
}

std::string formatNumber(double v) {
  if (v == 0.0) {
    return "0";
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace {

void appendObject(std::string& out, const Mesh& mesh, std::size_t vOffset, std::size_t tOffset,
                  std::size_t nOffset) {
  for (const Vec3& v : mesh.vertices) {
    out += "v " + formatNumber(v.x()) + " " + formatNumber(v.y()) + " " + formatNumber(v.z()) + "\n";
  }
  for (const Vec2& uv : mesh.uvs) {
    out += "vt " + formatNumber(uv.x()) + " " + formatNumber(uv.y()) + "\n";
  }
  for (const Vec3& n : mesh.normals) {
    out += "vn " + formatNumber(n.x()) + " " + formatNumber(n.y()) + " " + formatNumber(n.z()) + "\n";
  }
  const bool uv = !mesh.uvs.empty();
  const bool nrm = !mesh.normals.empty();
  for (const Face& f : mesh.faces) {
    out += "f";
    for (std::uint32_t i : f.indices()) {
      out += ' ';
      out += std::to_string(i + 1 + vOffset);
      if (uv || nrm) {
        out += '/';
        if (uv) {
          out += std::to_string(i + 1 + tOffset);
        }
        if (nrm) {
          out += '/';
          out += std::to_string(i + 1 + nOffset);
        }
      }
    }
    out += '\n';
  }
}

} // namespace

std::string exportObj(const Mesh& mesh) {
  validateMesh(mesh);
  std::string out = "# avatar-forge obj\n";
  appendObject(out, mesh, 0, 0, 0);
  return out;
}

std::string exportObjScene(const std::vector<std::pair<std::string, const Mesh*>>& objects) {
  std::string out = "# avatar-forge obj\n";
  std::size_t v = 0;
  std::size_t t = 0;
  std::size_t n = 0;
  for (const auto& [name, mesh] : objects) {
    validateMesh(*mesh);
    out += "o " + name + "\n";
    appendObject(out, *mesh, v, t, n);
    v += mesh->vertices.size();
    t += mesh->uvs.size();
    n += mesh->normals.size();
  }
  return out;
}

Mesh loadObj(const std::filesystem::path& path) {
  try {
    return importObj(readFileText(path));
  } catch (const ParseError& e) {
    throw e.inSource(path.string());
  }
}

void saveObj(const Mesh& mesh, const std::filesystem::path& path) {
  writeFileText(path, exportObj(mesh));
}

} // namespace avf::assets
