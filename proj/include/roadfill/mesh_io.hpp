#pragma once

// Wavefront OBJ/MTL bundles with PNG atlases. One material is one atlas.
// A directory of bundles loads as one logical mesh with concatenated
// vertex, facet and atlas lists; each bundle becomes a Tile.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "roadfill/mesh.hpp"
#include "roadfill/png_io.hpp"

namespace roadfill {

inline constexpr double kUvTolerance = 1e-4;

namespace detail {

namespace fs = std::filesystem;

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_double(std::string_view tok, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw Error("mesh-io", where + ": bad number '" + std::string(tok) + "'");
  return v;
}

inline long parse_long(std::string_view tok, const std::string& where) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw Error("mesh-io", where + ": bad index '" + std::string(tok) + "'");
  return v;
}

// OBJ indices are 1-based; negative values count back from the end.
inline std::uint32_t resolve_index(long raw, std::size_t count, const std::string& where) {
  long idx = raw > 0 ? raw - 1 : static_cast<long>(count) + raw;
  if (raw == 0 || idx < 0 || static_cast<std::size_t>(idx) >= count)
    throw Error("mesh-io", where + ": vertex index out of range");
  return static_cast<std::uint32_t>(idx);
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct MaterialLib {
  std::vector<std::string> names;        // file order
  std::map<std::string, fs::path> maps;  // name -> image path
};

inline MaterialLib read_mtl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("mesh-io", "cannot open material file '" + path.string() + "'");
  MaterialLib lib;
  std::string line, current;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto toks = split_ws(t);
    if (toks[0] == "newmtl" && toks.size() >= 2) {
      current = std::string(toks[1]);
      if (std::find(lib.names.begin(), lib.names.end(), current) == lib.names.end())
        lib.names.push_back(current);
    } else if (toks[0] == "map_Kd" && toks.size() >= 2 && !current.empty()) {
      // Options such as -s/-o are not supported; the file name is the last token.
      lib.maps[current] = path.parent_path() / std::string(toks.back());
    }
  }
  return lib;
}

// Appends one OBJ bundle to `mesh` as a new tile.
inline void append_bundle(TexturedMesh& mesh, const fs::path& obj_path,
                          std::vector<std::string>* warnings) {
  std::ifstream in(obj_path);
  if (!in) throw Error("mesh-io", "cannot open mesh file '" + obj_path.string() + "'");

  Tile tile;
  tile.name = obj_path.stem().string();
  tile.facet_begin = mesh.facets.size();
  tile.vertex_begin = mesh.vertices.size();
  tile.uv_begin = mesh.uvs.size();
  tile.atlas_begin = mesh.atlases.size();

  std::vector<Vec3> verts;
  std::vector<Vec2> uvs;
  std::vector<Triangle> facets, uv_facets;
  std::vector<std::string> facet_material;
  MaterialLib lib;
  std::string current_material;
  bool uv_clamped = false;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = obj_path.filename().string() + ":" + std::to_string(line_no);
    auto toks = split_ws(t);
    const auto& key = toks[0];
    if (key == "v") {
      if (toks.size() < 4) throw Error("mesh-io", where + ": vertex needs 3 coordinates");
      verts.push_back({parse_double(toks[1], where), parse_double(toks[2], where),
                       parse_double(toks[3], where)});
    } else if (key == "vt") {
      if (toks.size() < 3) throw Error("mesh-io", where + ": uv needs 2 coordinates");
      Vec2 uv{parse_double(toks[1], where), parse_double(toks[2], where)};
      for (double* c : {&uv.x, &uv.y}) {
        if (*c < -kUvTolerance || *c > 1.0 + kUvTolerance)
          throw Error("mesh-io", where + ": uv coordinate outside [0,1]");
        if (*c < 0.0 || *c > 1.0) {
          *c = std::clamp(*c, 0.0, 1.0);
          uv_clamped = true;
        }
      }
      uvs.push_back(uv);
    } else if (key == "f") {
      if (toks.size() < 4) throw Error("mesh-io", where + ": facet needs 3 corners");
      std::vector<std::uint32_t> vi, ti;
      bool any_missing_uv = false;
      for (std::size_t c = 1; c < toks.size(); ++c) {
        auto corner = toks[c];
        auto slash = corner.find('/');
        vi.push_back(resolve_index(parse_long(corner.substr(0, slash), where), verts.size(), where));
        if (slash == std::string_view::npos) {
          any_missing_uv = true;
          continue;
        }
        auto rest = corner.substr(slash + 1);
        auto slash2 = rest.find('/');
        auto uv_tok = rest.substr(0, slash2);
        if (uv_tok.empty()) {
          any_missing_uv = true;
          continue;
        }
        ti.push_back(resolve_index(parse_long(uv_tok, where), uvs.size(), where));
      }
      if (any_missing_uv && !ti.empty())
        throw Error("mesh-io", where + ": facet mixes corners with and without uv");
      for (std::size_t c = 1; c + 1 < vi.size(); ++c) {
        facets.push_back({vi[0], vi[c], vi[c + 1]});
        if (!any_missing_uv) uv_facets.push_back({ti[0], ti[c], ti[c + 1]});
        facet_material.push_back(current_material);
      }
    } else if (key == "usemtl") {
      current_material = toks.size() >= 2 ? std::string(toks[1]) : std::string();
    } else if (key == "mtllib") {
      if (toks.size() < 2) throw Error("mesh-io", where + ": mtllib without file");
      auto more = read_mtl(obj_path.parent_path() / std::string(toks[1]));
      for (auto& n : more.names)
        if (std::find(lib.names.begin(), lib.names.end(), n) == lib.names.end()) lib.names.push_back(n);
      lib.maps.merge(more.maps);
    }
    // vn, o, g, s and unknown keys are ignored.
  }

  if (facets.size() != uv_facets.size())
    throw Error("mesh-io", obj_path.filename().string() + ": |F| != |F'| (" +
                               std::to_string(facets.size()) + " geometry facets, " +
                               std::to_string(uv_facets.size()) + " uv facets)");
  if (uv_clamped && warnings)
    warnings->push_back(obj_path.filename().string() + ": uv values within tolerance clamped to [0,1]");

  std::unordered_map<std::string, std::uint32_t> atlas_of;
  for (const auto& name : lib.names) {
    auto it = lib.maps.find(name);
    if (it == lib.maps.end())
      throw Error("mesh-io", "material '" + name + "' has no map_Kd texture");
    Atlas atlas;
    atlas.name = name;
    try {
      atlas.image = read_png_rgb(it->second);
    } catch (const Error& e) {
      throw Error("mesh-io", std::string("unreadable texture image: ") + e.what());
    }
    atlas_of[name] = static_cast<std::uint32_t>(mesh.atlases.size());
    mesh.atlases.push_back(std::move(atlas));
  }

  const auto vbase = static_cast<std::uint32_t>(mesh.vertices.size());
  const auto tbase = static_cast<std::uint32_t>(mesh.uvs.size());
  for (std::size_t k = 0; k < facets.size(); ++k) {
    auto it = atlas_of.find(facet_material[k]);
    if (it == atlas_of.end())
      throw Error("mesh-io", obj_path.filename().string() + ": facet " + std::to_string(k) +
                                 " uses unknown material '" + facet_material[k] + "'");
    mesh.facets.push_back({facets[k][0] + vbase, facets[k][1] + vbase, facets[k][2] + vbase});
    mesh.uv_facets.push_back(
        {uv_facets[k][0] + tbase, uv_facets[k][1] + tbase, uv_facets[k][2] + tbase});
    mesh.facet_atlas.push_back(it->second);
  }
  mesh.vertices.insert(mesh.vertices.end(), verts.begin(), verts.end());
  mesh.uvs.insert(mesh.uvs.end(), uvs.begin(), uvs.end());

  tile.facet_end = mesh.facets.size();
  tile.vertex_end = mesh.vertices.size();
  tile.uv_end = mesh.uvs.size();
  tile.atlas_end = mesh.atlases.size();
  mesh.tiles.push_back(tile);
}

inline void warn_non_manifold(const TexturedMesh& mesh, std::vector<std::string>* warnings) {
  if (!warnings) return;
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_use;
  for (const auto& f : mesh.facets)
    for (int e = 0; e < 3; ++e) {
      auto a = f[e], b = f[(e + 1) % 3];
      ++edge_use[{std::min(a, b), std::max(a, b)}];
    }
  std::size_t bad = 0;
  for (const auto& [edge, n] : edge_use)
    if (n > 2) ++bad;
  if (bad > 0)
    warnings->push_back("mesh is not 2-manifold: " + std::to_string(bad) +
                        " edges shared by more than two facets");
}

inline std::string sanitize(std::string_view s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '_';
  return out.empty() ? std::string("atlas") : out;
}

inline void write_bundle(const TexturedMesh& mesh, const Tile& tile, const fs::path& obj_path) {
  const std::string stem = obj_path.stem().string();
  const fs::path dir = obj_path.parent_path();
  const fs::path mtl_path = dir / (stem + ".mtl");

  std::vector<std::string> material_names;
  for (std::size_t a = tile.atlas_begin; a < tile.atlas_end; ++a) {
    std::string name = mesh.atlases[a].name.empty() ? "atlas" + std::to_string(a) : mesh.atlases[a].name;
    // Keep material names unique within the bundle.
    std::string unique = name;
    for (int n = 1; std::find(material_names.begin(), material_names.end(), unique) != material_names.end(); ++n)
      unique = name + "_" + std::to_string(n);
    material_names.push_back(unique);
  }

  {
    std::ofstream mtl(mtl_path, std::ios::binary);
    if (!mtl) throw Error("mesh-io", "cannot write '" + mtl_path.string() + "'");
    for (std::size_t i = 0; i < material_names.size(); ++i) {
      const std::string image_name = stem + "_" + sanitize(material_names[i]) + ".png";
      mtl << "newmtl " << material_names[i] << "\n"
          << "Ka 1 1 1\nKd 1 1 1\nillum 1\n"
          << "map_Kd " << image_name << "\n\n";
      write_png(mesh.atlases[tile.atlas_begin + i].image, dir / image_name);
    }
    if (!mtl) throw Error("mesh-io", "failed writing '" + mtl_path.string() + "'");
  }

  std::ofstream obj(obj_path, std::ios::binary);
  if (!obj) throw Error("mesh-io", "cannot write '" + obj_path.string() + "'");
  obj << "mtllib " << stem << ".mtl\n";
  for (std::size_t i = tile.vertex_begin; i < tile.vertex_end; ++i) {
    const auto& v = mesh.vertices[i];
    obj << "v " << format_double(v.x) << ' ' << format_double(v.y) << ' ' << format_double(v.z) << '\n';
  }
  for (std::size_t i = tile.uv_begin; i < tile.uv_end; ++i) {
    const auto& t = mesh.uvs[i];
    obj << "vt " << format_double(t.x) << ' ' << format_double(t.y) << '\n';
  }
  std::uint32_t current = ~0u;
  for (std::size_t k = tile.facet_begin; k < tile.facet_end; ++k) {
    const auto atlas = mesh.facet_atlas[k];
    if (atlas != current) {
      obj << "usemtl " << material_names.at(atlas - tile.atlas_begin) << '\n';
      current = atlas;
    }
    obj << 'f';
    for (int c = 0; c < 3; ++c)
      obj << ' ' << (mesh.facets[k][c] - tile.vertex_begin + 1) << '/'
          << (mesh.uv_facets[k][c] - tile.uv_begin + 1);
    obj << '\n';
  }
  if (!obj) throw Error("mesh-io", "failed writing '" + obj_path.string() + "'");
}

// Checks that each tile's facets only reference its own vertex, uv and atlas
// ranges, which is required for writing tiles as separate bundles.
inline bool tiles_self_contained(const TexturedMesh& mesh) {
  if (mesh.tiles.empty()) return false;
  std::size_t expected_facet = 0;
  for (const auto& t : mesh.tiles) {
    if (t.facet_begin != expected_facet) return false;
    expected_facet = t.facet_end;
    for (std::size_t k = t.facet_begin; k < t.facet_end; ++k) {
      for (auto i : mesh.facets[k])
        if (i < t.vertex_begin || i >= t.vertex_end) return false;
      for (auto i : mesh.uv_facets[k])
        if (i < t.uv_begin || i >= t.uv_end) return false;
      if (mesh.facet_atlas[k] < t.atlas_begin || mesh.facet_atlas[k] >= t.atlas_end) return false;
    }
  }
  return expected_facet == mesh.facets.size();
}

}  // namespace detail

// Loads a single `.obj` bundle or a directory of bundles (sorted by file
// name). Non-fatal findings such as clamped UVs or non-manifold edges are
// appended to `warnings`.
inline TexturedMesh load_textured_mesh(const std::filesystem::path& path,
                                       std::vector<std::string>* warnings = nullptr) {
  namespace fs = std::filesystem;
  TexturedMesh mesh;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    std::vector<fs::path> bundles;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".obj") bundles.push_back(entry.path());
    std::sort(bundles.begin(), bundles.end());
    if (bundles.empty()) throw Error("mesh-io", "no .obj bundles in '" + path.string() + "'");
    for (const auto& b : bundles) detail::append_bundle(mesh, b, warnings);
  } else if (fs::is_regular_file(path, ec)) {
    detail::append_bundle(mesh, path, warnings);
  } else {
    throw Error("mesh-io", "missing file '" + path.string() + "'");
  }
  validate(mesh);
  detail::warn_non_manifold(mesh, warnings);
  return mesh;
}

// A path ending in `.obj` receives one bundle holding the whole mesh. Any
// other path is treated as a directory and receives one bundle per tile.
inline void save_textured_mesh(const TexturedMesh& mesh, const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  validate(mesh);
  Tile whole;
  whole.name = "mesh";
  whole.facet_end = mesh.facets.size();
  whole.vertex_end = mesh.vertices.size();
  whole.uv_end = mesh.uvs.size();
  whole.atlas_end = mesh.atlases.size();

  std::error_code ec;
  if (path.extension() == ".obj") {
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error("mesh-io", "cannot create '" + path.parent_path().string() + "': " + ec.message());
    detail::write_bundle(mesh, whole, path);
    return;
  }
  fs::create_directories(path, ec);
  if (ec || !fs::is_directory(path))
    throw Error("mesh-io", "cannot create directory '" + path.string() + "'");
  if (detail::tiles_self_contained(mesh)) {
    for (const auto& tile : mesh.tiles)
      detail::write_bundle(mesh, tile, path / (detail::sanitize(tile.name) + ".obj"));
  } else {
    detail::write_bundle(mesh, whole, path / "mesh.obj");
  }
}

}  // namespace roadfill
