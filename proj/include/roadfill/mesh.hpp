#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "roadfill/common.hpp"
#include "roadfill/image.hpp"

namespace roadfill {

using Triangle = std::array<std::uint32_t, 3>;

struct Atlas {
  std::string name;  // material name
  RgbImage image;
};

// Contiguous ranges contributed by one bundle of a multi-tile model.
struct Tile {
  std::string name;
  std::size_t facet_begin = 0, facet_end = 0;
  std::size_t vertex_begin = 0, vertex_end = 0;
  std::size_t uv_begin = 0, uv_end = 0;
  std::size_t atlas_begin = 0, atlas_end = 0;
};

// Geometry mesh, UV mesh and texture atlases. Facet k of `facets`
// corresponds to facet k of `uv_facets` and samples atlas `facet_atlas[k]`.
// UVs use the file convention (v points up, range [0,1]).
struct TexturedMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> facets;
  std::vector<Vec2> uvs;
  std::vector<Triangle> uv_facets;
  std::vector<std::uint32_t> facet_atlas;
  std::vector<Atlas> atlases;
  std::vector<Tile> tiles;

  std::size_t facet_count() const noexcept { return facets.size(); }

  friend bool operator==(const TexturedMesh& a, const TexturedMesh& b) {
    if (a.atlases.size() != b.atlases.size()) return false;
    for (std::size_t i = 0; i < a.atlases.size(); ++i)
      if (a.atlases[i].image != b.atlases[i].image) return false;
    return a.vertices == b.vertices && a.facets == b.facets && a.uvs == b.uvs &&
           a.uv_facets == b.uv_facets && a.facet_atlas == b.facet_atlas;
  }
};

// Continuous texel position. Integer coordinates are texel centres, so the
// nearest texel of (u, v) is (floor(u + 0.5), floor(v + 0.5)).
struct Texel {
  double u = 0.0;
  double v = 0.0;
  std::uint32_t atlas_id = 0;
};

// UV (file convention) to texel units with the origin at the top-left texel
// centre. Not clamped; see clamp_texel.
inline Vec2 uv_to_texel(Vec2 uv, int atlas_width, int atlas_height) {
  return {uv.x * atlas_width - 0.5, (1.0 - uv.y) * atlas_height - 0.5};
}

// Keeps a texel position on the atlas: 0 <= u <= width - 1.
inline Vec2 clamp_texel(Vec2 t, int atlas_width, int atlas_height) {
  return {std::clamp(t.x, 0.0, static_cast<double>(atlas_width - 1)),
          std::clamp(t.y, 0.0, static_cast<double>(atlas_height - 1))};
}

inline Vec2 texel_to_uv(Vec2 texel, int atlas_width, int atlas_height) {
  return {(texel.x + 0.5) / atlas_width, 1.0 - (texel.y + 0.5) / atlas_height};
}

// Throws Error("mesh-io", ...) describing the first violated invariant.
inline void validate(const TexturedMesh& mesh) {
  auto fail = [](const std::string& msg) { throw Error("mesh-io", msg); };
  if (mesh.facets.size() != mesh.uv_facets.size())
    fail("|F| != |F'| (" + std::to_string(mesh.facets.size()) + " geometry facets, " +
         std::to_string(mesh.uv_facets.size()) + " uv facets)");
  if (mesh.facet_atlas.size() != mesh.facets.size()) fail("atlas index missing for some facets");
  for (std::size_t k = 0; k < mesh.facets.size(); ++k) {
    for (auto i : mesh.facets[k])
      if (i >= mesh.vertices.size()) fail("vertex index out of range in facet " + std::to_string(k));
    for (auto i : mesh.uv_facets[k])
      if (i >= mesh.uvs.size()) fail("uv index out of range in facet " + std::to_string(k));
    if (mesh.facet_atlas[k] >= mesh.atlases.size())
      fail("atlas index out of range in facet " + std::to_string(k));
  }
  for (const auto& uv : mesh.uvs)
    if (!(uv.x >= 0.0 && uv.x <= 1.0 && uv.y >= 0.0 && uv.y <= 1.0)) fail("uv outside [0,1]^2");
  for (const auto& atlas : mesh.atlases)
    if (atlas.image.empty()) fail("atlas '" + atlas.name + "' has no pixels");
}

}  // namespace roadfill
