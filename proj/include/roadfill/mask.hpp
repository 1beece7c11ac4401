#pragma once

// Void-region rasters from detector bounding boxes or mask images.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "roadfill/image.hpp"
#include "roadfill/png_io.hpp"

namespace roadfill {

using MaskRaster = BinaryImage;

struct BoundingBox {
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
  double confidence = 1.0;
  std::string label = "vehicle";
};

struct BoxFile {
  int width = 0;
  int height = 0;
  std::vector<BoundingBox> boxes;
};

inline constexpr double kDefaultDilation = 0.10;

// Box scaled by (1 + dilation) per dimension about its centre.
inline BoundingBox dilate(const BoundingBox& b, double dilation) {
  const double cx = 0.5 * (b.x_min + b.x_max), cy = 0.5 * (b.y_min + b.y_max);
  const double hw = 0.5 * (b.x_max - b.x_min) * (1.0 + dilation);
  const double hh = 0.5 * (b.y_max - b.y_min) * (1.0 + dilation);
  BoundingBox out = b;
  out.x_min = cx - hw;
  out.x_max = cx + hw;
  out.y_min = cy - hh;
  out.y_max = cy + hh;
  return out;
}

// A pixel is masked iff its centre lies in [min, max) on both axes.
inline void fill_box(MaskRaster& mask, const BoundingBox& b) {
  const int x0 = std::max(0, static_cast<int>(std::ceil(b.x_min - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(b.y_min - 0.5)));
  const int x1 = std::min(mask.width(), static_cast<int>(std::ceil(b.x_max - 0.5)));
  const int y1 = std::min(mask.height(), static_cast<int>(std::ceil(b.y_max - 0.5)));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) mask(x, y) = 1;
}

inline void check_has_known(const MaskRaster& mask) {
  if (count_set(mask) == mask.pixel_count())
    throw Error("mask", "mask covers the whole raster; no known pixels remain");
}

inline MaskRaster boxes_to_mask(const std::vector<BoundingBox>& boxes, int width, int height,
                                double dilation = kDefaultDilation) {
  if (!(dilation >= 0.0 && dilation <= 1.0)) throw Error("mask", "dilation must lie in [0, 1]");
  MaskRaster mask(width, height, 0);
  for (const auto& b : boxes) {
    if (!(b.x_min < b.x_max && b.y_min < b.y_max))
      throw Error("mask", "bounding box must satisfy x_min < x_max and y_min < y_max");
    fill_box(mask, dilate(b, dilation));
  }
  check_has_known(mask);
  return mask;
}

// Grey PNG, value > 127 is void.
inline MaskRaster load_mask(const std::filesystem::path& path, int width, int height) {
  GrayImage img;
  try {
    img = read_png_gray(path);
  } catch (const Error& e) {
    throw Error("mask", e.what());
  }
  if (!img.same_size(width, height))
    throw Error("mask", "mask image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                            ", raster is " + std::to_string(width) + "x" + std::to_string(height));
  MaskRaster mask(width, height, 0);
  for (std::size_t i = 0; i < img.data().size(); ++i) mask.data()[i] = img.data()[i] > 127 ? 1 : 0;
  check_has_known(mask);
  return mask;
}

// {"image": {"width": W, "height": H}, "boxes": [{"x_min": .., "y_min": ..,
//  "x_max": .., "y_max": .., "score": .., "label": ".."}]}
inline BoxFile parse_box_json(const nlohmann::json& doc) {
  BoxFile out;
  try {
    out.width = doc.at("image").at("width").get<int>();
    out.height = doc.at("image").at("height").get<int>();
    for (const auto& b : doc.at("boxes")) {
      BoundingBox box;
      box.x_min = b.at("x_min").get<double>();
      box.y_min = b.at("y_min").get<double>();
      box.x_max = b.at("x_max").get<double>();
      box.y_max = b.at("y_max").get<double>();
      box.confidence = b.value("score", 1.0);
      box.label = b.value("label", std::string("vehicle"));
      if (!(box.x_min < box.x_max && box.y_min < box.y_max))
        throw Error("mask", "bounding box must satisfy x_min < x_max and y_min < y_max");
      if (!(box.confidence >= 0.0 && box.confidence <= 1.0))
        throw Error("mask", "bounding box score outside [0, 1]");
      out.boxes.push_back(box);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("mask", std::string("malformed bounding-box document: ") + e.what());
  }
  return out;
}

inline BoxFile load_box_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("mask", "cannot open bounding-box file '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("mask", "bounding-box file '" + path.string() + "' is not JSON: " + e.what());
  }
  return parse_box_json(doc);
}

inline nlohmann::json to_json(const BoxFile& f) {
  nlohmann::json doc;
  doc["image"] = {{"width", f.width}, {"height", f.height}};
  doc["boxes"] = nlohmann::json::array();
  for (const auto& b : f.boxes)
    doc["boxes"].push_back({{"x_min", b.x_min},
                            {"y_min", b.y_min},
                            {"x_max", b.x_max},
                            {"y_max", b.y_max},
                            {"score", b.confidence},
                            {"label", b.label}});
  return doc;
}

}  // namespace roadfill
