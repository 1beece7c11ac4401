// roadfill: remove vehicles from the road surface of a textured mesh.
//
//   roadfill run --input tiles/ --roi 0,0,50,50 --gsd 0.05 --bboxes boxes.json --out result/
//   roadfill eval --completed result/completed.png --reference truth.png

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "roadfill/roadfill.hpp"

namespace {

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size() && tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw roadfill::Error("config", std::string("bad number '") + tok + "' in " + what);
    }
  }
  return out;
}

// Config values fill only the options not given on the command line.
void apply_config(CLI::App& sub, const std::string& path) {
  // A mask source on the command line replaces any mask source in the file.
  const bool cli_mask = sub.get_option("--mask")->count() + sub.get_option("--bboxes")->count() +
                            sub.get_option("--detect-cmd")->count() > 0;
  std::ifstream f(path);
  if (!f) throw roadfill::Error("config", "cannot read '" + path + "'");
  for (const auto& item : CLI::ConfigINI().from_config(f)) {
    if (!item.parents.empty() && item.parents != std::vector<std::string>{sub.get_name()})
      throw roadfill::Error("config", "unknown section in '" + path + "'");
    if (item.name == "config") continue;
    CLI::Option* opt = sub.get_option_no_throw("--" + item.name);
    if (opt == nullptr) throw roadfill::Error("config", "unknown key '" + item.name + "' in '" + path + "'");
    if (opt->count() > 0) continue;
    if (cli_mask && (item.name == "mask" || item.name == "bboxes" || item.name == "detect-cmd")) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicle removal for photogrammetric road meshes"};
  app.require_subcommand(1);

  roadfill::PipelineConfig cfg;
  std::string roi, up = "z", input, mask, bboxes, out, synthesis = "vote", directions, eval_ref;
  bool no_guidance = false, no_ordering = false, literal_cost = false, around_pixel = false;

  auto* run = app.add_subcommand("run", "Correct one ROI of a mesh");
  std::string config_file;
  run->add_option("--config", config_file, "Flat key=value file; command-line flags take precedence");
  run->add_option("--input", input, "OBJ bundle or directory of bundles");
  run->add_option("--roi", roi, "x_min,y_min,x_max,y_max[,z_min,z_max] in ground coordinates");
  run->add_option("--gsd", cfg.gsd, "Metres per raster pixel");
  run->add_option("--up-axis", up, "x, y or z")->capture_default_str();
  auto* m1 = run->add_option("--mask", mask, "Grey PNG; values above 127 are void");
  auto* m2 = run->add_option("--bboxes", bboxes, "Bounding-box JSON");
  auto* m3 = run->add_option("--detect-cmd", cfg.detect_cmd, "Command run as: <cmd> <image> --out <json>");
  m1->excludes(m2)->excludes(m3);
  m2->excludes(m3);
  run->add_option("--dilation", cfg.dilation, "Box growth per dimension")->capture_default_str();
  run->add_option("--out", out, "Output directory");
  run->add_option("--seed", cfg.seed, "Root seed")->capture_default_str();
  run->add_option("--patch-size", cfg.completion.patch_size, "Patch width W (odd)")->capture_default_str();
  run->add_option("--lambda1", cfg.completion.lambda_proximity, "Proximity weight")->capture_default_str();
  run->add_option("--lambda2", cfg.completion.lambda_regularity, "Regularity weight")->capture_default_str();
  run->add_option("--iters", cfg.completion.iterations, "Passes per pyramid level")->capture_default_str();
  run->add_option("--edge-threshold", cfg.completion.edge_threshold, "Prewitt magnitude threshold")
      ->capture_default_str();
  run->add_option("--synthesis", synthesis, "vote or copy")
      ->check(CLI::IsMember({"vote", "copy"}))
      ->capture_default_str();
  run->add_flag("--no-directional-guidance", no_guidance, "Uniform random search");
  run->add_flag("--no-linear-ordering", no_ordering, "Scanline order instead of edge priority");
  run->add_option("--eval-ref", eval_ref, "Reference PNG for PSNR/SSIM in the report");
  run->add_flag("--dump-debug", cfg.dump_debug, "Write per-level rasters and NNF images");
  run->add_option("--coarsest-size", cfg.completion.coarsest_max_dim)->group("");
  run->add_option("--directions", directions, "Comma-separated degrees; skips detection")->group("");
  run->add_flag("--literal-regularity-cost", literal_cost)->group("");
  run->add_flag("--search-around-pixel", around_pixel)->group("");

  std::string completed, reference, region, dataset = "-", method = "roadfill";
  bool header = false;
  auto* ev = app.add_subcommand("eval", "PSNR/SSIM as a CSV row");
  ev->add_option("--completed", completed)->required();
  ev->add_option("--reference", reference)->required();
  ev->add_option("--region", region, "Grey PNG selecting evaluated pixels (> 127)");
  ev->add_option("--dataset", dataset)->capture_default_str();
  ev->add_option("--method", method)->capture_default_str();
  ev->add_flag("--header", header, "Print the CSV header first");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (!config_file.empty()) apply_config(*run, config_file);
      cfg.input = input;
      cfg.out = out;
      cfg.mask_path = mask;
      cfg.bbox_path = bboxes;
      cfg.eval_ref = eval_ref;
      cfg.roi = parse_list(roi, "--roi");
      cfg.up = roadfill::parse_up_axis(up);
      cfg.completion.synthesis = synthesis == "copy" ? roadfill::SynthesisMode::kCopy : roadfill::SynthesisMode::kVote;
      cfg.completion.directional_guidance = !no_guidance;
      cfg.completion.linear_ordering = !no_ordering;
      cfg.completion.search_around_match = !around_pixel;
      if (literal_cost) cfg.completion.regularity_cost = roadfill::RegularityCost::kLiteralCosine;
      if (!directions.empty()) cfg.directions_deg = parse_list(directions, "--directions");
      const auto rep = roadfill::run_pipeline(cfg);
      std::cout << rep.status << " (" << rep.void_pixels << " void pixels) -> " << cfg.out.string() << "\n";
    } else {
      const auto a = roadfill::read_png_rgb(completed);
      const auto b = roadfill::read_png_rgb(reference);
      roadfill::QualityReport q;
      if (!region.empty()) {
        const auto r = roadfill::read_png_gray(region);
        roadfill::BinaryImage mask(r.width(), r.height(), 0);
        for (std::size_t i = 0; i < r.data().size(); ++i) mask.data()[i] = r.data()[i] > 127;
        q = roadfill::evaluate(a, b, &mask);
      } else {
        q = roadfill::evaluate(a, b);
      }
      if (header) std::cout << roadfill::csv_header() << "\n";
      std::cout << roadfill::csv_row(dataset, method, q) << "\n";
    }
  } catch (const roadfill::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
