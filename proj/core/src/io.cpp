#include "detkit/io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace detkit::io {

using nlohmann::ordered_json;

namespace {

ordered_json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open " + path.string());
  }
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void require_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                  const std::string& where) {
  if (!obj.is_object()) {
    throw ParseError(where + ": expected an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ParseError(where + ": unknown field '" + key + "'");
    }
  }
}

double get_prob(const ordered_json& j, const std::string& where) {
  if (!j.is_number()) {
    throw ParseError(where + ": expected a number");
  }
  const double v = j.get<double>();
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ParseError(where + ": probability out of [0, 1]");
  }
  return v;
}

Box parse_box(const ordered_json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) {
    throw ParseError(where + ": box must be [cx, cy, w, h]");
  }
  for (const auto& v : j) {
    if (!v.is_number()) throw ParseError(where + ": box entries must be numbers");
  }
  try {
    return Box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
  } catch (const std::invalid_argument& e) {
    throw ParseError(where + ": " + e.what());
  }
}

ordered_json box_to_json(const Box& b) {
  return ordered_json::array({b.cx(), b.cy(), b.w(), b.h()});
}

}  // namespace

DetectionFile load_detections(const std::filesystem::path& path) {
  const ordered_json root = parse_file(path);
  require_keys(root, {"images"}, path.string());
  if (!root.contains("images") || !root["images"].is_array()) {
    throw ParseError(path.string() + ": missing 'images' array");
  }
  DetectionFile file;
  std::size_t img_i = 0;
  for (const auto& jimg : root["images"]) {
    const std::string where = path.string() + ": images[" + std::to_string(img_i++) + "]";
    require_keys(jimg, {"id", "detections"}, where);
    if (!jimg.contains("id") || !jimg["id"].is_string()) {
      throw ParseError(where + ": missing string 'id'");
    }
    DetectionImage image;
    image.id = jimg["id"].get<std::string>();
    if (!jimg.contains("detections") || !jimg["detections"].is_array()) {
      throw ParseError(where + ": missing 'detections' array");
    }
    std::size_t det_i = 0;
    for (const auto& jdet : jimg["detections"]) {
      const std::string dwhere = where + ".detections[" + std::to_string(det_i++) + "]";
      require_keys(jdet, {"box", "class_probs", "fitness_probs", "joint_probs"}, dwhere);
      if (!jdet.contains("box") || !jdet.contains("class_probs")) {
        throw ParseError(dwhere + ": 'box' and 'class_probs' are required");
      }
      Detection det{parse_box(jdet["box"], dwhere), {}, std::nullopt, std::nullopt};
      if (!jdet["class_probs"].is_array() || jdet["class_probs"].empty()) {
        throw ParseError(dwhere + ": 'class_probs' must be a non-empty array");
      }
      for (const auto& p : jdet["class_probs"]) {
        det.class_probs.push_back(get_prob(p, dwhere + ".class_probs"));
      }
      if (jdet.contains("fitness_probs") && !jdet["fitness_probs"].is_null()) {
        if (!jdet["fitness_probs"].is_array()) {
          throw ParseError(dwhere + ": 'fitness_probs' must be an array or null");
        }
        std::vector<double> fp;
        for (const auto& p : jdet["fitness_probs"]) {
          fp.push_back(get_prob(p, dwhere + ".fitness_probs"));
        }
        det.fitness_probs = std::move(fp);
      }
      if (jdet.contains("joint_probs") && !jdet["joint_probs"].is_null()) {
        if (!jdet["joint_probs"].is_array()) {
          throw ParseError(dwhere + ": 'joint_probs' must be an array of arrays or null");
        }
        std::vector<std::vector<double>> jp;
        double mass = 0.0;
        for (const auto& row : jdet["joint_probs"]) {
          if (!row.is_array()) {
            throw ParseError(dwhere + ": 'joint_probs' rows must be arrays");
          }
          std::vector<double> r;
          for (const auto& p : row) {
            r.push_back(get_prob(p, dwhere + ".joint_probs"));
            mass += r.back();
          }
          jp.push_back(std::move(r));
        }
        if (mass > 1.0 + 1e-6) {
          throw ParseError(dwhere + ": 'joint_probs' mass exceeds 1");
        }
        det.joint_probs = std::move(jp);
      }
      image.detections.push_back(std::move(det));
    }
    file.images.push_back(std::move(image));
  }
  return file;
}

void save_detections(const DetectionFile& file, const std::filesystem::path& path) {
  ordered_json root;
  root["images"] = ordered_json::array();
  for (const DetectionImage& image : file.images) {
    ordered_json jimg;
    jimg["id"] = image.id;
    jimg["detections"] = ordered_json::array();
    for (const Detection& det : image.detections) {
      ordered_json jdet;
      jdet["box"] = box_to_json(det.box);
      jdet["class_probs"] = det.class_probs;
      jdet["fitness_probs"] = det.fitness_probs ? ordered_json(*det.fitness_probs)
                                                : ordered_json(nullptr);
      jdet["joint_probs"] = det.joint_probs ? ordered_json(*det.joint_probs)
                                            : ordered_json(nullptr);
      jimg["detections"].push_back(std::move(jdet));
    }
    root["images"].push_back(std::move(jimg));
  }
  std::ofstream out(path);
  out << root.dump(2) << "\n";
}

GroundTruthFile load_ground_truth(const std::filesystem::path& path) {
  const ordered_json root = parse_file(path);
  require_keys(root, {"images"}, path.string());
  if (!root.contains("images") || !root["images"].is_array()) {
    throw ParseError(path.string() + ": missing 'images' array");
  }
  GroundTruthFile file;
  std::size_t img_i = 0;
  for (const auto& jimg : root["images"]) {
    const std::string where = path.string() + ": images[" + std::to_string(img_i++) + "]";
    require_keys(jimg, {"id", "instances"}, where);
    if (!jimg.contains("id") || !jimg["id"].is_string()) {
      throw ParseError(where + ": missing string 'id'");
    }
    GroundTruthImage image;
    image.id = jimg["id"].get<std::string>();
    if (!jimg.contains("instances") || !jimg["instances"].is_array()) {
      throw ParseError(where + ": missing 'instances' array");
    }
    std::size_t gt_i = 0;
    for (const auto& jgt : jimg["instances"]) {
      const std::string gwhere = where + ".instances[" + std::to_string(gt_i++) + "]";
      require_keys(jgt, {"class", "box"}, gwhere);
      if (!jgt.contains("class") || !jgt["class"].is_number_integer()) {
        throw ParseError(gwhere + ": missing integer 'class'");
      }
      image.instances.push_back({jgt["class"].get<int>(), parse_box(jgt["box"], gwhere)});
    }
    file.images.push_back(std::move(image));
  }
  return file;
}

void save_ground_truth(const GroundTruthFile& file, const std::filesystem::path& path) {
  ordered_json root;
  root["images"] = ordered_json::array();
  for (const GroundTruthImage& image : file.images) {
    ordered_json jimg;
    jimg["id"] = image.id;
    jimg["instances"] = ordered_json::array();
    for (const GtInstance& gt : image.instances) {
      ordered_json jgt;
      jgt["class"] = gt.class_id;
      jgt["box"] = box_to_json(gt.box);
      jimg["instances"].push_back(std::move(jgt));
    }
    root["images"].push_back(std::move(jimg));
  }
  std::ofstream out(path);
  out << root.dump(2) << "\n";
}

CornerGrid load_corner_grid(const std::filesystem::path& path) {
  const ordered_json root = parse_file(path);
  require_keys(root, {"height", "width", "lambda_c", "m", "probs"}, path.string());
  for (const char* key : {"height", "width", "probs"}) {
    if (!root.contains(key)) {
      throw ParseError(path.string() + ": missing '" + std::string(key) + "'");
    }
  }
  const int h = root["height"].get<int>();
  const int w = root["width"].get<int>();
  CornerGrid grid(h, w,
                  root.contains("lambda_c") ? root["lambda_c"].get<double>() : 0.01,
                  root.contains("m") ? root["m"].get<int>() : 1);
  const auto& probs = root["probs"];
  if (!probs.is_array() || probs.size() != 4) {
    throw ParseError(path.string() + ": 'probs' must be a 4 x height x width array");
  }
  for (int k = 0; k < 4; ++k) {
    if (!probs[k].is_array() || static_cast<int>(probs[k].size()) != h) {
      throw ParseError(path.string() + ": 'probs' rows must match 'height'");
    }
    for (int y = 0; y < h; ++y) {
      if (!probs[k][y].is_array() || static_cast<int>(probs[k][y].size()) != w) {
        throw ParseError(path.string() + ": 'probs' columns must match 'width'");
      }
      for (int x = 0; x < w; ++x) {
        grid.at(k, y, x) = get_prob(probs[k][y][x], path.string() + ": probs");
      }
    }
  }
  return grid;
}

void save_corner_grid(const CornerGrid& grid, const std::filesystem::path& path) {
  ordered_json root;
  root["height"] = grid.height;
  root["width"] = grid.width;
  root["lambda_c"] = grid.lambda_c;
  root["m"] = grid.m;
  ordered_json planes = ordered_json::array();
  for (int k = 0; k < 4; ++k) {
    ordered_json rows = ordered_json::array();
    for (int y = 0; y < grid.height; ++y) {
      ordered_json row = ordered_json::array();
      for (int x = 0; x < grid.width; ++x) {
        row.push_back(grid.at(k, y, x));
      }
      rows.push_back(std::move(row));
    }
    planes.push_back(std::move(rows));
  }
  root["probs"] = std::move(planes);
  std::ofstream out(path);
  out << root.dump(2) << "\n";
}

void pair_for_eval(const DetectionFile& dets, const GroundTruthFile& gts,
                   std::vector<EvalDetection>& out_dets,
                   std::vector<EvalGroundTruth>& out_gts) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < dets.images.size(); ++i) {
    index[dets.images[i].id] = i;
  }
  std::set<std::string> gt_ids;
  std::string missing;
  for (const GroundTruthImage& image : gts.images) {
    gt_ids.insert(image.id);
    if (!index.count(image.id)) {
      missing += (missing.empty() ? "" : ", ") + image.id;
    }
  }
  for (const DetectionImage& image : dets.images) {
    if (!gt_ids.count(image.id)) {
      missing += (missing.empty() ? "" : ", ") + image.id;
    }
  }
  if (!missing.empty()) {
    throw DataError("image ids present on one side only: " + missing);
  }

  out_dets.clear();
  out_gts.clear();
  for (const GroundTruthImage& image : gts.images) {
    const std::size_t img = index[image.id];
    for (const GtInstance& gt : image.instances) {
      out_gts.push_back({img, gt.class_id, gt.box});
    }
  }
  for (std::size_t img = 0; img < dets.images.size(); ++img) {
    for (const Detection& det : dets.images[img].detections) {
      for (int c = 0; c < static_cast<int>(det.class_probs.size()); ++c) {
        if (det.class_probs[c] > 0.0) {
          out_dets.push_back({img, c, det.class_probs[c], det.box});
        }
      }
    }
  }
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

namespace {

std::string omega_key(double omega) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", omega);
  return buf;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  ordered_json root;
  root["detection_count"] = report.detection_count;
  ordered_json recall_j, map_j;
  for (const auto& [omega, v] : report.recall_at) recall_j[omega_key(omega)] = v;
  for (const auto& [omega, v] : report.map_at) map_j[omega_key(omega)] = v;
  root["recall"] = std::move(recall_j);
  root["map"] = std::move(map_j);
  root["map_range"] = report.map_range;
  root["map_by_area"] = {{"S", report.map_by_area[0]},
                         {"M", report.map_by_area[1]},
                         {"L", report.map_by_area[2]}};
  ordered_json ap = ordered_json::array();
  for (const auto& [key, v] : report.ap_at) {
    ap.push_back({{"class", key.first}, {"omega", key.second}, {"ap", v}});
  }
  root["ap"] = std::move(ap);
  return root.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report, const std::string& variant) {
  std::ostringstream out;
  out << "variant,omega,recall,map,map_S,map_M,map_L,n_dets\n";
  for (const auto& [omega, rec] : report.recall_at) {
    out << variant << ',' << omega_key(omega) << ',' << format_number(rec) << ','
        << format_number(report.map_at.at(omega)) << ','
        << format_number(report.map_by_area[0]) << ','
        << format_number(report.map_by_area[1]) << ','
        << format_number(report.map_by_area[2]) << ',' << report.detection_count << "\n";
  }
  return out.str();
}

}  // namespace detkit::io
