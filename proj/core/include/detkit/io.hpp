#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "detkit/evaluation.hpp"
#include "detkit/fitness.hpp"
#include "detkit/roi_cluster.hpp"

namespace detkit::io {

/// Malformed or schema-violating input files.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Cross-file inconsistencies (e.g. image ids present on one side only).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DetectionImage {
  std::string id;
  std::vector<Detection> detections;
};

struct DetectionFile {
  std::vector<DetectionImage> images;
};

struct GroundTruthImage {
  std::string id;
  std::vector<GtInstance> instances;
};

struct GroundTruthFile {
  std::vector<GroundTruthImage> images;
};

DetectionFile load_detections(const std::filesystem::path& path);
void save_detections(const DetectionFile& file, const std::filesystem::path& path);

GroundTruthFile load_ground_truth(const std::filesystem::path& path);
void save_ground_truth(const GroundTruthFile& file, const std::filesystem::path& path);

CornerGrid load_corner_grid(const std::filesystem::path& path);
void save_corner_grid(const CornerGrid& grid, const std::filesystem::path& path);

/// Pair detection and groundtruth files into flattened evaluation records.
/// Throws DataError listing the ids missing from either side.
void pair_for_eval(const DetectionFile& dets, const GroundTruthFile& gts,
                   std::vector<EvalDetection>& out_dets,
                   std::vector<EvalGroundTruth>& out_gts);

std::string report_to_json(const EvalReport& report);
std::string report_to_csv(const EvalReport& report, const std::string& variant);

/// Numeric formatting used by every CSV emitter: 6 significant digits.
std::string format_number(double v);

}  // namespace detkit::io
