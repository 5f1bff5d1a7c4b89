#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "detkit/io.hpp"
#include "detkit/synth.hpp"

namespace fs = std::filesystem;
namespace io = detkit::io;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("detkit_io_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path file(const std::string& name) const { return path / name; }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("detection file round trip") {
  TempDir dir;
  const auto scenes = detkit::generate_scenes(detkit::SynthConfig{}, 1);
  io::DetectionFile file;
  for (const auto& scene : scenes) {
    file.images.push_back({scene.image_id, scene.detections});
  }
  const auto path = dir.file("dets.json");
  io::save_detections(file, path);
  const io::DetectionFile loaded = io::load_detections(path);

  REQUIRE(loaded.images.size() == file.images.size());
  for (std::size_t i = 0; i < file.images.size(); ++i) {
    CHECK(loaded.images[i].id == file.images[i].id);
    REQUIRE(loaded.images[i].detections.size() == file.images[i].detections.size());
    for (std::size_t j = 0; j < file.images[i].detections.size(); ++j) {
      const auto& a = file.images[i].detections[j];
      const auto& b = loaded.images[i].detections[j];
      CHECK(a.class_probs == b.class_probs);
      CHECK(a.fitness_probs == b.fitness_probs);
      CHECK(a.joint_probs == b.joint_probs);
      CHECK(a.box.cx() == b.box.cx());
      CHECK(a.box.h() == b.box.h());
    }
  }

  // Serialization is byte-stable.
  const auto path2 = dir.file("dets2.json");
  io::save_detections(loaded, path2);
  std::ifstream f1(path), f2(path2);
  const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}

TEST_CASE("groundtruth file round trip") {
  TempDir dir;
  io::GroundTruthFile file;
  file.images.push_back({"img_a", {{0, detkit::Box(10, 20, 30, 40)}, {2, detkit::Box(5, 5, 8, 8)}}});
  file.images.push_back({"img_b", {}});
  const auto path = dir.file("gt.json");
  io::save_ground_truth(file, path);
  const auto loaded = io::load_ground_truth(path);
  REQUIRE(loaded.images.size() == 2);
  CHECK(loaded.images[0].id == "img_a");
  REQUIRE(loaded.images[0].instances.size() == 2);
  CHECK(loaded.images[0].instances[1].class_id == 2);
  CHECK(loaded.images[0].instances[1].box.w() == 8);
  CHECK(loaded.images[1].instances.empty());
}

TEST_CASE("parse errors carry context") {
  TempDir dir;
  const auto path = dir.file("bad.json");

  SUBCASE("malformed json") {
    write_file(path, "{images: [");
    CHECK_THROWS_AS(io::load_detections(path), io::ParseError);
  }
  SUBCASE("unknown field") {
    write_file(path, R"({"images": [{"id": "a", "detections": [], "extra": 1}]})");
    CHECK_THROWS_WITH_AS(io::load_detections(path),
                         doctest::Contains("unknown field 'extra'"), io::ParseError);
  }
  SUBCASE("probability out of range") {
    write_file(path, R"({"images": [{"id": "a", "detections": [
      {"box": [0, 0, 10, 10], "class_probs": [1.5], "fitness_probs": null, "joint_probs": null}
    ]}]})");
    CHECK_THROWS_AS(io::load_detections(path), io::ParseError);
  }
  SUBCASE("degenerate box") {
    write_file(path, R"({"images": [{"id": "a", "detections": [
      {"box": [0, 0, 0, 10], "class_probs": [0.5], "fitness_probs": null, "joint_probs": null}
    ]}]})");
    CHECK_THROWS_AS(io::load_detections(path), io::ParseError);
  }
  SUBCASE("joint mass above one") {
    write_file(path, R"({"images": [{"id": "a", "detections": [
      {"box": [0, 0, 10, 10], "class_probs": [0.5], "fitness_probs": null,
       "joint_probs": [[0.9, 0.9]]}
    ]}]})");
    CHECK_THROWS_AS(io::load_detections(path), io::ParseError);
  }
  SUBCASE("missing id in groundtruth") {
    write_file(path, R"({"images": [{"instances": []}]})");
    CHECK_THROWS_AS(io::load_ground_truth(path), io::ParseError);
  }
}

TEST_CASE("pair_for_eval flags id mismatches") {
  io::DetectionFile dets;
  dets.images.push_back({"img_a", {}});
  dets.images.push_back({"img_only_dets", {}});
  io::GroundTruthFile gts;
  gts.images.push_back({"img_a", {}});
  gts.images.push_back({"img_only_gt", {}});
  std::vector<detkit::EvalDetection> out_dets;
  std::vector<detkit::EvalGroundTruth> out_gts;
  CHECK_THROWS_WITH_AS(io::pair_for_eval(dets, gts, out_dets, out_gts),
                       doctest::Contains("img_only_gt"), io::DataError);
}

TEST_CASE("pair_for_eval flattens by image order") {
  io::DetectionFile dets;
  dets.images.push_back(
      {"a", {detkit::Detection{detkit::Box(0, 0, 10, 10), {0.9, 0.0}, std::nullopt, std::nullopt}}});
  io::GroundTruthFile gts;
  gts.images.push_back({"a", {{0, detkit::Box(0, 0, 10, 10)}}});
  std::vector<detkit::EvalDetection> out_dets;
  std::vector<detkit::EvalGroundTruth> out_gts;
  io::pair_for_eval(dets, gts, out_dets, out_gts);
  // Zero-probability classes produce no evaluation records.
  REQUIRE(out_dets.size() == 1);
  CHECK(out_dets[0].class_id == 0);
  CHECK(out_dets[0].score == 0.9);
  REQUIRE(out_gts.size() == 1);
}

TEST_CASE("corner grid round trip") {
  TempDir dir;
  detkit::CornerGrid grid(3, 4, 0.25, 2);
  for (std::size_t i = 0; i < grid.probs.size(); ++i) {
    grid.probs[i] = static_cast<double>(i) / grid.probs.size();
  }
  const auto path = dir.file("grid.json");
  io::save_corner_grid(grid, path);
  const detkit::CornerGrid loaded = io::load_corner_grid(path);
  CHECK(loaded.height == 3);
  CHECK(loaded.width == 4);
  CHECK(loaded.lambda_c == 0.25);
  CHECK(loaded.m == 2);
  CHECK(loaded.probs == grid.probs);
}

TEST_CASE("format_number uses six significant digits") {
  CHECK(io::format_number(0.25) == "0.25");
  CHECK(io::format_number(1.0 / 3.0) == "0.333333");
  CHECK(io::format_number(123456.789) == "123457");
  CHECK(io::format_number(0.000123456789) == "0.000123457");
  CHECK(io::format_number(1.0) == "1");
  CHECK(io::format_number(0.0) == "0");
}

TEST_CASE("report serialization") {
  const std::vector<detkit::EvalGroundTruth> gts = {{0, 0, detkit::Box(0, 0, 50, 50)}};
  const std::vector<detkit::EvalDetection> dets = {{0, 0, 0.9, detkit::Box(0, 0, 50, 50)}};
  const detkit::EvalReport report = detkit::map_report(dets, gts);
  const std::string json_text = io::report_to_json(report);
  CHECK(json_text.find("\"map_range\"") != std::string::npos);
  CHECK(json_text.find("\"0.50\"") != std::string::npos);
  const std::string csv = io::report_to_csv(report, "unit");
  CHECK(csv.rfind("variant,omega,recall,map,map_S,map_M,map_L,n_dets\n", 0) == 0);
  CHECK(csv.find("unit,0.50,1,1,") != std::string::npos);
}
