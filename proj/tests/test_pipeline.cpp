#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include <json.hpp>

#include "tagalign/io_util.hpp"
#include "tagalign/toml_lite.hpp"

using namespace tagalign;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
  const char* env = std::getenv("TAGALIGN_BIN");
  REQUIRE_MESSAGE(env != nullptr, "TAGALIGN_BIN must point at the tagalign binary");
  return env;
}

int run_cli(const std::string& args) {
  const int status = std::system((cli_path() + " " + args + " 2>/dev/null").c_str());
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kSceneToml =
    "[scene]\n"
    "seed = 100\n"
    "n_background_points = 800\n"
    "n_tags = 6\n"
    "points_per_tag = 8\n"
    "tag_spatial_sigma = 0.05\n"
    "extent = 5.0\n"
    "output_dir = \"scene\"\n";

std::string pipeline_toml(const std::string& scene_dir, const std::string& out_dir) {
  std::string toml;
  toml += "[paths]\n";
  toml += "slam_map = \"" + scene_dir + "/map.txt\"\n";
  toml += "reconstruction = \"" + scene_dir + "/reconstruction.json\"\n";
  toml += "tracks = \"" + scene_dir + "/tracks.csv\"\n";
  toml += "features_dir = \"" + scene_dir + "/features\"\n";
  toml += "tags_dir = \"" + scene_dir + "/tags\"\n";
  toml += "merge_ply = \"" + scene_dir + "/merge.ply\"\n";
  toml += "output_dir = \"" + out_dir + "\"\n";
  toml += "[tags]\n";
  toml += "ids = [\"tag_000\", \"tag_001\", \"tag_002\", \"tag_003\", "
          "\"tag_004\", \"tag_005\"]\n";
  toml += "[eval]\n";
  toml += "truth_manifest = \"" + scene_dir + "/manifest.json\"\n";
  toml += "alignment_report = \"" + out_dir + "/alignment.json\"\n";
  toml += "output_dir = \"" + out_dir + "\"\n";
  toml += "rotation_gate_rad = 1e-6\n";
  toml += "scale_gate = 1e-6\n";
  toml += "translation_gate = 1e-6\n";
  toml += "rmse_gate = 1e-6\n";
  return toml;
}

}  // namespace

TEST_CASE("toml reader") {
  const TomlTable t = TomlTable::parse(
      "# comment\n"
      "top = 1\n"
      "[section]\n"
      "name = \"value\" # trailing\n"
      "pi = 3.5\n"
      "flag = true\n"
      "items = [\"a\", \"b\"]\n"
      "nums = [1, 2.5]\n");
  CHECK(t.get_int("top", 0) == 1);
  CHECK(t.get_string("section.name") == "value");
  CHECK(t.get_double("section.pi", 0) == 3.5);
  CHECK(t.get_bool("section.flag", false));
  CHECK(t.get_string_array("section.items") == std::vector<std::string>{"a", "b"});
  CHECK(t.get_double_array("section.nums") == std::vector<double>{1.0, 2.5});
  CHECK(t.get_string("section.absent", "fallback") == "fallback");
  CHECK_THROWS_AS(t.get_string("section.absent"), ConfigInvalid);
  CHECK_THROWS_AS(t.get_string("section.pi"), ConfigInvalid);
  CHECK_THROWS_AS(TomlTable::parse("key value\n"), ParseError);
  CHECK_THROWS_AS(TomlTable::parse("[unterminated\n"), ParseError);
  CHECK_THROWS_AS(TomlTable::parse("k = what\n"), ParseError);
}

TEST_CASE("cli full pipeline on a synthetic fixture") {
  const fs::path root = fresh_dir("tagalign_cli_test");
  write_file_atomic((root / "scene.toml").string(), std::string(kSceneToml));
  REQUIRE(run_cli("synth --config " + (root / "scene.toml").string()) == 0);

  const std::string scene_dir = (root / "scene").string();
  const std::string out_dir = (root / "out").string();
  write_file_atomic((root / "pipeline.toml").string(),
                    pipeline_toml(scene_dir, out_dir));
  const std::string cfg = " --config " + (root / "pipeline.toml").string();

  REQUIRE(run_cli("localize" + cfg) == 0);
  const json slam_report = json::parse(read_file_text(out_dir + "/tags_slam.json"));
  const json sfm_report = json::parse(read_file_text(out_dir + "/tags_sfm.json"));
  CHECK(slam_report.at("tags").size() == 6);
  CHECK(sfm_report.at("tags").size() == 6);
  CHECK(slam_report.at("misses").empty());

  REQUIRE(run_cli("align" + cfg) == 0);
  const json alignment = json::parse(read_file_text(out_dir + "/alignment.json"));
  CHECK(alignment.at("rmse").get<double>() < 1e-9);
  CHECK(alignment.at("matrix").size() == 16);
  CHECK(fs::exists(out_dir + "/merged.ply"));

  CHECK(run_cli("eval" + cfg + " > /dev/null") == 0);
  const json metrics = json::parse(read_file_text(out_dir + "/metrics.json"));
  CHECK(metrics.at("rotation_error_rad").get<double>() < 1e-6);
  CHECK(metrics.at("tags_recovered") == 6);

  SUBCASE("similarity method agrees") {
    REQUIRE(run_cli("align --method similarity" + cfg) == 0);
    CHECK(run_cli("eval" + cfg + " > /dev/null") == 0);
  }

  SUBCASE("re-running produces byte-identical outputs") {
    const auto report_before = read_file_bytes(out_dir + "/alignment.json");
    const auto merged_before = read_file_bytes(out_dir + "/merged.ply");
    const auto slam_before = read_file_bytes(out_dir + "/tags_slam.json");
    REQUIRE(run_cli("localize" + cfg) == 0);
    REQUIRE(run_cli("align" + cfg) == 0);
    CHECK(read_file_bytes(out_dir + "/tags_slam.json") == slam_before);
    CHECK(read_file_bytes(out_dir + "/alignment.json") == report_before);
    CHECK(read_file_bytes(out_dir + "/merged.ply") == merged_before);
  }

  SUBCASE("synth is deterministic on disk") {
    REQUIRE(run_cli("synth --config " + (root / "scene.toml").string() + " --out " +
                    (root / "scene2").string()) == 0);
    CHECK(read_file_bytes(scene_dir + "/map.txt") ==
          read_file_bytes((root / "scene2" / "map.txt").string()));
    CHECK(read_file_bytes(scene_dir + "/merge.ply") ==
          read_file_bytes((root / "scene2" / "merge.ply").string()));
  }

  SUBCASE("eval gate failure exits 4") {
    // corrupt the recovered matrix with a small extra rotation
    json bad = alignment;
    bad["matrix"][1] = bad["matrix"][1].get<double>() + 0.1;
    write_file_atomic(out_dir + "/alignment.json", bad.dump(2));
    CHECK(run_cli("eval" + cfg + " > /dev/null") == 4);
  }

  fs::remove_all(root);
}

TEST_CASE("cli error exit codes") {
  const fs::path root = fresh_dir("tagalign_cli_errors");

  SUBCASE("missing input file exits 1") {
    write_file_atomic((root / "pipeline.toml").string(),
                      pipeline_toml((root / "nonexistent").string(),
                                    (root / "out").string()));
    CHECK(run_cli("localize --config " + (root / "pipeline.toml").string()) == 1);
    CHECK(run_cli("eval --config " + (root / "pipeline.toml").string()) == 1);
  }

  SUBCASE("too few tags in scene config exits 1") {
    write_file_atomic((root / "bad.toml").string(),
                      std::string("[scene]\nseed = 1\nn_tags = 3\n"));
    CHECK(run_cli("synth --config " + (root / "bad.toml").string()) == 1);
  }

  SUBCASE("small tag intersection exits 2, coplanar tags exit 3") {
    // hand-built tag reports drive align directly
    const std::string out_dir = (root / "out").string();
    fs::create_directories(out_dir);

    // minimal geometry inputs for the merge step
    std::string map_line = "0 0 0 0";
    for (int i = 0; i < 32; ++i) map_line += " 0";
    write_file_atomic((root / "map.txt").string(), map_line + "\n");
    const std::string ply =
        "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"
        "property float y\nproperty float z\nend_header\n0 0 0\n";
    write_file_atomic((root / "merge.ply").string(), ply);
    std::string toml = "[paths]\n";
    toml += "slam_map = \"" + (root / "map.txt").string() + "\"\n";
    toml += "merge_ply = \"" + (root / "merge.ply").string() + "\"\n";
    toml += "output_dir = \"" + out_dir + "\"\n";
    write_file_atomic((root / "align.toml").string(), toml);

    auto write_reports = [&](int n_common, bool coplanar) {
      json slam, sfm;
      slam["cloud"] = "slam";
      sfm["cloud"] = "sfm";
      slam["epsilon"] = sfm["epsilon"] = 0.1;
      slam["misses"] = sfm["misses"] = json::array();
      slam["coincident"] = sfm["coincident"] = json::array();
      slam["tags"] = json::array();
      sfm["tags"] = json::array();
      for (int i = 0; i < n_common; ++i) {
        const double z = coplanar ? 0.0 : (i % 2 ? 1.0 + i : 0.0);
        json loc = {{"tag_id", "t" + std::to_string(i)},
                    {"coordinate", {1.0 * i, i * i * 0.5, z}},
                    {"support", 4}};
        loc["cloud"] = "slam";
        slam["tags"].push_back(loc);
        loc["cloud"] = "sfm";
        sfm["tags"].push_back(loc);
      }
      write_file_atomic(out_dir + "/tags_slam.json", slam.dump(2));
      write_file_atomic(out_dir + "/tags_sfm.json", sfm.dump(2));
    };

    write_reports(3, false);
    CHECK(run_cli("align --config " + (root / "align.toml").string()) == 2);

    write_reports(4, true);
    CHECK(run_cli("align --config " + (root / "align.toml").string()) == 3);
  }

  fs::remove_all(root);
}
