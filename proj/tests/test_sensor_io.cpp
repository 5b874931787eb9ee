#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "footcal/gaitsim.hpp"
#include "footcal/rng.hpp"
#include "footcal/sensor_io.hpp"

using namespace footcal;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "footcal_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

ImuSequence random_sequence(std::uint64_t seed, std::size_t n, double fs) {
  SplitMix64 rng(seed);
  std::vector<ImuRecord> recs(n);
  for (std::size_t k = 0; k < n; ++k) {
    recs[k].t = static_cast<double>(k) / fs +
                0.1 / fs * (uniform01(rng) - 0.5);
    const NormalPair a = normal_pair(rng);
    const NormalPair b = normal_pair(rng);
    const NormalPair c = normal_pair(rng);
    recs[k].f = Eigen::Vector3d(a.first, a.second, 9.81 + b.first);
    recs[k].w = Eigen::Vector3d(b.second, c.first, c.second);
  }
  return ImuSequence::from_records(std::move(recs));
}

bool identical(const ImuSequence& a, const ImuSequence& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (std::memcmp(&a.records[k].t, &b.records[k].t, sizeof(double)) != 0)
      return false;
    for (int i = 0; i < 3; ++i) {
      if (std::memcmp(&a.records[k].f[i], &b.records[k].f[i], sizeof(double)) != 0)
        return false;
      if (std::memcmp(&a.records[k].w[i], &b.records[k].w[i], sizeof(double)) != 0)
        return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("parse_imu_csv accepts a minimal 2-row file") {
  const fs::path path = temp_file("minimal.csv");
  write_text(path,
             "t,fx,fy,fz,wx,wy,wz\n"
             "0,0,0,0,0,0,0\n"
             "0.01,0,0,0,0,0,0\n");
  const ImuSequence seq = parse_imu_csv(path.string());
  REQUIRE(seq.size() == 2);
  REQUIRE_THAT(seq.fs, Catch::Matchers::WithinRel(100.0, 1e-12));
}

TEST_CASE("parse_imu_csv rejects malformed input with the offending line") {
  const fs::path path = temp_file("bad.csv");

  SECTION("NaN accelerometer value") {
    write_text(path,
               "t,fx,fy,fz,wx,wy,wz\n"
               "0,0,0,9.81,0,0,0\n"
               "0.01,NaN,0,9.81,0,0,0\n"
               "0.02,0,0,9.81,0,0,0\n");
    REQUIRE_THROWS_WITH(parse_imu_csv(path.string()),
                        Catch::Matchers::ContainsSubstring("line 3"));
  }
  SECTION("non-numeric garbage") {
    write_text(path,
               "t,fx,fy,fz,wx,wy,wz\n"
               "0,0,0,x,0,0,0\n"
               "0.01,0,0,0,0,0,0\n");
    REQUIRE_THROWS_WITH(parse_imu_csv(path.string()),
                        Catch::Matchers::ContainsSubstring("line 2"));
  }
  SECTION("wrong field count") {
    write_text(path,
               "t,fx,fy,fz,wx,wy,wz\n"
               "0,0,0,0,0,0\n");
    REQUIRE_THROWS_AS(parse_imu_csv(path.string()), std::runtime_error);
  }
  SECTION("non-monotone timestamps") {
    write_text(path,
               "t,fx,fy,fz,wx,wy,wz\n"
               "0,0,0,0,0,0,0\n"
               "0.02,0,0,0,0,0,0\n"
               "0.01,0,0,0,0,0,0\n");
    REQUIRE_THROWS_WITH(parse_imu_csv(path.string()),
                        Catch::Matchers::ContainsSubstring("non-monotone"));
  }
  SECTION("fewer than 2 rows") {
    write_text(path, "t,fx,fy,fz,wx,wy,wz\n0,0,0,0,0,0,0\n");
    REQUIRE_THROWS_WITH(parse_imu_csv(path.string()),
                        Catch::Matchers::ContainsSubstring("fewer than 2"));
  }
  SECTION("bad header") {
    write_text(path, "time,ax\n0,0\n");
    REQUIRE_THROWS_WITH(parse_imu_csv(path.string()),
                        Catch::Matchers::ContainsSubstring("header"));
  }
  SECTION("dropped-sample gap") {
    write_text(path,
               "t,fx,fy,fz,wx,wy,wz\n"
               "0,0,0,0,0,0,0\n"
               "0.01,0,0,0,0,0,0\n"
               "0.02,0,0,0,0,0,0\n"
               "0.52,0,0,0,0,0,0\n"
               "0.53,0,0,0,0,0,0\n");
    REQUIRE_THROWS_WITH(parse_imu_csv(path.string()),
                        Catch::Matchers::ContainsSubstring("gap"));
  }
}

TEST_CASE("write_imu_csv round-trips bit exactly") {
  const fs::path path = temp_file("roundtrip.csv");
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const ImuSequence seq = random_sequence(seed, 200, 100.0);
    write_imu_csv(seq, path.string());
    const ImuSequence back = parse_imu_csv(path.string());
    REQUIRE(identical(seq, back));
    REQUIRE_THAT(back.fs, Catch::Matchers::WithinRel(seq.fs, 1e-12));
  }
}

TEST_CASE("write_imu_csv emits one row per sample") {
  // 1 s stationary recording at 100 Hz: 100 samples.
  std::vector<ImuRecord> recs(100);
  for (std::size_t k = 0; k < recs.size(); ++k) {
    recs[k].t = static_cast<double>(k) / 100.0;
    recs[k].f = Eigen::Vector3d(0, 0, 9.81);
  }
  const ImuSequence seq = ImuSequence::from_records(std::move(recs));
  const fs::path path = temp_file("stationary.csv");
  write_imu_csv(seq, path.string());

  std::ifstream in(path);
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  REQUIRE(lines == 101);  // header + 100 rows
}

TEST_CASE("write_imu_csv fails on an unwritable path") {
  const ImuSequence seq = random_sequence(9, 10, 100.0);
  REQUIRE_THROWS_AS(write_imu_csv(seq, "/nonexistent_dir/out.csv"),
                    std::runtime_error);
}

TEST_CASE("validate_sequence flags gaps, saturation, constant channels") {
  SECTION("clean synthetic walk has no warnings") {
    const GroundTruth gt =
        synth_trajectory(TrajectorySpec::rectangle(1), GaitProfile::walk(), 100.0);
    const ImuSequence seq = imu_from_trajectory(gt, NoiseSpec::consumer(7));
    REQUIRE(validate_sequence(seq).empty());
  }
  SECTION("0.5 s gap produces a gap warning with timestamps") {
    std::vector<ImuRecord> recs(50);
    for (std::size_t k = 0; k < recs.size(); ++k) {
      recs[k].t = static_cast<double>(k) / 100.0 + (k >= 25 ? 0.5 : 0.0);
      recs[k].f = Eigen::Vector3d(0.01 * k, 0.02 * k, 9.81 + 0.001 * k);
      recs[k].w = Eigen::Vector3d(1e-3 * k, 0.001 * k, 1e-4 * k);
    }
    const ImuSequence seq = ImuSequence::from_records(std::move(recs));
    const auto warnings = validate_sequence(seq);
    REQUIRE(warnings.size() == 1);
    REQUIRE_THAT(warnings[0], Catch::Matchers::ContainsSubstring("gap"));
    REQUIRE_THAT(warnings[0], Catch::Matchers::ContainsSubstring("0.24"));
  }
  SECTION("all-zero gyro channel produces a constant-channel warning") {
    const GroundTruth gt =
        synth_trajectory(TrajectorySpec::rectangle(1), GaitProfile::walk(), 100.0);
    ImuSequence seq = imu_from_trajectory(gt, NoiseSpec::consumer(7));
    for (ImuRecord& rec : seq.records) rec.w.x() = 0.0;
    const auto warnings = validate_sequence(seq);
    REQUIRE(warnings.size() == 1);
    REQUIRE_THAT(warnings[0], Catch::Matchers::ContainsSubstring("wx"));
  }
  SECTION("saturated readings are reported") {
    std::vector<ImuRecord> recs(20);
    for (std::size_t k = 0; k < recs.size(); ++k) {
      recs[k].t = static_cast<double>(k) / 100.0;
      recs[k].f =
          Eigen::Vector3d(0.001 * k, 2e-3 * k, k == 10 ? 200.0 : 9.81 + 1e-4 * k);
      recs[k].w = Eigen::Vector3d(1e-5 * k, 2e-5 * k, k == 12 ? 40.0 : 1e-6 * k);
    }
    const ImuSequence seq = ImuSequence::from_records(std::move(recs));
    const auto warnings = validate_sequence(seq);
    REQUIRE(warnings.size() == 2);
  }
}

TEST_CASE("manifest round-trips and rejects duplicate paths") {
  const fs::path path = temp_file("manifest.json");
  DatasetManifest manifest = {
      {"a.csv", "walk", RecordingRole::calibration},
      {"b.csv", "jog", RecordingRole::evaluation},
  };
  save_manifest(manifest, path.string());
  const DatasetManifest back = load_manifest(path.string());
  REQUIRE(back.size() == 2);
  REQUIRE(back[0].path == "a.csv");
  REQUIRE(back[0].label == "walk");
  REQUIRE(back[0].role == RecordingRole::calibration);
  REQUIRE(back[1].role == RecordingRole::evaluation);

  write_text(path,
             R"([{"path":"a.csv","label":"x","role":"evaluation"},)"
             R"({"path":"a.csv","label":"y","role":"evaluation"}])");
  REQUIRE_THROWS_WITH(load_manifest(path.string()),
                      Catch::Matchers::ContainsSubstring("duplicate"));
}
