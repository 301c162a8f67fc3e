#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "sic/io.hpp"
#include "sic/synth.hpp"

using namespace sic;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("sic_io_test_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("shortest round-trip double formatting") {
    for (double v : {0.1, 1.0 / 3.0, 1609.08, -163.18, 1e-12, 126505.0}) {
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_CASE("correspondence CSV round trip is exact") {
    TempDir dir;
    const GroundTruthScene scene = pose1_scene();
    const CorrespondenceSet set = generate_dense_grid(scene, 96.0);
    const fs::path file = dir.path / "set.csv";
    write_correspondences(file, set);
    const CorrespondenceSet back = read_correspondences(file);
    REQUIRE(back.size() == set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK(back.image[i].x() == set.image[i].x());
        CHECK(back.image[i].y() == set.image[i].y());
        CHECK(back.target[i].x() == set.target[i].x());
        CHECK(back.ideal[i].y() == set.ideal[i].y());
    }
    // String-level identity after a write-read-write cycle.
    const std::string once = read_text_file(file);
    const fs::path file2 = dir.path / "set2.csv";
    write_correspondences(file2, back);
    CHECK(read_text_file(file2) == once);
}

TEST_CASE("correspondence CSV validation") {
    TempDir dir;
    const fs::path file = dir.path / "bad.csv";
    write_text_file(file, "x_d,y_d,X,Y\n1,2,3\n");
    CHECK_THROWS_AS((void)read_correspondences(file), Error);
    write_text_file(file, "wrong,header\n");
    CHECK_THROWS_AS((void)read_correspondences(file), Error);
    write_text_file(file, "x_d,y_d,X,Y\n1,2,3,nan\n1,2,3,4\n1,2,3,4\n1,2,3,4\n");
    CHECK_THROWS_AS((void)read_correspondences(file), Error);
    write_text_file(file, "x_d,y_d,X,Y\n1,2,3,4\n5,6,7,8\n9,10,11,12\n");
    CHECK_THROWS_AS((void)read_correspondences(file), Error);  // < 4 rows
}

TEST_CASE("curve CSV round trip") {
    TempDir dir;
    RadialCurve curve;
    curve.cod = Vec2(10.0, 20.0);
    for (int i = 0; i < 100; ++i) curve.samples.push_back({i * 1.5, i * 1.75});
    const fs::path file = dir.path / "curve.csv";
    write_curve(file, curve);
    const RadialCurve back = read_curve(file, curve.cod);
    REQUIRE(back.samples.size() == curve.samples.size());
    for (std::size_t i = 0; i < curve.samples.size(); ++i) {
        CHECK(back.samples[i].r_d == curve.samples[i].r_d);
        CHECK(back.samples[i].r_u == curve.samples[i].r_u);
    }
}

TEST_CASE("report round trip is byte-identical") {
    Report r;
    r.set("sic_report_version", "1");
    r.set("mode", "mb");
    r.set_number("step2.fx", 9093.6214);
    r.set_number("step3a.k3", -163.184);
    const std::string text = r.serialize();
    const Report parsed = Report::parse(text);
    CHECK(parsed.serialize() == text);
    CHECK(*parsed.find("mode") == "mb");
    CHECK(parsed.find("missing") == nullptr);
}

TEST_CASE("report numbers carry at least 6 significant digits") {
    Report r;
    r.set_number("value", 9093.6214);
    CHECK(*r.find("value") == "9093.62");
    r.set_number("small", 0.0012345678);
    CHECK(*r.find("small") == "0.00123457");
}

TEST_CASE("digest changes iff bytes change") {
    const std::string a = "x_d,y_d,X,Y\n1,2,3,4\n";
    std::string b = a;
    CHECK(digest_bytes({a.data(), a.size()}) == digest_bytes({b.data(), b.size()}));
    b[3] = 'z';
    CHECK(digest_bytes({a.data(), a.size()}) != digest_bytes({b.data(), b.size()}));
}

TEST_CASE("sweep CSV has the documented header") {
    TempDir dir;
    SweepTable table;
    SweepRow row;
    row.sigma = 0.25;
    row.mode = "mb";
    row.parameter = "fx";
    row.mean_error = -0.5;
    row.std_error = 0.25;
    row.n_ok = 10;
    table.rows.push_back(row);
    const fs::path file = dir.path / "sweep.csv";
    write_sweep(file, table);
    const std::string text = read_text_file(file);
    CHECK(text == "sigma,mode,parameter,mean_error,std_error,n_ok,n_fail\n"
                  "0.25,mb,fx,-0.5,0.25,10,0\n");
}

TEST_SUITE_END();
