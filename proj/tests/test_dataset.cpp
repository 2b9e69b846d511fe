#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fedmua/fedmua.hpp"

using namespace fedmua;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    auto dir = fs::temp_directory_path() / "fedmua_dataset_tests";
    fs::create_directories(dir);
    return dir;
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(buf), 4);
}

// 2x2-pixel two-image IDX pair with hand-picked bytes.
std::pair<std::string, std::string> write_idx_fixture(std::uint32_t image_count = 2,
                                                      std::uint32_t label_count = 2,
                                                      std::uint32_t image_magic = 0x00000803,
                                                      bool truncate_pixels = false) {
    const auto img_path = (temp_dir() / "fixture-images.idx").string();
    const auto lab_path = (temp_dir() / "fixture-labels.idx").string();
    {
        std::ofstream img(img_path, std::ios::binary);
        write_be32(img, image_magic);
        write_be32(img, image_count);
        write_be32(img, 2);
        write_be32(img, 2);
        const unsigned char pixels[8] = {0, 51, 102, 255, 13, 26, 39, 52};
        img.write(reinterpret_cast<const char*>(pixels),
                  truncate_pixels ? 5 : static_cast<std::streamsize>(4 * image_count));
    }
    {
        std::ofstream lab(lab_path, std::ios::binary);
        write_be32(lab, 0x00000801);
        write_be32(lab, label_count);
        const unsigned char labels[2] = {7, 3};
        lab.write(reinterpret_cast<const char*>(labels), label_count);
    }
    return {img_path, lab_path};
}

}  // namespace

TEST_CASE("load_idx reads the hand-built fixture exactly") {
    auto [img, lab] = write_idx_fixture();
    const Dataset ds = load_idx(img, lab);
    REQUIRE(ds.size() == 2);
    REQUIRE(ds.feature_dim == 4);
    REQUIRE(ds.class_count == 10);
    REQUIRE(ds.examples[0].label == 7);
    REQUIRE(ds.examples[1].label == 3);
    const std::vector<double> expect{0.0, 51.0 / 255.0, 102.0 / 255.0, 1.0};
    for (std::size_t i = 0; i < 4; ++i)
        REQUIRE_THAT(ds.examples[0].features[i], Catch::Matchers::WithinAbs(expect[i], 1e-15));
}

TEST_CASE("load_idx rejects a bad magic number") {
    auto [img, lab] = write_idx_fixture(2, 2, 0x00000804);
    try {
        load_idx(img, lab);
        FAIL("expected load_error");
    } catch (const load_error& e) {
        REQUIRE(e.what_kind == load_error::kind::bad_magic);
    }
}

TEST_CASE("load_idx rejects mismatched image/label counts") {
    auto [img, lab] = write_idx_fixture(2, 1);
    try {
        load_idx(img, lab);
        FAIL("expected load_error");
    } catch (const load_error& e) {
        REQUIRE(e.what_kind == load_error::kind::count_mismatch);
    }
}

TEST_CASE("load_idx rejects truncated pixel data") {
    auto [img, lab] = write_idx_fixture(2, 2, 0x00000803, true);
    try {
        load_idx(img, lab);
        FAIL("expected load_error");
    } catch (const load_error& e) {
        REQUIRE(e.what_kind == load_error::kind::truncated);
    }
}

// Honors canonical MNIST files when present; pointing FEDMUA_MNIST_DIR at
// them activates this check.
TEST_CASE("load_idx reads canonical MNIST test files when available") {
    const char* dir = std::getenv("FEDMUA_MNIST_DIR");
    if (!dir) {
        SUCCEED("FEDMUA_MNIST_DIR not set; skipping");
        return;
    }
    const Dataset ds = load_idx(std::string(dir) + "/t10k-images-idx3-ubyte",
                                std::string(dir) + "/t10k-labels-idx1-ubyte");
    REQUIRE(ds.size() == 10000);
    REQUIRE(ds.feature_dim == 784);
}

TEST_CASE("load_csv one-hot encodes categoricals and scales numerics") {
    const auto path = (temp_dir() / "basic.csv").string();
    {
        std::ofstream out(path);
        out << "color,amount,label\n";
        out << "red,10,0\n";
        out << "blue,20,1\n";
        out << "red,30,0\n";
    }
    CsvSchema schema;
    schema.categorical_columns = {"color"};
    const Dataset ds = load_csv(path, "label", schema);
    REQUIRE(ds.feature_dim == 3);  // 2 one-hot + 1 numeric
    REQUIRE(ds.size() == 3);
    // red appears first, so levels are [red, blue]
    REQUIRE(ds.examples[0].features == std::vector<double>{1.0, 0.0, 0.0});
    REQUIRE(ds.examples[1].features == std::vector<double>{0.0, 1.0, 0.5});
    REQUIRE(ds.examples[2].features == std::vector<double>{1.0, 0.0, 1.0});
}

TEST_CASE("load_csv maps a constant numeric column to zeros") {
    const auto path = (temp_dir() / "constant.csv").string();
    {
        std::ofstream out(path);
        out << "a,label\n5,0\n5,1\n5,0\n";
    }
    const Dataset ds = load_csv(path, "label");
    for (const auto& ex : ds.examples) REQUIRE(ex.features[0] == 0.0);
}

TEST_CASE("load_csv scales against the file's own min/max") {
    const auto path = (temp_dir() / "scaled.csv").string();
    {
        std::ofstream out(path);
        out << "x,y,label\n";
        out << "2,-1,0\n";
        out << "4,0,1\n";
        out << "10,3,1\n";
    }
    const Dataset ds = load_csv(path, "label");
    // x: min 2, max 10 -> (2,4,10) -> (0, .25, 1); y: min -1, max 3 -> (0, .25, 1)
    REQUIRE_THAT(ds.examples[1].features[0], Catch::Matchers::WithinAbs(0.25, 1e-12));
    REQUIRE_THAT(ds.examples[1].features[1], Catch::Matchers::WithinAbs(0.25, 1e-12));
    REQUIRE_THAT(ds.examples[2].features[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("load_csv reports a missing label column") {
    const auto path = (temp_dir() / "nolabel.csv").string();
    {
        std::ofstream out(path);
        out << "a,b\n1,2\n";
    }
    try {
        load_csv(path, "label");
        FAIL("expected load_error");
    } catch (const load_error& e) {
        REQUIRE(e.what_kind == load_error::kind::missing_column);
    }
}

TEST_CASE("load_csv reports non-numeric cells with the row index") {
    const auto path = (temp_dir() / "badcell.csv").string();
    {
        std::ofstream out(path);
        out << "a,label\n1,0\noops,1\n";
    }
    try {
        load_csv(path, "label");
        FAIL("expected load_error");
    } catch (const load_error& e) {
        REQUIRE(e.what_kind == load_error::kind::parse);
        REQUIRE(std::string(e.what()).find("row 3") != std::string::npos);
    }
}

TEST_CASE("CSV save/load round-trip preserves the feature matrix") {
    const Dataset original = make_blobs(40, 6, 2.0, 17);
    const auto path = (temp_dir() / "roundtrip.csv").string();
    save_csv(original, path);
    const Dataset reloaded = load_csv(path, "label");
    REQUIRE(reloaded.size() == original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        REQUIRE(reloaded.examples[i].label == original.examples[i].label);
        for (std::size_t j = 0; j < original.feature_dim; ++j) {
            // reload rescales to [0,1]; undo with the column's min/max
            double lo = original.examples[0].features[j], hi = lo;
            for (const auto& ex : original.examples) {
                lo = std::min(lo, ex.features[j]);
                hi = std::max(hi, ex.features[j]);
            }
            const double expect = hi > lo ? (original.examples[i].features[j] - lo) / (hi - lo) : 0.0;
            REQUIRE_THAT(reloaded.examples[i].features[j], Catch::Matchers::WithinAbs(expect, 1e-9));
        }
    }
}

TEST_CASE("synthetic generators are deterministic and in-range") {
    const Dataset a = make_digits(50, 5);
    const Dataset b = make_digits(50, 5);
    REQUIRE(a.examples[17].features == b.examples[17].features);
    for (const auto& ex : a.examples)
        for (double v : ex.features) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }

    const Dataset p = make_purchase_like(30, 6);
    REQUIRE(p.feature_dim == 600);
    for (const auto& ex : p.examples)
        for (double v : ex.features) REQUIRE((v == 0.0 || v == 1.0));
}
