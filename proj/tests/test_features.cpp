#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "firzen/data/features.hpp"

using namespace firzen;

namespace {

std::string feature_bytes(std::size_t rows, std::size_t cols, const std::vector<float>& vals) {
    std::ostringstream os;
    os << rows << ' ' << cols << '\n';
    for (float f : vals) {
        unsigned char buf[4];
        detail::store_le_f32(f, buf);
        os.write(reinterpret_cast<const char*>(buf), 4);
    }
    return os.str();
}

}  // namespace

TEST_CASE("header 3 4 with 12 finite values loads a 3x4 matrix") {
    std::vector<float> vals(12);
    for (int i = 0; i < 12; ++i) vals[i] = 0.5f * static_cast<float>(i);
    std::istringstream is(feature_bytes(3, 4, vals));
    auto fm = load_features(is, Modality::Text, 3);
    CHECK(fm.values.rows() == 3);
    CHECK(fm.values.cols() == 4);
    CHECK(fm.values(2, 3) == doctest::Approx(5.5));
}

TEST_CASE("row count mismatch is an alignment error") {
    std::istringstream is(feature_bytes(3, 2, std::vector<float>(6, 1.0f)));
    CHECK_THROWS_AS(load_features(is, Modality::Image, 4), std::runtime_error);
}

TEST_CASE("nan reports the offending row") {
    std::vector<float> vals(6, 1.0f);
    vals[4] = std::numeric_limits<float>::quiet_NaN();  // row 2, col 0
    std::istringstream is(feature_bytes(3, 2, vals));
    CHECK_THROWS_WITH_AS(load_features(is, Modality::Text, 3, "feat.bin"),
                         doctest::Contains("row 2"), std::runtime_error);
}

TEST_CASE("truncated payload is detected") {
    std::string s = feature_bytes(2, 2, std::vector<float>(3, 1.0f));
    std::istringstream is(s);
    CHECK_THROWS_AS(load_features(is, Modality::Text, 2), std::runtime_error);
}

TEST_CASE("save then load round trips at float32 precision") {
    FeatureMatrix fm;
    fm.modality = Modality::Image;
    fm.values = Mat(4, 3);
    for (std::size_t i = 0; i < fm.values.size(); ++i)
        fm.values.raw()[i] = static_cast<float>(0.125 * static_cast<double>(i) - 1.0);
    std::ostringstream os;
    save_features(fm, os);
    std::istringstream is(os.str());
    auto loaded = load_features(is, Modality::Image, 4);
    CHECK(loaded.values == fm.values);
}
