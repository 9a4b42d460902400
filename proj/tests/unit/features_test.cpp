#include "coml/errors.hpp"
#include "coml/features.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace coml {
namespace {

using testing::fixture;

double norm2(const FeatureVector& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

ImageBlob mirrored(const ImageBlob& img) {
    std::vector<std::uint8_t> px(img.pixels().size());
    for (std::uint32_t y = 0; y < img.height(); ++y) {
        for (std::uint32_t x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                px[(static_cast<std::size_t>(y) * img.width() + x) * 3 + c] = img.at(img.width() - 1 - x, y, c);
            }
        }
    }
    return ImageBlob(img.width(), img.height(), std::move(px));
}

TEST(Features, MatchesReferenceImplementation) {
    std::ifstream in(fixture("features/expected.json"));
    ASSERT_TRUE(in);
    auto expected = nlohmann::json::parse(in);
    ASSERT_EQ(expected["extractor"], HistPoolExtractor::kId);
    ASSERT_GE(expected["cases"].size(), 4u);
    for (const auto& c : expected["cases"]) {
        auto img = read_ppm_file(fixture("features/" + c["file"].get<std::string>()));
        auto v = extract_features(img);
        auto want = c["features"].get<std::vector<double>>();
        ASSERT_EQ(v.size(), want.size());
        double worst = 0;
        for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(v[i] - want[i]));
        EXPECT_LT(worst, 1e-12) << c["file"];
    }
}

TEST(Features, ConstantGrayImage) {
    auto img = testing::solid_image(20, 13, 128, 128, 128);
    auto raw = HistPoolExtractor::raw_features(img);
    for (std::size_t i = 0; i < HistPoolExtractor::kPoolDim; ++i) EXPECT_EQ(raw[i], 128.0 / 255.0);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t b = 0; b < HistPoolExtractor::kBins; ++b) {
            EXPECT_EQ(raw[HistPoolExtractor::kPoolDim + c * 8 + b], b == 4 ? 1.0 : 0.0);
        }
    }
    auto v = extract_features(img);
    for (std::size_t i = 1; i < HistPoolExtractor::kPoolDim; ++i) EXPECT_EQ(v[i], v[0]);
}

TEST(Features, MirrorKeepsHistogramBlock) {
    std::mt19937_64 rng(12);
    for (int k = 0; k < 10; ++k) {
        auto img = testing::random_image(17 + k, 9 + 2 * k, rng);
        auto a = extract_features(img);
        auto b = extract_features(mirrored(img));
        for (std::size_t i = HistPoolExtractor::kPoolDim; i < HistPoolExtractor::kDim; ++i) {
            EXPECT_NEAR(a[i] / norm2(a), b[i] / norm2(b), 1e-15);
        }
        auto ra = HistPoolExtractor::raw_features(img);
        auto rb = HistPoolExtractor::raw_features(mirrored(img));
        for (std::size_t i = HistPoolExtractor::kPoolDim; i < HistPoolExtractor::kDim; ++i) EXPECT_EQ(ra[i], rb[i]);
    }
}

TEST(Features, UnitNormFiniteAndDeterministic) {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 50; ++k) {
        auto img = testing::random_image(1 + rng() % 70, 1 + rng() % 70, rng);
        auto v = extract_features(img);
        ASSERT_EQ(v.size(), 216u);
        EXPECT_NEAR(norm2(v), 1.0, 1e-9);
        for (double x : v) EXPECT_TRUE(std::isfinite(x));
        EXPECT_EQ(v, extract_features(ImageBlob(img.width(), img.height(), img.pixels())));
    }
}

TEST(Features, PoolLayoutIsCellMajorThenChannel) {
    std::vector<std::uint8_t> px(16 * 16 * 3, 0);
    // top-right 2x2 block is pure red: cell (gy=0, gx=7)
    for (int y = 0; y < 2; ++y) {
        for (int x = 14; x < 16; ++x) px[(y * 16 + x) * 3] = 255;
    }
    auto raw = HistPoolExtractor::raw_features(ImageBlob(16, 16, px));
    EXPECT_EQ(raw[(0 * 8 + 7) * 3 + 0], 1.0);
    EXPECT_EQ(raw[(0 * 8 + 7) * 3 + 1], 0.0);
    EXPECT_EQ(raw[(1 * 8 + 7) * 3 + 0], 0.0);
}

TEST(Features, ExtractorIdentity) {
    EXPECT_EQ(default_extractor().id(), "hist-pool-v1");
    EXPECT_EQ(default_extractor().dim(), 216u);
}

}  // namespace
}  // namespace coml
