#include "coml/features.hpp"

#include <array>
#include <cmath>

namespace coml {

FeatureVector HistPoolExtractor::raw_features(const ImageBlob& image) {
    const std::uint64_t w = image.width();
    const std::uint64_t h = image.height();
    const auto& px = image.pixels();

    // Coordinates are scaled by kGrid: pixel x spans [8x, 8x+8) and cell gx
    // spans [gx*w, gx*w+w). Overlaps are therefore integers.
    auto overlap = [](std::uint64_t a0, std::uint64_t a1, std::uint64_t b0, std::uint64_t b1) -> std::uint64_t {
        std::uint64_t lo = std::max(a0, b0);
        std::uint64_t hi = std::min(a1, b1);
        return hi > lo ? hi - lo : 0;
    };

    std::array<std::uint64_t, kPoolDim> pool{};
    std::array<std::uint64_t, kBins * 3> hist{};
    std::vector<std::uint64_t> row(kGrid * 3);

    for (std::uint64_t y = 0; y < h; ++y) {
        std::fill(row.begin(), row.end(), 0);
        for (std::uint64_t x = 0; x < w; ++x) {
            const std::uint8_t* p = &px[(y * w + x) * 3];
            for (int c = 0; c < 3; ++c) ++hist[c * kBins + (p[c] >> 5)];
            std::uint64_t gx0 = (kGrid * x) / w;
            for (std::uint64_t gx = gx0; gx < kGrid; ++gx) {
                std::uint64_t ox = overlap(kGrid * x, kGrid * x + kGrid, gx * w, gx * w + w);
                if (ox == 0) break;
                for (int c = 0; c < 3; ++c) row[gx * 3 + c] += ox * p[c];
            }
        }
        std::uint64_t gy0 = (kGrid * y) / h;
        for (std::uint64_t gy = gy0; gy < kGrid; ++gy) {
            std::uint64_t oy = overlap(kGrid * y, kGrid * y + kGrid, gy * h, gy * h + h);
            if (oy == 0) break;
            for (std::size_t k = 0; k < kGrid * 3; ++k) pool[gy * kGrid * 3 + k] += oy * row[k];
        }
    }

    FeatureVector out(kDim);
    const double pool_den = static_cast<double>(w * h * 255);
    for (std::size_t i = 0; i < kPoolDim; ++i) out[i] = static_cast<double>(pool[i]) / pool_den;
    const double hist_den = static_cast<double>(w * h);
    for (std::size_t i = 0; i < kBins * 3; ++i) out[kPoolDim + i] = static_cast<double>(hist[i]) / hist_den;
    return out;
}

FeatureVector HistPoolExtractor::extract(const ImageBlob& image) const {
    FeatureVector v = raw_features(image);
    double sq = 0.0;
    for (double x : v) sq += x * x;
    // each histogram sums to 1, so the norm is never zero
    const double norm = std::sqrt(sq);
    for (double& x : v) x /= norm;
    return v;
}

FeatureVector extract_features(const ImageBlob& image) { return default_extractor().extract(image); }

const FeatureExtractor& default_extractor() {
    static const HistPoolExtractor kExtractor;
    return kExtractor;
}

}  // namespace coml
