#pragma once

#include "coml/image.hpp"

#include <memory>
#include <string>
#include <vector>

namespace coml {

using FeatureVector = std::vector<double>;

/// Maps an image to a fixed-length, L2-normalized feature vector.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dim() const = 0;
    virtual FeatureVector extract(const ImageBlob& image) const = 0;
};

/// "hist-pool-v1": 8x8 area-weighted box average per RGB channel (192
/// values in [0,1], index (gy*8+gx)*3+c), then an 8-bin histogram per
/// channel (bin = value>>5, normalized to sum 1, index 192+c*8+bin), and
/// finally L2 normalization of the 216-vector.
///
/// Grid cells partition the image exactly; pixels straddling a cell border
/// contribute in proportion to their overlap. All sums are integer, so each
/// unnormalized entry is a single correctly rounded division.
class HistPoolExtractor final : public FeatureExtractor {
public:
    static constexpr std::size_t kGrid = 8;
    static constexpr std::size_t kBins = 8;
    static constexpr std::size_t kPoolDim = kGrid * kGrid * 3;
    static constexpr std::size_t kDim = kPoolDim + kBins * 3;
    static constexpr const char* kId = "hist-pool-v1";

    std::string id() const override { return kId; }
    std::size_t dim() const override { return kDim; }
    FeatureVector extract(const ImageBlob& image) const override;

    /// Unnormalized pool + histogram blocks, exposed for tests.
    static FeatureVector raw_features(const ImageBlob& image);
};

FeatureVector extract_features(const ImageBlob& image);

const FeatureExtractor& default_extractor();

}  // namespace coml
