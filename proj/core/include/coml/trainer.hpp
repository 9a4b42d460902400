#pragma once

#include "coml/domain.hpp"
#include "coml/features.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace coml {

struct Hyperparams {
    double lr = 0.1;
    std::size_t epochs = 50;
    std::size_t batch = 32;  // batch >= sample count means full-batch descent
    double l2 = 1e-4;
};

/// Softmax regression parameters: W is classes x dim, row-major.
struct SoftmaxParams {
    std::size_t classes = 0;
    std::size_t dim = 0;
    std::vector<double> W;
    std::vector<double> b;

    SoftmaxParams() = default;
    SoftmaxParams(std::size_t k, std::size_t d) : classes(k), dim(d), W(k * d, 0.0), b(k, 0.0) {}

    friend bool operator==(const SoftmaxParams&, const SoftmaxParams&) = default;
};

/// Row-major design matrix with integer class targets.
struct Dataset {
    std::size_t dim = 0;
    std::vector<double> X;
    std::vector<std::size_t> y;

    std::size_t size() const { return y.size(); }
    std::span<const double> row(std::size_t i) const { return {X.data() + i * dim, dim}; }
};

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> dW;
    std::vector<double> db;
};

/// Mean cross-entropy over `rows` plus (l2/2)*||W||^2 (bias unregularized),
/// and its exact gradient. Accumulation runs over rows in the given order.
LossAndGradient loss_and_gradient(const SoftmaxParams& params, const Dataset& data, std::span<const std::size_t> rows,
                                  double l2);

double loss(const SoftmaxParams& params, const Dataset& data, double l2);

/// Numerically stable softmax of W x + b.
std::vector<double> predict_proba(const SoftmaxParams& params, std::span<const double> x);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

/// Uniform integer in [0, n) by rejection sampling, independent of the
/// standard library's distribution implementations.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

/// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::mt19937_64& rng);

/// Mini-batch gradient descent from zero weights. Each epoch visits a fresh
/// seeded permutation. Bit-reproducible for fixed (data, seed, hyper).
/// `on_epoch`, when set, receives the full-data loss after every epoch.
SoftmaxParams fit_softmax(const Dataset& data, std::size_t classes, std::uint64_t seed, const Hyperparams& hyper,
                          const std::function<void(std::size_t, double)>& on_epoch = {});

/// Locally trained classifier. Never leaves the device.
struct TrainedModel {
    std::uint64_t version = 0;
    DeviceId device;
    std::vector<LabelId> label_order;
    std::string extractor_id;
    SoftmaxParams params;
    std::int64_t trained_at = 0;
    std::size_t train_sample_count = 0;

    friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

using ConfidenceVector = std::vector<double>;

/// Supplies features for a sample (normally cached by blob digest).
using FeatureProvider = std::function<FeatureVector(const Sample&)>;

struct TrainRequest {
    std::uint64_t seed = 0;
    Hyperparams hyper;
    std::uint64_t version = 1;
    DeviceId device;
    std::int64_t now_ms = 0;
};

/// Labels eligible for training: live, with at least one live training
/// sample, ordered by LabelId.
std::vector<LabelId> trainable_labels(const DatasetState& snapshot);

/// Trains on the live training samples of trainable labels, visited in
/// SampleId order before shuffling. Throws InsufficientData with fewer than
/// two trainable labels.
TrainedModel train(const DatasetState& snapshot, const FeatureProvider& features, const TrainRequest& request,
                   const FeatureExtractor& extractor = default_extractor());

/// Confidence per label in model.label_order. Throws ModelMismatch if the
/// model was built with another extractor.
ConfidenceVector classify(const TrainedModel& model, const ImageBlob& image,
                          const FeatureExtractor& extractor = default_extractor());
ConfidenceVector classify_features(const TrainedModel& model, std::span<const double> features);

}  // namespace coml
