#include "coml/trainer.hpp"

#include "coml/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coml {

namespace {

void logits_into(const SoftmaxParams& p, std::span<const double> x, std::vector<double>& z) {
    z.resize(p.classes);
    for (std::size_t k = 0; k < p.classes; ++k) {
        const double* wk = p.W.data() + k * p.dim;
        double s = p.b[k];
        for (std::size_t j = 0; j < p.dim; ++j) s += wk[j] * x[j];
        z[k] = s;
    }
}

// in place; returns log-sum-exp of the input
double softmax_inplace(std::vector<double>& z) {
    double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : z) v /= sum;
    return m + std::log(sum);
}

}  // namespace

std::vector<double> predict_proba(const SoftmaxParams& params, std::span<const double> x) {
    std::vector<double> z;
    logits_into(params, x, z);
    softmax_inplace(z);
    return z;
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

LossAndGradient loss_and_gradient(const SoftmaxParams& p, const Dataset& data, std::span<const std::size_t> rows,
                                  double l2) {
    LossAndGradient out;
    out.dW.assign(p.W.size(), 0.0);
    out.db.assign(p.classes, 0.0);
    if (rows.empty()) return out;

    std::vector<double> z;
    double ce = 0.0;
    for (std::size_t r : rows) {
        auto x = data.row(r);
        logits_into(p, x, z);
        const double zy = z[data.y[r]];
        const double lse = softmax_inplace(z);
        ce += lse - zy;
        for (std::size_t k = 0; k < p.classes; ++k) {
            const double delta = z[k] - (k == data.y[r] ? 1.0 : 0.0);
            out.db[k] += delta;
            double* g = out.dW.data() + k * p.dim;
            for (std::size_t j = 0; j < p.dim; ++j) g[j] += delta * x[j];
        }
    }

    const double inv_n = 1.0 / static_cast<double>(rows.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < p.W.size(); ++i) {
        out.dW[i] = out.dW[i] * inv_n + l2 * p.W[i];
        sq += p.W[i] * p.W[i];
    }
    for (double& g : out.db) g *= inv_n;
    out.loss = ce * inv_n + 0.5 * l2 * sq;
    return out;
}

double loss(const SoftmaxParams& params, const Dataset& data, double l2) {
    std::vector<std::size_t> rows(data.size());
    std::iota(rows.begin(), rows.end(), 0);
    return loss_and_gradient(params, data, rows, l2).loss;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    // reject the top partial bucket so every residue is equally likely
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    for (;;) {
        std::uint64_t v = rng();
        if (v < limit) return v % n;
    }
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = uniform_below(rng, i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

SoftmaxParams fit_softmax(const Dataset& data, std::size_t classes, std::uint64_t seed, const Hyperparams& hyper,
                          const std::function<void(std::size_t, double)>& on_epoch) {
    SoftmaxParams params(classes, data.dim);
    const std::size_t n = data.size();
    if (n == 0) return params;
    const std::size_t batch = std::max<std::size_t>(1, std::min(hyper.batch, n));
    std::mt19937_64 rng(seed);

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        auto perm = seeded_permutation(n, rng);
        for (std::size_t start = 0; start < n; start += batch) {
            std::size_t end = std::min(n, start + batch);
            std::span<const std::size_t> rows(perm.data() + start, end - start);
            auto g = loss_and_gradient(params, data, rows, hyper.l2);
            for (std::size_t i = 0; i < params.W.size(); ++i) params.W[i] -= hyper.lr * g.dW[i];
            for (std::size_t k = 0; k < classes; ++k) params.b[k] -= hyper.lr * g.db[k];
        }
        if (on_epoch) on_epoch(epoch, loss(params, data, hyper.l2));
    }
    return params;
}

std::vector<LabelId> trainable_labels(const DatasetState& snapshot) {
    std::set<LabelId> with_data;
    for (const auto& [id, s] : snapshot.samples) {
        if (!s.deleted && s.split == Split::Training && snapshot.label_live(s.label)) with_data.insert(s.label);
    }
    return {with_data.begin(), with_data.end()};
}

TrainedModel train(const DatasetState& snapshot, const FeatureProvider& features, const TrainRequest& request,
                   const FeatureExtractor& extractor) {
    auto labels = trainable_labels(snapshot);
    if (labels.size() < 2) {
        throw Error(ErrorCode::InsufficientData, "training needs at least two labels with training images, have " +
                                                     std::to_string(labels.size()));
    }
    std::map<LabelId, std::size_t> index;
    for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = i;

    Dataset data;
    data.dim = extractor.dim();
    for (const auto& [id, s] : snapshot.samples) {
        if (s.deleted || s.split != Split::Training) continue;
        auto it = index.find(s.label);
        if (it == index.end()) continue;
        FeatureVector f = features(s);
        if (f.size() != data.dim) throw Error(ErrorCode::ModelMismatch, "feature dimension mismatch");
        data.X.insert(data.X.end(), f.begin(), f.end());
        data.y.push_back(it->second);
    }

    TrainedModel model;
    model.version = request.version;
    model.device = request.device;
    model.label_order = std::move(labels);
    model.extractor_id = extractor.id();
    model.params = fit_softmax(data, model.label_order.size(), request.seed, request.hyper);
    model.trained_at = request.now_ms;
    model.train_sample_count = data.size();
    return model;
}

ConfidenceVector classify_features(const TrainedModel& model, std::span<const double> features) {
    if (features.size() != model.params.dim) throw Error(ErrorCode::ModelMismatch, "feature dimension mismatch");
    return predict_proba(model.params, features);
}

ConfidenceVector classify(const TrainedModel& model, const ImageBlob& image, const FeatureExtractor& extractor) {
    if (model.extractor_id != extractor.id()) {
        throw Error(ErrorCode::ModelMismatch,
                    "model uses extractor " + model.extractor_id + ", engine provides " + extractor.id());
    }
    return classify_features(model, extractor.extract(image));
}

}  // namespace coml
