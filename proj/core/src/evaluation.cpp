#include "coml/evaluation.hpp"

#include "coml/errors.hpp"

#include <algorithm>

namespace coml {

std::vector<ClassificationRecord> evaluate_all(const DatasetState& snapshot, const TrainedModel& model,
                                               const FeatureProvider& features, std::int64_t now_ms) {
    std::vector<ClassificationRecord> out;
    for (const auto& [id, s] : snapshot.samples) {
        if (s.deleted || s.split != Split::Testing || !snapshot.label_live(s.label)) continue;
        FeatureVector f = features(s);
        ClassificationRecord r;
        r.sample_id = id;
        r.model_version = model.version;
        r.label = s.label;
        r.confidence = classify_features(model, f);
        r.predicted = model.label_order[argmax(r.confidence)];
        r.correct = r.predicted == s.label;
        r.recorded_at = now_ms;
        out.push_back(std::move(r));
    }
    return out;
}

bool dashboard_before(const ClassificationRecord& a, const ClassificationRecord& b) {
    if (a.correct != b.correct) return !a.correct;
    if (a.recorded_at != b.recorded_at) return a.recorded_at > b.recorded_at;
    return a.sample_id < b.sample_id;
}

std::vector<ClassificationRecord> dashboard_order(std::vector<ClassificationRecord> records) {
    std::stable_sort(records.begin(), records.end(), dashboard_before);
    return records;
}

std::map<LabelId, std::size_t> test_counts(const DatasetState& snapshot) {
    std::map<LabelId, std::size_t> out;
    for (const auto& [label, counts] : live_counts(snapshot)) {
        if (counts.testing > 0) out[label] = counts.testing;
    }
    return out;
}

namespace {

std::size_t total_of(const std::map<LabelId, std::size_t>& counts) {
    std::size_t n = 0;
    for (const auto& [l, c] : counts) n += c;
    if (n == 0) throw Error(ErrorCode::EmptyTestSet, "no test images");
    return n;
}

}  // namespace

double weighted_accuracy(const std::vector<ClassificationRecord>& records,
                         const std::map<LabelId, std::size_t>& counts) {
    const double total = static_cast<double>(total_of(counts));
    std::map<LabelId, std::size_t> correct;
    for (const auto& r : records) {
        if (r.correct) ++correct[r.label];
    }
    double acc = 0.0;
    for (const auto& [label, n] : counts) {
        if (n == 0) continue;
        const double label_acc = static_cast<double>(correct[label]) / static_cast<double>(n);
        acc += (static_cast<double>(n) / total) * label_acc;
    }
    return acc;
}

double fraction_correct(const std::vector<ClassificationRecord>& records, const std::map<LabelId, std::size_t>& counts) {
    const std::size_t total = total_of(counts);
    std::size_t correct = 0;
    for (const auto& r : records) {
        auto it = counts.find(r.label);
        if (r.correct && it != counts.end() && it->second > 0) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

std::map<LabelId, LabelBalance> balance_stats(const DatasetState& snapshot) {
    std::map<LabelId, LabelBalance> out;
    std::size_t train_total = 0;
    std::size_t test_total = 0;
    for (const auto& [label, c] : live_counts(snapshot)) {
        out[label] = LabelBalance{c.training, c.testing, 0.0, 0.0};
        train_total += c.training;
        test_total += c.testing;
    }
    for (auto& [label, b] : out) {
        if (train_total > 0) b.train_pct = 100.0 * static_cast<double>(b.train_count) / static_cast<double>(train_total);
        if (test_total > 0) b.test_pct = 100.0 * static_cast<double>(b.test_count) / static_cast<double>(test_total);
    }
    return out;
}

}  // namespace coml
