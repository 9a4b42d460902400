#pragma once

#include "coml/project.hpp"
#include "coml/trainer.hpp"

#include <map>
#include <optional>
#include <vector>

namespace coml {

/// Verdict of one model version on one test sample.
struct ClassificationRecord {
    SampleId sample_id;
    std::uint64_t model_version = 0;
    LabelId label;  // the sample's label when evaluated
    LabelId predicted;
    ConfidenceVector confidence;  // aligned with the model's label_order
    bool correct = false;         // predicted == label
    std::optional<LabelId> user_corrected_label;
    std::int64_t recorded_at = 0;

    friend bool operator==(const ClassificationRecord&, const ClassificationRecord&) = default;
};

/// Classifies every live test sample, in SampleId order. Returns an empty
/// list when there is no test data.
std::vector<ClassificationRecord> evaluate_all(const DatasetState& snapshot, const TrainedModel& model,
                                               const FeatureProvider& features, std::int64_t now_ms);

/// Testing-dashboard order: misclassified first, then newest first, then
/// SampleId ascending.
std::vector<ClassificationRecord> dashboard_order(std::vector<ClassificationRecord> records);

/// Strict-weak-ordering predicate behind dashboard_order.
bool dashboard_before(const ClassificationRecord& a, const ClassificationRecord& b);

/// Live test samples per live label (labels with none are omitted).
std::map<LabelId, std::size_t> test_counts(const DatasetState& snapshot);

/// Sum over labels of (n_l / N) * (c_l / n_l), where n_l comes from
/// `counts` and c_l is the number of correct records for label l.
/// Throws EmptyTestSet when N == 0.
double weighted_accuracy(const std::vector<ClassificationRecord>& records, const std::map<LabelId, std::size_t>& counts);

/// Correct records over N, the same quantity computed directly.
double fraction_correct(const std::vector<ClassificationRecord>& records, const std::map<LabelId, std::size_t>& counts);

struct LabelBalance {
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    double train_pct = 0.0;
    double test_pct = 0.0;
};

/// Percent of live samples per live label within each split. A split with
/// no samples reports 0 for every label.
std::map<LabelId, LabelBalance> balance_stats(const DatasetState& snapshot);

}  // namespace coml
