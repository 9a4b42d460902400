#pragma once

#include "coml/domain.hpp"
#include "coml/ops.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace coml {

/// What a user asks for locally; local_submit turns it into a DatasetOp.
namespace intent {
struct AddLabel {
    std::string name;
};
struct RenameLabel {
    LabelId label_id;
    std::string name;
};
struct DeleteLabel {
    LabelId label_id;
};
struct AddSample {
    LabelId label;
    Split split = Split::Training;
    BlobRef blob;
    std::set<std::string> tags;
};
struct DeleteSample {
    SampleId sample_id;
};
struct TagSample {
    SampleId sample_id;
    std::set<std::string> tags;
};
struct RelabelSample {
    SampleId sample_id;
    LabelId label_id;
};
}  // namespace intent

using Intent = std::variant<intent::AddLabel, intent::RenameLabel, intent::DeleteLabel, intent::AddSample,
                            intent::DeleteSample, intent::TagSample, intent::RelabelSample>;

/// Applies one op's effect to a dataset state; `op.seq` is recorded on new
/// samples. Shared by sequenced and optimistic application.
///
///   AddSample     inserts unless the id is already known (tombstones win);
///                 lands pre-tombstoned when its label is not live.
///   DeleteSample  tombstones, recording the tombstone even for unknown ids.
///   DeleteLabel   tombstones the label and every live sample under it.
///   RenameLabel   last-writer-wins on (lamport, device).
///   TagSample     replaces tags of a live sample.
///   RelabelSample moves a live sample; moving onto a dead label tombstones it.
void apply_effect(DatasetState& state, const DatasetOp& op);

/// One replica of a shared project: the sequenced (confirmed) state plus the
/// local ops that have not yet come back from the sequencer.
class ReplicatedProject {
public:
    ReplicatedProject() = default;
    explicit ReplicatedProject(ProjectId id) : id_(id) {}

    const ProjectId& id() const { return id_; }
    const DatasetState& confirmed() const { return confirmed_; }

    /// Confirmed state with pending ops applied optimistically on top.
    const DatasetState& view() const;

    std::uint64_t applied_seq() const { return applied_seq_; }
    const std::vector<DatasetOp>& pending() const { return pending_; }
    const std::vector<DatasetOp>& log() const { return log_; }
    std::uint64_t lamport() const { return lamport_; }

    /// Applies a sequenced op. Throws GapError unless op.seq == applied_seq+1,
    /// MalformedOp on schema violations.
    void apply(const DatasetOp& op);

    /// Like apply, but silently skips ops that were already applied
    /// (seq <= applied_seq). Returns true if the op was applied.
    bool receive(const DatasetOp& op);

    /// Validates `in` against the current view, builds the op, applies it
    /// optimistically and queues it as pending. Throws ValidationError.
    DatasetOp local_submit(const Intent& in, const DeviceId& device, IdSource& ids, std::int64_t now_ms);

    /// Drops a pending op the sequencer refused. Returns false if unknown.
    bool discard_pending(const OpId& op_id);

    /// Sequenced ops with seq in (seq, applied_seq], in order.
    std::vector<DatasetOp> delta_since(std::uint64_t seq) const;

    /// Rebuilds a replica from persisted parts.
    static ReplicatedProject restore(ProjectId id, const std::vector<DatasetOp>& log,
                                     std::vector<DatasetOp> pending, std::uint64_t lamport);

private:
    void observe_lamport(std::uint64_t lamport);

    ProjectId id_;
    DatasetState confirmed_;
    std::uint64_t applied_seq_ = 0;
    std::vector<DatasetOp> pending_;
    std::vector<DatasetOp> log_;
    std::uint64_t lamport_ = 0;

    mutable std::optional<DatasetState> view_cache_;
};

/// Deterministic encoding of (project id, applied_seq, labels, samples).
/// Pending ops and local-only data are excluded.
std::vector<std::uint8_t> canonical_serialize(const ReplicatedProject& project);
Digest canonical_digest(const ReplicatedProject& project);

struct SplitCounts {
    std::size_t training = 0;
    std::size_t testing = 0;
    friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

/// Live samples per live label. Every live label appears, even with zero counts.
std::map<LabelId, SplitCounts> live_counts(const DatasetState& state);

}  // namespace coml
