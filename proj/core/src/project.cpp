#include "coml/project.hpp"

#include "coml/errors.hpp"

#include <algorithm>
#include <set>

namespace coml {

void apply_effect(DatasetState& state, const DatasetOp& o) {
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, op::AddLabel>) {
                auto it = state.labels.find(k.label_id);
                if (it == state.labels.end()) {
                    state.labels.emplace(k.label_id, Label{k.label_id, k.name, Stamp{o.lamport, o.device}, false});
                } else if (it->second.name.empty()) {
                    // tombstone recorded before the add: keep it dead, fill in the name
                    it->second.name = k.name;
                    it->second.name_stamp = Stamp{o.lamport, o.device};
                }
            } else if constexpr (std::is_same_v<K, op::RenameLabel>) {
                auto it = state.labels.find(k.label_id);
                if (it != state.labels.end() && it->second.name_stamp < k.name_stamp) {
                    it->second.name = k.name;
                    it->second.name_stamp = k.name_stamp;
                }
            } else if constexpr (std::is_same_v<K, op::DeleteLabel>) {
                auto [it, inserted] = state.labels.try_emplace(k.label_id, Label{k.label_id, "", Stamp{}, true});
                it->second.deleted = true;
                for (auto& [sid, sample] : state.samples) {
                    if (sample.label == k.label_id) sample.deleted = true;
                }
            } else if constexpr (std::is_same_v<K, op::AddSample>) {
                if (state.samples.contains(k.sample.id)) return;
                Sample s = k.sample;
                s.seq = o.seq;
                s.deleted = !state.label_live(s.label);
                state.samples.emplace(s.id, std::move(s));
            } else if constexpr (std::is_same_v<K, op::DeleteSample>) {
                auto it = state.samples.find(k.sample_id);
                if (it != state.samples.end()) {
                    it->second.deleted = true;
                } else {
                    Sample tomb;
                    tomb.id = k.sample_id;
                    tomb.deleted = true;
                    state.samples.emplace(k.sample_id, std::move(tomb));
                }
            } else if constexpr (std::is_same_v<K, op::TagSample>) {
                auto it = state.samples.find(k.sample_id);
                if (it != state.samples.end() && !it->second.deleted) it->second.tags = k.tags;
            } else {
                auto it = state.samples.find(k.sample_id);
                if (it != state.samples.end() && !it->second.deleted) {
                    it->second.label = k.label_id;
                    if (!state.label_live(k.label_id)) it->second.deleted = true;
                }
            }
        },
        o.kind);
}

const DatasetState& ReplicatedProject::view() const {
    if (!view_cache_) {
        DatasetState v = confirmed_;
        for (const auto& p : pending_) apply_effect(v, p);
        view_cache_ = std::move(v);
    }
    return *view_cache_;
}

void ReplicatedProject::observe_lamport(std::uint64_t lamport) { lamport_ = std::max(lamport_, lamport) + 1; }

void ReplicatedProject::apply(const DatasetOp& o) {
    if (o.seq != applied_seq_ + 1) {
        throw Error(ErrorCode::GapError,
                    "expected seq " + std::to_string(applied_seq_ + 1) + ", got " + std::to_string(o.seq));
    }
    validate_schema(o);
    apply_effect(confirmed_, o);
    applied_seq_ = o.seq;
    log_.push_back(o);
    observe_lamport(o.lamport);

    auto it = std::find_if(pending_.begin(), pending_.end(), [&](const DatasetOp& p) { return p.op_id == o.op_id; });
    if (it != pending_.end()) pending_.erase(it);
    view_cache_.reset();
}

bool ReplicatedProject::receive(const DatasetOp& o) {
    if (o.seq != 0 && o.seq <= applied_seq_) return false;
    apply(o);
    return true;
}

DatasetOp ReplicatedProject::local_submit(const Intent& in, const DeviceId& device, IdSource& ids,
                                          std::int64_t now_ms) {
    const DatasetState& v = view();
    auto reject = [](const std::string& why) { throw Error(ErrorCode::ValidationError, why); };
    auto require_live_label = [&](const LabelId& id) {
        if (!v.label_live(id)) reject("unknown label " + id.str());
    };
    auto require_live_sample = [&](const SampleId& id) {
        if (!v.sample_live(id)) reject("unknown sample " + id.str());
    };
    auto checked_name = [&](const std::string& raw, const LabelId* self) {
        std::string name = trim(raw);
        if (name.empty()) reject("label name is empty");
        if (!valid_label_name(name)) reject("label name must be valid UTF-8 of at most 64 characters");
        for (const auto& [id, label] : v.labels) {
            if (!label.deleted && label.name == name && (self == nullptr || id != *self)) {
                reject("a label named '" + name + "' already exists");
            }
        }
        return name;
    };

    DatasetOp o;
    o.op_id = ids.next<OpId>();
    o.device = device;
    o.lamport = lamport_ + 1;

    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, intent::AddLabel>) {
                o.kind = op::AddLabel{ids.next<LabelId>(), checked_name(k.name, nullptr)};
            } else if constexpr (std::is_same_v<K, intent::RenameLabel>) {
                require_live_label(k.label_id);
                o.kind = op::RenameLabel{k.label_id, checked_name(k.name, &k.label_id), Stamp{o.lamport, device}};
            } else if constexpr (std::is_same_v<K, intent::DeleteLabel>) {
                require_live_label(k.label_id);
                o.kind = op::DeleteLabel{k.label_id};
            } else if constexpr (std::is_same_v<K, intent::AddSample>) {
                require_live_label(k.label);
                if (k.blob.width < 1 || k.blob.width > 4096 || k.blob.height < 1 || k.blob.height > 4096) {
                    reject("image exceeds 4096x4096");
                }
                if (!valid_tags(k.tags)) reject("invalid tags");
                Sample s;
                s.id = ids.next<SampleId>();
                s.label = k.label;
                s.split = k.split;
                s.blob = k.blob;
                s.created_by = device;
                s.created_at = now_ms;
                s.tags = k.tags;
                o.kind = op::AddSample{std::move(s)};
            } else if constexpr (std::is_same_v<K, intent::DeleteSample>) {
                require_live_sample(k.sample_id);
                o.kind = op::DeleteSample{k.sample_id};
            } else if constexpr (std::is_same_v<K, intent::TagSample>) {
                require_live_sample(k.sample_id);
                if (!valid_tags(k.tags)) reject("invalid tags");
                o.kind = op::TagSample{k.sample_id, k.tags};
            } else {
                require_live_sample(k.sample_id);
                require_live_label(k.label_id);
                o.kind = op::RelabelSample{k.sample_id, k.label_id};
            }
        },
        in);

    lamport_ = o.lamport;
    pending_.push_back(o);
    if (view_cache_) apply_effect(*view_cache_, o);
    return o;
}

bool ReplicatedProject::discard_pending(const OpId& op_id) {
    auto it = std::find_if(pending_.begin(), pending_.end(), [&](const DatasetOp& p) { return p.op_id == op_id; });
    if (it == pending_.end()) return false;
    pending_.erase(it);
    view_cache_.reset();
    return true;
}

std::vector<DatasetOp> ReplicatedProject::delta_since(std::uint64_t seq) const {
    if (seq > applied_seq_) {
        throw Error(ErrorCode::SeqTooHigh,
                    "requested seq " + std::to_string(seq) + " beyond applied " + std::to_string(applied_seq_));
    }
    return {log_.begin() + static_cast<std::ptrdiff_t>(seq), log_.end()};
}

ReplicatedProject ReplicatedProject::restore(ProjectId id, const std::vector<DatasetOp>& log,
                                             std::vector<DatasetOp> pending, std::uint64_t lamport) {
    ReplicatedProject p(id);
    for (const auto& o : log) p.apply(o);
    std::set<OpId> sequenced;
    for (const auto& o : log) sequenced.insert(o.op_id);
    std::erase_if(pending, [&](const DatasetOp& o) { return sequenced.contains(o.op_id); });
    p.pending_ = std::move(pending);
    p.lamport_ = std::max(p.lamport_, lamport);
    p.view_cache_.reset();
    return p;
}

namespace {

class Writer {
public:
    void u8(std::uint8_t v) { out.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    template <std::size_t N>
    void raw(const std::array<std::uint8_t, N>& b) {
        out.insert(out.end(), b.begin(), b.end());
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out.insert(out.end(), s.begin(), s.end());
    }

    std::vector<std::uint8_t> out;
};

}  // namespace

std::vector<std::uint8_t> canonical_serialize(const ReplicatedProject& project) {
    static constexpr std::array<std::uint8_t, 8> kMagic{'C', 'O', 'M', 'L', 'P', 'R', 'J', 1};
    const DatasetState& s = project.confirmed();
    Writer w;
    w.raw(kMagic);
    w.raw(project.id().bytes);
    w.u64(project.applied_seq());

    w.u32(static_cast<std::uint32_t>(s.labels.size()));
    for (const auto& [id, label] : s.labels) {
        w.raw(id.bytes);
        w.str(label.name);
        w.u64(label.name_stamp.lamport);
        w.raw(label.name_stamp.device.bytes);
        w.u8(label.deleted ? 1 : 0);
    }

    w.u32(static_cast<std::uint32_t>(s.samples.size()));
    for (const auto& [id, sample] : s.samples) {
        w.raw(id.bytes);
        w.raw(sample.label.bytes);
        w.u8(static_cast<std::uint8_t>(sample.split));
        w.raw(sample.blob.digest.bytes);
        w.u32(sample.blob.width);
        w.u32(sample.blob.height);
        w.raw(sample.created_by.bytes);
        w.u64(static_cast<std::uint64_t>(sample.created_at));
        w.u64(sample.seq);
        w.u32(static_cast<std::uint32_t>(sample.tags.size()));
        for (const auto& t : sample.tags) w.str(t);
        w.u8(sample.deleted ? 1 : 0);
    }
    return std::move(w.out);
}

Digest canonical_digest(const ReplicatedProject& project) { return sha256(canonical_serialize(project)); }

std::map<LabelId, SplitCounts> live_counts(const DatasetState& state) {
    std::map<LabelId, SplitCounts> out;
    for (const auto& [id, label] : state.labels) {
        if (!label.deleted) out[id];
    }
    for (const auto& [id, sample] : state.samples) {
        if (sample.deleted) continue;
        auto it = out.find(sample.label);
        if (it == out.end()) continue;
        if (sample.split == Split::Training) ++it->second.training;
        else ++it->second.testing;
    }
    return out;
}

}  // namespace coml
