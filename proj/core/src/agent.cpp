#include "coml/agent.hpp"

#include "coml/errors.hpp"
#include "coml/model_io.hpp"

#include <algorithm>
#include <fstream>

namespace coml {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::int64_t system_now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

ordered_json record_to_json(const ClassificationRecord& r) {
    ordered_json j;
    j["sample_id"] = r.sample_id.str();
    j["model_version"] = r.model_version;
    j["label"] = r.label.str();
    j["predicted"] = r.predicted.str();
    j["confidence"] = r.confidence;
    j["correct"] = r.correct;
    j["user_corrected_label"] = r.user_corrected_label ? ordered_json(r.user_corrected_label->str()) : ordered_json();
    j["recorded_at"] = r.recorded_at;
    return j;
}

ClassificationRecord record_from_json(const json& j) {
    ClassificationRecord r;
    r.sample_id = id_from_json<SampleId>(j, "sample_id");
    r.model_version = j.at("model_version").get<std::uint64_t>();
    r.label = id_from_json<LabelId>(j, "label");
    r.predicted = id_from_json<LabelId>(j, "predicted");
    r.confidence = j.at("confidence").get<ConfidenceVector>();
    r.correct = j.at("correct").get<bool>();
    if (j.contains("user_corrected_label") && !j["user_corrected_label"].is_null()) {
        r.user_corrected_label = id_from_json<LabelId>(j, "user_corrected_label");
    }
    r.recorded_at = j.at("recorded_at").get<std::int64_t>();
    return r;
}

json read_json_file(const fs::path& path) {
    auto bytes = read_file_bytes(path);
    return json::parse(bytes.begin(), bytes.end());
}

}  // namespace

std::string_view to_string(ConnectionState state) {
    switch (state) {
        case ConnectionState::Offline: return "offline";
        case ConnectionState::Syncing: return "syncing";
        case ConnectionState::Live: return "live";
    }
    return "offline";
}

Agent::Agent(AgentOptions options) : options_(std::move(options)) {
    ids_ = options_.id_seed ? std::make_unique<IdSource>(*options_.id_seed) : std::make_unique<IdSource>();
    if (!options_.clock) options_.clock = system_now_ms;
    if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    load_state();
    apply_thread_ = std::thread([this] { apply_loop(); });
}

Agent::~Agent() {
    {
        std::lock_guard lock(inbox_mu_);
        stopping_ = true;
    }
    inbox_cv_.notify_all();
    if (apply_thread_.joinable()) apply_thread_.join();
    std::lock_guard lock(mu_);
    drop_link_locked();
}

std::int64_t Agent::now() const { return options_.clock(); }

void Agent::load_state() {
    const fs::path& dir = options_.state_dir;
    if (dir.empty()) {
        device_ = ids_->next<DeviceId>();
        blobs_ = std::make_unique<MemoryBlobStore>();
        events_ = std::make_unique<EventLog>();
        return;
    }
    fs::create_directories(dir / "blobs");
    blobs_ = std::make_unique<DirBlobStore>(dir / "blobs");
    events_ = std::make_unique<EventLog>(dir / "events.ndjson");

    if (fs::exists(dir / "device.json")) {
        json d = read_json_file(dir / "device.json");
        device_ = id_from_json<DeviceId>(d, "device_id");
        high_score_ = d.value("high_score", 0.0);
        next_model_version_ = d.value("next_model_version", std::uint64_t{1});
        if (d.contains("membership") && !d["membership"].is_null()) {
            const auto& m = d["membership"];
            membership_ = Membership{net::parse_endpoint(m.at("server").get<std::string>()),
                                     id_from_json<ProjectId>(m, "project_id"), m.at("token").get<std::string>()};
        }
    } else {
        device_ = ids_->next<DeviceId>();
        save_device_locked();
    }

    auto [oplog, log] = OpLogFile::open(dir / "oplog.bin");
    oplog_ = std::move(oplog);
    std::vector<DatasetOp> pending;
    std::uint64_t lamport = 0;
    if (fs::exists(dir / "pending.json")) {
        json p = read_json_file(dir / "pending.json");
        lamport = p.value("lamport", std::uint64_t{0});
        for (const auto& o : p.at("ops")) pending.push_back(op_from_json(o));
    }
    if (membership_) replica_ = ReplicatedProject::restore(membership_->project, log, std::move(pending), lamport);

    if (fs::exists(dir / "model.coml")) model_ = load_model(dir / "model.coml");
    if (fs::exists(dir / "records.json")) {
        for (const auto& r : read_json_file(dir / "records.json")) {
            auto rec = record_from_json(r);
            records_[rec.sample_id] = rec;
        }
    }
}

void Agent::save_device_locked() const {
    if (options_.state_dir.empty()) return;
    ordered_json d;
    d["device_id"] = device_.str();
    if (membership_) {
        d["membership"] = {{"server", membership_->server.str()},
                           {"project_id", membership_->project.str()},
                           {"token", membership_->token}};
    } else {
        d["membership"] = nullptr;
    }
    d["high_score"] = high_score_;
    d["next_model_version"] = next_model_version_;
    write_file_durably(options_.state_dir / "device.json", d.dump(2) + "\n");
}

void Agent::save_pending_locked() const {
    if (options_.state_dir.empty()) return;
    json ops = json::array();
    for (const auto& o : replica_.pending()) ops.push_back(to_json(o));
    json p{{"lamport", replica_.lamport()}, {"ops", std::move(ops)}};
    write_file_durably(options_.state_dir / "pending.json", p.dump());
}

void Agent::save_records_locked() const {
    if (options_.state_dir.empty()) return;
    ordered_json arr = ordered_json::array();
    for (const auto& [id, r] : records_) arr.push_back(record_to_json(r));
    write_file_durably(options_.state_dir / "records.json", arr.dump());
}

void Agent::emit_locked(EventKind kind) {
    ActivityEvent e;
    e.event_id = ids_->next<EventId>();
    e.project = membership_ ? membership_->project : ProjectId{};
    e.device = device_;
    e.ts = now();
    e.kind = std::move(kind);
    events_->record(std::move(e));
}

std::optional<Membership> Agent::membership() const {
    std::lock_guard lock(mu_);
    return membership_;
}

void Agent::join(const Membership& m) {
    {
        std::lock_guard lock(mu_);
        if (membership_ && membership_->project != m.project) {
            throw Error(ErrorCode::ValidationError, "device already belongs to project " + membership_->project.str());
        }
        if (!membership_) replica_ = ReplicatedProject(m.project);
        membership_ = m;
        save_device_locked();
    }
    connect();
}

void Agent::connect() {
    std::lock_guard lock(mu_);
    if (!membership_) throw Error(ErrorCode::ValidationError, "device has not joined a project");
    drop_link_locked();
    drain_inbox_locked();
    state_ = ConnectionState::Syncing;

    ServerLink::Callbacks cb;
    cb.on_commit = [this](const DatasetOp& op) {
        {
            std::lock_guard inbox_lock(inbox_mu_);
            inbox_.push_back(op);
        }
        inbox_cv_.notify_all();
    };
    cb.on_disconnect = [this] { state_ = ConnectionState::Offline; };

    try {
        auto [link, delta] = ServerLink::open(membership_->server, membership_->project, membership_->token, device_,
                                              replica_.applied_seq(), std::move(cb), options_.timeout);
        link_ = std::move(link);
        for (const auto& op : delta) apply_remote_locked(op);
        drain_inbox_locked();
    } catch (...) {
        drop_link_locked();
        throw;
    }
    uploaded_.clear();
    state_ = ConnectionState::Live;
    flush_locked();
    applied_cv_.notify_all();
}

void Agent::disconnect() {
    std::lock_guard lock(mu_);
    drop_link_locked();
}

void Agent::drop_link_locked() {
    link_.reset();
    state_ = ConnectionState::Offline;
}

std::size_t Agent::flush() {
    std::lock_guard lock(mu_);
    return flush_locked();
}

std::size_t Agent::flush_locked() {
    if (!link_ || !link_->alive()) {
        if (link_) drop_link_locked();
        return 0;
    }
    std::size_t submitted = 0;
    const std::vector<DatasetOp> queue = replica_.pending();
    try {
        for (const auto& op : queue) {
            if (acked_.contains(op.op_id)) continue;
            auto upload = [&](const Digest& d) {
                auto bytes = blobs_->get(d);
                if (!bytes) throw Error(ErrorCode::BlobUnavailable, "local blob " + d.hex() + " is missing");
                link_->put_blob(*bytes);
                uploaded_.insert(d);
            };
            const auto* add = std::get_if<op::AddSample>(&op.kind);
            try {
                if (add && !uploaded_.contains(add->sample.blob.digest)) upload(add->sample.blob.digest);
                try {
                    link_->submit(op);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::MissingBlob || !add) throw;
                    upload(add->sample.blob.digest);
                    link_->submit(op);
                }
            } catch (const Error& e) {
                switch (e.code()) {
                    case ErrorCode::MalformedOp:
                    case ErrorCode::ValidationError:
                    case ErrorCode::MalformedImage:
                    case ErrorCode::BlobUnavailable:
                        // the server will never accept this op
                        replica_.discard_pending(op.op_id);
                        save_pending_locked();
                        continue;
                    default: throw;
                }
            }
            acked_.insert(op.op_id);
            ++submitted;
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::Connectivity) throw;
        drop_link_locked();
    }
    return submitted;
}

void Agent::drain_inbox_locked() {
    std::vector<DatasetOp> batch;
    {
        std::lock_guard lock(inbox_mu_);
        batch.swap(inbox_);
    }
    if (batch.empty()) return;
    const std::size_t pending_before = replica_.pending().size();
    for (const auto& op : batch) apply_remote_locked(op);
    if (replica_.pending().size() != pending_before) save_pending_locked();
    applied_cv_.notify_all();
}

bool Agent::apply_remote_locked(const DatasetOp& op) {
    bool applied = false;
    try {
        applied = replica_.receive(op);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::GapError) throw;
        // out of step with the server; resync from scratch on next connect
        drop_link_locked();
        return false;
    }
    if (!applied) return false;
    if (oplog_) oplog_->append(op);
    acked_.erase(op.op_id);
    if (const auto* del = std::get_if<op::DeleteSample>(&op.kind)) records_.erase(del->sample_id);
    return true;
}

void Agent::apply_loop() {
    for (;;) {
        {
            std::unique_lock lock(inbox_mu_);
            inbox_cv_.wait(lock, [&] { return stopping_ || !inbox_.empty(); });
            if (stopping_) return;
        }
        std::lock_guard lock(mu_);
        drain_inbox_locked();
        if (state_ == ConnectionState::Offline && link_) drop_link_locked();
    }
}

bool Agent::wait_for_seq(std::uint64_t seq, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return applied_cv_.wait_for(lock, timeout, [&] {
        drain_inbox_locked();
        return replica_.applied_seq() >= seq;
    });
}

bool Agent::wait_for_pending(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return applied_cv_.wait_for(lock, timeout, [&] {
        drain_inbox_locked();
        return replica_.pending().empty();
    });
}

DatasetOp Agent::submit_locked(const Intent& in) {
    if (!membership_) throw Error(ErrorCode::ValidationError, "device has not joined a project");
    drain_inbox_locked();
    DatasetOp op = replica_.local_submit(in, device_, *ids_, now());
    save_pending_locked();
    flush_locked();
    return op;
}

LabelId Agent::add_label(const std::string& name) {
    std::lock_guard lock(mu_);
    auto op = submit_locked(intent::AddLabel{name});
    return std::get<op::AddLabel>(op.kind).label_id;
}

LabelId Agent::ensure_label(const std::string& name) {
    std::lock_guard lock(mu_);
    drain_inbox_locked();
    if (const Label* l = replica_.view().find_live_label_by_name(trim(name))) return l->id;
    auto op = submit_locked(intent::AddLabel{name});
    return std::get<op::AddLabel>(op.kind).label_id;
}

void Agent::rename_label(const LabelId& label, const std::string& name) {
    std::lock_guard lock(mu_);
    submit_locked(intent::RenameLabel{label, name});
}

void Agent::delete_label(const LabelId& label) {
    std::lock_guard lock(mu_);
    submit_locked(intent::DeleteLabel{label});
}

SampleId Agent::capture(const LabelId& label, const ImageBlob& image, Split split, std::set<std::string> tags) {
    std::lock_guard lock(mu_);
    const BlobRef ref{image.digest(), image.width(), image.height()};
    if (!blobs_->has(ref.digest)) blobs_->put(ref.digest, encode_ppm(image));
    auto op = submit_locked(intent::AddSample{label, split, ref, std::move(tags)});
    const Sample& s = std::get<op::AddSample>(op.kind).sample;
    emit_locked(event::SampleAdded{s.id, s.label, s.split, s.blob.digest});
    return s.id;
}

void Agent::delete_sample(const SampleId& sample) {
    std::lock_guard lock(mu_);
    submit_locked(intent::DeleteSample{sample});
    records_.erase(sample);
    save_records_locked();
    emit_locked(event::SampleDeleted{sample});
}

void Agent::tag_sample(const SampleId& sample, std::set<std::string> tags) {
    std::lock_guard lock(mu_);
    submit_locked(intent::TagSample{sample, std::move(tags)});
}

void Agent::relabel(const SampleId& sample, const LabelId& label) {
    std::lock_guard lock(mu_);
    drain_inbox_locked();
    const DatasetState& v = replica_.view();
    auto it = v.samples.find(sample);
    if (it == v.samples.end() || it->second.deleted) throw Error(ErrorCode::ValidationError, "no such live sample");
    if (!v.label_live(label)) throw Error(ErrorCode::ValidationError, "target label is not live");
    std::set<std::string> tags = it->second.tags;
    tags.insert("relabeled");
    submit_locked(intent::TagSample{sample, std::move(tags)});
    submit_locked(intent::RelabelSample{sample, label});
    if (auto r = records_.find(sample); r != records_.end()) {
        r->second.user_corrected_label = label;
        save_records_locked();
    }
}

std::vector<std::uint8_t> Agent::blob_locked(const Digest& digest) {
    if (auto bytes = blobs_->get(digest)) return std::move(*bytes);
    if (!link_ || !link_->alive()) throw Error(ErrorCode::BlobUnavailable, "blob " + digest.hex() + " not available offline");
    std::vector<std::uint8_t> bytes;
    try {
        bytes = link_->get_blob(digest);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Connectivity) drop_link_locked();
        throw Error(ErrorCode::BlobUnavailable, "cannot fetch blob " + digest.hex() + ": " + e.detail());
    }
    blobs_->put(digest, bytes);
    return bytes;
}

std::vector<std::uint8_t> Agent::blob(const Digest& digest) {
    std::lock_guard lock(mu_);
    return blob_locked(digest);
}

FeatureVector Agent::features_locked(const Sample& sample) {
    auto it = feature_cache_.find(sample.blob.digest);
    if (it != feature_cache_.end()) return it->second;
    auto bytes = blob_locked(sample.blob.digest);
    FeatureVector f = default_extractor().extract(decode_ppm(bytes));
    feature_cache_.emplace(sample.blob.digest, f);
    return f;
}

TrainedModel Agent::retrain(std::uint64_t seed) {
    std::lock_guard lock(mu_);
    drain_inbox_locked();
    const DatasetState snapshot = replica_.view();
    FeatureProvider provider = [this](const Sample& s) { return features_locked(s); };

    TrainRequest req;
    req.seed = seed;
    req.hyper = options_.hyper;
    req.version = next_model_version_;
    req.device = device_;
    req.now_ms = now();
    TrainedModel m = train(snapshot, provider, req);

    auto recs = evaluate_all(snapshot, m, provider, req.now_ms);
    model_ = m;
    ++next_model_version_;
    records_.clear();
    std::map<LabelId, event::LabelTally> tallies;
    for (auto& r : recs) {
        auto& t = tallies[r.label];
        ++t.total;
        if (r.correct) ++t.correct;
        records_.emplace(r.sample_id, std::move(r));
    }
    if (!options_.state_dir.empty()) save_model(options_.state_dir / "model.coml", m);
    save_records_locked();
    save_device_locked();
    emit_locked(event::ModelTrained{m.version, std::move(tallies)});
    return m;
}

const TrainedModel& Agent::require_model_locked() const {
    if (!model_) throw Error(ErrorCode::InsufficientData, "no model has been trained on this device");
    return *model_;
}

PhotoResult Agent::test_photo(const ImageBlob& image) {
    std::lock_guard lock(mu_);
    const TrainedModel& m = require_model_locked();
    PhotoResult r;
    r.model_version = m.version;
    r.label_order = m.label_order;
    r.confidence = classify(m, image);
    r.predicted = m.label_order[argmax(r.confidence)];
    return r;
}

std::vector<ConfidenceVector> Agent::live_stream(const std::vector<ImageBlob>& images) {
    std::vector<ConfidenceVector> out;
    {
        std::lock_guard lock(mu_);
        require_model_locked();
        emit_locked(event::LiveClassificationStarted{});
    }
    auto last = std::chrono::steady_clock::time_point::min();
    for (const auto& image : images) {
        if (last != std::chrono::steady_clock::time_point::min()) {
            auto elapsed =
                std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - last);
            if (elapsed < kLiveMinInterval) options_.sleep(kLiveMinInterval - elapsed);
        }
        last = std::chrono::steady_clock::now();
        std::lock_guard lock(mu_);
        out.push_back(classify(require_model_locked(), image));
    }
    return out;
}

void Agent::start_live() {
    std::lock_guard lock(mu_);
    require_model_locked();
    last_live_frame_.reset();
    emit_locked(event::LiveClassificationStarted{});
}

std::optional<ConfidenceVector> Agent::live_frame(const ImageBlob& image) {
    std::lock_guard lock(mu_);
    const TrainedModel& m = require_model_locked();
    const auto t = std::chrono::steady_clock::now();
    if (last_live_frame_ && t - *last_live_frame_ < kLiveMinInterval) return std::nullopt;
    last_live_frame_ = t;
    return classify(m, image);
}

LabelId Agent::start_game(std::uint64_t seed) {
    std::lock_guard lock(mu_);
    const TrainedModel& m = require_model_locked();
    game_.emplace(m.label_order, seed, high_score_);
    emit_locked(event::GameStarted{seed});
    return game_->current_target();
}

GameRoundResult Agent::game_round(const ImageBlob& image) {
    std::lock_guard lock(mu_);
    if (!game_ || game_->finished()) throw Error(ErrorCode::ValidationError, "no game round in progress");
    const TrainedModel& m = require_model_locked();
    const LabelId target = game_->current_target();
    auto conf = classify(m, image);
    double c = 0.0;
    auto pos = std::find(m.label_order.begin(), m.label_order.end(), target);
    if (pos != m.label_order.end()) c = conf[static_cast<std::size_t>(pos - m.label_order.begin())];
    game_->score_round(c);
    GameRoundResult r;
    r.round = game_->result().rounds.back();
    r.finished = game_->finished();
    if (!r.finished) r.next_target = game_->current_target();
    return r;
}

GameResult Agent::end_game() {
    std::lock_guard lock(mu_);
    if (!game_) throw Error(ErrorCode::ValidationError, "no game in progress");
    game_->end();
    GameResult r = game_->result();
    game_.reset();
    high_score_ = std::max(high_score_, r.total_score);
    save_device_locked();
    emit_locked(event::GameEnded{r.total_score});
    return r;
}

GameResult Agent::play_game(const std::vector<ImageBlob>& images, std::uint64_t seed) {
    start_game(seed);
    for (const auto& image : images) {
        if (game_round(image).finished) break;
    }
    return end_game();
}

DashboardPage Agent::dashboard(Split split, std::size_t page) const {
    std::lock_guard lock(mu_);
    const DatasetState& v = replica_.view();
    std::vector<DashboardItem> all;
    std::vector<DashboardItem> unevaluated;
    for (const auto& [id, s] : v.samples) {
        if (s.deleted || s.split != split || !v.label_live(s.label)) continue;
        DashboardItem item{s, std::nullopt};
        if (split == Split::Testing) {
            if (auto r = records_.find(id); r != records_.end()) {
                item.record = r->second;
                all.push_back(std::move(item));
                continue;
            }
            unevaluated.push_back(std::move(item));
        } else {
            all.push_back(std::move(item));
        }
    }
    auto newest_first = [](const DashboardItem& a, const DashboardItem& b) {
        if (a.sample.created_at != b.sample.created_at) return a.sample.created_at > b.sample.created_at;
        return a.sample.id < b.sample.id;
    };
    if (split == Split::Testing) {
        std::stable_sort(all.begin(), all.end(), [](const DashboardItem& a, const DashboardItem& b) {
            return dashboard_before(*a.record, *b.record);
        });
        std::stable_sort(unevaluated.begin(), unevaluated.end(), newest_first);
        for (auto& item : unevaluated) all.push_back(std::move(item));
    } else {
        std::stable_sort(all.begin(), all.end(), newest_first);
    }

    DashboardPage out;
    out.split = split;
    out.page = page;
    out.total = all.size();
    out.page_count = (all.size() + kDashboardPageSize - 1) / kDashboardPageSize;
    if (page >= 1 && page <= out.page_count) {
        const std::size_t begin = (page - 1) * kDashboardPageSize;
        const std::size_t end = std::min(all.size(), begin + kDashboardPageSize);
        for (std::size_t i = begin; i < end; ++i) out.items.push_back(std::move(all[i]));
    }
    return out;
}

AgentStats Agent::stats() const {
    std::lock_guard lock(mu_);
    AgentStats s;
    const DatasetState& v = replica_.view();
    s.counts = live_counts(v);
    for (const auto& [id, c] : s.counts) s.names[id] = v.display_name(id);
    s.balance = balance_stats(v);
    std::vector<ClassificationRecord> live_records;
    std::map<LabelId, std::size_t> counts;
    for (const auto& [id, r] : records_) {
        if (!v.sample_live(id)) continue;
        live_records.push_back(r);
        ++counts[r.label];
    }
    if (!live_records.empty()) s.weighted_accuracy = weighted_accuracy(live_records, counts);
    s.retrain = retrain_stats(events_->snapshot());
    s.connection = state_.load();
    s.applied_seq = replica_.applied_seq();
    s.pending = replica_.pending().size();
    s.digest = canonical_digest(replica_);
    if (model_) s.model_version = model_->version;
    s.high_score = high_score_;
    return s;
}

void Agent::export_model(const fs::path& path) const {
    std::lock_guard lock(mu_);
    save_model(path, require_model_locked());
}

std::optional<TrainedModel> Agent::model() const {
    std::lock_guard lock(mu_);
    return model_;
}

std::vector<ClassificationRecord> Agent::records() const {
    std::lock_guard lock(mu_);
    std::vector<ClassificationRecord> out;
    for (const auto& [id, r] : records_) out.push_back(r);
    return out;
}

std::vector<ActivityEvent> Agent::events() const { return events_->snapshot(); }

DatasetState Agent::view() const {
    std::lock_guard lock(mu_);
    return replica_.view();
}

std::uint64_t Agent::applied_seq() const {
    std::lock_guard lock(mu_);
    return replica_.applied_seq();
}

std::size_t Agent::pending_count() const {
    std::lock_guard lock(mu_);
    return replica_.pending().size();
}

Digest Agent::digest() const {
    std::lock_guard lock(mu_);
    return canonical_digest(replica_);
}

double Agent::high_score() const {
    std::lock_guard lock(mu_);
    return high_score_;
}

ordered_json to_json(const ClassificationRecord& r) { return record_to_json(r); }

ordered_json to_json(const PhotoResult& r) {
    ordered_json j;
    j["model_version"] = r.model_version;
    j["predicted"] = r.predicted.str();
    ordered_json order = ordered_json::array();
    for (const auto& l : r.label_order) order.push_back(l.str());
    j["label_order"] = std::move(order);
    j["confidence"] = r.confidence;
    return j;
}

ordered_json to_json(const AgentStats& s) {
    ordered_json labels = ordered_json::array();
    for (const auto& [id, c] : s.counts) {
        ordered_json l;
        l["label"] = id.str();
        if (auto n = s.names.find(id); n != s.names.end()) l["name"] = n->second;
        l["training"] = c.training;
        l["testing"] = c.testing;
        if (auto b = s.balance.find(id); b != s.balance.end()) {
            l["train_pct"] = b->second.train_pct;
            l["test_pct"] = b->second.test_pct;
        }
        labels.push_back(std::move(l));
    }
    ordered_json j;
    j["labels"] = std::move(labels);
    j["weighted_accuracy"] = s.weighted_accuracy ? ordered_json(*s.weighted_accuracy) : ordered_json();
    j["retrain"] = to_json(s.retrain);
    j["connection"] = to_string(s.connection);
    j["applied_seq"] = s.applied_seq;
    j["pending"] = s.pending;
    j["digest"] = s.digest.hex();
    j["model_version"] = s.model_version ? ordered_json(*s.model_version) : ordered_json();
    j["high_score"] = s.high_score;
    return j;
}

ordered_json to_json(const DashboardPage& page, const DatasetState& names) {
    ordered_json items = ordered_json::array();
    for (const auto& item : page.items) {
        ordered_json i;
        i["sample_id"] = item.sample.id.str();
        i["label"] = item.sample.label.str();
        i["label_name"] = names.display_name(item.sample.label);
        i["digest"] = item.sample.blob.digest.hex();
        i["created_at"] = item.sample.created_at;
        i["tags"] = item.sample.tags;
        i["record"] = item.record ? ordered_json(record_to_json(*item.record)) : ordered_json();
        items.push_back(std::move(i));
    }
    ordered_json j;
    j["split"] = to_string(page.split);
    j["page"] = page.page;
    j["page_count"] = page.page_count;
    j["total"] = page.total;
    j["page_size"] = kDashboardPageSize;
    j["items"] = std::move(items);
    return j;
}

}  // namespace coml
