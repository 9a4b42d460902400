#pragma once

#include "coml/evaluation.hpp"
#include "coml/game.hpp"
#include "coml/net.hpp"
#include "coml/project.hpp"
#include "coml/server_link.hpp"
#include "coml/storage.hpp"
#include "coml/telemetry.hpp"
#include "coml/trainer.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

namespace coml {

enum class ConnectionState { Offline, Syncing, Live };
std::string_view to_string(ConnectionState state);

inline constexpr std::size_t kDashboardPageSize = 25;
inline constexpr std::chrono::milliseconds kLiveMinInterval{100};  // at most 10 classifications per second

struct Membership {
    net::Endpoint server;
    ProjectId project;
    std::string token;
};

struct AgentOptions {
    /// Empty keeps all state in memory.
    std::filesystem::path state_dir;
    /// Seeds device, label, sample, op and event ids. Unset uses the OS CSPRNG.
    std::optional<std::uint64_t> id_seed;
    /// Wall clock in ms; defaults to the system clock.
    std::function<std::int64_t()> clock;
    /// Blocks between live classifications; defaults to a real sleep.
    std::function<void(std::chrono::milliseconds)> sleep;
    std::chrono::milliseconds timeout{10000};
    Hyperparams hyper;
};

struct PhotoResult {
    std::uint64_t model_version = 0;
    LabelId predicted;
    std::vector<LabelId> label_order;
    ConfidenceVector confidence;
};

struct DashboardItem {
    Sample sample;
    std::optional<ClassificationRecord> record;  // testing split only
};

struct DashboardPage {
    Split split = Split::Training;
    std::size_t page = 1;  // one-based
    std::size_t page_count = 0;
    std::size_t total = 0;
    std::vector<DashboardItem> items;
};

struct GameRoundResult {
    GameRound round;
    bool finished = false;
    std::optional<LabelId> next_target;
};

struct AgentStats {
    std::map<LabelId, std::string> names;  // display names of live labels
    std::map<LabelId, SplitCounts> counts;
    std::map<LabelId, LabelBalance> balance;
    std::optional<double> weighted_accuracy;
    RetrainStats retrain;
    ConnectionState connection = ConnectionState::Offline;
    std::uint64_t applied_seq = 0;
    std::size_t pending = 0;
    Digest digest;
    std::optional<std::uint64_t> model_version;
    double high_score = 0.0;
};

/// One device: a project replica, local blobs, the local model, evaluation
/// records, telemetry and game state.
///
/// Local mutations become ops on the replica and are pushed to the server
/// while connected; offline they queue and flush on reconnect. Sequenced ops
/// from the server are applied by a background thread.
class Agent {
public:
    explicit Agent(AgentOptions options = {});
    ~Agent();
    Agent(const Agent&) = delete;
    Agent& operator=(const Agent&) = delete;

    const DeviceId& device() const { return device_; }
    std::optional<Membership> membership() const;
    ConnectionState connection() const { return state_.load(); }

    /// Binds this device to a project and connects. Throws ValidationError
    /// when already bound to a different project.
    void join(const Membership& membership);
    /// Connects with the stored membership: HELLO, apply the delta, flush
    /// queued ops. Throws Connectivity or the server's error.
    void connect();
    void disconnect();
    /// Pushes queued ops if connected. Returns the number submitted.
    std::size_t flush();
    /// Waits until every op up to `seq` has been applied locally.
    bool wait_for_seq(std::uint64_t seq, std::chrono::milliseconds timeout);
    /// Waits until no local op is awaiting its commit.
    bool wait_for_pending(std::chrono::milliseconds timeout);

    LabelId add_label(const std::string& name);
    /// Live label with this name, created if absent.
    LabelId ensure_label(const std::string& name);
    void rename_label(const LabelId& label, const std::string& name);
    void delete_label(const LabelId& label);
    SampleId capture(const LabelId& label, const ImageBlob& image, Split split, std::set<std::string> tags = {});
    void delete_sample(const SampleId& sample);
    void tag_sample(const SampleId& sample, std::set<std::string> tags);
    /// Corrects a sample's label: a TagSample marking it "relabeled" and a
    /// RelabelSample, both sequenced like any other edit.
    void relabel(const SampleId& sample, const LabelId& label);

    /// Trains a new model on the current view and re-evaluates every test
    /// sample. Throws InsufficientData, BlobUnavailable.
    TrainedModel retrain(std::uint64_t seed);
    PhotoResult test_photo(const ImageBlob& image);
    /// Classifies each image in turn, at most 10 per second.
    std::vector<ConfidenceVector> live_stream(const std::vector<ImageBlob>& images);
    /// Interactive live mode: start_live() logs the session; live_frame()
    /// classifies a frame, or drops it (nullopt) when it arrives within
    /// 100 ms of the last classified one.
    void start_live();
    std::optional<ConfidenceVector> live_frame(const ImageBlob& image);

    LabelId start_game(std::uint64_t seed);
    GameRoundResult game_round(const ImageBlob& image);
    GameResult end_game();
    /// Full headless game fed by `images`, one per round.
    GameResult play_game(const std::vector<ImageBlob>& images, std::uint64_t seed);

    /// One-based page of 25 items; pages past the end are empty.
    DashboardPage dashboard(Split split, std::size_t page) const;
    AgentStats stats() const;
    void export_model(const std::filesystem::path& path) const;
    /// Canonical PPM bytes from the local store, else fetched from the server.
    std::vector<std::uint8_t> blob(const Digest& digest);

    std::optional<TrainedModel> model() const;
    std::vector<ClassificationRecord> records() const;
    std::vector<ActivityEvent> events() const;
    DatasetState view() const;
    std::uint64_t applied_seq() const;
    std::size_t pending_count() const;
    Digest digest() const;
    double high_score() const;

private:
    std::int64_t now() const;
    void load_state();
    void save_device_locked() const;
    void save_pending_locked() const;
    void save_records_locked() const;
    void emit_locked(EventKind kind);
    DatasetOp submit_locked(const Intent& in);
    void drain_inbox_locked();
    bool apply_remote_locked(const DatasetOp& op);
    std::size_t flush_locked();
    void drop_link_locked();
    void apply_loop();
    FeatureVector features_locked(const Sample& sample);
    std::vector<std::uint8_t> blob_locked(const Digest& digest);
    const TrainedModel& require_model_locked() const;

    AgentOptions options_;
    std::unique_ptr<IdSource> ids_;
    DeviceId device_;

    mutable std::mutex mu_;
    std::condition_variable applied_cv_;
    std::optional<Membership> membership_;
    ReplicatedProject replica_;
    std::unique_ptr<BlobStore> blobs_;
    std::unique_ptr<OpLogFile> oplog_;
    std::optional<TrainedModel> model_;
    std::uint64_t next_model_version_ = 1;
    std::map<SampleId, ClassificationRecord> records_;
    std::unique_ptr<EventLog> events_;
    double high_score_ = 0.0;
    std::map<Digest, FeatureVector> feature_cache_;
    std::set<OpId> acked_;
    std::set<Digest> uploaded_;
    std::optional<GameSession> game_;
    std::optional<std::chrono::steady_clock::time_point> last_live_frame_;

    std::unique_ptr<ServerLink> link_;
    std::atomic<ConnectionState> state_{ConnectionState::Offline};

    std::mutex inbox_mu_;
    std::condition_variable inbox_cv_;
    std::vector<DatasetOp> inbox_;
    bool stopping_ = false;
    std::thread apply_thread_;
};

nlohmann::ordered_json to_json(const AgentStats& stats);
nlohmann::ordered_json to_json(const DashboardPage& page, const DatasetState& names);
nlohmann::ordered_json to_json(const ClassificationRecord& record);
nlohmann::ordered_json to_json(const PhotoResult& result);

}  // namespace coml
