#pragma once

#include "coml/project.hpp"
#include "coml/storage.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace coml {

inline constexpr std::size_t kDefaultMaxBlobBytes = 50'331'648;  // 4096 * 4096 * 3

struct ServiceOptions {
    /// Empty path keeps everything in memory (used by simulations).
    std::filesystem::path data_dir;
    /// Upper bound on a blob's pixel payload (3 * width * height).
    std::size_t max_blob_bytes = kDefaultMaxBlobBytes;
    /// Seeds project ids for reproducible runs; invite tokens always come
    /// from the OS CSPRNG.
    std::optional<std::uint64_t> id_seed;
};

/// Receives sequenced ops in order. deliver() is called with the project
/// lock held and must not block.
class Subscriber {
public:
    virtual ~Subscriber() = default;
    virtual void deliver(const DatasetOp& op) = 0;
    /// Called once from hello(), under the same lock that registers the
    /// subscriber, with the catch-up ops; later deliver() calls follow it.
    virtual void on_hello(const std::vector<DatasetOp>& delta) { (void)delta; }
};

struct CreatedProject {
    ProjectId id;
    std::string token;  // 32 lowercase hex digits
};

struct SequenceResult {
    std::uint64_t seq = 0;
    bool duplicate = false;  // op_id was already sequenced; seq is the original
};

/// The sequencer: per-project total order, write-ahead persistence,
/// content-addressed blobs, and fan-out to subscribers. Transport-free; the
/// TCP server and in-process simulations both drive it.
class SyncService {
public:
    explicit SyncService(ServiceOptions options = {});
    ~SyncService();
    SyncService(const SyncService&) = delete;
    SyncService& operator=(const SyncService&) = delete;

    CreatedProject create_project(const std::string& name);

    /// Authenticates, registers `sub` for future ops and returns the ops with
    /// seq > last_seq. Registration and the delta are taken atomically, so
    /// the subscriber sees every op exactly once.
    std::vector<DatasetOp> hello(const ProjectId& project, const std::string& token, std::uint64_t last_seq,
                                 std::shared_ptr<Subscriber> sub);
    void unsubscribe(const ProjectId& project, const Subscriber* sub);

    /// Assigns the next seq, persists (fsync) and broadcasts. Resubmitting a
    /// sequenced op_id returns the original seq with duplicate=true.
    /// Throws UnknownProject, AuthFailure, MalformedOp, MissingBlob.
    SequenceResult sequence(const ProjectId& project, const std::string& token, DatasetOp op);

    /// Validates the PPM, stores its canonical bytes, returns the digest.
    Digest put_blob(const ProjectId& project, const std::string& token, std::span<const std::uint8_t> bytes);
    std::vector<std::uint8_t> get_blob(const ProjectId& project, const std::string& token, const Digest& digest);

    std::vector<DatasetOp> delta_since(const ProjectId& project, const std::string& token, std::uint64_t seq);

    std::uint64_t head(const ProjectId& project) const;
    Digest project_digest(const ProjectId& project) const;
    std::vector<ProjectId> projects() const;
    std::size_t blob_count(const ProjectId& project) const;
    const ServiceOptions& options() const { return options_; }

private:
    struct ProjectEntry;
    ProjectEntry& authorize(const ProjectId& project, const std::string& token) const;
    ProjectEntry& find(const ProjectId& project) const;
    void load_existing();
    void collect_blobs(ProjectEntry& p, const DatasetOp& op, const std::vector<Digest>& candidates);

    ServiceOptions options_;
    std::unique_ptr<IdSource> ids_;
    mutable std::mutex mu_;
    std::map<ProjectId, std::unique_ptr<ProjectEntry>> projects_;
};

}  // namespace coml
