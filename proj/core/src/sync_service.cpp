#include "coml/sync_service.hpp"

#include "coml/errors.hpp"
#include "coml/image.hpp"

#include <openssl/crypto.h>

#include <chrono>
#include <unordered_map>

namespace coml {

namespace fs = std::filesystem;
using nlohmann::json;

struct SyncService::ProjectEntry {
    std::mutex mu;
    ProjectId id;
    std::string name;
    std::string token;
    std::int64_t created_at = 0;
    ReplicatedProject replica;
    std::unordered_map<OpId, std::uint64_t> seq_by_op;
    std::unique_ptr<BlobStore> blobs;
    std::unique_ptr<OpLogFile> log;  // null in memory mode
    std::vector<std::shared_ptr<Subscriber>> subscribers;
};

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string new_token() {
    std::array<std::uint8_t, 16> raw{};
    secure_random(raw.data(), raw.size());
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (auto b : raw) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0xf]);
    }
    return out;
}

bool tokens_equal(const std::string& a, const std::string& b) {
    return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

}  // namespace

SyncService::SyncService(ServiceOptions options)
    : options_(std::move(options)),
      ids_(options_.id_seed ? std::make_unique<IdSource>(*options_.id_seed) : std::make_unique<IdSource>()) {
    if (!options_.data_dir.empty()) {
        fs::create_directories(options_.data_dir / "projects");
        load_existing();
    }
}

SyncService::~SyncService() = default;

void SyncService::load_existing() {
    for (const auto& entry : fs::directory_iterator(options_.data_dir / "projects")) {
        if (!entry.is_directory() || !fs::exists(entry.path() / "meta.json")) continue;
        auto bytes = read_file_bytes(entry.path() / "meta.json");
        auto meta = json::parse(bytes.begin(), bytes.end());
        auto p = std::make_unique<ProjectEntry>();
        p->id = id_from_json<ProjectId>(meta, "project_id");
        p->name = meta.at("name").get<std::string>();
        p->token = meta.at("token").get<std::string>();
        p->created_at = meta.at("created_at").get<std::int64_t>();
        p->blobs = std::make_unique<DirBlobStore>(entry.path() / "blobs");
        auto [log, ops] = OpLogFile::open(entry.path() / "oplog.bin");
        p->log = std::move(log);
        p->replica = ReplicatedProject::restore(p->id, ops, {}, 0);
        for (const auto& op : ops) p->seq_by_op.emplace(op.op_id, op.seq);
        projects_.emplace(p->id, std::move(p));
    }
}

CreatedProject SyncService::create_project(const std::string& name) {
    auto p = std::make_unique<ProjectEntry>();
    p->id = ids_->next<ProjectId>();
    p->name = name;
    p->token = new_token();
    p->created_at = now_ms();
    p->replica = ReplicatedProject(p->id);
    if (options_.data_dir.empty()) {
        p->blobs = std::make_unique<MemoryBlobStore>();
    } else {
        fs::path dir = options_.data_dir / "projects" / p->id.str();
        fs::create_directories(dir);
        p->blobs = std::make_unique<DirBlobStore>(dir / "blobs");
        p->log = OpLogFile::open(dir / "oplog.bin").first;
        json meta{{"project_id", p->id.str()}, {"name", name}, {"token", p->token}, {"created_at", p->created_at}};
        // meta.json last: a project directory without it is ignored on load
        write_file_durably(dir / "meta.json", meta.dump(2));
    }
    CreatedProject out{p->id, p->token};
    std::lock_guard lock(mu_);
    projects_.emplace(p->id, std::move(p));
    return out;
}

SyncService::ProjectEntry& SyncService::find(const ProjectId& project) const {
    std::lock_guard lock(mu_);
    auto it = projects_.find(project);
    if (it == projects_.end()) throw Error(ErrorCode::UnknownProject, "no project " + project.str());
    return *it->second;
}

SyncService::ProjectEntry& SyncService::authorize(const ProjectId& project, const std::string& token) const {
    ProjectEntry& p = find(project);
    if (!tokens_equal(p.token, token)) throw Error(ErrorCode::AuthFailure, "invalid token for project " + project.str());
    return p;
}

std::vector<DatasetOp> SyncService::hello(const ProjectId& project, const std::string& token, std::uint64_t last_seq,
                                          std::shared_ptr<Subscriber> sub) {
    ProjectEntry& p = authorize(project, token);
    std::lock_guard lock(p.mu);
    auto delta = p.replica.delta_since(std::min(last_seq, p.replica.applied_seq()));
    if (sub) {
        sub->on_hello(delta);
        p.subscribers.push_back(std::move(sub));
    }
    return delta;
}

void SyncService::unsubscribe(const ProjectId& project, const Subscriber* sub) {
    ProjectEntry* p;
    try {
        p = &find(project);
    } catch (const Error&) {
        return;
    }
    std::lock_guard lock(p->mu);
    std::erase_if(p->subscribers, [&](const auto& s) { return s.get() == sub; });
}

SequenceResult SyncService::sequence(const ProjectId& project, const std::string& token, DatasetOp op) {
    ProjectEntry& p = authorize(project, token);
    std::lock_guard lock(p.mu);
    if (auto it = p.seq_by_op.find(op.op_id); it != p.seq_by_op.end()) return {it->second, true};

    op.seq = 0;
    validate_schema(op);
    if (const auto* add = std::get_if<op::AddSample>(&op.kind)) {
        if (!p.blobs->has(add->sample.blob.digest)) {
            throw Error(ErrorCode::MissingBlob, "blob " + add->sample.blob.digest.hex() + " not uploaded");
        }
    }

    // digests that may lose their last live reference with this op
    std::vector<Digest> candidates;
    const DatasetState& before = p.replica.confirmed();
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, op::DeleteSample> || std::is_same_v<K, op::RelabelSample>) {
                auto it = before.samples.find(k.sample_id);
                if (it != before.samples.end() && !it->second.deleted) candidates.push_back(it->second.blob.digest);
            } else if constexpr (std::is_same_v<K, op::DeleteLabel>) {
                for (const auto& [id, s] : before.samples) {
                    if (!s.deleted && s.label == k.label_id) candidates.push_back(s.blob.digest);
                }
            }
        },
        op.kind);

    op.seq = p.replica.applied_seq() + 1;
    if (p.log) p.log->append(op);  // durable before anyone observes the seq
    p.replica.apply(op);
    p.seq_by_op.emplace(op.op_id, op.seq);
    for (const auto& sub : p.subscribers) sub->deliver(op);
    if (!candidates.empty()) collect_blobs(p, op, candidates);
    return {op.seq, false};
}

void SyncService::collect_blobs(ProjectEntry& p, const DatasetOp&, const std::vector<Digest>& candidates) {
    const DatasetState& after = p.replica.confirmed();
    for (const auto& d : candidates) {
        bool referenced = false;
        for (const auto& [id, s] : after.samples) {
            if (!s.deleted && s.blob.digest == d) {
                referenced = true;
                break;
            }
        }
        if (!referenced) p.blobs->remove(d);
    }
}

Digest SyncService::put_blob(const ProjectId& project, const std::string& token, std::span<const std::uint8_t> bytes) {
    ProjectEntry& p = authorize(project, token);
    ImageBlob image = decode_ppm(bytes);
    if (image.pixels().size() > options_.max_blob_bytes) {
        throw Error(ErrorCode::MalformedImage, "image payload exceeds " + std::to_string(options_.max_blob_bytes) +
                                                   " bytes");
    }
    auto canonical = encode_ppm(image);
    p.blobs->put(image.digest(), canonical);
    return image.digest();
}

std::vector<std::uint8_t> SyncService::get_blob(const ProjectId& project, const std::string& token,
                                                const Digest& digest) {
    ProjectEntry& p = authorize(project, token);
    auto bytes = p.blobs->get(digest);
    if (!bytes) throw Error(ErrorCode::UnknownDigest, "no blob " + digest.hex());
    return std::move(*bytes);
}

std::vector<DatasetOp> SyncService::delta_since(const ProjectId& project, const std::string& token,
                                                std::uint64_t seq) {
    ProjectEntry& p = authorize(project, token);
    std::lock_guard lock(p.mu);
    return p.replica.delta_since(seq);
}

std::uint64_t SyncService::head(const ProjectId& project) const {
    ProjectEntry& p = find(project);
    std::lock_guard lock(p.mu);
    return p.replica.applied_seq();
}

Digest SyncService::project_digest(const ProjectId& project) const {
    ProjectEntry& p = find(project);
    std::lock_guard lock(p.mu);
    return canonical_digest(p.replica);
}

std::vector<ProjectId> SyncService::projects() const {
    std::lock_guard lock(mu_);
    std::vector<ProjectId> out;
    for (const auto& [id, p] : projects_) out.push_back(id);
    return out;
}

std::size_t SyncService::blob_count(const ProjectId& project) const { return find(project).blobs->size(); }

}  // namespace coml
