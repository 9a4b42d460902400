#include "sim_cluster.hpp"

#include "coml/errors.hpp"
#include "coml/project.hpp"
#include "coml/sync_service.hpp"
#include "test_support.hpp"

#include <deque>
#include <memory>
#include <mutex>
#include <random>

namespace coml::testing {

namespace {

class Inbox final : public Subscriber {
public:
    void deliver(const DatasetOp& op) override {
        std::lock_guard lock(mu_);
        ops_.push_back(op);
    }

    std::vector<DatasetOp> take(std::size_t max) {
        std::lock_guard lock(mu_);
        std::vector<DatasetOp> out;
        while (!ops_.empty() && out.size() < max) {
            out.push_back(std::move(ops_.front()));
            ops_.pop_front();
        }
        return out;
    }

private:
    std::mutex mu_;
    std::deque<DatasetOp> ops_;
};

struct Client {
    DeviceId device;
    ReplicatedProject replica;
    std::unique_ptr<IdSource> ids;
    std::shared_ptr<Inbox> inbox;
    std::map<Digest, ImageBlob> blobs;
};

class Cluster {
public:
    Cluster(const SimConfig& config) : config_(config), rng_(config.seed) {
        ServiceOptions so;
        so.id_seed = config.seed;
        service_ = std::make_unique<SyncService>(so);
        project_ = service_->create_project("sim");
        for (std::size_t i = 0; i < config.clients; ++i) {
            Client c;
            c.device = device_id(static_cast<std::uint8_t>(i + 1));
            c.replica = ReplicatedProject(project_.id);
            c.ids = std::make_unique<IdSource>(config.seed * 1000003 + i);
            clients_.push_back(std::move(c));
            connect(clients_.back());
        }
    }

    SimOutcome run() {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        while (outcome_.ops_created < config_.min_ops) {
            Client& c = clients_[rng_() % clients_.size()];
            const double r = u(rng_);
            if (r < config_.partition_rate) {
                if (c.inbox) {
                    disconnect(c);
                    ++outcome_.partitions;
                } else {
                    connect(c);
                }
            } else if (r < config_.partition_rate + config_.deliver_rate) {
                if (c.inbox) receive(c, 1 + rng_() % 8);
            } else if (r < config_.partition_rate + config_.deliver_rate + config_.submit_rate) {
                if (c.inbox) submit_pending(c);
            } else {
                random_intent(c);
            }
        }
        heal();

        auto fresh = ReplicatedProject(project_.id);
        for (const auto& op : service_->delta_since(project_.id, project_.token, 0)) fresh.apply(op);
        outcome_.replay_digest = canonical_digest(fresh);
        outcome_.server_digest = service_->project_digest(project_.id);
        outcome_.ops_sequenced = service_->head(project_.id);
        for (const auto& c : clients_) {
            outcome_.replica_digests.push_back(canonical_digest(c.replica));
            outcome_.pending_drained = outcome_.pending_drained && c.replica.pending().empty();
            outcome_.views_match_confirmed =
                outcome_.views_match_confirmed && c.replica.view() == c.replica.confirmed() &&
                c.replica.confirmed() == fresh.confirmed();
        }
        return outcome_;
    }

private:
    void connect(Client& c) {
        auto inbox = std::make_shared<Inbox>();
        auto delta = service_->hello(project_.id, project_.token, c.replica.applied_seq(), inbox);
        for (const auto& op : delta) c.replica.receive(op);
        c.inbox = std::move(inbox);
    }

    void disconnect(Client& c) {
        service_->unsubscribe(project_.id, c.inbox.get());
        c.inbox.reset();
    }

    void receive(Client& c, std::size_t max) {
        for (const auto& op : c.inbox->take(max)) c.replica.receive(op);
    }

    void submit_pending(Client& c) {
        const auto pending = c.replica.pending();
        for (const auto& op : pending) {
            if (const auto* add = std::get_if<op::AddSample>(&op.kind)) {
                const auto& img = c.blobs.at(add->sample.blob.digest);
                const auto bytes = encode_ppm(img);
                service_->put_blob(project_.id, project_.token, bytes);
            }
            auto res = service_->sequence(project_.id, project_.token, op);
            if (res.duplicate) ++outcome_.duplicate_submits;
        }
    }

    void heal() {
        for (auto& c : clients_) {
            if (!c.inbox) connect(c);
        }
        bool busy = true;
        while (busy) {
            busy = false;
            for (auto& c : clients_) {
                submit_pending(c);
                receive(c, SIZE_MAX);
                busy = busy || !c.replica.pending().empty();
            }
        }
        for (auto& c : clients_) receive(c, SIZE_MAX);
    }

    std::optional<LabelId> random_live_label(const DatasetState& v) {
        std::vector<LabelId> live;
        for (const auto& [id, l] : v.labels) {
            if (!l.deleted) live.push_back(id);
        }
        if (live.empty()) return std::nullopt;
        return live[rng_() % live.size()];
    }

    std::optional<SampleId> random_live_sample(const DatasetState& v) {
        std::vector<SampleId> live;
        for (const auto& [id, s] : v.samples) {
            if (!s.deleted) live.push_back(id);
        }
        if (live.empty()) return std::nullopt;
        return live[rng_() % live.size()];
    }

    void random_intent(Client& c) {
        const DatasetState v = c.replica.view();
        const auto label = random_live_label(v);
        const auto sample = random_live_sample(v);
        std::size_t live_labels = 0;
        for (const auto& [id, l] : v.labels) live_labels += l.deleted ? 0 : 1;

        static const char* kNames[] = {"apple", "pear", "plum", "kiwi", "fig", "lime", "date", "yuzu"};
        const auto name = [&] { return std::string(kNames[rng_() % 8]) + std::to_string(rng_() % 4); };
        const std::uint64_t roll = rng_() % 100;
        std::optional<Intent> in;
        if (roll < 8 || !label || (roll < 14 && live_labels < 3)) {
            in = intent::AddLabel{name()};
        } else if (roll < 18) {
            in = intent::RenameLabel{*label, name()};
        } else if (roll < 21) {
            std::size_t doomed = 0;
            for (const auto& [id, s] : v.samples) doomed += (!s.deleted && s.label == *label) ? 1 : 0;
            outcome_.cascaded_samples += doomed;
            ++outcome_.label_deletes;
            in = intent::DeleteLabel{*label};
        } else if (roll < 66) {
            ImageBlob img = numbered_image(++image_counter_ + (config_.seed << 32));
            c.blobs.emplace(img.digest(), img);
            std::set<std::string> tags;
            if (rng_() % 4 == 0) tags.insert("context:" + name());
            in = intent::AddSample{*label, rng_() % 4 == 0 ? Split::Testing : Split::Training, blob_ref(img), tags};
        } else if (roll < 82 && sample) {
            in = intent::DeleteSample{*sample};
        } else if (roll < 92 && sample) {
            in = intent::TagSample{*sample, {"state:" + name()}};
        } else if (sample) {
            in = intent::RelabelSample{*sample, *label};
        }
        if (!in) return;
        try {
            c.replica.local_submit(*in, c.device, *c.ids, static_cast<std::int64_t>(outcome_.ops_created));
            ++outcome_.ops_created;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ValidationError) throw;
        }
    }

    SimConfig config_;
    std::mt19937_64 rng_;
    std::unique_ptr<SyncService> service_;
    CreatedProject project_;
    std::vector<Client> clients_;
    std::uint64_t image_counter_ = 0;
    SimOutcome outcome_;
};

}  // namespace

bool SimOutcome::converged() const {
    if (replica_digests.empty()) return false;
    for (const auto& d : replica_digests) {
        if (d != server_digest) return false;
    }
    return server_digest == replay_digest && pending_drained && views_match_confirmed;
}

SimOutcome run_convergence(const SimConfig& config) { return Cluster(config).run(); }

}  // namespace coml::testing
