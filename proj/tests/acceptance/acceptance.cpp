#include "coml/evaluation.hpp"
#include "coml/features.hpp"
#include "coml/game.hpp"
#include "coml/synthetic.hpp"
#include "coml/telemetry.hpp"
#include "coml/trainer.hpp"
#include "crash_harness.hpp"
#include "gradient_check.hpp"
#include "sim_cluster.hpp"
#include "test_support.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace coml;
using namespace coml::testing;

namespace {

struct Verdict {
    bool ok = false;
    std::string detail;
};

struct Criterion {
    int number;
    std::string name;
    double budget_s;
    std::function<Verdict()> check;
};

std::string fixed(double v, int prec) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(prec);
    s << v;
    return s.str();
}

std::vector<LabelId> make_labels(std::size_t n) {
    std::vector<LabelId> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(label_id(static_cast<std::uint8_t>(i + 1)));
    return out;
}

Verdict game_scoring() {
    const auto labels = make_labels(4);
    TrainedModel m;
    m.label_order = labels;
    m.extractor_id = HistPoolExtractor::kId;
    m.params = SoftmaxParams(labels.size(), HistPoolExtractor::kDim);
    auto feed_of = [&](std::vector<double> conf) -> RoundFeed {
        return [&m, conf](std::size_t round, const LabelId& target) -> std::optional<ConfidenceVector> {
            if (round >= conf.size()) return std::nullopt;
            ConfidenceVector v(m.label_order.size(), 0.0);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = m.label_order[i] == target ? conf[round] : 0.0;
            return v;
        };
    };
    GameSession g(labels, 1);
    const double single = g.score_round(0.75);
    const double total = run_game(m, feed_of({0.2, 0.5, 0.9}), 2).total_score;
    const std::size_t rounds = run_game(m, feed_of(std::vector<double>(50, 0.5)), 3).rounds.size();
    return {single == 7.5 && total == 16.0 && rounds == 18 && GameSession::kMaxRounds == 18,
            "0.75 -> " + fixed(single, 1) + ", [0.2,0.5,0.9] -> " + fixed(total, 1) + ", max rounds " +
                std::to_string(rounds)};
}

Verdict weighted_accuracy_check() {
    std::mt19937_64 rng(1001);
    const auto labels = make_labels(8);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto rs = random_records(rng, 1 + rng() % 250, std::vector<LabelId>(labels.begin(), labels.begin() + 1 + rng() % 8));
        const auto counts = counts_of(rs);
        std::size_t correct = 0;
        for (const auto& r : rs) correct += r.correct ? 1 : 0;
        const double direct = static_cast<double>(correct) / static_cast<double>(rs.size());
        worst = std::max(worst, std::abs(weighted_accuracy(rs, counts) - direct));
    }
    // four labels, 174 test images, 162 correct
    const std::vector<std::pair<std::size_t, std::size_t>> per_label{{50, 47}, {44, 42}, {41, 36}, {39, 37}};
    std::vector<ClassificationRecord> rs;
    std::uint32_t n = 0;
    for (std::size_t l = 0; l < per_label.size(); ++l) {
        for (std::size_t i = 0; i < per_label[l].first; ++i) {
            ClassificationRecord r;
            r.sample_id = sample_id(++n);
            r.label = labels[l];
            r.correct = i < per_label[l].second;
            r.predicted = r.correct ? r.label : labels[(l + 1) % 4];
            rs.push_back(r);
        }
    }
    const double plants = weighted_accuracy(rs, counts_of(rs));
    const std::string shown = fixed(plants, 2);
    char worst_text[32];
    std::snprintf(worst_text, sizeof worst_text, "%.1e", worst);
    return {worst <= 1e-12 && shown == "0.93",
            "max |weighted - correct/N| over 1000 sets " + std::string(worst_text) + ", 162/174 -> " + shown};
}

Verdict convergence() {
    std::size_t converged = 0;
    std::size_t min_ops = SIZE_MAX;
    std::size_t deletes = 0;
    std::size_t cascaded = 0;
    std::size_t partitions = 0;
    const std::size_t seeds = 100;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        SimConfig cfg;
        cfg.seed = seed;
        cfg.clients = 5;
        cfg.min_ops = 1000;
        const auto o = run_convergence(cfg);
        converged += o.converged() ? 1 : 0;
        min_ops = std::min(min_ops, o.ops_created);
        deletes += o.label_deletes;
        cascaded += o.cascaded_samples;
        partitions += o.partitions;
    }
    return {converged == seeds && min_ops >= 1000 && deletes > 0 && cascaded > 0 && partitions > 0,
            std::to_string(converged) + "/" + std::to_string(seeds) + " seeds identical, >= " + std::to_string(min_ops) +
                " ops each, " + std::to_string(deletes) + " label deletes cascading to " + std::to_string(cascaded) +
                " samples, " + std::to_string(partitions) + " partitions"};
}

Verdict crash_durability() {
#ifdef COML_CLI_PATH
    const auto o = run_crash_script(COML_CLI_PATH, 200, 4242);
    if (!o.error.empty()) return {false, o.error};
    return {o.ok() && o.ops_acked == 200,
            std::to_string(o.ops_acked) + " acked ops, " + std::to_string(o.restarts_with_full_log) + "/" +
                std::to_string(o.restarts) + " restarts kept every ack, digest " +
                (o.crashed_digest == o.baseline_digest ? "matches" : "differs from") + " the uninterrupted run"};
#else
    return {false, "coml CLI not built"};
#endif
}

/// Colored swatch dataset with one label per color.
struct Swatches {
    DatasetState state;
    std::map<Digest, ImageBlob> images;
    FeatureProvider features() const {
        return [this](const Sample& s) { return extract_features(images.at(s.blob.digest)); };
    }
};

Swatches swatches(std::size_t labels, std::size_t per_label, std::uint32_t side, std::uint8_t jitter) {
    Swatches out;
    std::uint32_t n = 0;
    for (std::size_t l = 0; l < labels; ++l) {
        const LabelId id = label_id(static_cast<std::uint8_t>(l + 1));
        const std::string name = "label" + std::to_string(l);
        out.state.labels[id] = Label{id, name, {}, false};
        for (std::size_t i = 0; i < per_label; ++i) {
            SyntheticSpec spec;
            spec.width = spec.height = side;
            spec.color = color_for_name(name);
            spec.jitter = jitter;
            auto img = synthetic_image(spec, ++n);
            Sample s;
            s.id = sample_id(n);
            s.label = id;
            s.blob = blob_ref(img);
            out.images.emplace(img.digest(), std::move(img));
            out.state.samples[s.id] = s;
        }
    }
    return out;
}

Verdict trainer() {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        auto p = random_gradient_problem(rng);
        worst = std::max(worst, check_gradient(p.params, p.data, p.l2, 1e-5).max_relative_error);
    }
    auto s = swatches(3, 20, 16, 40);
    TrainRequest req;
    req.seed = 9;
    const auto a = train(s.state, s.features(), req);
    const auto b = train(s.state, s.features(), req);
    const bool identical = a.params == b.params;

    auto sep = swatches(2, 30, 16, 20);
    const auto m = train(sep.state, sep.features(), req);
    std::size_t right = 0;
    for (const auto& [id, x] : sep.state.samples) {
        right += m.label_order[argmax(classify(m, sep.images.at(x.blob.digest)))] == x.label ? 1 : 0;
    }
    char worst_text[32];
    std::snprintf(worst_text, sizeof worst_text, "%.2e", worst);
    return {worst < 1e-4 && identical && right == sep.state.samples.size(),
            "max FD rel err " + std::string(worst_text) + " over 50, seeded weights " +
                (identical ? "identical" : "differ") + ", separable train acc " + std::to_string(right) + "/" +
                std::to_string(sep.state.samples.size())};
}

Verdict training_budget() {
    auto s = swatches(6, 334, 64, 60);
    while (s.state.samples.size() > 2000) s.state.samples.erase(std::prev(s.state.samples.end()));
    const auto t0 = std::chrono::steady_clock::now();
    TrainRequest req;
    const auto m = train(s.state, s.features(), req);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const Hyperparams defaults;
    return {secs < 10.0 && m.train_sample_count == 2000 && m.label_order.size() == 6,
            std::to_string(m.train_sample_count) + " images 64x64, 6 labels, " + std::to_string(defaults.epochs) +
                " epochs: extract+train " + fixed(secs, 2) + "s < 10s"};
}

Verdict dashboard_ordering() {
    std::mt19937_64 rng(707);
    const auto labels = make_labels(5);
    std::size_t sets = 0;
    std::size_t violations = 0;
    for (int trial = 0; trial < 500; ++trial) {
        auto rs = random_records(rng, rng() % 120, labels);
        const auto base = dashboard_order(rs);
        bool seen_correct = false;
        for (const auto& r : base) {
            if (r.correct) seen_correct = true;
            else if (seen_correct) ++violations;
        }
        for (int k = 0; k < 5; ++k) {
            std::shuffle(rs.begin(), rs.end(), rng);
            if (dashboard_order(rs) != base) ++violations;
        }
        ++sets;
    }
    return {violations == 0, std::to_string(sets) + " record sets x 5 permutations, " + std::to_string(violations) +
                                 " violations"};
}

Verdict telemetry_replay() {
    const auto log = read_event_log(fixture("telemetry/session.ndjson"));
    std::ifstream in(fixture("telemetry/expected.json"));
    const auto expected = nlohmann::json::parse(in);
    const auto stats = retrain_stats(log);
    bool counts_ok = stats.per_device_totals.size() == expected["retrains"].size();
    bool has_13 = false;
    std::string shown;
    for (const auto& [dev, n] : expected["retrains"].items()) {
        const auto id = DeviceId::parse(dev);
        const auto it = id ? stats.per_device_totals.find(*id) : stats.per_device_totals.end();
        const std::size_t got = it == stats.per_device_totals.end() ? 0 : it->second;
        counts_ok = counts_ok && got == n.get<std::size_t>();
        has_13 = has_13 || got == 13;
        shown += (shown.empty() ? "" : "/") + std::to_string(got);
    }
    std::size_t rows = 0;
    std::size_t mismatched = 0;
    for (const auto& w : expected["windows"]) {
        const TimelineWindow win{w["start_ms"].get<std::int64_t>(), w["end_ms"].get<std::int64_t>()};
        const auto t = timeline_export(log, win);
        for (const auto& row : t.rows) {
            std::size_t dots = 0;
            std::size_t trains = 0;
            for (const auto& e : log) {
                if (e.device != row.device || e.ts < win.start_ms || e.ts > win.end_ms) continue;
                if (std::holds_alternative<event::ModelTrained>(e.kind)) ++trains;
                else ++dots;
            }
            ++rows;
            if (row.dots.size() != dots || row.train_markers.size() != trains) ++mismatched;
        }
    }
    return {counts_ok && has_13 && mismatched == 0 && rows > 0,
            "retrains " + shown + " as expected, " + std::to_string(rows - mismatched) + "/" + std::to_string(rows) +
                " timeline rows match raw counts"};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "game scoring", 1.0, game_scoring},
        {2, "weighted accuracy", 5.0, weighted_accuracy_check},
        {3, "convergence", 60.0, convergence},
        {4, "crash durability", 60.0, crash_durability},
        {5, "trainer", 30.0, trainer},
        {6, "training budget", 10.0, training_budget},
        {7, "dashboard ordering", 5.0, dashboard_ordering},
        {8, "telemetry replay", 5.0, telemetry_replay},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool ok = v.ok && secs < c.budget_s;
        failed += ok ? 0 : 1;
        std::cout << (ok ? "PASS" : "FAIL") << "  [" << c.number << "] " << c.name << ": " << v.detail << " ("
                  << fixed(secs, 3) << "s, limit " << fixed(c.budget_s, 0) << "s)" << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
