#include "coml/game.hpp"

#include "coml/errors.hpp"

#include <algorithm>

namespace coml {

GameSession::GameSession(std::vector<LabelId> labels, std::uint64_t seed, double prior_high_score)
    : labels_(std::move(labels)), seed_(seed), rng_(seed), prior_high_(prior_high_score) {
    if (labels_.empty()) throw Error(ErrorCode::NoLabels, "the game needs at least one label");
    draw_target();
}

void GameSession::draw_target() {
    if (bag_.empty()) {
        auto perm = seeded_permutation(labels_.size(), rng_);
        // popped from the back, so store reversed to ask in permutation order
        for (auto it = perm.rbegin(); it != perm.rend(); ++it) bag_.push_back(labels_[*it]);
    }
    target_ = bag_.back();
    bag_.pop_back();
}

double GameSession::score_round(double target_confidence) {
    if (finished()) throw Error(ErrorCode::ValidationError, "game is over");
    double c = std::clamp(target_confidence, 0.0, 1.0);
    double score = kPointsPerConfidence * c;
    rounds_.push_back(GameRound{target_, c, score});
    total_ += score;
    if (!finished()) draw_target();
    return score;
}

GameResult GameSession::result() const {
    GameResult r;
    r.seed = seed_;
    r.rounds = rounds_;
    r.total_score = total_;
    r.high_score = std::max(prior_high_, total_);
    return r;
}

GameResult run_game(const TrainedModel& model, const RoundFeed& feed, std::uint64_t seed, double prior_high_score) {
    GameSession game(model.label_order, seed, prior_high_score);
    while (!game.finished()) {
        const LabelId target = game.current_target();
        auto confidences = feed(game.result().rounds.size(), target);
        if (!confidences) {
            game.end();
            break;
        }
        auto pos = std::find(model.label_order.begin(), model.label_order.end(), target);
        double c = 0.0;
        auto idx = static_cast<std::size_t>(pos - model.label_order.begin());
        if (pos != model.label_order.end() && idx < confidences->size()) c = (*confidences)[idx];
        game.score_round(c);
    }
    return game.result();
}

RoundFeed image_feed(const TrainedModel& model, std::vector<ImageBlob> images) {
    return [&model, images = std::move(images)](std::size_t round, const LabelId&) -> std::optional<ConfidenceVector> {
        if (round >= images.size()) return std::nullopt;
        return classify(model, images[round]);
    };
}

nlohmann::ordered_json to_json(const GameResult& r) {
    nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
    for (const auto& round : r.rounds) {
        rounds.push_back({{"target", round.target.str()},
                          {"final_confidence", round.final_confidence},
                          {"score", round.score}});
    }
    nlohmann::ordered_json out;
    out["seed"] = r.seed;
    out["rounds"] = std::move(rounds);
    out["total_score"] = r.total_score;
    out["high_score"] = r.high_score;
    return out;
}

}  // namespace coml
