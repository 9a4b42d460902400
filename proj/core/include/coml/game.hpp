#pragma once

#include "coml/trainer.hpp"

#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <vector>

namespace coml {

struct GameRound {
    LabelId target;
    double final_confidence = 0.0;
    double score = 0.0;
};

struct GameResult {
    std::uint64_t seed = 0;
    std::vector<GameRound> rounds;
    double total_score = 0.0;
    double high_score = 0.0;
};

/// Timed evaluation game: 5 s rounds inside a 90 s limit, each scoring
/// 10 x the model's end-of-round confidence in the target label.
///
/// Targets come from a seeded shuffle of the label set; no label repeats
/// until every label has been asked once. Time is virtual: each scored
/// round consumes one round length.
class GameSession {
public:
    static constexpr int kTimeLimitSeconds = 90;
    static constexpr int kRoundSeconds = 5;
    static constexpr std::size_t kMaxRounds = kTimeLimitSeconds / kRoundSeconds;
    static constexpr double kPointsPerConfidence = 10.0;

    /// Throws NoLabels if `labels` is empty.
    GameSession(std::vector<LabelId> labels, std::uint64_t seed, double prior_high_score = 0.0);

    bool finished() const { return finished_ || rounds_.size() >= kMaxRounds; }
    const LabelId& current_target() const { return target_; }
    int elapsed_seconds() const { return static_cast<int>(rounds_.size()) * kRoundSeconds; }

    /// Scores the current round with the confidence assigned to the target at
    /// round end (clamped to [0,1]) and draws the next target.
    double score_round(double target_confidence);

    /// Ends early, e.g. when the image feed runs out.
    void end() { finished_ = true; }

    GameResult result() const;

private:
    void draw_target();

    std::vector<LabelId> labels_;
    std::uint64_t seed_;
    std::mt19937_64 rng_;
    std::vector<LabelId> bag_;
    LabelId target_;
    std::vector<GameRound> rounds_;
    double total_ = 0.0;
    double prior_high_;
    bool finished_ = false;
};

/// Per round: the confidence vector (aligned with the model's label_order)
/// observed at round end, or nullopt when the feed has ended.
using RoundFeed = std::function<std::optional<ConfidenceVector>(std::size_t round, const LabelId& target)>;

/// Plays a full headless game over the model's labels.
GameResult run_game(const TrainedModel& model, const RoundFeed& feed, std::uint64_t seed, double prior_high_score = 0.0);

/// Feed that classifies the given images in order, one per round.
RoundFeed image_feed(const TrainedModel& model, std::vector<ImageBlob> images);

nlohmann::ordered_json to_json(const GameResult& result);

}  // namespace coml
