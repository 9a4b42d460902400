#pragma once

#include "coml/trainer.hpp"

#include <filesystem>
#include <string>

namespace coml {

/// Model file: one line of JSON header
///   {"format":"coml-model","version":..,"device":..,"label_order":[..],
///    "extractor_id":..,"shapes":{"W":[k,d],"b":[k]},"trained_at":..,
///    "train_sample_count":..}
/// then one line of base64 holding little-endian float64 W (row-major)
/// followed by b.
std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::string_view text);

void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace coml
