#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "yieldnet/predictor.hpp"

namespace yieldnet {

// Container layout:
//   "YNET1" | u8 type tag | payload
// Integers are little-endian u64, reals little-endian IEEE-754 binary64,
// strings and arrays are prefixed with a u64 count. Type tags: 1 cnn-rnn,
// 2 dfnn, 3 lasso, 4 random forest, 5 average. Network parameters follow
// ParameterSet order, each as name, rank, extents, values.

inline constexpr std::string_view kModelMagic = "YNET1";

std::string serialize_model(const TrainedModel& model);
/// Throws IoError on a bad magic, unknown tag, truncation or trailing bytes.
TrainedModel deserialize_model(std::string_view bytes);

void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace yieldnet
