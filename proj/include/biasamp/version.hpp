#pragma once

namespace biasamp {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kRunRecordSchemaVersion = 1;
inline constexpr int kDatasetCacheVersion = 1;
inline constexpr int kCheckpointVersion = 1;

} // namespace biasamp
