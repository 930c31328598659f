#pragma once

namespace mstcn {

inline constexpr const char* kVersion = "0.1.0";

// Checkpoint container format version (bump on layout changes).
inline constexpr int kCheckpointFormatVersion = 1;

// Report / manifest schema version.
inline constexpr int kReportSchemaVersion = 1;

}  // namespace mstcn
