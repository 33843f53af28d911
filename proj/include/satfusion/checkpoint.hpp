#pragma once

#include <filesystem>
#include <string>

#include "satfusion/autodiff.hpp"
#include "satfusion/dialog_io.hpp"

namespace satfusion {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Binary checkpoint: magic, format version, a JSON header (layer specs,
/// vocabulary hash, model metadata), then every named parameter array as raw
/// IEEE-754 doubles, then an FNV-1a checksum of the payload. Round trips are
/// bit-exact.
struct Checkpoint {
  Json header;
  ParameterSet params;
};

std::string serialize_checkpoint(const Json& header, const ParameterSet& params);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Json& header,
                     const ParameterSet& params);
/// Throws IoError on a bad magic, unsupported version, truncation or checksum
/// mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace satfusion
