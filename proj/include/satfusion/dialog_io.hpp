#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "satfusion/dialog.hpp"
#include "json.hpp"

namespace satfusion {

using Json = nlohmann::json;

enum class Strictness { kStrict, kLenient };

Json to_json(const Turn& turn);
Json to_json(const Session& session);
Json to_json(const MetaSchema& schema);

/// Strict mode rejects unknown fields; lenient mode ignores them.
Turn turn_from_json(const Json& j, Strictness strictness = Strictness::kStrict);
Session session_from_json(const Json& j, Strictness strictness = Strictness::kStrict);
MetaSchema schema_from_json(const Json& j);

/// JSON Lines, one session per line.
void write_sessions(std::ostream& out, const std::vector<Session>& sessions);
std::vector<Session> read_sessions(std::istream& in, Strictness strictness = Strictness::kStrict,
                                   const MetaSchema* schema = nullptr);

void save_sessions(const std::filesystem::path& path, const std::vector<Session>& sessions);
std::vector<Session> load_sessions(const std::filesystem::path& path,
                                   Strictness strictness = Strictness::kStrict,
                                   const MetaSchema* schema = nullptr);

/// Writes through a temporary sibling and renames, so a failed write never
/// leaves a partial file behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace satfusion
