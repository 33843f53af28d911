#include "satfusion/dialog_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "satfusion/errors.hpp"

namespace satfusion {

namespace {

const std::set<std::string> kTurnFields{"user_text",  "agent_text", "timestamp",      "intent",
                                        "flags",      "meta_categorical", "meta_numerical"};
const std::set<std::string> kSessionFields{"session_id", "turns",   "target_index",
                                           "feedback",   "label",   "segment",
                                           "session_categorical", "session_numerical"};
const std::set<std::string> kSegmentFields{"intent", "domain", "eligible_for_feedback"};

void check_fields(const Json& j, const std::set<std::string>& allowed, std::string_view what,
                  Strictness strictness) {
  if (!j.is_object()) throw DataError(std::string(what) + " must be a JSON object");
  if (strictness == Strictness::kLenient) return;
  for (const auto& item : j.items()) {
    if (allowed.count(item.key()) == 0) {
      throw DataError("unknown field '" + item.key() + "' in " + std::string(what));
    }
  }
}

template <typename T>
T required(const Json& j, const char* key, std::string_view what) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw DataError("missing field '" + std::string(key) + "' in " + std::string(what));
  }
  try {
    return it->get<T>();
  } catch (const Json::exception& e) {
    throw DataError("bad field '" + std::string(key) + "' in " + std::string(what) + ": " +
                    e.what());
  }
}

template <typename T>
T optional_field(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const Json::exception& e) {
    throw DataError("bad field '" + std::string(key) + "': " + e.what());
  }
}

}  // namespace

Json to_json(const Turn& turn) {
  Json flags = Json::array();
  for (auto f : turn.flags.list()) flags.push_back(std::string(to_string(f)));
  return Json{{"user_text", turn.user_text},
              {"agent_text", turn.agent_text},
              {"timestamp", turn.timestamp},
              {"intent", turn.intent},
              {"flags", flags},
              {"meta_categorical", turn.meta_categorical},
              {"meta_numerical", turn.meta_numerical}};
}

Json to_json(const Session& session) {
  Json turns = Json::array();
  for (const auto& t : session.turns) turns.push_back(to_json(t));
  Json j{{"session_id", session.session_id},
         {"turns", turns},
         {"target_index", session.target_index},
         {"feedback", std::string(to_string(session.feedback))},
         {"label", nullptr},
         {"segment",
          {{"intent", session.segment.intent},
           {"domain", session.segment.domain},
           {"eligible_for_feedback", session.segment.eligible_for_feedback}}},
         {"session_categorical", session.session_categorical},
         {"session_numerical", session.session_numerical}};
  if (session.label) j["label"] = *session.label;
  return j;
}

Json to_json(const MetaSchema& schema) {
  return Json{{"turn_categorical", schema.turn_categorical},
              {"turn_numerical", schema.turn_numerical},
              {"session_categorical", schema.session_categorical},
              {"session_numerical", schema.session_numerical}};
}

MetaSchema schema_from_json(const Json& j) {
  MetaSchema s;
  s.turn_categorical = required<std::vector<std::string>>(j, "turn_categorical", "schema");
  s.turn_numerical = required<std::vector<std::string>>(j, "turn_numerical", "schema");
  s.session_categorical = required<std::vector<std::string>>(j, "session_categorical", "schema");
  s.session_numerical = required<std::vector<std::string>>(j, "session_numerical", "schema");
  return s;
}

Turn turn_from_json(const Json& j, Strictness strictness) {
  check_fields(j, kTurnFields, "turn", strictness);
  Turn t;
  t.user_text = required<std::string>(j, "user_text", "turn");
  t.agent_text = required<std::string>(j, "agent_text", "turn");
  t.timestamp = required<double>(j, "timestamp", "turn");
  t.intent = optional_field<std::string>(j, "intent", "");
  for (const auto& name : optional_field<std::vector<std::string>>(j, "flags", {})) {
    t.flags.set(parse_turn_flag(name));
  }
  t.meta_categorical =
      optional_field<std::map<std::string, std::string>>(j, "meta_categorical", {});
  t.meta_numerical = optional_field<std::map<std::string, double>>(j, "meta_numerical", {});
  validate(t);
  return t;
}

Session session_from_json(const Json& j, Strictness strictness) {
  check_fields(j, kSessionFields, "session", strictness);
  Session s;
  s.session_id = optional_field<std::string>(j, "session_id", "");
  const auto turns = j.find("turns");
  if (turns == j.end() || !turns->is_array()) throw DataError("session needs a 'turns' array");
  for (const auto& tj : *turns) s.turns.push_back(turn_from_json(tj, strictness));
  s.target_index = required<std::size_t>(j, "target_index", "session");
  s.feedback = parse_feedback(optional_field<std::string>(j, "feedback", "NONE_ELICITED"));
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw DataError("session label must be 0, 1 or null");
    s.label = it->get<int>();
  }
  if (auto it = j.find("segment"); it != j.end() && !it->is_null()) {
    check_fields(*it, kSegmentFields, "segment", strictness);
    s.segment.intent = optional_field<std::string>(*it, "intent", "");
    s.segment.domain = optional_field<std::string>(*it, "domain", "");
    s.segment.eligible_for_feedback = optional_field<bool>(*it, "eligible_for_feedback", false);
  }
  s.session_categorical =
      optional_field<std::map<std::string, std::string>>(j, "session_categorical", {});
  s.session_numerical = optional_field<std::map<std::string, double>>(j, "session_numerical", {});
  validate(s);
  return s;
}

void write_sessions(std::ostream& out, const std::vector<Session>& sessions) {
  for (const auto& s : sessions) out << to_json(s).dump() << '\n';
}

std::vector<Session> read_sessions(std::istream& in, Strictness strictness,
                                   const MetaSchema* schema) {
  std::vector<Session> sessions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      sessions.push_back(session_from_json(Json::parse(line), strictness));
      if (schema != nullptr) validate(sessions.back(), schema);
    } catch (const Json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return sessions;
}

void save_sessions(const std::filesystem::path& path, const std::vector<Session>& sessions) {
  std::ostringstream out;
  write_sessions(out, sessions);
  write_file_atomic(path, out.str());
}

std::vector<Session> load_sessions(const std::filesystem::path& path, Strictness strictness,
                                   const MetaSchema* schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path.string() + "'");
  return read_sessions(in, strictness, schema);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw IoError("short write to '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename into '" + path.string() + "': " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace satfusion
