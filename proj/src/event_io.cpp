#include "msrmon/event_io.hpp"

#include <nlohmann/json.hpp>

namespace msrmon {

using json = nlohmann::ordered_json;

EventParseError::EventParseError(const std::string& msg, std::size_t line)
    : std::runtime_error(line > 0 ? "event line " + std::to_string(line) + ": " + msg : msg), line_(line) {}

namespace {

Bytes hex_field(const json& j, const std::string& what, std::size_t line_no) {
  if (!j.is_string()) throw EventParseError(what + " must be a hex string", line_no);
  auto b = from_hex(j.get<std::string>());
  if (!b) throw EventParseError(what + ": invalid hex \"" + j.get<std::string>() + "\"", line_no);
  return *b;
}

}  // namespace

ProgramEvent parse_event_line(std::string_view line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw EventParseError(std::string("malformed JSON: ") + e.what(), line_no);
  }
  if (!j.is_object()) throw EventParseError("event must be a JSON object", line_no);
  ProgramEvent e;
  auto name = j.find("name");
  if (name == j.end() || !name->is_string() || name->get<std::string>().empty()) {
    throw EventParseError("missing event name", line_no);
  }
  e.name = name->get<std::string>();
  auto args = j.find("args");
  if (args != j.end()) {
    if (!args->is_array()) throw EventParseError("args must be an array", line_no);
    for (std::size_t i = 0; i < args->size(); ++i) {
      e.args.push_back(hex_field((*args)[i], "argument " + std::to_string(i), line_no));
    }
  }
  auto ret = j.find("ret");
  if (ret == j.end()) throw EventParseError("missing ret", line_no);
  e.ret = hex_field(*ret, "ret", line_no);
  return e;
}

std::string format_event_line(const ProgramEvent& e) {
  json j;
  j["name"] = e.name;
  j["args"] = json::array();
  for (const auto& a : e.args) j["args"].push_back(to_hex(a));
  j["ret"] = to_hex(e.ret);
  return j.dump();
}

std::string format_output_line(const OutputEvent& e) {
  auto text = [](const Value& v) { return v.is_bytes() ? to_hex(v.as_bytes()) : "%" + v.as_natural().str(); };
  json j;
  j["name"] = e.name;
  j["args"] = json::array();
  for (const auto& a : e.args) j["args"].push_back(text(a));
  if (e.ret) j["ret"] = text(*e.ret);
  return j.dump();
}

std::vector<ProgramEvent> read_events(std::istream& in) {
  std::vector<ProgramEvent> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_event_line(line, n));
  }
  return out;
}

void EventWriter::write(const ProgramEvent& e) {
  std::string line = format_event_line(e);
  std::lock_guard lock(mu_);
  if (out_) {
    *out_ << line << '\n';
    out_->flush();
  }
  if (record_) events_.push_back(e);
}

std::vector<ProgramEvent> EventWriter::recorded() const {
  std::lock_guard lock(mu_);
  return events_;
}

}  // namespace msrmon
