#include <doctest.h>

#include <algorithm>

#include "msrmon/decompose.hpp"
#include "msrmon/engine.hpp"
#include "msrmon/simplemac.hpp"

using namespace msrmon;
namespace sm = msrmon::simplemac;

namespace {

std::string wrap(const std::string& body) { return "theory T\nbegin\nfunctions: fs/2, f/1, g/2\n" + body + "\nend\n"; }

Bytes ascii(std::string_view s) { return to_bytes(s); }

GroundFact gf(std::string symbol, std::vector<std::string_view> args, bool persistent = false) {
  GroundFact f{std::move(symbol), persistent, {}};
  for (auto a : args) f.args.push_back(Value::bytes(ascii(a)));
  return f;
}

Configuration config_of(std::vector<GroundFact> facts) {
  Configuration c;
  for (auto& f : facts) c.state.insert(std::move(f));
  return c;
}

// Rules exactly as written, without decomposition.
RuleSet raw_rules(const std::string& body) {
  SpecFile spec = parse_spec(wrap(body));
  return RuleSet(elaborate(spec).rules, spec.formats);
}

Monitor split_monitor(const std::string& body, std::vector<GroundFact> initial = {}, MonitorOptions o = {}) {
  SpecFile spec = parse_spec(wrap(body));
  for (auto& f : initial) o.initial.insert(std::move(f));
  return Monitor(split_ruleset(elaborate(spec).rules), spec.formats, o);
}

SpecFile simplemac() { return parse_spec_file(std::string(MSRMON_MODELS_DIR) + "/simplemac.spthy"); }

Monitor role_monitor(const std::string& role, MonitorOptions o = {}) {
  SpecFile spec = simplemac();
  return Monitor(split_ruleset(elaborate(spec, select_role(spec, role)).rules), spec.formats, o);
}

bool mentions(const std::vector<std::string>& lines, const std::string& needle) {
  return std::any_of(lines.begin(), lines.end(), [&](const std::string& l) { return l.find(needle) != std::string::npos; });
}

const char* kRuleFunction = "rule R: [ S0(x, y) ] --> [ S1(fs(h(x), h(y))) ]";

}  // namespace

TEST_CASE("apply_rule checks equalities and rewrites the state") {
  RuleSet rs = raw_rules("rule C: [ A(x), B(y) ] --[ Eq(x, y), Ok(x) ]-> [ C(x) ]");
  const auto& r = rs.rules.at(0);
  Configuration c = config_of({gf("A", {"v"}), gf("B", {"v"}), gf("B", {"w"})});

  auto ok = apply_rule(c, r, {{"x", Value::bytes(ascii("v"))}, {"y", Value::bytes(ascii("v"))}}, rs.formats);
  REQUIRE(ok);
  CHECK(ok->state.contains(gf("C", {"v"})));
  CHECK_FALSE(ok->state.contains(gf("A", {"v"})));
  CHECK(ok->state.contains(gf("B", {"w"})));
  REQUIRE(ok->out_trace.size() == 1);
  CHECK(ok->out_trace[0].name == "Ok");

  std::string why;
  auto bad = apply_rule(c, r, {{"x", Value::bytes(ascii("v"))}, {"y", Value::bytes(ascii("w"))}}, rs.formats,
                        nullptr, &why);
  CHECK_FALSE(bad);
  CHECK(why.find("Eq(x, y)") != std::string::npos);

  RuleSet init = raw_rules("rule I: [ ] --> [ K('k'), !P('p') ]");
  auto fresh = apply_rule(Configuration{}, init.rules.at(0), {}, init.formats);
  REQUIRE(fresh);
  CHECK(fresh->state.contains(gf("K", {"k"})));
  CHECK(fresh->state.contains(gf("P", {"p"}, true)));
}

TEST_CASE("handle_triggers continues past a failed candidate") {
  RuleSet rs = raw_rules("rule M: [ T(s, x) ] --[ Trig('h', <x>, r) ]-> [ D(s, r) ]");
  Configuration c = config_of({gf("T", {"s1", "a"}), gf("T", {"s2", "b"})});
  ProgramEvent e{"h", {ascii("b")}, ascii("r")};
  auto next = handle_triggers(c, rs, rs.rules[0], e);
  REQUIRE(next.size() == 1);
  CHECK(next[0].state.contains(gf("D", {"s2", "r"})));
  CHECK(next[0].state.contains(gf("T", {"s1", "a"})));

  ProgramEvent other{"h", {ascii("z")}, ascii("r")};
  CHECK(handle_triggers(c, rs, rs.rules[0], other).empty());
}

TEST_CASE("handle_triggers follows with one epsilon step") {
  RuleSet rs = raw_rules("rule M: [ T(x) ] --[ Trig('h', <x>, r) ]-> [ D(r) ]\n"
                         "rule E: [ D(r) ] --[ Done(r) ]-> [ F(r) ]\n"
                         "rule E2: [ F(r) ] --> [ G(r) ]");
  Configuration c = config_of({gf("T", {"a"})});
  auto next = handle_triggers(c, rs, rs.rules[0], ProgramEvent{"h", {ascii("a")}, ascii("r")});
  REQUIRE(next.size() == 1);
  CHECK(next[0].state.contains(gf("F", {"r"})));
  CHECK_FALSE(next[0].state.contains(gf("G", {"r"})));
}

TEST_CASE("handle_epsilon") {
  RuleSet rs = raw_rules("rule E: [ T(s, x) ] --> [ U(s) ]");
  auto two = handle_epsilon(config_of({gf("T", {"s1", "a"}), gf("T", {"s2", "a"})}), rs);
  CHECK(two.next.size() == 2);
  CHECK_FALSE(two.blocked);
  auto none = handle_epsilon(config_of({gf("Q", {"a"})}), rs);
  CHECK(none.next.empty());
}

TEST_CASE("handle_hints") {
  SpecFile spec = parse_spec(wrap(kRuleFunction));
  RuleSet rs(split_ruleset(elaborate(spec).rules), spec.formats);
  const auto& start = *std::find_if(rs.rules.begin(), rs.rules.end(),
                                    [](const ExtendedRule& r) { return r.part == RulePart::start; });
  Configuration c = config_of({gf("S0", {"vx", "vy"})});

  auto h = handle_hints(c, rs, start, ProgramEvent{"h", {ascii("vx")}, ascii("hx")});
  CHECK_FALSE(h.ill_formed);
  REQUIRE(h.next.size() == 1);
  CHECK_FALSE(h.next[0].state.contains(gf("S0", {"vx", "vy"})));

  auto g = handle_hints(c, rs, start, ProgramEvent{"g", {ascii("vx")}, ascii("gx")});
  CHECK(g.next.empty());

  RuleSet dangling = raw_rules("rule R: [ A(x) ] --[ Hint('h', <x>, y) ]-> [ B(x) ]");
  Diagnostics notes;
  auto d = handle_hints(config_of({gf("A", {"a"})}), dangling, dangling.rules[0],
                        ProgramEvent{"h", {ascii("a")}, ascii("r")}, &notes);
  CHECK(d.next.empty());
  CHECK(mentions(notes, "no rule with that trigger applies"));
}

TEST_CASE("ambiguous hints are a well-formedness violation") {
  // Both hints instantiate to the same pattern: one instantiation.
  RuleSet same = raw_rules("rule R: [ A(x, y) ] --[ Hint('h', <x>, r), Hint('h', <y>, r) ]-> [ B(x, y) ]\n"
                           "rule M: [ B(x, y) ] --[ Trig('h', <x>, r) ]-> [ ]");
  auto one = handle_hints(config_of({gf("A", {"a", "a"})}), same, same.rules[0],
                          ProgramEvent{"h", {ascii("a")}, ascii("r")});
  CHECK_FALSE(one.ill_formed);
  CHECK(one.next.size() == 1);

  RuleSet clash = raw_rules("rule R: [ A(x) ] --[ Hint('h', <x>, r), Hint('h', <y>, q) ]-> [ B(x) ]\n"
                            "rule M: [ B(x) ] --[ Trig('h', <x>, r) ]-> [ ]");
  auto amb = handle_hints(config_of({gf("A", {"a"})}), clash, clash.rules[0],
                          ProgramEvent{"h", {ascii("a")}, ascii("r")});
  REQUIRE(amb.ill_formed);
  CHECK(amb.ill_formed->find("2 hints") != std::string::npos);

  MonitorOptions o;
  o.initial = config_of({gf("A", {"a"})}).state;
  Monitor m(clash, o);
  auto rej = m.process_event(ProgramEvent{"h", {ascii("a")}, ascii("r")});
  REQUIRE(rej);
  CHECK(rej->kind == RejectionKind::ill_formed);
}

TEST_CASE("rule-function accepts both computation orders") {
  Bytes vx = ascii("x"), vy = ascii("y"), hx = ascii("hx"), hy = ascii("hy"), r = ascii("r");
  ProgramEvent ex{"h", {vx}, hx}, ey{"h", {vy}, hy}, efs{"fs", {hx, hy}, r};
  for (const auto& order : {std::vector<ProgramEvent>{ex, ey, efs}, std::vector<ProgramEvent>{ey, ex, efs}}) {
    Monitor m = split_monitor(kRuleFunction, {gf("S0", {"x", "y"})});
    CHECK_FALSE(m.process_trace(order));
    REQUIRE(m.configs().size() == 1);
    CHECK(m.configs()[0].state.contains(gf("S1", {"r"})));
    // No subterm is computed twice.
    CHECK(m.process_event(ex));
  }
  Monitor early = split_monitor(kRuleFunction, {gf("S0", {"x", "y"})});
  auto rej = early.process_event(efs);
  REQUIRE(rej);
  CHECK(rej->event_index == 0);
}

TEST_CASE("empty trace keeps the initial state") {
  Monitor m = split_monitor(kRuleFunction, {gf("S0", {"x", "y"})});
  CHECK_FALSE(m.process_trace({}));
  CHECK(m.output_traces() == std::vector<std::vector<OutputEvent>>{{}});
  CHECK(m.configs()[0].state.contains(gf("S0", {"x", "y"})));
}

TEST_CASE("simplemac server session accepted and corrupted MAC rejected at Eq") {
  sm::TraceOptions t;
  t.sessions = 1;
  auto events = sm::gen_trace(t);
  REQUIRE(events.size() == 2);
  Monitor ok = role_monitor("Server");
  CHECK_FALSE(ok.process_trace(events));
  REQUIRE(ok.configs().size() == 1);
  REQUIRE(ok.configs()[0].out_trace.size() == 1);
  CHECK(ok.configs()[0].out_trace[0].name == "ServerAccept");

  // Pruning: no decomposition facts survive a completed session.
  for (const auto& e : ok.configs()[0].state.linear()) CHECK_FALSE(e.fact->symbol.starts_with("ST_"));

  t.faults = {{0, sm::Fault::corrupt_hmac}};
  auto bad = sm::gen_trace(t);
  Monitor m = role_monitor("Server");
  auto rej = m.process_trace(bad);
  REQUIRE(rej);
  CHECK(rej->event_index == 1);
  CHECK(rej->kind == RejectionKind::protocol);
  CHECK(mentions(rej->explanations, "Eq(h, hp)"));
  CHECK(rej->report().find("rejected event 1") != std::string::npos);
}

TEST_CASE("permissible events") {
  sm::TraceOptions t;
  t.sessions = 1;
  auto events = sm::gen_trace(t);
  Monitor m = role_monitor("Server");
  CHECK_FALSE(m.process_event(events[0]));
  auto perm = m.permissible_events();
  CHECK(mentions(perm, "hmac('secret', "));

  Monitor bare(std::vector<ExtendedRule>{}, FormatRegistry{});
  CHECK(bare.permissible_events().empty());
  Monitor special(special_rules(), FormatRegistry{});
  auto sp = special.permissible_events();
  CHECK(mentions(sp, "receive"));
  CHECK(mentions(sp, "random"));

  auto rej = m.process_event(ProgramEvent{"unknown", {}, {}});
  REQUIRE(rej);
  CHECK(rej->event_index == 1);
  CHECK_FALSE(rej->permissible.empty());
  CHECK(mentions(rej->explanations, "no rule with trigger or hint unknown applies"));
}

TEST_CASE("a rejection leaves the configurations untouched") {
  Monitor m = split_monitor(kRuleFunction, {gf("S0", {"x", "y"})});
  CHECK_FALSE(m.process_event(ProgramEvent{"h", {ascii("x")}, ascii("hx")}));
  auto before = m.configs();
  CHECK(m.process_event(ProgramEvent{"k", {}, {}}));
  CHECK(m.configs() == before);
  CHECK(m.events_processed() == 1);
}

TEST_CASE("likely check rejects a repeated random value at its second occurrence") {
  Monitor m(special_rules(), FormatRegistry{});
  CHECK_FALSE(m.process_event(ProgramEvent{"random", {}, ascii("n1")}));
  CHECK_FALSE(m.process_event(ProgramEvent{"random", {}, ascii("n2")}));
  auto rej = m.process_event(ProgramEvent{"random", {}, ascii("n1")});
  REQUIRE(rej);
  CHECK(rej->kind == RejectionKind::likely);
  CHECK(rej->event_index == 2);

  Monitor rw(special_rules(), FormatRegistry{}, {.mode = MonitorMode::rewrite});
  CHECK_FALSE(rw.process_event(ProgramEvent{"random", {}, ascii("n1")}));
  CHECK_FALSE(rw.process_event(ProgramEvent{"random", {}, ascii("n1")}));
}

TEST_CASE("configuration limit and rewrite determinism") {
  const char* branching = "rule L: [ A(x) ] --[ Trig('step', <>, r) ]-> [ A(r), L(x) ]\n"
                          "rule Rr: [ A(x) ] --[ Trig('step', <>, r) ]-> [ A(r), R(x) ]";
  MonitorOptions small;
  small.max_configs = 4;
  Monitor m = split_monitor(branching, {gf("A", {"a"})}, small);
  CHECK_FALSE(m.process_event(ProgramEvent{"step", {}, ascii("1")}));
  CHECK_FALSE(m.process_event(ProgramEvent{"step", {}, ascii("2")}));
  auto rej = m.process_event(ProgramEvent{"step", {}, ascii("3")});
  REQUIRE(rej);
  CHECK(rej->kind == RejectionKind::config_limit);

  MonitorOptions rw;
  rw.mode = MonitorMode::rewrite;
  Monitor r = split_monitor(branching, {gf("A", {"a"})}, rw);
  auto nd = r.process_event(ProgramEvent{"step", {}, ascii("1")});
  REQUIRE(nd);
  CHECK(nd->kind == RejectionKind::nondeterministic_rewrite);
}

TEST_CASE("serial and parallel processing agree") {
  sm::TraceOptions t;
  t.sessions = 40;
  t.interleave = 8;
  auto events = sm::gen_trace(t);
  Monitor serial = role_monitor("Server");
  Monitor parallel = role_monitor("Server", {.policy = ExecPolicy::parallel});
  for (const auto& e : events) {
    auto a = serial.process_event(e);
    auto b = parallel.process_event(e);
    REQUIRE(a.has_value() == b.has_value());
    CHECK(serial.configs() == parallel.configs());
  }
  CHECK(serial.output_traces() == parallel.output_traces());

  const char* branching = "rule L: [ A(x) ] --[ Trig('step', <>, r) ]-> [ A(r), L(x) ]\n"
                          "rule Rr: [ A(x) ] --[ Trig('step', <>, r) ]-> [ A(r), R(x) ]";
  Monitor bs = split_monitor(branching, {gf("A", {"a"})});
  Monitor bp = split_monitor(branching, {gf("A", {"a"})}, {.policy = ExecPolicy::parallel});
  for (int i = 0; i < 8; ++i) {
    ProgramEvent e{"step", {}, Bytes{static_cast<std::uint8_t>(i)}};
    CHECK_FALSE(bs.process_event(e));
    CHECK_FALSE(bp.process_event(e));
  }
  CHECK(bs.configs().size() == 256);
  CHECK(bs.configs() == bp.configs());
}

TEST_CASE("interleaved sessions are accepted for both roles") {
  for (auto role : {sm::Role::server, sm::Role::client}) {
    sm::TraceOptions t;
    t.sessions = 12;
    t.interleave = 4;
    t.role = role;
    Monitor m = role_monitor(role == sm::Role::server ? "Server" : "Client");
    CHECK_FALSE(m.process_trace(sm::gen_trace(t)));
    CHECK(m.configs().size() == 1);
  }
}

TEST_CASE("rejection is monotone under extension") {
  sm::TraceOptions t;
  t.sessions = 4;
  t.faults = {{1, sm::Fault::truncate_payload}};
  auto events = sm::gen_trace(t);
  Monitor first = role_monitor("Server");
  auto rej = first.process_trace(events);
  REQUIRE(rej);
  std::size_t at = rej->event_index;
  for (std::size_t extra = at + 1; extra <= events.size(); ++extra) {
    Monitor m = role_monitor("Server");
    auto again = m.process_trace(std::span(events).first(extra));
    REQUIRE(again);
    CHECK(again->event_index == at);
  }
}

TEST_CASE("canonicalize merges identical configurations") {
  std::vector<Configuration> cs{config_of({gf("A", {"b"})}), config_of({gf("A", {"a"})}), config_of({gf("A", {"b"})})};
  canonicalize(cs);
  REQUIRE(cs.size() == 2);
  CHECK(cs[0] < cs[1]);
}
