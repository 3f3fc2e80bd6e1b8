#include <doctest.h>

#include <random>

#include "msrmon/decompose.hpp"
#include "msrmon/rewrite.hpp"

using namespace msrmon;

namespace {

SpecFile blake2s() { return parse_spec_file(std::string(MSRMON_MODELS_DIR) + "/blake2s_layer.spthy"); }

Bytes ascii(std::string_view s) { return to_bytes(s); }

Bytes cat(Bytes a, const Bytes& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Emitted events, or none when the layer rejects.
std::optional<std::vector<ProgramEvent>> feed(RewriteLayer& layer, const std::vector<ProgramEvent>& events) {
  std::vector<ProgramEvent> out;
  for (const auto& e : events) {
    auto r = layer.step(e);
    if (std::holds_alternative<Rejection>(r)) return std::nullopt;
    for (auto& p : std::get<std::vector<ProgramEvent>>(r)) out.push_back(std::move(p));
  }
  return out;
}

ProgramEvent new256(const Bytes& d) { return {"New256", {}, d}; }
ProgramEvent write(const Bytes& d, const Bytes& x) { return {"Write", {d, x}, {}}; }
ProgramEvent sum(const Bytes& d, const Bytes& h) { return {"Sum", {d}, h}; }
ProgramEvent reset(const Bytes& d) { return {"Reset", {d}, {}}; }

}  // namespace

TEST_CASE("New, two Writes and Sum emit one hash event") {
  RewriteLayer layer(blake2s());
  Bytes d = ascii("d"), x1 = ascii("ab"), x2 = ascii("cde"), h = ascii("H");
  auto out = feed(layer, {new256(d), write(d, x1), write(d, x2), sum(d, h)});
  REQUIRE(out);
  REQUIRE(out->size() == 1);
  CHECK((*out)[0] == ProgramEvent{"h", {cat(x1, x2)}, h});
  CHECK(layer.monitor().configs().size() == 1);
}

TEST_CASE("library misuse is rejected") {
  Bytes d = ascii("d");
  RewriteLayer a(blake2s());
  CHECK_FALSE(feed(a, {write(d, ascii("x"))}));
  RewriteLayer b(blake2s());
  CHECK_FALSE(feed(b, {reset(d)}));
  RewriteLayer c(blake2s());
  CHECK_FALSE(feed(c, {new256(d), sum(d, ascii("h"))}));
}

TEST_CASE("Reset discards earlier input") {
  RewriteLayer layer(blake2s());
  Bytes d = ascii("d");
  auto out = feed(layer, {new256(d), write(d, ascii("old")), reset(d), write(d, ascii("new")), sum(d, ascii("h"))});
  REQUIRE(out);
  REQUIRE(out->size() == 1);
  CHECK((*out)[0].args == std::vector<Bytes>{ascii("new")});
}

TEST_CASE("digest objects accumulate independently") {
  RewriteLayer layer(blake2s());
  Bytes d1 = ascii("d1"), d2 = ascii("d2");
  auto out = feed(layer, {new256(d1), new256(d2), write(d1, ascii("a")), write(d2, ascii("x")), write(d1, ascii("b")),
                          write(d2, ascii("y")), sum(d2, ascii("h2")), sum(d1, ascii("h1"))});
  REQUIRE(out);
  REQUIRE(out->size() == 2);
  CHECK((*out)[0] == ProgramEvent{"h", {ascii("xy")}, ascii("h2")});
  CHECK((*out)[1] == ProgramEvent{"h", {ascii("ab")}, ascii("h1")});
}

TEST_CASE("one-shot hashes are renamed and KDF calls dropped") {
  RewriteLayer layer(blake2s());
  auto out = feed(layer, {{"blake2sSum256", {ascii("m")}, ascii("hm")}, {"KDF", {ascii("k")}, ascii("o")}});
  REQUIRE(out);
  REQUIRE(out->size() == 1);
  CHECK((*out)[0] == ProgramEvent{"h", {ascii("m")}, ascii("hm")});
}

TEST_CASE("accumulation over many writes") {
  std::mt19937_64 rng(4);
  for (std::size_t k = 1; k <= 64; k += 9) {
    RewriteLayer layer(blake2s());
    Bytes d = ascii("digest");
    std::vector<ProgramEvent> events{new256(d)};
    Bytes all;
    for (std::size_t i = 0; i < k; ++i) {
      Bytes x(1 + rng() % 5);
      for (auto& c : x) c = static_cast<std::uint8_t>(rng());
      all = cat(all, x);
      events.push_back(write(d, x));
    }
    events.push_back(sum(d, ascii("h")));
    auto out = feed(layer, events);
    REQUIRE(out);
    REQUIRE(out->size() == 1);
    CHECK((*out)[0].args.at(0) == all);
  }
}

TEST_CASE("a forwarding layer is the identity") {
  SpecFile spec = parse_spec(
      "theory Fwd\nbegin\nmode: rewrite\n"
      "rule F: [ ] --[ Trig('f', <x>, y), Emit('f', <x>, y) ]-> [ ]\n"
      "rule G: [ ] --[ Trig('g', <x, z>, y), Emit('g', <x, z>, y) ]-> [ ]\nend\n");
  RewriteLayer layer(spec);
  std::mt19937_64 rng(8);
  std::vector<ProgramEvent> events;
  for (int i = 0; i < 50; ++i) {
    Bytes a{static_cast<std::uint8_t>(rng())}, b{static_cast<std::uint8_t>(rng()), 1}, r{static_cast<std::uint8_t>(i)};
    events.push_back(rng() % 2 ? ProgramEvent{"f", {a}, r} : ProgramEvent{"g", {a, b}, r});
  }
  auto out = feed(layer, events);
  REQUIRE(out);
  CHECK(*out == events);
}

TEST_CASE("layer construction") {
  CHECK_THROWS_AS(RewriteLayer(parse_spec("theory M\nbegin\nrule R: [ ] --> [ ]\nend\n")), SpecError);
  RewriteLayer hinted(parse_spec(
      "theory H\nbegin\nmode: rewrite\nrule R: [ A(x) ] --[ Hint('f', <x>, y) ]-> [ B(x) ]\nend\n"));
  bool linted = false;
  for (const auto& w : hinted.warnings()) linted = linted || w.find("hints in a rewrite layer") != std::string::npos;
  CHECK(linted);
}

TEST_CASE("to_program_event") {
  OutputEvent ok{"h", {Value::bytes(ascii("x"))}, Value::bytes(ascii("y"))};
  CHECK(to_program_event(ok) == ProgramEvent{"h", {ascii("x")}, ascii("y")});
  CHECK_THROWS_AS(to_program_event(OutputEvent{"h", {Value::natural(1)}, Value::bytes({})}), EvalError);
  CHECK_THROWS_AS(to_program_event(OutputEvent{"h", {}, std::nullopt}), EvalError);
}

TEST_CASE("pipeline feeds layer output into the sink") {
  SpecFile sink_spec = parse_spec("theory S\nbegin\nrule R: [ A(x) ] --[ Hashed(x) ]-> [ B(h(x)) ]\nend\n");
  MonitorOptions o;
  Bytes msg = ascii("hello world");
  o.initial.insert(GroundFact{"A", false, {Value::bytes(msg)}});
  Monitor sink(split_ruleset(elaborate(sink_spec).rules), sink_spec.formats, o);
  std::vector<RewriteLayer> layers;
  layers.emplace_back(blake2s());
  Pipeline p(std::move(layers), std::move(sink));

  Bytes d = ascii("d");
  auto v = p.run(std::vector<ProgramEvent>{new256(d), write(d, ascii("hello ")), {"KDF", {ascii("k")}, ascii("o")},
                                           write(d, ascii("world")), sum(d, ascii("H"))});
  CHECK_FALSE(v.rejection);
  REQUIRE(p.sink().configs().size() == 1);
  CHECK(p.sink().configs()[0].state.contains(GroundFact{"B", false, {Value::bytes(ascii("H"))}}));
  CHECK(p.fed() == 5);
}

TEST_CASE("pipeline reports the rejecting stage") {
  SpecFile sink_spec = parse_spec("theory S\nbegin\nrule R: [ A(x) ] --> [ B(h(x)) ]\nend\n");
  {
    std::vector<RewriteLayer> layers;
    layers.emplace_back(blake2s());
    Pipeline p(std::move(layers), Monitor(split_ruleset(elaborate(sink_spec).rules), sink_spec.formats));
    Bytes d = ascii("d");
    auto v = p.run(std::vector<ProgramEvent>{new256(d), write(d, ascii("x")), reset(ascii("other"))});
    REQUIRE(v.rejection);
    CHECK(v.stage == 0);
    CHECK(v.input_index == 2);
  }
  {
    std::vector<RewriteLayer> layers;
    layers.emplace_back(blake2s());
    Pipeline p(std::move(layers), Monitor(split_ruleset(elaborate(sink_spec).rules), sink_spec.formats));
    auto v = p.run(std::vector<ProgramEvent>{{"blake2sSum256", {ascii("m")}, ascii("hm")}});
    REQUIRE(v.rejection);
    CHECK(v.stage == 1);
    CHECK(v.rejection->event.name == "h");
  }
}

TEST_CASE("an empty pipeline passes raw events to the sink") {
  Pipeline p({}, Monitor(special_rules(), FormatRegistry{}));
  auto v = p.run(std::vector<ProgramEvent>{{"receive", {}, ascii("m")}, {"random", {}, ascii("n")}});
  CHECK_FALSE(v.rejection);
  CHECK(p.layer_count() == 0);
  CHECK(p.sink().configs()[0].state.contains(GroundFact{"In", false, {Value::bytes(ascii("m"))}}));
}
