// Serial versus OpenMP-parallel configuration processing.

#include <benchmark/benchmark.h>

#include "msrmon/decompose.hpp"
#include "msrmon/engine.hpp"
#include "msrmon/simplemac.hpp"
#include "msrmon/spec.hpp"

using namespace msrmon;

namespace {

constexpr const char* kBranching =
    "theory Branching\nbegin\n"
    "rule Left: [ A(x) ] --[ L(x) ]-> [ B(h(x)) ]\n"
    "rule Right: [ A(x) ] --[ R(x) ]-> [ C(h(x)) ]\n"
    "end\n";

Bytes label(std::size_t i) { return to_bytes("v" + std::to_string(i)); }

/// Monitor holding 2^depth configurations, plus `pending` unconsumed inputs.
Monitor branched(std::size_t depth, std::size_t pending, ExecPolicy policy) {
  SpecFile spec = parse_spec(kBranching);
  MonitorOptions o;
  o.policy = policy;
  o.max_configs = 1u << 20;
  for (std::size_t i = 0; i < depth + pending; ++i) o.initial.insert(GroundFact{"A", false, {Value::bytes(label(i))}});
  Monitor m(split_ruleset(elaborate(spec).rules), spec.formats, o);
  for (std::size_t i = 0; i < depth; ++i) m.process_event({"h", {label(i)}, to_bytes("h" + std::to_string(i))});
  return m;
}

void run_branching(benchmark::State& state, ExecPolicy policy) {
  auto depth = static_cast<std::size_t>(state.range(0));
  Monitor base = branched(depth, 1, policy);
  ProgramEvent next{"h", {label(depth)}, to_bytes("h-next")};
  for (auto _ : state) {
    Monitor m = base;
    auto rej = m.process_event(next);
    benchmark::DoNotOptimize(rej);
  }
  state.counters["configs_in"] = static_cast<double>(base.configs().size());
}

void BM_BranchingSerial(benchmark::State& s) { run_branching(s, ExecPolicy::serial); }
void BM_BranchingParallel(benchmark::State& s) { run_branching(s, ExecPolicy::parallel); }
BENCHMARK(BM_BranchingSerial)->DenseRange(6, 10, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BranchingParallel)->DenseRange(6, 10, 2)->Unit(benchmark::kMillisecond);

void run_simplemac(benchmark::State& state, ExecPolicy policy) {
  simplemac::TraceOptions t;
  t.sessions = static_cast<std::size_t>(state.range(0));
  t.interleave = 8;
  auto trace = simplemac::gen_trace(t);
  SpecFile spec = parse_spec_file(std::string(MSRMON_MODELS_DIR) + "/simplemac.spthy");
  auto rules = split_ruleset(elaborate(spec, select_role(spec, "Server")).rules);
  for (auto _ : state) {
    MonitorOptions o;
    o.policy = policy;
    Monitor m(rules, spec.formats, o);
    auto rej = m.process_trace(trace);
    benchmark::DoNotOptimize(rej);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * trace.size()));
}

void BM_SimpleMacSerial(benchmark::State& s) { run_simplemac(s, ExecPolicy::serial); }
void BM_SimpleMacParallel(benchmark::State& s) { run_simplemac(s, ExecPolicy::parallel); }
BENCHMARK(BM_SimpleMacSerial)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimpleMacParallel)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
