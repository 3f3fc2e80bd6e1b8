#include "msrmon/rewrite.hpp"

#include "msrmon/decompose.hpp"

namespace msrmon {

namespace {

Monitor layer_monitor(std::vector<ExtendedRule> rules, FormatRegistry formats, std::size_t max_configs) {
  MonitorOptions opts;
  opts.mode = MonitorMode::rewrite;
  opts.max_configs = max_configs;
  return Monitor(RuleSet(split_ruleset(rules, false), std::move(formats)), std::move(opts));
}

}  // namespace

RewriteLayer::RewriteLayer(const SpecFile& spec, std::size_t max_configs)
    : monitor_([&] {
        if (spec.mode != SpecMode::rewrite) throw SpecError("layer specification lacks 'mode: rewrite'");
        auto el = elaborate(spec);
        warnings_ = std::move(el.warnings);
        return layer_monitor(std::move(el.rules), spec.formats, max_configs);
      }()) {}

RewriteLayer::RewriteLayer(std::vector<ExtendedRule> rules, FormatRegistry formats)
    : monitor_(layer_monitor(std::move(rules), std::move(formats), 10000)) {}

ProgramEvent to_program_event(const OutputEvent& e) {
  if (!e.ret) throw EvalError("event " + to_string(e) + " is not an emission");
  ProgramEvent p{e.name, {}, e.ret->as_bytes()};
  for (const auto& a : e.args) p.args.push_back(a.as_bytes());
  return p;
}

std::variant<std::vector<ProgramEvent>, Rejection> RewriteLayer::step(const ProgramEvent& e) {
  if (auto r = monitor_.process_event(e)) return std::move(*r);
  std::vector<ProgramEvent> out;
  for (const auto& o : monitor_.drain_output()) {
    if (o.ret) out.push_back(to_program_event(o));
  }
  return out;
}

Pipeline::Pipeline(std::vector<RewriteLayer> layers, Monitor sink)
    : layers_(std::move(layers)), sink_(std::move(sink)) {}

std::optional<PipelineVerdict> Pipeline::feed(const ProgramEvent& e) {
  std::vector<ProgramEvent> stream{e};
  std::size_t index = fed_++;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    std::vector<ProgramEvent> next;
    for (const auto& ev : stream) {
      auto res = layers_[i].step(ev);
      if (auto* rej = std::get_if<Rejection>(&res)) return PipelineVerdict{std::move(*rej), i, index};
      auto& emitted = std::get<std::vector<ProgramEvent>>(res);
      next.insert(next.end(), emitted.begin(), emitted.end());
    }
    stream = std::move(next);
  }
  for (const auto& ev : stream) {
    if (auto rej = sink_.process_event(ev)) return PipelineVerdict{std::move(*rej), layers_.size(), index};
  }
  return std::nullopt;
}

PipelineVerdict Pipeline::run(std::span<const ProgramEvent> events) {
  for (const auto& e : events) {
    if (auto v = feed(e)) return std::move(*v);
  }
  return PipelineVerdict{std::nullopt, layers_.size(), fed_};
}

}  // namespace msrmon
