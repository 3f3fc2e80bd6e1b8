#pragma once

// Trace rewriting: monitors in rewrite mode turn library-level call sequences
// into protocol-level events for the next stage.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "msrmon/engine.hpp"

namespace msrmon {

class RewriteLayer {
 public:
  /// `spec` must be in rewrite mode. Rules are used as written (no special
  /// rules are added).
  explicit RewriteLayer(const SpecFile& spec, std::size_t max_configs = 10000);
  RewriteLayer(std::vector<ExtendedRule> rules, FormatRegistry formats);

  /// Emitted events in application order, or the rejection.
  std::variant<std::vector<ProgramEvent>, Rejection> step(const ProgramEvent& e);

  const Monitor& monitor() const { return monitor_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<std::string> warnings_;  // filled while monitor_ is built
  Monitor monitor_;
};

/// Converts an emitted output event into a program event. Throws EvalError
/// when a value is a natural number or the event carries no result.
ProgramEvent to_program_event(const OutputEvent& e);

struct PipelineVerdict {
  std::optional<Rejection> rejection;
  /// Stage that rejected: a layer index, or the layer count for the sink.
  std::size_t stage = 0;
  std::size_t input_index = 0;  // index of the raw input event being fed
};

class Pipeline {
 public:
  Pipeline(std::vector<RewriteLayer> layers, Monitor sink);

  /// Feeds one raw event through every layer and the sink.
  std::optional<PipelineVerdict> feed(const ProgramEvent& e);
  PipelineVerdict run(std::span<const ProgramEvent> events);

  const Monitor& sink() const { return sink_; }
  Monitor& sink() { return sink_; }
  std::size_t layer_count() const { return layers_.size(); }
  std::size_t fed() const { return fed_; }

 private:
  std::vector<RewriteLayer> layers_;
  Monitor sink_;
  std::size_t fed_ = 0;
};

}  // namespace msrmon
