#pragma once

// Monitoring engine: a set of configurations updated per program event by
// trigger, hint and epsilon handling over decomposed extended rules.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msrmon/formats.hpp"
#include "msrmon/spec.hpp"
#include "msrmon/term.hpp"

namespace msrmon {

/// Instantiated rule event: a plain action fact (no `ret`) or an emission.
struct OutputEvent {
  std::string name;
  std::vector<Value> args;
  std::optional<Value> ret;

  friend bool operator==(const OutputEvent&, const OutputEvent&) = default;
  friend std::strong_ordering operator<=>(const OutputEvent& a, const OutputEvent& b);
};
std::string to_string(const OutputEvent& e);

struct Configuration {
  FactMultiset state;
  std::vector<OutputEvent> out_trace;

  friend bool operator==(const Configuration&, const Configuration&) = default;
  friend std::strong_ordering operator<=>(const Configuration& a, const Configuration& b);
};

/// Rules plus the lookup tables used to dispatch events.
struct RuleSet {
  std::vector<ExtendedRule> rules;
  FormatRegistry formats;
  std::map<std::string, std::vector<std::size_t>> by_trigger;
  std::map<std::string, std::vector<std::size_t>> by_hint;
  std::vector<std::size_t> epsilon;

  RuleSet() = default;
  RuleSet(std::vector<ExtendedRule> rules, FormatRegistry formats);
};

enum class MonitorMode { monitor, rewrite };
enum class ExecPolicy { serial, parallel };

enum class RejectionKind { protocol, likely, ill_formed, config_limit, nondeterministic_rewrite };
const char* to_string(RejectionKind k);

struct Rejection {
  RejectionKind kind = RejectionKind::protocol;
  std::size_t event_index = 0;
  ProgramEvent event;
  std::vector<std::string> explanations;
  std::vector<std::string> permissible;

  /// Multi-line human-readable report.
  std::string report() const;
};

// Handlers -----------------------------------------------------------------

/// Notes about branches that were dropped while handling one event.
using Diagnostics = std::vector<std::string>;

/// Applies `r` under `sigma`. `consumed` names the linear facts matched by
/// the premise; when null they are re-instantiated from `sigma`. Returns none
/// when an equality or a format construction fails.
std::optional<Configuration> apply_rule(const Configuration& c, const ExtendedRule& r, const Substitution& sigma,
                                        const FormatRegistry& formats,
                                        const std::vector<GroundFactRef>* consumed = nullptr,
                                        std::string* failure = nullptr);

struct EpsilonResult {
  std::vector<Configuration> next;
  /// An end rule matched its premise but failed its constraints.
  bool blocked = false;
  Diagnostics notes;
};

EpsilonResult handle_epsilon(const Configuration& c, const RuleSet& rs);

std::vector<Configuration> handle_triggers(const Configuration& c, const RuleSet& rs, const ExtendedRule& r,
                                           const ProgramEvent& e, Diagnostics* notes = nullptr);

struct HintResult {
  std::vector<Configuration> next;
  std::optional<std::string> ill_formed;
};

HintResult handle_hints(const Configuration& c, const RuleSet& rs, const ExtendedRule& r, const ProgramEvent& e,
                        Diagnostics* notes = nullptr);

// Monitor ------------------------------------------------------------------

struct MonitorOptions {
  MonitorMode mode = MonitorMode::monitor;
  std::size_t max_configs = 10000;
  ExecPolicy policy = ExecPolicy::serial;
  FactMultiset initial;
};

class Monitor {
 public:
  Monitor(RuleSet rules, MonitorOptions options = {});
  Monitor(std::vector<ExtendedRule> rules, FormatRegistry formats, MonitorOptions options = {});

  /// Processes one event. On rejection the configuration set is left as it
  /// was before the event.
  std::optional<Rejection> process_event(const ProgramEvent& e);
  /// Folds process_event, stopping at the first rejection.
  std::optional<Rejection> process_trace(std::span<const ProgramEvent> events);

  const std::vector<Configuration>& configs() const { return configs_; }
  /// The output traces of the live configurations.
  std::vector<std::vector<OutputEvent>> output_traces() const;
  /// Instantiated trigger and hint patterns enabled in the live configurations.
  std::vector<std::string> permissible_events(std::size_t limit = 64) const;
  /// Removes and returns the output trace of the single live configuration.
  std::vector<OutputEvent> drain_output();

  std::size_t events_processed() const { return processed_; }
  const Diagnostics& last_diagnostics() const { return last_notes_; }
  const RuleSet& rules() const { return rules_; }
  const MonitorOptions& options() const { return options_; }
  void set_policy(ExecPolicy p) { options_.policy = p; }

 private:
  Rejection reject(RejectionKind kind, const ProgramEvent& e, std::vector<std::string> why) const;

  RuleSet rules_;
  MonitorOptions options_;
  std::vector<Configuration> configs_;
  std::vector<Bytes> seen_random_;  // sorted
  std::size_t processed_ = 0;
  Diagnostics last_notes_;
};

/// Sorts and deduplicates configurations.
void canonicalize(std::vector<Configuration>& configs);

}  // namespace msrmon
