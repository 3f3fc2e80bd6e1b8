#pragma once

// Specification files: preprocessing, parsing, printing and elaboration of
// rules into extended rules (premise, one trigger or hints, equalities,
// events, conclusion).

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "msrmon/formats.hpp"
#include "msrmon/term.hpp"

namespace msrmon {

struct SourcePos {
  int line = 0;
  int column = 0;
};

/// Parse or validation failure, with position when known.
class SpecError : public std::runtime_error {
 public:
  explicit SpecError(const std::string& msg, SourcePos pos = {});
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

struct FunctionSymbol {
  enum class Kind { user, builtin_io, format };
  std::string name;
  std::size_t arity = 0;
  Kind kind = Kind::user;
  std::vector<std::string> attributes;

  friend bool operator==(const FunctionSymbol&, const FunctionSymbol&) = default;
};

struct Equation {
  Term lhs;
  Term rhs;
  friend bool operator==(const Equation&, const Equation&) = default;
};

struct MacroDef {
  std::string name;
  std::vector<std::string> params;
  Term body;
  friend bool operator==(const MacroDef&, const MacroDef&) = default;
};

struct LetBinding {
  std::string var;
  Term value;
  friend bool operator==(const LetBinding&, const LetBinding&) = default;
};

struct RuleAst {
  std::string name;
  std::optional<std::string> role;
  std::vector<std::pair<std::string, std::string>> attributes;  // including role
  std::vector<LetBinding> lets;
  std::vector<Fact> premise;
  std::vector<Fact> actions;
  std::vector<Fact> conclusion;
  SourcePos pos;

  /// Structural equality, ignoring source positions.
  friend bool operator==(const RuleAst& a, const RuleAst& b) {
    return a.name == b.name && a.role == b.role && a.attributes == b.attributes && a.lets == b.lets &&
           a.premise == b.premise && a.actions == b.actions && a.conclusion == b.conclusion;
  }
};

enum class SpecMode { monitor, rewrite };

struct SpecFile {
  std::string theory;
  SpecMode mode = SpecMode::monitor;
  std::vector<FunctionSymbol> functions;  // as declared
  std::vector<std::string> builtins;      // `builtins:` entries, kept inert
  std::vector<Equation> equations;        // kept inert
  std::vector<MacroDef> macros;
  FormatRegistry formats;
  std::vector<RuleAst> rules;
  std::set<std::string> flags;
  std::vector<std::string> warnings;

  const FunctionSymbol* find_function(const std::string& name) const;
};

/// Flags considered by `#ifdef`. MONITOR is added by the CLI.
struct ParseOptions {
  std::set<std::string> flags{"MONITOR"};
};

/// Symbols available without declaration (h/1, hmac/2, senc/2, ...).
const std::vector<FunctionSymbol>& implicit_functions();

SpecFile parse_spec(std::string_view source, const ParseOptions& options = {});
SpecFile parse_spec_file(const std::string& path, const ParseOptions& options = {});

/// Re-parsable source text for a parsed specification.
std::string print_spec(const SpecFile& spec);
std::string print_rule(const RuleAst& rule);

/// Single term in specification syntax; format names resolve against `formats`.
Term parse_term(std::string_view text, const FormatRegistry& formats = {});

// Extended rules -----------------------------------------------------------

struct Equality {
  Term lhs;
  Term rhs;
  std::string source;  // as written, e.g. "Eq(h, hp)"
  friend bool operator==(const Equality& a, const Equality& b) { return a.lhs == b.lhs && a.rhs == b.rhs; }
};

/// Position of a rule within its decomposition.
enum class RulePart { original, start, mid, end, special };

struct ExtendedRule {
  std::string name;
  std::string role;
  std::string origin;  // source rule name
  RulePart part = RulePart::original;

  std::vector<Fact> premise;
  std::optional<TriggerPattern> trigger;
  std::vector<TriggerPattern> hints;
  std::vector<Equality> equalities;
  std::vector<Fact> events;
  std::vector<TriggerPattern> emits;  // rewrite output, `Emit('f', <..>, r)`
  std::vector<Fact> conclusion;

  /// Set on mid rules whose arguments are computation-free: the trigger
  /// restated over the start rule's variables, used as its hint.
  std::optional<TriggerPattern> lookahead;

  bool is_epsilon() const { return !trigger && hints.empty(); }

  friend bool operator==(const ExtendedRule& a, const ExtendedRule& b) {
    return a.premise == b.premise && a.trigger == b.trigger && a.hints == b.hints &&
           a.equalities == b.equalities && a.events == b.events && a.emits == b.emits &&
           a.conclusion == b.conclusion;
  }
};

std::string print_rule(const ExtendedRule& rule);
std::string print_rules(const std::vector<ExtendedRule>& rules);

struct Elaboration {
  std::vector<ExtendedRule> rules;
  std::vector<std::string> warnings;
};

/// Rules of `role` plus rules without a role. With no role attributes in the
/// file the result is empty and a warning is added. Throws SpecError for an
/// unknown role, listing the known ones.
std::vector<RuleAst> select_role(const SpecFile& spec, const std::string& role,
                                 std::vector<std::string>* warnings = nullptr);

std::vector<std::string> roles_of(const SpecFile& spec);

/// Expands lets, classifies actions and checks the extended-rule shape.
/// Shape violations throw SpecError; decomposition conditions become lints.
Elaboration elaborate(const SpecFile& spec, const std::vector<RuleAst>& rules);
Elaboration elaborate(const SpecFile& spec);

/// Expanded copy of `rule` with its lets substituted.
RuleAst expand_lets(const RuleAst& rule);

}  // namespace msrmon
