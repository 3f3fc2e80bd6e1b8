#pragma once

// Rule decomposition: every rule with function applications is split into a
// start rule, one mid rule per distinct application and an end rule, linked
// by subterm (ST) facts.

#include <vector>

#include "msrmon/spec.hpp"

namespace msrmon {

class DecomposeError : public SpecError {
 public:
  using SpecError::SpecError;
};

/// Start, mid and end rules for `r`, or `{r}` when r computes nothing. Start
/// rules carry no hints yet. Throws DecomposeError.
std::vector<ExtendedRule> split_rule(const ExtendedRule& r);

/// Gives every start rule the lookahead patterns of its innermost mid rules.
std::vector<ExtendedRule> attach_hints(std::vector<ExtendedRule> rules);

/// The fixed rules behind the reserved events receive, random and send.
std::vector<ExtendedRule> special_rules();

/// Union of split_rule over `rules`, with hints attached, plus the special
/// rules when requested. Structurally equal rules appear once.
std::vector<ExtendedRule> split_ruleset(const std::vector<ExtendedRule>& rules, bool with_special = true);

/// Every distinct function application in `t`, children before parents.
void collect_apps(const Term& t, std::vector<Term>& out);

}  // namespace msrmon
