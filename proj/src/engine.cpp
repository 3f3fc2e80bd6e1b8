#include "msrmon/engine.hpp"

#include <algorithm>
#include <exception>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace msrmon {

std::strong_ordering operator<=>(const OutputEvent& a, const OutputEvent& b) {
  if (auto c = a.name <=> b.name; c != 0) return c;
  if (auto c = a.args <=> b.args; c != 0) return c;
  if (a.ret.has_value() != b.ret.has_value()) return a.ret.has_value() <=> b.ret.has_value();
  if (!a.ret) return std::strong_ordering::equal;
  return *a.ret <=> *b.ret;
}

std::string to_string(const OutputEvent& e) {
  std::string out = e.name + "(";
  for (std::size_t i = 0; i < e.args.size(); ++i) out += (i ? ", " : "") + e.args[i].to_string();
  out += ")";
  if (e.ret) out += " -> " + e.ret->to_string();
  return out;
}

std::strong_ordering operator<=>(const Configuration& a, const Configuration& b) {
  if (auto c = a.state <=> b.state; c != 0) return c;
  return a.out_trace <=> b.out_trace;
}

RuleSet::RuleSet(std::vector<ExtendedRule> rs, FormatRegistry fmts) : rules(std::move(rs)), formats(std::move(fmts)) {
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& r = rules[i];
    if (r.trigger) {
      by_trigger[r.trigger->function].push_back(i);
    } else if (!r.hints.empty()) {
      std::set<std::string> symbols;
      for (const auto& h : r.hints) symbols.insert(h.function);
      for (const auto& s : symbols) by_hint[s].push_back(i);
    } else {
      epsilon.push_back(i);
    }
  }
}

const char* to_string(RejectionKind k) {
  switch (k) {
    case RejectionKind::protocol: return "protocol violation";
    case RejectionKind::likely: return "repeated random value";
    case RejectionKind::ill_formed: return "ill-formed specification";
    case RejectionKind::config_limit: return "configuration limit exceeded";
    case RejectionKind::nondeterministic_rewrite: return "nondeterministic rewrite";
  }
  return "rejection";
}

std::string Rejection::report() const {
  std::ostringstream os;
  os << "rejected event " << event_index << ": " << to_string(event) << "\n";
  os << "reason: " << to_string(kind) << "\n";
  for (const auto& e : explanations) os << "  " << e << "\n";
  if (!permissible.empty()) {
    os << "permissible events:\n";
    for (const auto& p : permissible) os << "  " << p << "\n";
  }
  return os.str();
}

// Handlers -----------------------------------------------------------------

std::optional<Configuration> apply_rule(const Configuration& c, const ExtendedRule& r, const Substitution& sigma,
                                        const FormatRegistry& formats, const std::vector<GroundFactRef>* consumed,
                                        std::string* failure) {
  auto fail = [&](std::string why) -> std::optional<Configuration> {
    if (failure) *failure = "rule " + r.name + ": " + std::move(why);
    return std::nullopt;
  };
  for (const auto& eq : r.equalities) {
    try {
      Value l = evaluate(eq.lhs, sigma, formats);
      Value rv = evaluate(eq.rhs, sigma, formats);
      if (l != rv) {
        return fail(eq.source + " does not hold (" + to_string(eq.lhs) + " = " + l.to_string() + ", " +
                    to_string(eq.rhs) + " = " + rv.to_string() + ")");
      }
    } catch (const EvalError& ex) {
      return fail(eq.source + " cannot be evaluated: " + ex.what());
    }
  }
  Configuration d = c;
  try {
    if (consumed) {
      for (const auto& f : *consumed) {
        if (!d.state.remove_one(*f)) return fail("premise fact " + to_string(*f) + " is missing");
      }
    } else {
      for (const auto& p : r.premise) {
        if (p.persistent) continue;
        GroundFact g = instantiate(p, sigma, formats);
        if (!d.state.remove_one(g)) return fail("premise fact " + to_string(g) + " is missing");
      }
    }
    for (const auto& f : r.conclusion) d.state.insert(instantiate(f, sigma, formats));
    for (const auto& ev : r.events) {
      OutputEvent o{ev.symbol, {}, std::nullopt};
      for (const auto& a : ev.args) o.args.push_back(evaluate(a, sigma, formats));
      d.out_trace.push_back(std::move(o));
    }
    for (const auto& em : r.emits) {
      OutputEvent o{em.function, {}, evaluate(em.result, sigma, formats)};
      for (const auto& a : em.args) o.args.push_back(evaluate(a, sigma, formats));
      d.out_trace.push_back(std::move(o));
    }
  } catch (const EvalError& ex) {
    return fail(std::string("cannot build conclusion: ") + ex.what());
  }
  return d;
}

EpsilonResult handle_epsilon(const Configuration& c, const RuleSet& rs) {
  EpsilonResult out;
  for (std::size_t idx : rs.epsilon) {
    const auto& r = rs.rules[idx];
    for (const auto& m : conflict_set(c.state, r.premise, rs.formats)) {
      std::string why;
      auto d = apply_rule(c, r, m.sigma, rs.formats, &m.linear, &why);
      if (d) {
        out.next.push_back(std::move(*d));
      } else {
        if (r.part == RulePart::end) out.blocked = true;
        out.notes.push_back(std::move(why));
      }
    }
  }
  return out;
}

std::vector<Configuration> handle_triggers(const Configuration& c, const RuleSet& rs, const ExtendedRule& r,
                                           const ProgramEvent& e, Diagnostics* notes) {
  std::vector<Configuration> updated;
  if (!r.trigger) return updated;
  for (const auto& m : conflict_set(c.state, r.premise, rs.formats)) {
    auto rho = mgs(e, *r.trigger, rs.formats, m.sigma);
    if (!rho) continue;
    std::string why;
    auto d = apply_rule(c, r, *rho, rs.formats, &m.linear, &why);
    if (!d) {
      if (notes) notes->push_back(std::move(why));
      continue;
    }
    auto eps = handle_epsilon(*d, rs);
    if (eps.blocked) {
      if (notes) {
        for (auto& n : eps.notes) notes->push_back(std::move(n));
      }
    } else if (!eps.next.empty()) {
      for (auto& n : eps.next) updated.push_back(std::move(n));
    } else {
      updated.push_back(std::move(*d));
    }
  }
  return updated;
}

HintResult handle_hints(const Configuration& c, const RuleSet& rs, const ExtendedRule& r, const ProgramEvent& e,
                        Diagnostics* notes) {
  HintResult out;
  for (const auto& m : conflict_set(c.state, r.premise, rs.formats)) {
    std::set<Substitution> u;
    for (const auto& h : r.hints) {
      if (auto s = mgs(e, h, rs.formats, m.sigma)) u.insert(std::move(*s));
    }
    if (u.empty()) continue;
    if (u.size() > 1) {
      out.ill_formed = "rule " + r.name + ": event " + to_string(e) + " matches " + std::to_string(u.size()) +
                       " hints with different instantiations";
      return out;
    }
    std::string why;
    auto d = apply_rule(c, r, *u.begin(), rs.formats, &m.linear, &why);
    if (!d) {
      if (notes) notes->push_back(std::move(why));
      continue;
    }
    std::vector<Configuration> found;
    Diagnostics inner;
    auto it = rs.by_trigger.find(e.name);
    if (it != rs.by_trigger.end()) {
      for (std::size_t idx : it->second) {
        for (auto& n : handle_triggers(*d, rs, rs.rules[idx], e, &inner)) found.push_back(std::move(n));
      }
    }
    if (found.empty()) {
      if (notes) {
        notes->push_back("rule " + r.name + ": hint matched " + to_string(e) + " but no rule with that trigger applies");
        for (auto& n : inner) notes->push_back(std::move(n));
      }
      continue;
    }
    for (auto& n : found) out.next.push_back(std::move(n));
  }
  return out;
}

// Monitor ------------------------------------------------------------------

void canonicalize(std::vector<Configuration>& configs) {
  std::sort(configs.begin(), configs.end());
  configs.erase(std::unique(configs.begin(), configs.end()), configs.end());
}

Monitor::Monitor(RuleSet rules, MonitorOptions options) : rules_(std::move(rules)), options_(std::move(options)) {
  configs_.push_back(Configuration{options_.initial, {}});
}

Monitor::Monitor(std::vector<ExtendedRule> rules, FormatRegistry formats, MonitorOptions options)
    : Monitor(RuleSet(std::move(rules), std::move(formats)), std::move(options)) {}

namespace {

struct StepResult {
  std::vector<Configuration> next;
  Diagnostics notes;
  std::optional<std::string> ill_formed;
};

StepResult step_config(const Configuration& c, const RuleSet& rs, const ProgramEvent& e) {
  StepResult out;
  if (auto it = rs.by_hint.find(e.name); it != rs.by_hint.end()) {
    for (std::size_t idx : it->second) {
      auto h = handle_hints(c, rs, rs.rules[idx], e, &out.notes);
      if (h.ill_formed) {
        out.ill_formed = std::move(h.ill_formed);
        return out;
      }
      for (auto& n : h.next) out.next.push_back(std::move(n));
    }
  }
  if (auto it = rs.by_trigger.find(e.name); it != rs.by_trigger.end()) {
    for (std::size_t idx : it->second) {
      for (auto& n : handle_triggers(c, rs, rs.rules[idx], e, &out.notes)) out.next.push_back(std::move(n));
    }
  }
  return out;
}

std::vector<StepResult> step_serial(const std::vector<Configuration>& configs, const RuleSet& rs,
                                    const ProgramEvent& e) {
  std::vector<StepResult> results;
  results.reserve(configs.size());
  for (const auto& c : configs) results.push_back(step_config(c, rs, e));
  return results;
}

std::vector<StepResult> step_parallel(const std::vector<Configuration>& configs, const RuleSet& rs,
                                      const ProgramEvent& e) {
  std::vector<StepResult> results(configs.size());
  std::exception_ptr error;
  const auto n = static_cast<long>(configs.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      results[i] = step_config(configs[i], rs, e);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace

Rejection Monitor::reject(RejectionKind kind, const ProgramEvent& e, std::vector<std::string> why) const {
  Rejection r;
  r.kind = kind;
  r.event_index = processed_;
  r.event = e;
  r.explanations = std::move(why);
  r.permissible = permissible_events();
  return r;
}

std::optional<Rejection> Monitor::process_event(const ProgramEvent& e) {
  last_notes_.clear();
  bool track_random = options_.mode == MonitorMode::monitor && e.name == "random";
  if (track_random && std::binary_search(seen_random_.begin(), seen_random_.end(), e.ret)) {
    return reject(RejectionKind::likely, e,
                  {"random returned " + Value::bytes(e.ret).to_string() + ", a value it returned before"});
  }

  auto results = options_.policy == ExecPolicy::parallel && configs_.size() > 1 ? step_parallel(configs_, rules_, e)
                                                                                : step_serial(configs_, rules_, e);

  std::vector<Configuration> next;
  std::vector<std::string> why;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& res = results[i];
    if (res.ill_formed) return reject(RejectionKind::ill_formed, e, {*res.ill_formed});
    std::string prefix = configs_.size() > 1 ? "configuration " + std::to_string(i) + ": " : "";
    for (auto& n : res.notes) why.push_back(prefix + n);
    if (res.next.empty() && res.notes.empty()) {
      why.push_back(prefix + "no rule with trigger or hint " + e.name + " applies");
    }
    for (auto& c : res.next) next.push_back(std::move(c));
  }
  if (next.empty()) return reject(RejectionKind::protocol, e, std::move(why));
  canonicalize(next);
  if (next.size() > options_.max_configs) {
    return reject(RejectionKind::config_limit, e,
                  {std::to_string(next.size()) + " configurations exceed the limit of " +
                   std::to_string(options_.max_configs)});
  }
  if (options_.mode == MonitorMode::rewrite && next.size() > 1) {
    return reject(RejectionKind::nondeterministic_rewrite, e,
                  {"rewrite layer reached " + std::to_string(next.size()) + " configurations"});
  }
  last_notes_ = std::move(why);
  configs_ = std::move(next);
  if (track_random) {
    seen_random_.insert(std::lower_bound(seen_random_.begin(), seen_random_.end(), e.ret), e.ret);
  }
  ++processed_;
  return std::nullopt;
}

std::optional<Rejection> Monitor::process_trace(std::span<const ProgramEvent> events) {
  for (const auto& e : events) {
    if (auto r = process_event(e)) return r;
  }
  return std::nullopt;
}

std::vector<std::vector<OutputEvent>> Monitor::output_traces() const {
  std::vector<std::vector<OutputEvent>> out;
  for (const auto& c : configs_) out.push_back(c.out_trace);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::string> Monitor::permissible_events(std::size_t limit) const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](const TriggerPattern& p) {
    std::string s = to_string(p);
    if (seen.insert(s).second) out.push_back(std::move(s));
  };
  for (const auto& c : configs_) {
    for (const auto& r : rules_.rules) {
      if (r.is_epsilon()) continue;
      for (const auto& m : conflict_set(c.state, r.premise, rules_.formats)) {
        try {
          if (r.trigger) add(apply_subst(*r.trigger, m.sigma, rules_.formats));
          for (const auto& h : r.hints) add(apply_subst(h, m.sigma, rules_.formats));
        } catch (const EvalError&) {
        }
        if (out.size() >= limit) return out;
      }
    }
  }
  return out;
}

std::vector<OutputEvent> Monitor::drain_output() {
  std::vector<OutputEvent> out;
  if (configs_.size() == 1) std::swap(out, configs_.front().out_trace);
  return out;
}

}  // namespace msrmon
