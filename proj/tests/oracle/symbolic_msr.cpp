#include "symbolic_msr.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace oracle {

using msrmon::Sort;
using Kind = Term::Kind;
using Env = std::map<std::string, Term>;

bool operator<(const SymFact& a, const SymFact& b) {
  if (a.symbol != b.symbol) return a.symbol < b.symbol;
  if (a.persistent != b.persistent) return a.persistent < b.persistent;
  return std::lexicographical_compare(a.args.begin(), a.args.end(), b.args.begin(), b.args.end());
}

bool operator==(const SymFact& a, const SymFact& b) {
  return a.symbol == b.symbol && a.persistent == b.persistent && a.args == b.args;
}

std::string to_string(const SymFact& f) {
  std::string s = (f.persistent ? "!" : "") + f.symbol + "(";
  for (std::size_t i = 0; i < f.args.size(); ++i) s += (i ? ", " : "") + msrmon::to_string(f.args[i]);
  return s + ")";
}

std::string to_string(const SymTrigger& t) {
  std::string s = t.function + "(";
  for (std::size_t i = 0; i < t.args.size(); ++i) s += (i ? ", " : "") + msrmon::to_string(t.args[i]);
  return s + ") -> " + msrmon::to_string(t.result);
}

SymState make_state(std::vector<SymFact> facts) {
  std::sort(facts.begin(), facts.end());
  SymState out;
  for (auto& f : facts) {
    if (f.persistent && !out.empty() && out.back() == f) continue;
    out.push_back(std::move(f));
  }
  return out;
}

namespace {

bool match(const Term& pattern, const Term& ground, Env& env) {
  switch (pattern.kind()) {
    case Kind::variable: {
      if (pattern.sort() == Sort::fresh && !ground.is(Kind::fresh_name)) return false;
      if (pattern.sort() == Sort::pub && !ground.is(Kind::pub_name)) return false;
      auto it = env.find(pattern.name());
      if (it != env.end()) return it->second == ground;
      env.emplace(pattern.name(), ground);
      return true;
    }
    case Kind::app:
    case Kind::format_app:
    case Kind::tuple: {
      if (ground.kind() != pattern.kind() || ground.name() != pattern.name() ||
          ground.args().size() != pattern.args().size()) {
        return false;
      }
      for (std::size_t i = 0; i < pattern.args().size(); ++i) {
        if (!match(pattern.args()[i], ground.args()[i], env)) return false;
      }
      return true;
    }
    default:
      return pattern == ground;
  }
}

std::optional<Term> subst(const Term& t, const Env& env) {
  switch (t.kind()) {
    case Kind::variable: {
      auto it = env.find(t.name());
      if (it == env.end()) return std::nullopt;
      return it->second;
    }
    case Kind::app:
    case Kind::format_app:
    case Kind::tuple: {
      std::vector<Term> args;
      for (const auto& a : t.args()) {
        auto s = subst(a, env);
        if (!s) return std::nullopt;
        args.push_back(*s);
      }
      if (t.is(Kind::app)) return Term::app(t.name(), std::move(args));
      if (t.is(Kind::format_app)) return Term::format_app(t.name(), std::move(args));
      return Term::tuple(std::move(args));
    }
    default:
      return t;
  }
}

std::optional<SymFact> subst_fact(const msrmon::Fact& f, const Env& env) {
  SymFact out{f.symbol, f.persistent, {}};
  for (const auto& a : f.args) {
    auto s = subst(a, env);
    if (!s) return std::nullopt;
    out.args.push_back(*s);
  }
  return out;
}

struct Step {
  SymState state;
  std::vector<SymFact> actions;
  std::optional<SymTrigger> trigger;
};

void match_premise(const std::vector<msrmon::Fact>& premise, std::size_t i, const SymState& state,
                   std::vector<bool>& used, Env& env, const std::function<void(const Env&)>& k) {
  if (i == premise.size()) {
    k(env);
    return;
  }
  const auto& p = premise[i];
  for (std::size_t j = 0; j < state.size(); ++j) {
    const auto& f = state[j];
    if (f.symbol != p.symbol || f.persistent != p.persistent || f.args.size() != p.args.size()) continue;
    if (!f.persistent && used[j]) continue;
    // Identical linear copies: only try the first unused one.
    if (!f.persistent && j > 0 && !used[j - 1] && state[j - 1] == f) continue;
    Env saved = env;
    bool ok = true;
    for (std::size_t a = 0; a < p.args.size() && ok; ++a) ok = match(p.args[a], f.args[a], env);
    if (ok) {
      if (!f.persistent) used[j] = true;
      match_premise(premise, i + 1, state, used, env, k);
      if (!f.persistent) used[j] = false;
    }
    env = std::move(saved);
  }
}

std::vector<Step> successors(const msrmon::ExtendedRule& r, const SymState& state) {
  std::vector<Step> out;
  std::vector<bool> used(state.size(), false);
  Env env;
  match_premise(r.premise, 0, state, used, env, [&](const Env& matched) {
    Env sigma = matched;
    Step step;
    if (r.trigger) {
      SymTrigger t{r.trigger->function, {}, Term()};
      for (const auto& a : r.trigger->args) {
        auto s = subst(a, sigma);
        if (!s) return;
        t.args.push_back(*s);
      }
      t.result = Term::app(t.function, t.args);
      if (!match(r.trigger->result, t.result, sigma)) return;
      step.trigger = t;
    }
    for (const auto& eq : r.equalities) {
      auto l = subst(eq.lhs, sigma);
      auto rr = subst(eq.rhs, sigma);
      if (!l || !rr || !(*l == *rr)) return;
    }
    for (const auto& e : r.events) {
      auto f = subst_fact(e, sigma);
      if (!f) return;
      step.actions.push_back(*f);
    }
    std::sort(step.actions.begin(), step.actions.end());
    // Consume linear premise facts.
    std::vector<SymFact> next(state.begin(), state.end());
    for (const auto& p : r.premise) {
      if (p.persistent) continue;
      auto f = subst_fact(p, sigma);
      if (!f) return;
      auto it = std::find(next.begin(), next.end(), *f);
      if (it == next.end()) return;
      next.erase(it);
    }
    for (const auto& c : r.conclusion) {
      auto f = subst_fact(c, sigma);
      if (!f) return;
      next.push_back(*f);
    }
    step.state = make_state(std::move(next));
    out.push_back(std::move(step));
  });
  return out;
}

// An end rule whose premise is available but whose equalities fail marks a
// computation that contradicts its own constraints.
bool blocked(const std::vector<msrmon::ExtendedRule>& rules, const SymState& state) {
  for (const auto& r : rules) {
    if (r.part != msrmon::RulePart::end || r.equalities.empty()) continue;
    bool failed = false;
    std::vector<bool> used(state.size(), false);
    Env env;
    match_premise(r.premise, 0, state, used, env, [&](const Env& sigma) {
      for (const auto& eq : r.equalities) {
        auto l = subst(eq.lhs, sigma);
        auto rr = subst(eq.rhs, sigma);
        if (l && rr && !(*l == *rr)) failed = true;
      }
    });
    if (failed) return true;
  }
  return false;
}

std::string actions_text(const std::vector<SymFact>& actions) {
  std::string s = "{";
  for (std::size_t i = 0; i < actions.size(); ++i) s += (i ? ", " : "") + to_string(actions[i]);
  return s + "}";
}

std::string key_of(const SymState& state, const SymRun& run) {
  std::string k;
  for (const auto& f : state) k += to_string(f) + ";";
  k += "|";
  for (const auto& a : run.filtered) k += a + ";";
  k += "|";
  for (const auto& t : run.triggers) k += to_string(t) + ";";
  return k;
}

std::string run_key(const SymRun& run) { return key_of({}, run); }

}  // namespace

Enumeration enumerate(const std::vector<msrmon::ExtendedRule>& rules, const SymState& initial,
                      const EnumLimits& limits) {
  Enumeration out;
  std::unordered_set<std::string> visited;
  std::unordered_set<std::string> recorded;
  std::size_t nodes = 0;

  std::function<void(const SymState&, SymRun&)> dfs = [&](const SymState& state, SymRun& run) {
    if (!visited.insert(key_of(state, run)).second) return;
    if (blocked(rules, state)) return;
    if (++nodes > limits.max_nodes) {
      out.truncated = true;
      return;
    }
    if (recorded.insert(run_key(run)).second) out.runs.push_back(run);
    for (const auto& r : rules) {
      for (auto& step : successors(r, state)) {
        bool adds_actions = !step.actions.empty();
        if (adds_actions && run.filtered.size() >= limits.max_filtered) continue;
        if (step.trigger && run.triggers.size() >= limits.max_triggers) continue;
        SymRun next = run;
        if (adds_actions) {
          next.filtered.push_back(actions_text(step.actions));
          next.events.insert(next.events.end(), step.actions.begin(), step.actions.end());
        }
        if (step.trigger) next.triggers.push_back(*step.trigger);
        dfs(step.state, next);
        if (out.truncated) return;
      }
    }
  };
  SymRun root;
  dfs(initial, root);
  return out;
}

std::set<std::vector<std::string>> filtered_traces(const Enumeration& e) {
  std::set<std::vector<std::string>> out;
  for (const auto& r : e.runs) out.insert(r.filtered);
  return out;
}

Bytes Bijection::operator()(const Term& t) {
  if (t.is(Kind::pub_name)) return t.bytes();
  if (!t.is_ground()) throw std::logic_error("non-ground term " + msrmon::to_string(t));
  std::string key = msrmon::to_string(t);
  auto it = table_.find(key);
  if (it != table_.end()) return it->second;
  std::size_t n = table_.size();
  Bytes b{0xf0, static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n & 0xff)};
  table_.emplace(key, b);
  return b;
}

msrmon::ProgramEvent Bijection::event(const SymTrigger& t) {
  msrmon::ProgramEvent e;
  e.name = t.function;
  for (const auto& a : t.args) e.args.push_back((*this)(a));
  e.ret = (*this)(t.result);
  return e;
}

msrmon::GroundFact Bijection::fact(const SymFact& f) {
  msrmon::GroundFact g{f.symbol, f.persistent, {}};
  for (const auto& a : f.args) g.args.push_back(msrmon::Value::bytes((*this)(a)));
  return g;
}

std::string event_text(const std::string& name, const std::vector<Bytes>& args) {
  std::string s = name + "(";
  for (std::size_t i = 0; i < args.size(); ++i) s += (i ? "," : "") + msrmon::to_hex(args[i]);
  return s + ")";
}

// Random specifications ----------------------------------------------------

namespace {

struct Gen {
  std::mt19937_64& rng;

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng); }

  std::string leaf(const std::vector<std::string>& vars) {
    static const char* kConst[] = {"'a'", "'b'", "'c'"};
    if (!vars.empty() && coin(0.8)) return vars[pick(vars.size())];
    return kConst[pick(3)];
  }

  std::string term(const std::vector<std::string>& vars, int depth, bool force_app) {
    if (depth == 0 || (!force_app && coin(0.5))) return leaf(vars);
    if (coin(0.6)) return "f(" + term(vars, depth - 1, false) + ")";
    return "g(" + term(vars, depth - 1, false) + ", " + term(vars, depth - 1, false) + ")";
  }
};

void collect_app_text(const Term& t, std::vector<std::string>& out) {
  if (t.is(Kind::app)) {
    out.push_back(msrmon::to_string(t));
    for (const auto& a : t.args()) collect_app_text(a, out);
  }
}

}  // namespace

RandomSpec random_spec(std::mt19937_64& rng) {
  Gen g{rng};
  static const char* kFacts[] = {"A", "B", "C"};
  std::size_t arity[3] = {1 + g.pick(2), 1 + g.pick(2), 1 + g.pick(2)};

  RandomSpec out;
  std::ostringstream src;
  src << "theory Random\nbegin\n\nfunctions: f/1, g/2\n\n";

  std::size_t initial = 1 + g.pick(2);
  for (std::size_t i = 0; i < initial; ++i) {
    SymFact f{"A", false, {}};
    for (std::size_t a = 0; a < arity[0]; ++a) f.args.push_back(Term::pub(msrmon::to_bytes(std::string(1, "abc"[g.pick(3)]))));
    out.initial.push_back(f);
  }
  out.initial = make_state(out.initial);

  std::size_t rules = 1 + g.pick(3);
  for (std::size_t r = 0; r < rules; ++r) {
    std::size_t level = g.pick(2);
    std::size_t produced = std::min<std::size_t>(2, level + 1 + g.pick(2));
    static const char* kVars[] = {"x", "y", "z"};
    std::vector<std::string> vars;
    std::string premise;
    std::size_t np = 1 + g.pick(2);
    for (std::size_t i = 0; i < np; ++i) {
      premise += std::string(i ? ", " : "") + kFacts[level] + "(";
      for (std::size_t a = 0; a < arity[level]; ++a) {
        std::string v = kVars[g.pick(3)];
        if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
        premise += (a ? ", " : "") + v;
      }
      premise += ")";
    }
    std::string conclusion;
    std::vector<std::string> subterms;
    // At most three distinct applications per rule keep the interleavings
    // enumerable.
    do {
      conclusion.clear();
      subterms.clear();
      std::size_t nc = 1 + g.pick(2);
      for (std::size_t i = 0; i < nc; ++i) {
        conclusion += std::string(i ? ", " : "") + kFacts[produced] + "(";
        for (std::size_t a = 0; a < arity[produced]; ++a) {
          std::string t = g.term(vars, 2, i == 0 && a == 0);
          collect_app_text(msrmon::parse_term(t), subterms);
          conclusion += (a ? ", " : "") + t;
        }
        conclusion += ")";
      }
      std::sort(subterms.begin(), subterms.end());
      subterms.erase(std::unique(subterms.begin(), subterms.end()), subterms.end());
    } while (subterms.size() > 3);
    std::string actions;
    if (g.coin(0.6)) {
      std::string t = subterms.empty() || g.coin(0.3) ? vars[g.pick(vars.size())] : subterms[g.pick(subterms.size())];
      actions += "E" + std::to_string(r) + "(" + t + ")";
    }
    if (g.coin(0.3)) {
      std::string l = vars[g.pick(vars.size())];
      std::string rr = g.coin(0.5) ? vars[g.pick(vars.size())] : g.leaf({});
      actions += std::string(actions.empty() ? "" : ", ") + "Eq(" + l + ", " + rr + ")";
    }
    src << "rule R" << r << ":\n  [ " << premise << " ]\n";
    if (actions.empty()) src << "  -->\n";
    else src << "  --[ " << actions << " ]->\n";
    src << "  [ " << conclusion << " ]\n\n";
  }
  src << "end\n";
  out.source = src.str();
  return out;
}

}  // namespace oracle
