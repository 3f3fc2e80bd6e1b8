#include "msrmon/decompose.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace msrmon {

void collect_apps(const Term& t, std::vector<Term>& out) {
  if (!t.contains_app()) return;
  for (const auto& a : t.args()) collect_apps(a, out);
  if (t.is(Term::Kind::app) && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
}

namespace {

void outermost_apps(const Term& t, std::vector<Term>& out) {
  if (!t.contains_app()) return;
  if (t.is(Term::Kind::app)) {
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    return;
  }
  for (const auto& a : t.args()) outermost_apps(a, out);
}

Term replace_apps(const Term& t, const std::map<Term, Term>& results) {
  if (!t.contains_app()) return t;
  if (t.is(Term::Kind::app)) {
    auto it = results.find(t);
    if (it != results.end()) return it->second;
  }
  std::vector<Term> args;
  for (const auto& a : t.args()) args.push_back(replace_apps(a, results));
  switch (t.kind()) {
    case Term::Kind::app: return Term::app(t.name(), std::move(args));
    case Term::Kind::format_app: return Term::format_app(t.name(), std::move(args));
    default: return Term::tuple(std::move(args));
  }
}

Fact replace_apps(const Fact& f, const std::map<Term, Term>& results) {
  Fact out{f.symbol, f.persistent, {}};
  for (const auto& a : f.args) out.args.push_back(replace_apps(a, results));
  return out;
}

TriggerPattern replace_apps(const TriggerPattern& p, const std::map<Term, Term>& results) {
  TriggerPattern out{p.function, {}, replace_apps(p.result, results)};
  for (const auto& a : p.args) out.args.push_back(replace_apps(a, results));
  return out;
}

/// Every term of a rule outside its premise, conclusion first.
std::vector<Term> output_terms(const ExtendedRule& r, bool with_conclusion, bool with_actions) {
  std::vector<Term> out;
  if (with_conclusion) {
    for (const auto& f : r.conclusion) out.insert(out.end(), f.args.begin(), f.args.end());
  }
  if (with_actions) {
    for (const auto& f : r.events) out.insert(out.end(), f.args.begin(), f.args.end());
    for (const auto& e : r.equalities) {
      out.push_back(e.lhs);
      out.push_back(e.rhs);
    }
    for (const auto& p : r.emits) {
      out.insert(out.end(), p.args.begin(), p.args.end());
      out.push_back(p.result);
    }
  }
  return out;
}

bool rule_has_apps(const ExtendedRule& r) {
  auto terms = output_terms(r, true, true);
  return std::any_of(terms.begin(), terms.end(), [](const Term& t) { return t.contains_app(); });
}

class NameSupply {
 public:
  explicit NameSupply(const ExtendedRule& r) {
    auto add = [&](const Term& t) {
      for (const auto& v : vars_of(t)) used_.insert(v.name());
    };
    for (const auto* list : {&r.premise, &r.conclusion, &r.events}) {
      for (const auto& f : *list) {
        for (const auto& a : f.args) add(a);
      }
    }
    for (const auto& e : r.equalities) {
      add(e.lhs);
      add(e.rhs);
    }
  }
  Term fresh(std::string base) {
    while (used_.contains(base)) base += "_";
    used_.insert(base);
    return Term::var(base);
  }

 private:
  std::set<std::string> used_;
};

}  // namespace

std::vector<ExtendedRule> split_rule(const ExtendedRule& r) {
  if (!rule_has_apps(r)) return {r};
  if (r.trigger || !r.hints.empty()) {
    throw DecomposeError("rule " + r.name + " carries a trigger or hints and also computes function applications");
  }

  std::vector<Term> occ;
  for (const auto& t : output_terms(r, true, false)) collect_apps(t, occ);
  for (const auto& t : output_terms(r, false, true)) {
    std::vector<Term> apps;
    collect_apps(t, apps);
    for (const auto& a : apps) {
      if (std::find(occ.begin(), occ.end(), a) == occ.end()) {
        throw DecomposeError("rule " + r.name + ": action term " + to_string(a) +
                             " does not occur in the conclusion");
      }
    }
  }

  std::vector<Term> v;
  for (const auto& f : r.premise) {
    for (const auto& a : f.args) collect_vars(a, v);
  }
  for (const auto& t : output_terms(r, true, true)) {
    for (const auto& x : vars_of(t)) {
      if (std::find(v.begin(), v.end(), x) == v.end()) {
        throw DecomposeError("rule " + r.name + ": variable " + to_string(x) + " is not bound by the premise");
      }
    }
  }

  NameSupply names(r);
  std::map<Term, std::size_t> index;
  std::vector<Term> result;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    index.emplace(occ[i], i);
    result.push_back(names.fresh("_r" + std::to_string(i)));
  }
  std::map<Term, Term> result_of;
  for (std::size_t i = 0; i < occ.size(); ++i) result_of.emplace(occ[i], result[i]);

  std::vector<Term> top;
  for (const auto& t : output_terms(r, true, true)) outermost_apps(t, top);

  // consumers[i]: occurrences with occ[i] as an outermost application in an argument.
  std::vector<std::vector<std::size_t>> consumers(occ.size());
  for (std::size_t j = 0; j < occ.size(); ++j) {
    std::vector<Term> kids;
    for (const auto& a : occ[j].args()) outermost_apps(a, kids);
    for (const auto& k : kids) consumers[index.at(k)].push_back(j);
  }

  auto st = [&](std::size_t i, const std::string& slot, const Term& value) {
    Fact f{"ST_" + r.name + "_" + std::to_string(i) + "_" + slot, false, v};
    f.args.push_back(value);
    return f;
  };

  ExtendedRule start;
  start.name = r.name + "_start";
  start.role = r.role;
  start.origin = r.origin;
  start.part = RulePart::start;
  start.premise = r.premise;

  Term hint_result = names.fresh("_h");
  std::vector<ExtendedRule> mids;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    const Term& f = occ[i];
    ExtendedRule mid;
    mid.name = r.name + "_mid" + std::to_string(i) + "_" + f.name();
    mid.role = r.role;
    mid.origin = r.origin;
    mid.part = RulePart::mid;
    TriggerPattern trig{f.name(), {}, result[i]};
    bool innermost = true;
    if (f.args().empty()) {
      Term tok = names.fresh("_t" + std::to_string(i));
      start.conclusion.push_back(st(i, "tok", Term()));
      mid.premise.push_back(st(i, "tok", tok));
    }
    for (std::size_t k = 0; k < f.args().size(); ++k) {
      const Term& a = f.args()[k];
      if (!a.contains_app()) {
        Term x = names.fresh("_a" + std::to_string(i) + "_" + std::to_string(k));
        start.conclusion.push_back(st(i, "a" + std::to_string(k), a));
        mid.premise.push_back(st(i, "a" + std::to_string(k), x));
        trig.args.push_back(x);
        continue;
      }
      innermost = false;
      std::vector<Term> kids;
      outermost_apps(a, kids);
      for (const auto& c : kids) {
        Fact need = st(index.at(c), std::to_string(i), result_of.at(c));
        if (std::find(mid.premise.begin(), mid.premise.end(), need) == mid.premise.end()) {
          mid.premise.push_back(std::move(need));
        }
      }
      trig.args.push_back(replace_apps(a, result_of));
    }
    for (std::size_t j : consumers[i]) {
      Fact out = st(i, std::to_string(j), result[i]);
      if (std::find(mid.conclusion.begin(), mid.conclusion.end(), out) == mid.conclusion.end()) {
        mid.conclusion.push_back(std::move(out));
      }
    }
    if (std::find(top.begin(), top.end(), f) != top.end()) mid.conclusion.push_back(st(i, "top", result[i]));
    if (innermost) mid.lookahead = TriggerPattern{f.name(), f.args(), hint_result};
    mid.trigger = std::move(trig);
    mids.push_back(std::move(mid));
  }

  ExtendedRule end;
  end.name = r.name + "_end";
  end.role = r.role;
  end.origin = r.origin;
  end.part = RulePart::end;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    if (std::find(top.begin(), top.end(), occ[i]) != top.end()) end.premise.push_back(st(i, "top", result[i]));
  }
  for (const auto& f : r.conclusion) end.conclusion.push_back(replace_apps(f, result_of));
  for (const auto& f : r.events) end.events.push_back(replace_apps(f, result_of));
  for (const auto& e : r.equalities) {
    end.equalities.push_back({replace_apps(e.lhs, result_of), replace_apps(e.rhs, result_of), e.source});
  }
  for (const auto& p : r.emits) end.emits.push_back(replace_apps(p, result_of));

  std::vector<ExtendedRule> out;
  out.push_back(std::move(start));
  for (auto& m : mids) out.push_back(std::move(m));
  out.push_back(std::move(end));
  return out;
}

std::vector<ExtendedRule> attach_hints(std::vector<ExtendedRule> rules) {
  for (auto& s : rules) {
    if (s.part != RulePart::start || s.trigger) continue;
    for (const auto& m : rules) {
      if (m.part != RulePart::mid || m.origin != s.origin || !m.lookahead) continue;
      if (std::find(s.hints.begin(), s.hints.end(), *m.lookahead) == s.hints.end()) s.hints.push_back(*m.lookahead);
    }
  }
  return rules;
}

std::vector<ExtendedRule> special_rules() {
  auto make = [](std::string name, std::vector<Fact> premise, TriggerPattern trig, std::vector<Fact> concl) {
    ExtendedRule r;
    r.name = name;
    r.origin = std::move(name);
    r.part = RulePart::special;
    r.premise = std::move(premise);
    r.trigger = std::move(trig);
    r.conclusion = std::move(concl);
    return r;
  };
  Term x = Term::var("x");
  Term k = Term::var("k");
  return {
      make("special_receive", {}, {"receive", {}, x}, {Fact{"In", false, {x}}}),
      make("special_random", {}, {"random", {}, k}, {Fact{"Fr", false, {k}}}),
      make("special_send", {Fact{"Out", false, {x}}}, {"send", {x}, Term()}, {}),
  };
}

std::vector<ExtendedRule> split_ruleset(const std::vector<ExtendedRule>& rules, bool with_special) {
  std::vector<ExtendedRule> all;
  for (const auto& r : rules) {
    for (auto& s : split_rule(r)) all.push_back(std::move(s));
  }
  if (with_special) {
    for (auto& s : special_rules()) all.push_back(std::move(s));
  }
  all = attach_hints(std::move(all));
  std::vector<ExtendedRule> out;
  for (auto& r : all) {
    if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace msrmon
