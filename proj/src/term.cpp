#include "msrmon/term.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "msrmon/formats.hpp"

namespace msrmon {

// Hex helpers ---------------------------------------------------------------

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

namespace {
int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

std::optional<Bytes> from_hex(std::string_view text) {
  if (text.size() % 2 != 0) return std::nullopt;
  Bytes out;
  out.reserve(text.size() / 2);
  for (std::size_t i = 0; i < text.size(); i += 2) {
    int hi = hex_digit(text[i]);
    int lo = hex_digit(text[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

Bytes to_bytes(std::string_view text) { return Bytes(text.begin(), text.end()); }

// Value ---------------------------------------------------------------------

Value::Value() : rep_(std::make_shared<const Rep>(Bytes{})) {}

Value Value::bytes(Bytes b) { return Value(std::make_shared<const Rep>(std::move(b))); }

Value Value::natural(Natural n) {
  if (n < 0) throw std::invalid_argument("natural values are non-negative");
  return Value(std::make_shared<const Rep>(std::move(n)));
}

const Bytes& Value::as_bytes() const {
  if (!is_bytes()) throw EvalError("expected a byte sequence, found " + to_string());
  return std::get<Bytes>(*rep_);
}

const Natural& Value::as_natural() const {
  if (!is_natural()) throw EvalError("expected a natural number, found " + to_string());
  return std::get<Natural>(*rep_);
}

bool operator==(const Value& a, const Value& b) {
  if (a.rep_ == b.rep_) return true;
  return *a.rep_ == *b.rep_;
}

std::strong_ordering operator<=>(const Value& a, const Value& b) {
  if (a.rep_ == b.rep_) return std::strong_ordering::equal;
  if (a.rep_->index() != b.rep_->index()) return a.rep_->index() <=> b.rep_->index();
  if (a.is_bytes()) return std::get<Bytes>(*a.rep_) <=> std::get<Bytes>(*b.rep_);
  int c = std::get<Natural>(*a.rep_).compare(std::get<Natural>(*b.rep_));
  return c <=> 0;
}

std::string Value::to_string() const {
  if (is_natural()) return "%" + std::get<Natural>(*rep_).str();
  const auto& b = std::get<Bytes>(*rep_);
  if (b.empty()) return "''";
  return "0x" + to_hex(b);
}

// Term ----------------------------------------------------------------------

struct Term::Node {
  Kind kind;
  std::string name;
  Sort sort = Sort::msg;
  Bytes bytes;
  Natural natural;
  std::vector<Term> args;
  bool ground = true;
  bool has_app = false;
};

namespace {
std::shared_ptr<Term::Node> make_node(Term::Kind k) {
  auto n = std::make_shared<Term::Node>();
  n->kind = k;
  return n;
}
}  // namespace

Term::Term() : Term(pub({})) {}

Term Term::var(std::string name, Sort sort) {
  auto n = make_node(Kind::variable);
  n->name = std::move(name);
  n->sort = sort;
  n->ground = false;
  return Term(std::move(n));
}

Term Term::pub(Bytes bytes) {
  auto n = make_node(Kind::pub_name);
  n->bytes = std::move(bytes);
  return Term(std::move(n));
}

Term Term::fresh_name(std::string label) {
  auto n = make_node(Kind::fresh_name);
  n->name = std::move(label);
  n->sort = Sort::fresh;
  n->ground = false;
  return Term(std::move(n));
}

namespace {
std::shared_ptr<Term::Node> compound(Term::Kind k, std::string name, std::vector<Term> args) {
  auto n = make_node(k);
  n->name = std::move(name);
  n->has_app = k == Term::Kind::app;
  for (const auto& a : args) {
    n->ground = n->ground && a.is_ground();
    n->has_app = n->has_app || a.contains_app();
  }
  n->args = std::move(args);
  return n;
}
}  // namespace

Term Term::app(std::string symbol, std::vector<Term> args) {
  return Term(compound(Kind::app, std::move(symbol), std::move(args)));
}

Term Term::format_app(std::string format, std::vector<Term> args) {
  return Term(compound(Kind::format_app, std::move(format), std::move(args)));
}

Term Term::tuple(std::vector<Term> items) { return Term(compound(Kind::tuple, {}, std::move(items))); }

Term Term::bits(Bytes bytes) {
  auto n = make_node(Kind::bit_lit);
  n->bytes = std::move(bytes);
  return Term(std::move(n));
}

Term Term::nat(Natural value) {
  auto n = make_node(Kind::nat_lit);
  n->natural = std::move(value);
  return Term(std::move(n));
}

Term Term::from_value(const Value& v) {
  if (v.is_natural()) return nat(v.as_natural());
  return bits(v.as_bytes());
}

Term::Kind Term::kind() const { return node_->kind; }
const std::string& Term::name() const { return node_->name; }
Sort Term::sort() const { return node_->sort; }
const Bytes& Term::bytes() const { return node_->bytes; }
const Natural& Term::natural() const { return node_->natural; }
const std::vector<Term>& Term::args() const { return node_->args; }
bool Term::is_ground() const { return node_->ground; }
bool Term::contains_app() const { return node_->has_app; }

int compare(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return 0;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.kind != y.kind) return x.kind < y.kind ? -1 : 1;
  auto cmp3 = [](auto&& l, auto&& r) { return l < r ? -1 : (r < l ? 1 : 0); };
  switch (x.kind) {
    case Term::Kind::variable:
      if (int c = x.name.compare(y.name)) return c < 0 ? -1 : 1;
      return cmp3(static_cast<int>(x.sort), static_cast<int>(y.sort));
    case Term::Kind::fresh_name:
      if (int c = x.name.compare(y.name)) return c < 0 ? -1 : 1;
      return 0;
    case Term::Kind::pub_name:
    case Term::Kind::bit_lit:
      return cmp3(x.bytes, y.bytes);
    case Term::Kind::nat_lit:
      return x.natural.compare(y.natural) < 0 ? -1 : (x.natural == y.natural ? 0 : 1);
    case Term::Kind::app:
    case Term::Kind::format_app:
    case Term::Kind::tuple: {
      if (int c = x.name.compare(y.name)) return c < 0 ? -1 : 1;
      std::size_t n = std::min(x.args.size(), y.args.size());
      for (std::size_t i = 0; i < n; ++i) {
        if (int c = compare(x.args[i], y.args[i])) return c;
      }
      return cmp3(x.args.size(), y.args.size());
    }
  }
  return 0;
}

std::string pub_literal(std::span<const std::uint8_t> bytes) {
  bool printable = !bytes.empty();
  for (auto b : bytes) {
    if (b < 0x20 || b > 0x7e || b == '\'' || b == '\\') printable = false;
  }
  if (printable && bytes.size() >= 2 && bytes[0] == '0' && bytes[1] == 'x') printable = false;
  if (bytes.empty()) return "''";
  if (printable) return "'" + std::string(bytes.begin(), bytes.end()) + "'";
  return "'0x" + to_hex(bytes) + "'";
}

namespace {
void join_terms(std::ostringstream& os, const std::vector<Term>& ts) {
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (i) os << ", ";
    os << to_string(ts[i]);
  }
}
}  // namespace

std::string to_string(const Term& t) {
  std::ostringstream os;
  switch (t.kind()) {
    case Term::Kind::variable:
      switch (t.sort()) {
        case Sort::fresh: os << '~'; break;
        case Sort::pub: os << '$'; break;
        case Sort::nat: os << '%'; break;
        case Sort::msg: break;
      }
      os << t.name();
      break;
    case Term::Kind::pub_name: os << pub_literal(t.bytes()); break;
    case Term::Kind::fresh_name: os << "~'" << t.name() << "'"; break;
    case Term::Kind::app:
    case Term::Kind::format_app:
      os << t.name() << '(';
      join_terms(os, t.args());
      os << ')';
      break;
    case Term::Kind::bit_lit: os << "0x" << to_hex(t.bytes()); break;
    case Term::Kind::nat_lit: os << '%' << t.natural().str(); break;
    case Term::Kind::tuple:
      os << '<';
      join_terms(os, t.args());
      os << '>';
      break;
  }
  return os.str();
}

void collect_vars(const Term& t, std::vector<Term>& out) {
  if (t.is_ground()) return;
  if (t.is(Term::Kind::variable) || t.is(Term::Kind::fresh_name)) {
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    return;
  }
  for (const auto& a : t.args()) collect_vars(a, out);
}

std::vector<Term> vars_of(const Term& t) {
  std::vector<Term> out;
  collect_vars(t, out);
  return out;
}

// Facts ---------------------------------------------------------------------

std::string to_string(const Fact& f) {
  std::ostringstream os;
  if (f.persistent) os << '!';
  os << f.symbol << '(';
  join_terms(os, f.args);
  os << ')';
  return os.str();
}

std::strong_ordering operator<=>(const GroundFact& a, const GroundFact& b) {
  if (auto c = a.symbol <=> b.symbol; c != 0) return c;
  if (auto c = a.persistent <=> b.persistent; c != 0) return c;
  return a.args <=> b.args;
}

std::string to_string(const GroundFact& f) {
  std::ostringstream os;
  if (f.persistent) os << '!';
  os << f.symbol << '(';
  for (std::size_t i = 0; i < f.args.size(); ++i) {
    if (i) os << ", ";
    os << f.args[i].to_string();
  }
  os << ')';
  return os.str();
}

namespace {
struct BySymbol {
  bool operator()(const FactMultiset::Entry& e, std::string_view s) const { return e.fact->symbol < s; }
  bool operator()(std::string_view s, const FactMultiset::Entry& e) const { return s < e.fact->symbol; }
  bool operator()(const GroundFactRef& f, std::string_view s) const { return f->symbol < s; }
  bool operator()(std::string_view s, const GroundFactRef& f) const { return s < f->symbol; }
};
}  // namespace

void FactMultiset::insert(GroundFact f) { insert(std::make_shared<const GroundFact>(std::move(f))); }

void FactMultiset::insert(const GroundFactRef& f) {
  if (f->persistent) {
    auto it = std::lower_bound(persistent_.begin(), persistent_.end(), f,
                               [](const GroundFactRef& a, const GroundFactRef& b) { return *a < *b; });
    if (it == persistent_.end() || **it != *f) persistent_.insert(it, f);
    return;
  }
  auto it = std::lower_bound(linear_.begin(), linear_.end(), f,
                             [](const Entry& a, const GroundFactRef& b) { return *a.fact < *b; });
  if (it != linear_.end() && *it->fact == *f) {
    ++it->count;
  } else {
    linear_.insert(it, Entry{f, 1});
  }
}

bool FactMultiset::remove_one(const GroundFact& f) {
  if (f.persistent) return contains(f);
  auto it = std::lower_bound(linear_.begin(), linear_.end(), f,
                             [](const Entry& a, const GroundFact& b) { return *a.fact < b; });
  if (it == linear_.end() || *it->fact != f) return false;
  if (--it->count == 0) linear_.erase(it);
  return true;
}

std::size_t FactMultiset::count(const GroundFact& f) const {
  if (f.persistent) {
    return std::binary_search(persistent_.begin(), persistent_.end(), f,
                              [](const auto& a, const auto& b) {
                                if constexpr (std::is_same_v<std::decay_t<decltype(a)>, GroundFactRef>) {
                                  return *a < b;
                                } else {
                                  return a < *b;
                                }
                              })
               ? 1
               : 0;
  }
  auto it = std::lower_bound(linear_.begin(), linear_.end(), f,
                             [](const Entry& a, const GroundFact& b) { return *a.fact < b; });
  if (it == linear_.end() || *it->fact != f) return 0;
  return it->count;
}

std::size_t FactMultiset::linear_size() const {
  std::size_t n = 0;
  for (const auto& e : linear_) n += e.count;
  return n;
}

std::span<const FactMultiset::Entry> FactMultiset::linear_with(std::string_view symbol) const {
  auto [lo, hi] = std::equal_range(linear_.begin(), linear_.end(), symbol, BySymbol{});
  return {lo, hi};
}

std::span<const GroundFactRef> FactMultiset::persistent_with(std::string_view symbol) const {
  auto [lo, hi] = std::equal_range(persistent_.begin(), persistent_.end(), symbol, BySymbol{});
  return {lo, hi};
}

bool operator==(const FactMultiset& a, const FactMultiset& b) { return (a <=> b) == 0; }

std::strong_ordering operator<=>(const FactMultiset& a, const FactMultiset& b) {
  auto cmp_entries = [](std::span<const FactMultiset::Entry> x, std::span<const FactMultiset::Entry> y) {
    std::size_t n = std::min(x.size(), y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i].fact != y[i].fact) {
        if (auto c = *x[i].fact <=> *y[i].fact; c != 0) return c;
      }
      if (auto c = x[i].count <=> y[i].count; c != 0) return c;
    }
    return x.size() <=> y.size();
  };
  if (auto c = cmp_entries(a.linear_, b.linear_); c != 0) return c;
  std::size_t n = std::min(a.persistent_.size(), b.persistent_.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a.persistent_[i] == b.persistent_[i]) continue;
    if (auto c = *a.persistent_[i] <=> *b.persistent_[i]; c != 0) return c;
  }
  return a.persistent_.size() <=> b.persistent_.size();
}

std::string to_string(const FactMultiset& s) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (const auto& e : s.linear()) {
    for (std::size_t i = 0; i < e.count; ++i) {
      os << (first ? "" : ", ") << to_string(*e.fact);
      first = false;
    }
  }
  for (const auto& f : s.persistent()) {
    os << (first ? "" : ", ") << to_string(*f);
    first = false;
  }
  os << '}';
  return os.str();
}

// Substitution --------------------------------------------------------------

const Value* Substitution::find(const std::string& var) const {
  auto it = map_.find(var);
  return it == map_.end() ? nullptr : &it->second;
}

bool Substitution::bind(const std::string& var, const Value& v) {
  auto [it, inserted] = map_.emplace(var, v);
  return inserted || it->second == v;
}

std::optional<Substitution> Substitution::compose(const Substitution& other) const {
  Substitution out = *this;
  for (const auto& [k, v] : other.map_) {
    if (!out.bind(k, v)) return std::nullopt;
  }
  return out;
}

std::string to_string(const Substitution& s) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (const auto& [k, v] : s.bindings()) {
    os << (first ? "" : ", ") << k << "=" << v.to_string();
    first = false;
  }
  os << '}';
  return os.str();
}

std::string to_string(const ProgramEvent& e) {
  std::ostringstream os;
  os << e.name << '(';
  for (std::size_t i = 0; i < e.args.size(); ++i) {
    if (i) os << ", ";
    os << Value::bytes(e.args[i]).to_string();
  }
  os << ") -> " << Value::bytes(e.ret).to_string();
  return os.str();
}

std::string to_string(const TriggerPattern& t) {
  std::ostringstream os;
  os << t.function << '(';
  join_terms(os, t.args);
  os << ") -> " << to_string(t.result);
  return os.str();
}

// Matching ------------------------------------------------------------------

namespace {

std::string var_key(const Term& t) {
  if (t.is(Term::Kind::fresh_name)) return "~'" + t.name() + "'";
  return t.name();
}

bool sort_admits(Sort s, const Value& v) {
  switch (s) {
    case Sort::nat: return v.is_natural();
    case Sort::fresh:
    case Sort::pub: return v.is_bytes();
    case Sort::msg: return true;
  }
  return false;
}

bool bound_under(const Term& t, const Substitution& s) {
  if (t.is_ground()) return true;
  if (t.is(Term::Kind::variable) || t.is(Term::Kind::fresh_name)) return s.contains(var_key(t));
  for (const auto& a : t.args()) {
    if (!bound_under(a, s)) return false;
  }
  return true;
}

bool match_into(const Value& v, const Term& p, Substitution& s, const FormatRegistry& formats) {
  switch (p.kind()) {
    case Term::Kind::variable:
      if (!sort_admits(p.sort(), v)) return false;
      return s.bind(p.name(), v);
    case Term::Kind::fresh_name: return v.is_bytes() && s.bind(var_key(p), v);
    case Term::Kind::pub_name:
    case Term::Kind::bit_lit: return v.is_bytes() && v.as_bytes() == p.bytes();
    case Term::Kind::nat_lit: return v.is_natural() && v.as_natural() == p.natural();
    case Term::Kind::app:
    case Term::Kind::tuple: return false;
    case Term::Kind::format_app: {
      if (!v.is_bytes()) return false;
      if (bound_under(p, s)) {
        try {
          return evaluate(p, s, formats) == v;
        } catch (const EvalError&) {
          return false;
        }
      }
      const FormatDef* def = formats.find(p.name());
      if (def == nullptr || !def->parseable || def->params.size() != p.args().size()) return false;
      auto parsed = fs_match(*def, v.as_bytes());
      if (!parsed) return false;
      for (std::size_t i = 0; i < def->params.size(); ++i) {
        auto it = parsed->find(def->params[i]);
        if (it == parsed->end()) return false;
        if (!match_into(it->second, p.args()[i], s, formats)) return false;
      }
      return true;
    }
  }
  return false;
}

bool match_term(const Term& g, const Term& p, Substitution& s, const FormatRegistry& formats) {
  switch (g.kind()) {
    case Term::Kind::variable:
    case Term::Kind::fresh_name: throw std::invalid_argument("mgs: left-hand term is not ground");
    case Term::Kind::app:
    case Term::Kind::tuple: {
      if (p.kind() != g.kind() || p.name() != g.name() || p.args().size() != g.args().size()) return false;
      for (std::size_t i = 0; i < g.args().size(); ++i) {
        if (!match_term(g.args()[i], p.args()[i], s, formats)) return false;
      }
      return true;
    }
    case Term::Kind::format_app:
      if (!g.is_ground() || g.contains_app()) {
        if (p.kind() != g.kind() || p.name() != g.name() || p.args().size() != g.args().size()) return false;
        for (std::size_t i = 0; i < g.args().size(); ++i) {
          if (!match_term(g.args()[i], p.args()[i], s, formats)) return false;
        }
        return true;
      }
      return match_into(evaluate(g, {}, formats), p, s, formats);
    case Term::Kind::pub_name:
    case Term::Kind::bit_lit: return match_into(Value::bytes(g.bytes()), p, s, formats);
    case Term::Kind::nat_lit: return match_into(Value::natural(g.natural()), p, s, formats);
  }
  return false;
}

}  // namespace

std::optional<Substitution> mgs(const Value& ground, const Term& pattern, const FormatRegistry& formats,
                                const Substitution& seed) {
  Substitution s = seed;
  if (!match_into(ground, pattern, s, formats)) return std::nullopt;
  return s;
}

std::optional<Substitution> mgs(const Term& ground, const Term& pattern, const FormatRegistry& formats,
                                const Substitution& seed) {
  Substitution s = seed;
  if (!match_term(ground, pattern, s, formats)) return std::nullopt;
  return s;
}

std::optional<Substitution> mgs(const ProgramEvent& event, const TriggerPattern& trigger,
                                const FormatRegistry& formats, const Substitution& seed) {
  if (event.name != trigger.function || event.args.size() != trigger.args.size()) return std::nullopt;
  Substitution s = seed;
  for (std::size_t i = 0; i < event.args.size(); ++i) {
    if (!match_into(Value::bytes(event.args[i]), trigger.args[i], s, formats)) return std::nullopt;
  }
  if (!match_into(Value::bytes(event.ret), trigger.result, s, formats)) return std::nullopt;
  return s;
}

Term apply_subst(const Term& t, const Substitution& s, const FormatRegistry& formats) {
  if (t.is_ground() && !t.is(Term::Kind::format_app)) return t;
  switch (t.kind()) {
    case Term::Kind::variable:
    case Term::Kind::fresh_name: {
      const Value* v = s.find(var_key(t));
      return v ? Term::from_value(*v) : t;
    }
    case Term::Kind::app:
    case Term::Kind::tuple: {
      std::vector<Term> args;
      args.reserve(t.args().size());
      for (const auto& a : t.args()) args.push_back(apply_subst(a, s, formats));
      return t.is(Term::Kind::app) ? Term::app(t.name(), std::move(args)) : Term::tuple(std::move(args));
    }
    case Term::Kind::format_app: {
      std::vector<Term> args;
      args.reserve(t.args().size());
      bool literal = true;
      for (const auto& a : t.args()) {
        args.push_back(apply_subst(a, s, formats));
        auto k = args.back().kind();
        literal = literal && (k == Term::Kind::pub_name || k == Term::Kind::bit_lit || k == Term::Kind::nat_lit);
      }
      Term out = Term::format_app(t.name(), std::move(args));
      if (!literal) return out;
      return Term::from_value(evaluate(out, {}, formats));
    }
    default: return t;
  }
}

TriggerPattern apply_subst(const TriggerPattern& t, const Substitution& s, const FormatRegistry& formats) {
  TriggerPattern out{t.function, {}, apply_subst(t.result, s, formats)};
  for (const auto& a : t.args) out.args.push_back(apply_subst(a, s, formats));
  return out;
}

Value evaluate(const Term& t, const Substitution& s, const FormatRegistry& formats) {
  switch (t.kind()) {
    case Term::Kind::variable:
    case Term::Kind::fresh_name: {
      const Value* v = s.find(var_key(t));
      if (!v) throw EvalError("unbound variable " + to_string(t));
      return *v;
    }
    case Term::Kind::pub_name:
    case Term::Kind::bit_lit: return Value::bytes(t.bytes());
    case Term::Kind::nat_lit: return Value::natural(t.natural());
    case Term::Kind::format_app: {
      const FormatDef* def = formats.find(t.name());
      if (!def) throw EvalError("unknown format " + t.name());
      if (def->params.size() != t.args().size()) throw EvalError("format " + t.name() + " arity mismatch");
      Bindings b;
      for (std::size_t i = 0; i < def->params.size(); ++i) {
        Value v = evaluate(t.args()[i], s, formats);
        auto [it, inserted] = b.emplace(def->params[i], v);
        if (!inserted && it->second != v) {
          throw FormatError("format " + t.name() + ": conflicting values for " + def->params[i]);
        }
      }
      return Value::bytes(fs_construct(*def, b));
    }
    case Term::Kind::app:
      throw EvalError("function application " + to_string(t) + " has no bitstring value");
    case Term::Kind::tuple: throw EvalError("tuple " + to_string(t) + " has no bitstring value");
  }
  throw EvalError("unreachable");
}

GroundFact instantiate(const Fact& f, const Substitution& s, const FormatRegistry& formats) {
  GroundFact g{f.symbol, f.persistent, {}};
  g.args.reserve(f.args.size());
  for (const auto& a : f.args) g.args.push_back(evaluate(a, s, formats));
  return g;
}

namespace {

struct MatchSearch {
  const FactMultiset& state;
  std::span<const Fact> premise;
  const FormatRegistry& formats;
  std::vector<PremiseMatch> out;
  std::set<Substitution> seen;
  std::vector<const FactMultiset::Entry*> used;
  std::vector<GroundFactRef> consumed;

  bool match_args(const GroundFact& g, const Fact& p, Substitution& s) const {
    if (g.args.size() != p.args.size()) return false;
    for (std::size_t k = 0; k < g.args.size(); ++k) {
      if (!match_into(g.args[k], p.args[k], s, formats)) return false;
    }
    return true;
  }

  void run(std::size_t i, const Substitution& s) {
    if (i == premise.size()) {
      if (seen.insert(s).second) out.push_back(PremiseMatch{s, consumed});
      return;
    }
    const Fact& p = premise[i];
    if (p.persistent) {
      for (const auto& ref : state.persistent_with(p.symbol)) {
        Substitution t = s;
        if (match_args(*ref, p, t)) run(i + 1, t);
      }
      return;
    }
    for (const auto& entry : state.linear_with(p.symbol)) {
      std::size_t taken = std::count(used.begin(), used.end(), &entry);
      if (taken >= entry.count) continue;
      Substitution t = s;
      if (!match_args(*entry.fact, p, t)) continue;
      used.push_back(&entry);
      consumed.push_back(entry.fact);
      run(i + 1, t);
      used.pop_back();
      consumed.pop_back();
    }
  }
};

}  // namespace

std::vector<PremiseMatch> conflict_set(const FactMultiset& state, std::span<const Fact> premise,
                                       const FormatRegistry& formats, const Substitution& seed) {
  MatchSearch search{state, premise, formats, {}, {}, {}, {}};
  search.run(0, seed);
  return std::move(search.out);
}

std::vector<Substitution> multiset_match(const FactMultiset& state, std::span<const Fact> premise,
                                         const FormatRegistry& formats) {
  std::vector<Substitution> out;
  for (auto& m : conflict_set(state, premise, formats)) out.push_back(std::move(m.sigma));
  return out;
}

}  // namespace msrmon
