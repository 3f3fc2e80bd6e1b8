#include "msrmon/spec.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace msrmon {

SpecError::SpecError(const std::string& msg, SourcePos pos)
    : std::runtime_error(pos.line > 0 ? "line " + std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + msg
                                      : msg),
      pos_(pos) {}

const FunctionSymbol* SpecFile::find_function(const std::string& name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

const std::vector<FunctionSymbol>& implicit_functions() {
  static const std::vector<FunctionSymbol> kImplicit = [] {
    std::vector<FunctionSymbol> v;
    for (auto [name, arity] : std::vector<std::pair<const char*, std::size_t>>{
             {"h", 1}, {"hmac", 2}, {"senc", 2}, {"sdec", 2}, {"aenc", 2}, {"adec", 2},
             {"pk", 1}, {"sign", 2}, {"verify", 3}, {"fst", 1}, {"snd", 1}, {"pair", 2}}) {
      v.push_back(FunctionSymbol{name, arity, FunctionSymbol::Kind::user, {}});
    }
    return v;
  }();
  return kImplicit;
}

namespace {

// Preprocessor --------------------------------------------------------------

std::string preprocess(std::string_view source, std::set<std::string>& flags) {
  struct Frame {
    bool parent_active;
    bool condition;
    bool in_else;
  };
  std::vector<Frame> stack;
  auto active = [&] {
    for (const auto& f : stack) {
      if (!f.parent_active) return false;
      if (f.in_else ? f.condition : !f.condition) return false;
    }
    return true;
  };

  std::string out;
  std::istringstream in{std::string(source)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#' && first + 1 < line.size() &&
        std::isalpha(static_cast<unsigned char>(line[first + 1]))) {
      std::istringstream words(line.substr(first + 1));
      std::string directive, arg;
      words >> directive >> arg;
      SourcePos pos{lineno, static_cast<int>(first) + 1};
      if (directive == "ifdef" || directive == "ifndef") {
        if (arg.empty()) throw SpecError("#" + directive + " needs a flag", pos);
        bool cond = flags.contains(arg);
        if (directive == "ifndef") cond = !cond;
        stack.push_back(Frame{active(), cond, false});
      } else if (directive == "else") {
        if (stack.empty() || stack.back().in_else) throw SpecError("#else without #ifdef", pos);
        stack.back().in_else = true;
      } else if (directive == "endif") {
        if (stack.empty()) throw SpecError("#endif without #ifdef", pos);
        stack.pop_back();
      } else if (directive == "define") {
        if (active() && !arg.empty()) flags.insert(arg);
      } else {
        throw SpecError("unknown preprocessor directive #" + directive, pos);
      }
      out += '\n';
      continue;
    }
    if (active()) out += line;
    out += '\n';
  }
  if (!stack.empty()) throw SpecError("unterminated #ifdef at end of file", {lineno, 1});
  return out;
}

// Lexer ---------------------------------------------------------------------

enum class Tok { ident, quoted, dquoted, number, hex, punct, end };

struct Token {
  Tok kind;
  std::string text;
  SourcePos pos;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1, col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (src.substr(i, 2) == "//") {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (src.substr(i, 2) == "/*") {
      SourcePos start{line, col};
      advance(2);
      while (i < src.size() && src.substr(i, 2) != "*/") advance(1);
      if (i >= src.size()) throw SpecError("unterminated comment", start);
      advance(2);
      continue;
    }
    SourcePos pos{line, col};
    if (c == '\'' || c == '"') {
      std::size_t j = i + 1;
      while (j < src.size() && src[j] != c && src[j] != '\n') ++j;
      if (j >= src.size() || src[j] != c) throw SpecError("unterminated quoted literal", pos);
      out.push_back({c == '\'' ? Tok::quoted : Tok::dquoted, std::string(src.substr(i + 1, j - i - 1)), pos});
      advance(j - i + 1);
      continue;
    }
    if (c == '0' && i + 1 < src.size() && (src[i + 1] == 'x' || src[i + 1] == 'X')) {
      std::size_t j = i + 2;
      while (j < src.size() && std::isxdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({Tok::hex, std::string(src.substr(i + 2, j - i - 2)), pos});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({Tok::number, std::string(src.substr(i, j - i)), pos});
      advance(j - i);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '#') {
      std::size_t j = i + 1;
      while (j < src.size() && is_ident(src[j])) ++j;
      out.push_back({Tok::ident, std::string(src.substr(i, j - i)), pos});
      advance(j - i);
      continue;
    }
    for (std::string_view p : {"--[", "]->", "-->"}) {
      if (src.substr(i, p.size()) == p) {
        out.push_back({Tok::punct, std::string(p), pos});
        advance(p.size());
        goto next;
      }
    }
    out.push_back({Tok::punct, std::string(1, c), pos});
    advance(1);
  next:;
  }
  out.push_back({Tok::end, "", {line, col}});
  return out;
}

// Parser --------------------------------------------------------------------

const std::set<std::string> kTopLevel = {"rule",    "lemma",      "restriction", "functions", "equations",
                                         "macros",  "builtins",   "mode",        "end",       "heuristic",
                                         "tactic",  "predicates", "options",     "theory",    "axiom"};

Bytes literal_bytes(const std::string& text) {
  if (text.size() >= 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X') && text.size() % 2 == 0) {
    if (auto b = from_hex(std::string_view(text).substr(2))) return *b;
  }
  return to_bytes(text);
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool at(std::string_view text) const {
    return (peek().kind == Tok::punct || peek().kind == Tok::ident) && peek().text == text;
  }
  bool at_end() const { return peek().kind == Tok::end; }
  Token take() {
    Token t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    std::string found = at_end() ? "end of input" : "'" + peek().text + "'";
    throw SpecError(msg + ", found " + found, peek().pos);
  }
  void expect(std::string_view text) {
    if (!at(text)) fail("expected '" + std::string(text) + "'");
    take();
  }
  bool accept(std::string_view text) {
    if (!at(text)) return false;
    take();
    return true;
  }
  std::string ident(const char* what) {
    if (peek().kind != Tok::ident) fail(std::string("expected ") + what);
    return take().text;
  }

  Term term() {
    const Token& t = peek();
    if (accept("<")) {
      std::vector<Term> items;
      if (!at(">")) {
        items.push_back(term());
        while (accept(",")) items.push_back(term());
      }
      expect(">");
      return Term::tuple(std::move(items));
    }
    if (accept("~")) {
      if (peek().kind == Tok::quoted) return Term::fresh_name(take().text);
      return Term::var(ident("variable name"), Sort::fresh);
    }
    if (accept("$")) return Term::var(ident("variable name"), Sort::pub);
    if (accept("%")) {
      if (peek().kind == Tok::number) return Term::nat(Natural(take().text));
      return Term::var(ident("variable name"), Sort::nat);
    }
    switch (t.kind) {
      case Tok::quoted: return Term::pub(literal_bytes(take().text));
      case Tok::number: return Term::nat(Natural(take().text));
      case Tok::hex: {
        Token h = take();
        auto b = from_hex(h.text);
        if (!b) throw SpecError("bit literal needs an even number of hex digits", h.pos);
        return Term::bits(*b);
      }
      case Tok::ident: {
        Token name = take();
        if (accept("(")) {
          std::vector<Term> args;
          if (!at(")")) {
            args.push_back(term());
            while (accept(",")) args.push_back(term());
          }
          expect(")");
          positions_.emplace_back(name.text, name.pos);
          return Term::app(name.text, std::move(args));
        }
        return Term::var(name.text);
      }
      default: fail("expected a term");
    }
  }

  Fact fact() {
    bool persistent = accept("!");
    SourcePos pos = peek().pos;
    std::string symbol = ident("fact symbol");
    if (!std::isupper(static_cast<unsigned char>(symbol[0])) && symbol[0] != '_') {
      throw SpecError("fact symbol " + symbol + " must start with an upper-case letter", pos);
    }
    expect("(");
    std::vector<Term> args;
    if (!at(")")) {
      args.push_back(term());
      while (accept(",")) args.push_back(term());
    }
    expect(")");
    fact_positions_.emplace_back(symbol, pos);
    return Fact{symbol, persistent, std::move(args)};
  }

  std::vector<Fact> fact_list(std::string_view close) {
    std::vector<Fact> out;
    if (at(close)) return out;
    out.push_back(fact());
    while (accept(",")) out.push_back(fact());
    return out;
  }

  std::vector<std::pair<std::string, std::string>> attributes() {
    std::vector<std::pair<std::string, std::string>> out;
    expect("[");
    while (!at("]")) {
      std::string key = ident("attribute name");
      std::string value;
      if (accept("=")) {
        if (peek().kind == Tok::end) fail("expected attribute value");
        value = take().text;
      }
      out.emplace_back(key, value);
      if (!accept(",")) break;
    }
    expect("]");
    return out;
  }

  void skip_section(SpecFile& spec, const std::string& keyword) {
    SourcePos pos = take().pos;
    std::string label = peek().kind == Tok::ident ? peek().text : "";
    spec.warnings.push_back("line " + std::to_string(pos.line) + ": skipped " + keyword +
                            (label.empty() ? "" : " " + label));
    while (!at_end()) {
      if (peek().kind == Tok::ident && kTopLevel.contains(peek().text)) break;
      take();
    }
  }

  void parse(SpecFile& spec) {
    bool wrapped = false;
    if (accept("theory")) {
      spec.theory = ident("theory name");
      expect("begin");
      wrapped = true;
    }
    while (!at_end()) {
      if (at("end")) {
        if (!wrapped) fail("'end' without 'theory'");
        take();
        if (!at_end()) fail("expected end of input after 'end'");
        return;
      }
      if (accept("functions")) {
        expect(":");
        do {
          SourcePos pos = peek().pos;
          FunctionSymbol f;
          f.name = ident("function name");
          expect("/");
          if (peek().kind != Tok::number) fail("expected arity");
          f.arity = std::stoul(take().text);
          if (at("[")) {
            for (auto& [k, v] : attributes()) f.attributes.push_back(v.empty() ? k : k + "=" + v);
          }
          if (spec.find_function(f.name)) throw SpecError("duplicate function symbol " + f.name, pos);
          spec.functions.push_back(std::move(f));
        } while (accept(","));
      } else if (accept("builtins")) {
        expect(":");
        do {
          spec.builtins.push_back(ident("builtin name"));
        } while (accept(","));
      } else if (accept("equations")) {
        expect(":");
        do {
          Term l = term();
          expect("=");
          Term r = term();
          spec.equations.push_back({l, r});
        } while (accept(","));
      } else if (accept("macros")) {
        expect(":");
        do {
          SourcePos pos = peek().pos;
          MacroDef m;
          m.name = ident("macro name");
          expect("(");
          if (!at(")")) {
            m.params.push_back(ident("parameter"));
            while (accept(",")) m.params.push_back(ident("parameter"));
          }
          expect(")");
          expect("=");
          m.body = term();
          for (const auto& existing : spec.macros) {
            if (existing.name == m.name) throw SpecError("duplicate macro " + m.name, pos);
          }
          macro_positions_.push_back(pos);
          spec.macros.push_back(std::move(m));
        } while (accept(","));
      } else if (accept("mode")) {
        expect(":");
        SourcePos pos = peek().pos;
        std::string m = ident("mode");
        if (m == "rewrite") spec.mode = SpecMode::rewrite;
        else if (m == "monitor") spec.mode = SpecMode::monitor;
        else throw SpecError("unknown mode " + m, pos);
      } else if (at("rule")) {
        spec.rules.push_back(rule());
      } else if (peek().kind == Tok::ident && kTopLevel.contains(peek().text)) {
        skip_section(spec, peek().text);
      } else {
        fail("expected a section or rule");
      }
    }
    if (wrapped) fail("expected 'end'");
  }

  RuleAst rule() {
    RuleAst r;
    r.pos = take().pos;
    r.name = ident("rule name");
    if (at("[")) {
      r.attributes = attributes();
      for (const auto& [k, v] : r.attributes) {
        if (k == "role") r.role = v;
      }
    }
    expect(":");
    if (accept("let")) {
      while (!at("in")) {
        SourcePos pos = peek().pos;
        std::string var = ident("let variable");
        expect("=");
        for (const auto& l : r.lets) {
          if (l.var == var) throw SpecError("let variable " + var + " bound twice", pos);
        }
        r.lets.push_back({var, term()});
      }
      expect("in");
    }
    expect("[");
    r.premise = fact_list("]");
    expect("]");
    if (accept("-->")) {
    } else {
      expect("--[");
      r.actions = fact_list("]->");
      expect("]->");
    }
    expect("[");
    r.conclusion = fact_list("]");
    expect("]");
    return r;
  }

  SourcePos position_of_app(const std::string& name) const {
    for (const auto& [n, p] : positions_) {
      if (n == name) return p;
    }
    return {};
  }
  SourcePos position_of_fact(const std::string& name) const {
    for (const auto& [n, p] : fact_positions_) {
      if (n == name) return p;
    }
    return {};
  }
  const std::vector<SourcePos>& macro_positions() const { return macro_positions_; }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<std::pair<std::string, SourcePos>> positions_;
  std::vector<std::pair<std::string, SourcePos>> fact_positions_;
  std::vector<SourcePos> macro_positions_;
};

// Symbol resolution ---------------------------------------------------------

const std::set<std::string> kReservedActions = {"Trig", "Hint", "Eq", "Emit"};

struct Resolver {
  const SpecFile& spec;
  const Parser* parser;

  SourcePos where(const std::string& name) const { return parser ? parser->position_of_app(name) : SourcePos{}; }

  Term resolve(const Term& t) const {
    switch (t.kind()) {
      case Term::Kind::app: {
        std::vector<Term> args;
        for (const auto& a : t.args()) args.push_back(resolve(a));
        if (const FormatDef* def = spec.formats.find(t.name())) {
          if (def->params.size() != args.size()) {
            throw SpecError("format " + t.name() + " used with " + std::to_string(args.size()) +
                                " arguments, defined with " + std::to_string(def->params.size()),
                            where(t.name()));
          }
          return Term::format_app(t.name(), std::move(args));
        }
        const FunctionSymbol* f = spec.find_function(t.name());
        if (!f) {
          for (const auto& g : implicit_functions()) {
            if (g.name == t.name()) f = &g;
          }
        }
        if (!f) {
          throw SpecError("undeclared function symbol " + t.name() + "/" + std::to_string(args.size()),
                          where(t.name()));
        }
        if (f->arity != args.size()) {
          throw SpecError("function symbol " + t.name() + " used with " + std::to_string(args.size()) +
                              " arguments, declared " + t.name() + "/" + std::to_string(f->arity),
                          where(t.name()));
        }
        return Term::app(t.name(), std::move(args));
      }
      case Term::Kind::format_app:
      case Term::Kind::tuple: {
        std::vector<Term> args;
        for (const auto& a : t.args()) args.push_back(resolve(a));
        return t.is(Term::Kind::tuple) ? Term::tuple(std::move(args)) : Term::format_app(t.name(), std::move(args));
      }
      default: return t;
    }
  }

  Fact resolve(const Fact& f) const {
    Fact out{f.symbol, f.persistent, {}};
    for (const auto& a : f.args) out.args.push_back(resolve(a));
    return out;
  }
};

void resolve_spec(SpecFile& spec, const Parser* parser) {
  for (std::size_t i = 0; i < spec.macros.size(); ++i) {
    const auto& m = spec.macros[i];
    SourcePos pos = parser && i < parser->macro_positions().size() ? parser->macro_positions()[i] : SourcePos{};
    if (const FunctionSymbol* f = spec.find_function(m.name); f && f->arity != m.params.size()) {
      throw SpecError("macro " + m.name + " has " + std::to_string(m.params.size()) + " parameters, declared " +
                          m.name + "/" + std::to_string(f->arity),
                      pos);
    }
    try {
      spec.formats.add(compile_format(m.name, m.params, m.body));
    } catch (const FormatError& e) {
      throw SpecError(e.what(), pos);
    }
  }
  for (auto& f : spec.functions) {
    if (spec.formats.find(f.name)) f.kind = FunctionSymbol::Kind::format;
  }
  for (const auto& w : lint_disjoint(spec.formats)) spec.warnings.push_back(w);

  Resolver res{spec, parser};
  std::map<std::string, std::pair<std::size_t, bool>> fact_arity;
  auto check_fact = [&](const Fact& f) {
    if (kReservedActions.contains(f.symbol)) return;
    auto [it, inserted] = fact_arity.emplace(f.symbol, std::make_pair(f.args.size(), f.persistent));
    SourcePos pos = parser ? parser->position_of_fact(f.symbol) : SourcePos{};
    if (!inserted && it->second.first != f.args.size()) {
      throw SpecError("fact " + f.symbol + " used with " + std::to_string(f.args.size()) + " and " +
                          std::to_string(it->second.first) + " arguments",
                      pos);
    }
    if (!inserted && it->second.second != f.persistent) {
      throw SpecError("fact " + f.symbol + " used both as linear and persistent", pos);
    }
  };
  for (auto& r : spec.rules) {
    for (auto& l : r.lets) l.value = res.resolve(l.value);
    for (auto* list : {&r.premise, &r.actions, &r.conclusion}) {
      for (auto& f : *list) {
        f = res.resolve(f);
        check_fact(f);
      }
    }
  }
  for (std::size_t i = 0; i < spec.rules.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.rules.size(); ++j) {
      if (spec.rules[i].name == spec.rules[j].name) {
        throw SpecError("duplicate rule " + spec.rules[j].name, spec.rules[j].pos);
      }
    }
  }
}

}  // namespace

SpecFile parse_spec(std::string_view source, const ParseOptions& options) {
  SpecFile spec;
  spec.flags = options.flags;
  std::string text = preprocess(source, spec.flags);
  Parser p(lex(text));
  p.parse(spec);
  resolve_spec(spec, &p);
  return spec;
}

SpecFile parse_spec_file(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot open specification " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str(), options);
}

Term parse_term(std::string_view text, const FormatRegistry& formats) {
  Parser p(lex(text));
  Term t = p.term();
  if (!p.at_end()) p.fail("unexpected input after term");
  SpecFile scratch;
  scratch.formats = formats;
  // Undeclared symbols are accepted here: resolve only format names.
  std::function<Term(const Term&)> walk = [&](const Term& t) -> Term {
    if (!t.is(Term::Kind::app) && !t.is(Term::Kind::tuple) && !t.is(Term::Kind::format_app)) return t;
    std::vector<Term> args;
    for (const auto& a : t.args()) args.push_back(walk(a));
    if (t.is(Term::Kind::tuple)) return Term::tuple(std::move(args));
    if (formats.find(t.name())) return Term::format_app(t.name(), std::move(args));
    return Term::app(t.name(), std::move(args));
  };
  return walk(t);
}

// Printing ------------------------------------------------------------------

namespace {

std::string join_facts(const std::vector<Fact>& facts) {
  std::string out;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    if (i) out += ", ";
    out += to_string(facts[i]);
  }
  return out;
}

std::string print_attrs(const std::vector<std::pair<std::string, std::string>>& attrs) {
  if (attrs.empty()) return "";
  std::string out = " [";
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    if (i) out += ", ";
    out += attrs[i].first;
    if (!attrs[i].second.empty()) out += "=" + attrs[i].second;
  }
  return out + "]";
}

std::string arrow(const std::vector<std::string>& actions) {
  if (actions.empty()) return "-->";
  std::string out = "--[ ";
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i) out += ", ";
    out += actions[i];
  }
  return out + " ]->";
}

std::string pattern_text(const char* tag, const TriggerPattern& p) {
  std::string out = std::string(tag) + "(" + pub_literal(to_bytes(p.function)) + ", <";
  for (std::size_t i = 0; i < p.args.size(); ++i) {
    if (i) out += ", ";
    out += to_string(p.args[i]);
  }
  return out + ">, " + to_string(p.result) + ")";
}

}  // namespace

std::string print_rule(const RuleAst& r) {
  std::ostringstream os;
  os << "rule " << r.name << print_attrs(r.attributes) << ":\n";
  if (!r.lets.empty()) {
    os << "  let\n";
    for (const auto& l : r.lets) os << "    " << l.var << " = " << to_string(l.value) << "\n";
    os << "  in\n";
  }
  std::vector<std::string> acts;
  for (const auto& a : r.actions) acts.push_back(to_string(a));
  os << "  [ " << join_facts(r.premise) << " ] " << arrow(acts) << " [ " << join_facts(r.conclusion) << " ]\n";
  return os.str();
}

std::string print_spec(const SpecFile& spec) {
  std::ostringstream os;
  if (!spec.theory.empty()) os << "theory " << spec.theory << "\nbegin\n\n";
  if (spec.mode == SpecMode::rewrite) os << "mode: rewrite\n\n";
  if (!spec.builtins.empty()) {
    os << "builtins: ";
    for (std::size_t i = 0; i < spec.builtins.size(); ++i) os << (i ? ", " : "") << spec.builtins[i];
    os << "\n\n";
  }
  if (!spec.functions.empty()) {
    os << "functions:\n";
    for (std::size_t i = 0; i < spec.functions.size(); ++i) {
      const auto& f = spec.functions[i];
      os << "  " << f.name << "/" << f.arity;
      if (!f.attributes.empty()) {
        os << " [";
        for (std::size_t k = 0; k < f.attributes.size(); ++k) os << (k ? ", " : "") << f.attributes[k];
        os << "]";
      }
      os << (i + 1 < spec.functions.size() ? ",\n" : "\n\n");
    }
  }
  if (!spec.equations.empty()) {
    os << "equations:\n";
    for (std::size_t i = 0; i < spec.equations.size(); ++i) {
      os << "  " << to_string(spec.equations[i].lhs) << " = " << to_string(spec.equations[i].rhs)
         << (i + 1 < spec.equations.size() ? ",\n" : "\n\n");
    }
  }
  if (!spec.macros.empty()) {
    os << "#ifdef MONITOR\nmacros:\n";
    for (std::size_t i = 0; i < spec.macros.size(); ++i) {
      const auto& m = spec.macros[i];
      os << "  " << m.name << "(";
      for (std::size_t k = 0; k < m.params.size(); ++k) os << (k ? ", " : "") << m.params[k];
      os << ") = " << to_string(m.body) << (i + 1 < spec.macros.size() ? ",\n" : "\n");
    }
    os << "#endif\n\n";
  }
  for (const auto& r : spec.rules) os << print_rule(r) << "\n";
  if (!spec.theory.empty()) os << "end\n";
  return os.str();
}

std::string print_rule(const ExtendedRule& r) {
  std::vector<std::pair<std::string, std::string>> attrs;
  if (!r.role.empty()) attrs.emplace_back("role", r.role);
  static const char* kParts[] = {"original", "start", "mid", "end", "special"};
  attrs.emplace_back("part", kParts[static_cast<int>(r.part)]);
  std::vector<std::string> acts;
  if (r.trigger) acts.push_back(pattern_text("Trig", *r.trigger));
  for (const auto& h : r.hints) acts.push_back(pattern_text("Hint", h));
  for (const auto& e : r.equalities) acts.push_back("Eq(" + to_string(e.lhs) + ", " + to_string(e.rhs) + ")");
  for (const auto& e : r.events) acts.push_back(to_string(e));
  for (const auto& e : r.emits) acts.push_back(pattern_text("Emit", e));
  std::ostringstream os;
  os << "rule " << r.name << print_attrs(attrs) << ":\n  [ " << join_facts(r.premise) << " ] " << arrow(acts)
     << " [ " << join_facts(r.conclusion) << " ]\n";
  return os.str();
}

std::string print_rules(const std::vector<ExtendedRule>& rules) {
  std::string out;
  for (const auto& r : rules) out += print_rule(r) + "\n";
  return out;
}

// Elaboration ---------------------------------------------------------------

std::vector<std::string> roles_of(const SpecFile& spec) {
  std::vector<std::string> roles;
  for (const auto& r : spec.rules) {
    if (r.role && std::find(roles.begin(), roles.end(), *r.role) == roles.end()) roles.push_back(*r.role);
  }
  return roles;
}

std::vector<RuleAst> select_role(const SpecFile& spec, const std::string& role, std::vector<std::string>* warnings) {
  auto roles = roles_of(spec);
  if (roles.empty()) {
    if (warnings) warnings->push_back("specification declares no roles; role " + role + " selects no rules");
    return {};
  }
  if (std::find(roles.begin(), roles.end(), role) == roles.end()) {
    std::string list;
    for (const auto& r : roles) list += (list.empty() ? "" : ", ") + r;
    throw SpecError("unknown role " + role + "; available roles: " + list);
  }
  std::vector<RuleAst> out;
  for (const auto& r : spec.rules) {
    if (!r.role || *r.role == role) out.push_back(r);
  }
  return out;
}

namespace {

Term substitute_var(const Term& t, const std::string& var, const Term& value) {
  if (t.is(Term::Kind::variable) && t.sort() == Sort::msg && t.name() == var) return value;
  if (t.args().empty()) return t;
  std::vector<Term> args;
  for (const auto& a : t.args()) args.push_back(substitute_var(a, var, value));
  switch (t.kind()) {
    case Term::Kind::app: return Term::app(t.name(), std::move(args));
    case Term::Kind::format_app: return Term::format_app(t.name(), std::move(args));
    default: return Term::tuple(std::move(args));
  }
}

bool mentions_var(const Term& t, const std::string& var) {
  if (t.is(Term::Kind::variable)) return t.sort() == Sort::msg && t.name() == var;
  return std::any_of(t.args().begin(), t.args().end(), [&](const Term& a) { return mentions_var(a, var); });
}

bool contains_tuple(const Term& t) {
  if (t.is(Term::Kind::tuple)) return true;
  return std::any_of(t.args().begin(), t.args().end(), contains_tuple);
}

bool is_io_fact(const std::string& s) { return s == "In" || s == "Out" || s == "Fr"; }

TriggerPattern pattern_of(const Fact& f, const std::string& rule) {
  if (f.args.size() != 3 || !f.args[0].is(Term::Kind::pub_name) || !f.args[1].is(Term::Kind::tuple)) {
    throw SpecError("rule " + rule + ": " + f.symbol + " expects ('name', <args>, result), found " + to_string(f));
  }
  const auto& b = f.args[0].bytes();
  return TriggerPattern{std::string(b.begin(), b.end()), f.args[1].args(), f.args[2]};
}

void check_premise_term(const Term& t, const std::string& rule) {
  switch (t.kind()) {
    case Term::Kind::app:
      throw SpecError("rule " + rule + ": premise contains function application " + to_string(t));
    case Term::Kind::tuple: throw SpecError("rule " + rule + ": premise contains tuple pattern " + to_string(t));
    case Term::Kind::format_app:
      for (const auto& a : t.args()) check_premise_term(a, rule);
      break;
    default: break;
  }
}

}  // namespace

RuleAst expand_lets(const RuleAst& rule) {
  RuleAst out = rule;
  out.lets.clear();
  std::vector<LetBinding> done;
  for (const auto& l : rule.lets) {
    if (mentions_var(l.value, l.var)) throw SpecError("let variable " + l.var + " refers to itself", rule.pos);
    Term v = l.value;
    for (const auto& d : done) v = substitute_var(v, d.var, d.value);
    done.push_back({l.var, v});
  }
  auto expand = [&](std::vector<Fact>& facts) {
    for (auto& f : facts) {
      for (auto& a : f.args) {
        for (auto it = done.rbegin(); it != done.rend(); ++it) a = substitute_var(a, it->var, it->value);
      }
    }
  };
  expand(out.premise);
  expand(out.actions);
  expand(out.conclusion);
  return out;
}

Elaboration elaborate(const SpecFile& spec, const std::vector<RuleAst>& rules) {
  Elaboration out;
  std::map<std::string, std::set<std::string>> roles_by_fact;

  for (const auto& src : rules) {
    RuleAst r = expand_lets(src);
    ExtendedRule e;
    e.name = r.name;
    e.origin = r.name;
    e.role = r.role.value_or("");
    e.premise = r.premise;
    e.conclusion = r.conclusion;
    for (std::size_t i = 0; i < r.actions.size(); ++i) {
      const Fact& a = r.actions[i];
      if (a.symbol == "Trig") {
        if (e.trigger) throw SpecError("rule " + r.name + " has more than one trigger", src.pos);
        e.trigger = pattern_of(a, r.name);
      } else if (a.symbol == "Hint") {
        e.hints.push_back(pattern_of(a, r.name));
      } else if (a.symbol == "Emit") {
        e.emits.push_back(pattern_of(a, r.name));
      } else if (a.symbol == "Eq") {
        if (a.args.size() != 2) throw SpecError("rule " + r.name + ": Eq expects two arguments", src.pos);
        e.equalities.push_back({a.args[0], a.args[1], to_string(src.actions[i])});
      } else {
        e.events.push_back(a);
      }
    }
    if (e.trigger && !e.hints.empty()) {
      throw SpecError("rule " + r.name + " carries both a trigger and hints", src.pos);
    }
    for (const auto& f : e.premise) {
      for (const auto& a : f.args) check_premise_term(a, r.name);
    }
    auto no_tuple = [&](const Term& t) {
      if (contains_tuple(t)) {
        throw SpecError("rule " + r.name + ": tuple " + to_string(t) + " has no wire format; define a format", src.pos);
      }
    };
    for (const auto* list : {&e.conclusion, &e.events}) {
      for (const auto& f : *list) std::for_each(f.args.begin(), f.args.end(), no_tuple);
    }
    for (const auto& q : e.equalities) {
      no_tuple(q.lhs);
      no_tuple(q.rhs);
    }
    for (const auto* list : {&e.hints, &e.emits}) {
      for (const auto& p : *list) {
        std::for_each(p.args.begin(), p.args.end(), no_tuple);
        no_tuple(p.result);
      }
    }
    if (e.trigger) {
      std::for_each(e.trigger->args.begin(), e.trigger->args.end(), no_tuple);
      no_tuple(e.trigger->result);
    }
    if (e.trigger && e.trigger->result.contains_app()) {
      throw SpecError("rule " + r.name + ": trigger result may not contain a function application", src.pos);
    }
    if (!e.emits.empty() && spec.mode != SpecMode::rewrite) {
      out.warnings.push_back("rule " + r.name + ": Emit actions have no effect outside rewrite mode");
    }
    if (!e.hints.empty() && spec.mode == SpecMode::rewrite) {
      out.warnings.push_back("rule " + r.name + ": hints in a rewrite layer");
    }

    // Decomposition lints.
    if (r.role) {
      auto state_facts = [](const std::vector<Fact>& fs) {
        std::vector<const Fact*> v;
        for (const auto& f : fs) {
          if (!is_io_fact(f.symbol)) v.push_back(&f);
        }
        return v;
      };
      auto concl = state_facts(e.conclusion);
      if (concl.empty()) {
        out.warnings.push_back("rule " + r.name + ": conclusion contains no state fact");
      }
      for (const auto* list : {&e.premise, &e.conclusion}) {
        for (const auto& f : *list) {
          if (is_io_fact(f.symbol)) continue;
          roles_by_fact[f.symbol].insert(*r.role);
          if (f.persistent) continue;
          if (f.args.empty() || !f.args[0].is(Term::Kind::variable) || f.args[0].sort() != Sort::fresh) {
            out.warnings.push_back("rule " + r.name + ": first argument of state fact " + f.symbol +
                                   " is not a fresh variable");
          }
        }
      }
      std::optional<Term> session;
      for (const auto* f : state_facts(e.premise)) {
        if (!f->persistent && !f->args.empty()) session = f->args[0];
      }
      if (session) {
        for (const auto* f : concl) {
          if (!f->persistent && !f->args.empty() && f->args[0] != *session) {
            out.warnings.push_back("rule " + r.name + ": state fact " + f->symbol + " changes the session argument");
          }
        }
      }
    } else {
      bool makes_setup = std::any_of(e.conclusion.begin(), e.conclusion.end(),
                                     [](const Fact& f) { return f.symbol == "Setup"; });
      if (makes_setup &&
          (e.conclusion.size() > 1 || !e.events.empty() || !e.equalities.empty() || !e.hints.empty())) {
        out.warnings.push_back("rule " + r.name +
                               ": a rule producing Setup must produce nothing else and carry no label");
      }
    }
    out.rules.push_back(std::move(e));
  }

  for (const auto& [fact, roles] : roles_by_fact) {
    if (roles.size() > 1 && fact != "Setup") {
      out.warnings.push_back("state fact " + fact + " is shared between roles");
    }
  }
  for (std::size_t i = 0; i < out.rules.size(); ++i) {
    for (std::size_t j = i + 1; j < out.rules.size(); ++j) {
      for (const auto& h : out.rules[i].hints) {
        for (const auto& g : out.rules[j].hints) {
          if (h == g) {
            out.warnings.push_back("hints not exclusive: rules " + out.rules[i].name + " and " + out.rules[j].name +
                                   " share hint " + to_string(h));
          }
        }
      }
    }
  }
  return out;
}

Elaboration elaborate(const SpecFile& spec) { return elaborate(spec, spec.rules); }

}  // namespace msrmon
