#include "msrmon/formats.hpp"

#include <algorithm>
#include <limits>

namespace msrmon {

DisjointnessError::DisjointnessError(std::string first, std::string second)
    : std::runtime_error("formats " + first + " and " + second + " both accept the same input"),
      first_(std::move(first)),
      second_(std::move(second)) {}

Bytes reverse_bytes(Bytes b) {
  std::reverse(b.begin(), b.end());
  return b;
}

namespace {

Natural decode_be(std::span<const std::uint8_t> b) {
  Natural n = 0;
  for (auto x : b) n = (n << 8) | x;
  return n;
}

Bytes encode_be(const Natural& v, std::uint64_t width) {
  Bytes out(width, 0);
  Natural n = v;
  for (std::uint64_t i = 0; i < width; ++i) {
    out[width - 1 - i] = static_cast<std::uint8_t>(n & 0xff);
    n >>= 8;
  }
  if (n != 0) throw FormatError("value " + v.str() + " does not fit in " + std::to_string(width) + " bytes");
  return out;
}

std::optional<std::uint64_t> literal_width(const Term& t) {
  if (t.is(Term::Kind::nat_lit)) {
    if (t.natural() > kMaxFieldWidth) return std::nullopt;
    return static_cast<std::uint64_t>(t.natural());
  }
  if (t.is(Term::Kind::pub_name)) {
    const auto& b = t.bytes();
    if (b.empty() || b.size() > 10) return std::nullopt;
    std::uint64_t n = 0;
    for (auto c : b) {
      if (c < '0' || c > '9') return std::nullopt;
      n = n * 10 + (c - '0');
    }
    return n;
  }
  return std::nullopt;
}

bool is_literal(const Term& t) {
  return t.is(Term::Kind::pub_name) || t.is(Term::Kind::bit_lit) || t.is(Term::Kind::nat_lit);
}

Value literal_value(const Term& t) {
  if (t.is(Term::Kind::nat_lit)) return Value::natural(t.natural());
  return Value::bytes(t.bytes());
}

ValueExpr compile_expr(const std::string& fmt, const Term& t) {
  ValueExpr e;
  if (t.is(Term::Kind::variable)) {
    e.op = ValueExpr::Op::var;
    e.var = t.name();
    return e;
  }
  if (is_literal(t)) {
    e.op = ValueExpr::Op::constant;
    e.constant = literal_value(t);
    return e;
  }
  if (t.is(Term::Kind::app) && t.args().size() == 2) {
    if (t.name() == "add") e.op = ValueExpr::Op::add;
    else if (t.name() == "and") e.op = ValueExpr::Op::bit_and;
    else if (t.name() == "or") e.op = ValueExpr::Op::bit_or;
    else throw FormatError("format " + fmt + ": unsupported operator " + t.name());
    for (const auto& a : t.args()) e.operands.push_back(compile_expr(fmt, a));
    return e;
  }
  throw FormatError("format " + fmt + ": unsupported value expression " + to_string(t));
}

void expr_vars(const ValueExpr& e, std::vector<std::string>& out) {
  if (e.op == ValueExpr::Op::var) out.push_back(e.var);
  for (const auto& o : e.operands) expr_vars(o, out);
}

struct Compiler {
  const std::string& name;
  FormatDef& def;
  std::set<std::string> defined;
  std::set<std::string> reversed_lengths;

  [[noreturn]] void fail(const std::string& msg) const { throw FormatError("format " + name + ": " + msg); }

  void field(const Term& t, bool little_endian) {
    if (!t.is(Term::Kind::app)) fail("expected a field, found " + to_string(t));
    if (t.name() == "reverse") {
      if (t.args().size() != 1) fail("reverse takes one argument");
      field(t.args()[0], !little_endian);
      return;
    }
    FormatField f;
    if (t.name() == "int") f.type = FieldType::int_type;
    else if (t.name() == "byte") f.type = FieldType::byte_type;
    else if (t.name() == "string") f.type = FieldType::string_type;
    else fail("unknown field constructor " + t.name());
    if (t.args().empty() || t.args().size() > 2) fail(t.name() + " takes one or two arguments");
    f.little_endian = little_endian;

    Term value = t.args()[0];
    while (value.is(Term::Kind::app) && value.name() == "reverse" && value.args().size() == 1) {
      f.little_endian = !f.little_endian;
      value = value.args()[0];
    }
    if (value.is(Term::Kind::variable)) {
      f.var = value.name();
    } else if (is_literal(value)) {
      f.constant = literal_value(value);
    } else {
      f.expr = compile_expr(name, value);
      def.parseable = false;
      std::vector<std::string> vs;
      expr_vars(*f.expr, vs);
      for (const auto& v : vs) {
        if (!defined.contains(v) && std::find(def.params.begin(), def.params.end(), v) == def.params.end()) {
          fail("expression refers to unknown variable " + v);
        }
      }
    }

    if (t.args().size() == 2) {
      Term len = t.args()[1];
      bool rev = false;
      while (len.is(Term::Kind::app) && len.name() == "reverse" && len.args().size() == 1) {
        rev = !rev;
        len = len.args()[0];
      }
      if (auto w = literal_width(len)) {
        if (*w > kMaxFieldWidth) fail("field width exceeds maximum");
        f.length = {LengthSpec::Kind::fixed, *w, {}};
      } else if (len.is(Term::Kind::variable)) {
        if (!defined.contains(len.name())) fail("length " + len.name() + " is not defined by an earlier field");
        f.length = {LengthSpec::Kind::variable, 0, len.name()};
        def.length_vars.insert(len.name());
        if (rev) reversed_lengths.insert(len.name());
      } else {
        fail("invalid length " + to_string(len));
      }
    } else if (f.constant) {
      if (f.constant->is_natural()) fail("integer constant needs a width");
      f.length = {LengthSpec::Kind::fixed, f.constant->as_bytes().size(), {}};
    } else {
      f.length = {LengthSpec::Kind::rest, 0, {}};
    }
    if (f.constant && f.length.kind == LengthSpec::Kind::variable) fail("constant with a variable length");
    if (f.type == FieldType::int_type && f.length.kind != LengthSpec::Kind::fixed && !f.constant) {
      fail("integer field " + (f.var.empty() ? std::string("expression") : f.var) + " needs a fixed width");
    }
    if (f.is_variable()) defined.insert(f.var);
    def.fields.push_back(std::move(f));
  }

  void body(const Term& t) {
    if (t.is(Term::Kind::app) && t.name() == "cat") {
      for (const auto& a : t.args()) body(a);
      return;
    }
    field(t, false);
  }
};

}  // namespace

FormatDef compile_format(std::string name, std::vector<std::string> params, const Term& body) {
  FormatDef def;
  def.name = name;
  def.params = std::move(params);
  def.body = body;
  Compiler c{def.name, def, {}, {}};
  c.body(body);

  for (std::size_t i = 0; i < def.fields.size(); ++i) {
    auto& f = def.fields[i];
    bool last = i + 1 == def.fields.size();
    if (f.length.kind == LengthSpec::Kind::rest && !last) def.parseable = false;
    if (f.is_variable() && def.length_vars.contains(f.var)) {
      if (f.length.kind != LengthSpec::Kind::fixed) c.fail("length field " + f.var + " needs a fixed width");
      if (f.length.bytes > kMaxLengthFieldWidth) c.fail("length field " + f.var + " is wider than 8 bytes");
      if (c.reversed_lengths.contains(f.var)) f.little_endian = !f.little_endian;
    }
  }
  for (const auto& p : def.params) {
    bool found = std::any_of(def.fields.begin(), def.fields.end(), [&](const FormatField& f) { return f.var == p; });
    bool in_expr = false;
    for (const auto& f : def.fields) {
      if (!f.expr) continue;
      std::vector<std::string> vs;
      expr_vars(*f.expr, vs);
      in_expr = in_expr || std::find(vs.begin(), vs.end(), p) != vs.end();
    }
    if (!found && !in_expr) c.fail("parameter " + p + " does not occur in the body");
  }
  for (const auto& f : def.fields) {
    if (!f.is_variable()) continue;
    bool is_param = std::find(def.params.begin(), def.params.end(), f.var) != def.params.end();
    if (!is_param && !def.length_vars.contains(f.var)) {
      c.fail("field variable " + f.var + " is neither a parameter nor a length");
    }
  }
  return def;
}

void FormatRegistry::add(FormatDef def) {
  auto name = def.name;
  if (!defs_.emplace(name, std::move(def)).second) throw FormatError("format " + name + " defined twice");
}

const FormatDef* FormatRegistry::find(const std::string& name) const {
  auto it = defs_.find(name);
  return it == defs_.end() ? nullptr : &it->second;
}

// Construction --------------------------------------------------------------

namespace {

Natural to_natural(const Value& v) { return v.is_natural() ? v.as_natural() : decode_be(v.as_bytes()); }

Value eval_expr(const ValueExpr& e, const Bindings& b, const std::string& fmt) {
  switch (e.op) {
    case ValueExpr::Op::var: {
      auto it = b.find(e.var);
      if (it == b.end()) throw FormatError("format " + fmt + ": unbound variable " + e.var);
      return it->second;
    }
    case ValueExpr::Op::constant: return e.constant;
    case ValueExpr::Op::add: {
      Value l = eval_expr(e.operands[0], b, fmt);
      Value r = eval_expr(e.operands[1], b, fmt);
      return Value::natural(to_natural(l) + to_natural(r));
    }
    case ValueExpr::Op::bit_and:
    case ValueExpr::Op::bit_or: {
      Value l = eval_expr(e.operands[0], b, fmt);
      Value r = eval_expr(e.operands[1], b, fmt);
      bool is_and = e.op == ValueExpr::Op::bit_and;
      if (l.is_bytes() && r.is_bytes()) {
        const auto& x = l.as_bytes();
        const auto& y = r.as_bytes();
        if (x.size() != y.size()) throw FormatError("format " + fmt + ": bitwise operands differ in length");
        Bytes out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = is_and ? (x[i] & y[i]) : (x[i] | y[i]);
        return Value::bytes(std::move(out));
      }
      Natural x = to_natural(l), y = to_natural(r);
      return Value::natural(is_and ? Natural(x & y) : Natural(x | y));
    }
  }
  throw FormatError("unreachable");
}

Bytes encode_field(const FormatField& f, const Value& v, std::optional<std::uint64_t> width,
                   const std::string& fmt) {
  Bytes out;
  if (v.is_natural()) {
    if (!width) throw FormatError("format " + fmt + ": integer value without a width");
    out = encode_be(v.as_natural(), *width);
  } else {
    out = v.as_bytes();
    if (width && out.size() != *width) {
      if (f.type == FieldType::int_type && out.size() < *width) {
        out.insert(out.begin(), *width - out.size(), 0);
      } else {
        throw FormatError("format " + fmt + ": field " + (f.var.empty() ? "constant" : f.var) + " has " +
                          std::to_string(out.size()) + " bytes, expected " + std::to_string(*width));
      }
    }
  }
  if (out.size() > kMaxFieldWidth) throw FormatError("format " + fmt + ": field exceeds maximum width");
  if (f.little_endian) std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace

Bytes fs_construct(const FormatDef& def, const Bindings& bindings) {
  Bindings b = bindings;
  // Derive unbound lengths from the payloads they measure.
  for (const auto& f : def.fields) {
    if (f.length.kind != LengthSpec::Kind::variable) continue;
    Value payload;
    if (f.is_variable()) {
      auto it = b.find(f.var);
      if (it == b.end()) throw FormatError("format " + def.name + ": unbound variable " + f.var);
      payload = it->second;
    } else if (f.expr) {
      payload = eval_expr(*f.expr, b, def.name);
    }
    if (!payload.is_bytes()) throw FormatError("format " + def.name + ": variable-length field holds an integer");
    Value len = Value::natural(payload.as_bytes().size());
    auto it = b.find(f.length.var);
    if (it == b.end()) {
      b.emplace(f.length.var, len);
    } else if (to_natural(it->second) != payload.as_bytes().size()) {
      throw FormatError("format " + def.name + ": length " + f.length.var + " = " + to_natural(it->second).str() +
                        " does not match payload of " + std::to_string(payload.as_bytes().size()) + " bytes");
    }
  }

  Bytes out;
  for (const auto& f : def.fields) {
    Value v;
    if (f.constant) {
      v = *f.constant;
    } else if (f.expr) {
      v = eval_expr(*f.expr, b, def.name);
    } else {
      auto it = b.find(f.var);
      if (it == b.end()) throw FormatError("format " + def.name + ": unbound variable " + f.var);
      v = it->second;
    }
    std::optional<std::uint64_t> width;
    if (f.length.kind == LengthSpec::Kind::fixed) width = f.length.bytes;
    if (f.length.kind == LengthSpec::Kind::variable) {
      Natural n = to_natural(b.at(f.length.var));
      if (n > kMaxFieldWidth) throw FormatError("format " + def.name + ": length exceeds maximum width");
      width = static_cast<std::uint64_t>(n);
    }
    if (!width && v.is_natural() && f.type != FieldType::int_type) {
      throw FormatError("format " + def.name + ": integer value in a field without width");
    }
    Bytes enc = encode_field(f, v, width, def.name);
    out.insert(out.end(), enc.begin(), enc.end());
  }
  return out;
}

// Parsing -------------------------------------------------------------------

std::optional<Bindings> fs_match(const FormatDef& def, std::span<const std::uint8_t> data) {
  if (!def.parseable) return std::nullopt;
  Bindings b;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < def.fields.size(); ++i) {
    const auto& f = def.fields[i];
    std::size_t width = 0;
    switch (f.length.kind) {
      case LengthSpec::Kind::fixed: width = f.length.bytes; break;
      case LengthSpec::Kind::rest: width = data.size() - pos; break;
      case LengthSpec::Kind::variable: {
        const Value& lv = b.at(f.length.var);
        Natural n = to_natural(lv);
        if (n > data.size() - pos) return std::nullopt;
        width = static_cast<std::size_t>(n);
        break;
      }
    }
    if (width > data.size() - pos) return std::nullopt;
    auto slice = data.subspan(pos, width);
    pos += width;

    if (f.constant) {
      Bytes expect;
      try {
        expect = encode_field(f, *f.constant, width, def.name);
      } catch (const FormatError&) {
        return std::nullopt;
      }
      if (!std::equal(slice.begin(), slice.end(), expect.begin(), expect.end())) return std::nullopt;
      continue;
    }
    Bytes raw(slice.begin(), slice.end());
    if (f.little_endian) std::reverse(raw.begin(), raw.end());
    bool as_nat = f.type == FieldType::int_type || def.length_vars.contains(f.var);
    Value v = as_nat ? Value::natural(decode_be(raw)) : Value::bytes(std::move(raw));
    auto [it, inserted] = b.emplace(f.var, v);
    if (!inserted && it->second != v) return std::nullopt;
  }
  if (pos != data.size()) return std::nullopt;
  return b;
}

std::optional<Identified> fs_identify(const FormatRegistry& reg, std::span<const std::uint8_t> data) {
  std::optional<Identified> found;
  for (const auto& [name, def] : reg.defs()) {
    auto b = fs_match(def, data);
    if (!b) continue;
    if (found) throw DisjointnessError(found->def->name, name);
    found = Identified{&def, std::move(*b)};
  }
  return found;
}

std::vector<std::string> lint_disjoint(const FormatRegistry& reg) {
  struct Prefix {
    const FormatDef* def;
    Bytes bytes;
  };
  std::vector<Prefix> prefixes;
  for (const auto& [name, def] : reg.defs()) {
    if (!def.parseable) continue;
    Prefix p{&def, {}};
    for (const auto& f : def.fields) {
      if (!f.constant || f.length.kind != LengthSpec::Kind::fixed) break;
      try {
        Bytes enc = encode_field(f, *f.constant, f.length.bytes, def.name);
        p.bytes.insert(p.bytes.end(), enc.begin(), enc.end());
      } catch (const FormatError&) {
        break;
      }
    }
    prefixes.push_back(std::move(p));
  }
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < prefixes.size(); ++i) {
    for (std::size_t j = i + 1; j < prefixes.size(); ++j) {
      const auto& a = prefixes[i].bytes;
      const auto& b = prefixes[j].bytes;
      std::size_t n = std::min(a.size(), b.size());
      if (std::equal(a.begin(), a.begin() + n, b.begin())) {
        warnings.push_back("formats " + prefixes[i].def->name + " and " + prefixes[j].def->name +
                           " have no distinguishing leading constant");
      }
    }
  }
  return warnings;
}

}  // namespace msrmon
