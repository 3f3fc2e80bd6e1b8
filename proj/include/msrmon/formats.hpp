#pragma once

// Wire-format strings: byte layouts built from constants, fixed- and
// variable-length fields and an optional trailing rest field.

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "msrmon/term.hpp"

namespace msrmon {

class FormatError : public EvalError {
 public:
  using EvalError::EvalError;
};

/// Two registered formats accept the same input.
class DisjointnessError : public std::runtime_error {
 public:
  DisjointnessError(std::string first, std::string second);
  const std::string& first() const { return first_; }
  const std::string& second() const { return second_; }

 private:
  std::string first_;
  std::string second_;
};

enum class FieldType { int_type, byte_type, string_type };

struct LengthSpec {
  enum class Kind { fixed, variable, rest };
  Kind kind = Kind::rest;
  std::uint64_t bytes = 0;  // fixed
  std::string var;          // variable
};

/// Construction-only value: add/and/or over earlier variables and constants.
struct ValueExpr {
  enum class Op { var, constant, add, bit_and, bit_or };
  Op op = Op::var;
  std::string var;
  Value constant;
  std::vector<ValueExpr> operands;
};

struct FormatField {
  FieldType type = FieldType::byte_type;
  std::optional<Value> constant;
  std::string var;  // empty for constants and expressions
  std::optional<ValueExpr> expr;
  LengthSpec length;
  bool little_endian = false;

  bool is_constant() const { return constant.has_value(); }
  bool is_variable() const { return !var.empty(); }
};

struct FormatDef {
  std::string name;
  std::vector<std::string> params;
  std::vector<FormatField> fields;
  Term body;                          // source body, kept for printing
  std::set<std::string> length_vars;  // variables referenced as lengths
  /// False when a non-final field has no length or a field carries an
  /// expression: such formats can build messages but never parse them.
  bool parseable = true;
};

inline constexpr std::uint64_t kMaxFieldWidth = 0x7fffffffULL;
inline constexpr std::uint64_t kMaxLengthFieldWidth = 8;

/// Builds a definition from a macro body such as
/// `cat(byte('0x01'), byte(l, 2), byte(m, l))`. Throws FormatError.
FormatDef compile_format(std::string name, std::vector<std::string> params, const Term& body);

class FormatRegistry {
 public:
  void add(FormatDef def);
  const FormatDef* find(const std::string& name) const;
  const std::map<std::string, FormatDef>& defs() const { return defs_; }
  bool empty() const { return defs_.empty(); }
  std::size_t size() const { return defs_.size(); }

 private:
  std::map<std::string, FormatDef> defs_;
};

using Bindings = std::map<std::string, Value>;

/// Encodes `def` under `bindings`. Unbound length variables are derived from
/// the payload they measure. Throws FormatError.
Bytes fs_construct(const FormatDef& def, const Bindings& bindings);

/// Single left-to-right parse. Binds every field variable; none on mismatch.
std::optional<Bindings> fs_match(const FormatDef& def, std::span<const std::uint8_t> data);

struct Identified {
  const FormatDef* def;
  Bindings bindings;
};

/// The unique parseable format accepting `data`. Throws DisjointnessError
/// when more than one does.
std::optional<Identified> fs_identify(const FormatRegistry& reg, std::span<const std::uint8_t> data);

/// Warns about pairs of formats whose leading constants do not tell them
/// apart.
std::vector<std::string> lint_disjoint(const FormatRegistry& reg);

Bytes reverse_bytes(Bytes b);

}  // namespace msrmon
