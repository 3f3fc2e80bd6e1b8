#pragma once

// Term algebra, ground values, facts, multisets and syntactic matching.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace msrmon {

using Bytes = std::vector<std::uint8_t>;
using Natural = boost::multiprecision::cpp_int;

class FormatRegistry;

/// Raised when a term cannot be turned into a ground value (unbound
/// variable, opaque function application, format construction failure).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string to_hex(std::span<const std::uint8_t> bytes);
std::optional<Bytes> from_hex(std::string_view text);
Bytes to_bytes(std::string_view text);

/// Ground runtime value: a byte sequence or a natural number. Values of
/// different sorts never compare equal.
class Value {
 public:
  Value();
  static Value bytes(Bytes b);
  static Value natural(Natural n);

  bool is_bytes() const { return rep_->index() == 0; }
  bool is_natural() const { return rep_->index() == 1; }
  const Bytes& as_bytes() const;
  const Natural& as_natural() const;

  friend bool operator==(const Value& a, const Value& b);
  friend std::strong_ordering operator<=>(const Value& a, const Value& b);

  /// `0x..` for bytes (`''` when empty), `%n` for naturals.
  std::string to_string() const;

 private:
  using Rep = std::variant<Bytes, Natural>;
  explicit Value(std::shared_ptr<const Rep> rep) : rep_(std::move(rep)) {}
  std::shared_ptr<const Rep> rep_;
};

enum class Sort { msg, fresh, pub, nat };

class Term {
 public:
  enum class Kind { variable, pub_name, fresh_name, app, format_app, bit_lit, nat_lit, tuple };

  /// The empty public name `''`.
  Term();
  static Term var(std::string name, Sort sort = Sort::msg);
  static Term pub(Bytes bytes);
  static Term fresh_name(std::string label);
  static Term app(std::string symbol, std::vector<Term> args);
  static Term format_app(std::string format, std::vector<Term> args);
  static Term bits(Bytes bytes);
  static Term nat(Natural value);
  static Term tuple(std::vector<Term> items);
  static Term from_value(const Value& v);

  Kind kind() const;
  bool is(Kind k) const { return kind() == k; }
  /// Variable label, fresh-name label, function symbol or format name.
  const std::string& name() const;
  Sort sort() const;
  const Bytes& bytes() const;
  const Natural& natural() const;
  const std::vector<Term>& args() const;

  /// No variables and no fresh-name marks.
  bool is_ground() const;
  /// Contains at least one user function application.
  bool contains_app() const;

  friend int compare(const Term& a, const Term& b);
  friend bool operator==(const Term& a, const Term& b) { return compare(a, b) == 0; }
  friend bool operator<(const Term& a, const Term& b) { return compare(a, b) < 0; }

  struct Node;

 private:
  explicit Term(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

/// Source-syntax rendering. Public names print as `'text'` when printable,
/// otherwise `'0x..'`.
std::string to_string(const Term& t);
std::string pub_literal(std::span<const std::uint8_t> bytes);

/// Variables of `t` in order of first occurrence, without duplicates.
void collect_vars(const Term& t, std::vector<Term>& out);
std::vector<Term> vars_of(const Term& t);

/// Fact pattern (rules) over terms.
struct Fact {
  std::string symbol;
  bool persistent = false;
  std::vector<Term> args;

  friend bool operator==(const Fact&, const Fact&) = default;
};
std::string to_string(const Fact& f);

/// Fact over ground values (runtime state).
struct GroundFact {
  std::string symbol;
  bool persistent = false;
  std::vector<Value> args;

  friend bool operator==(const GroundFact&, const GroundFact&) = default;
  friend std::strong_ordering operator<=>(const GroundFact& a, const GroundFact& b);
};
using GroundFactRef = std::shared_ptr<const GroundFact>;
std::string to_string(const GroundFact& f);

/// Linear facts with multiplicities plus a set of persistent facts. Both
/// parts are kept sorted so equal multisets have equal representations.
class FactMultiset {
 public:
  struct Entry {
    GroundFactRef fact;
    std::size_t count;
  };

  void insert(GroundFact f);
  void insert(const GroundFactRef& f);
  /// Removes one copy of a linear fact; persistent facts are never removed.
  bool remove_one(const GroundFact& f);

  std::size_t count(const GroundFact& f) const;
  bool contains(const GroundFact& f) const { return count(f) > 0; }
  std::size_t linear_size() const;
  std::size_t distinct_size() const { return linear_.size() + persistent_.size(); }
  bool empty() const { return linear_.empty() && persistent_.empty(); }

  std::span<const Entry> linear() const { return linear_; }
  std::span<const GroundFactRef> persistent() const { return persistent_; }
  /// Entries whose symbol equals `symbol`.
  std::span<const Entry> linear_with(std::string_view symbol) const;
  std::span<const GroundFactRef> persistent_with(std::string_view symbol) const;

  friend bool operator==(const FactMultiset& a, const FactMultiset& b);
  friend std::strong_ordering operator<=>(const FactMultiset& a, const FactMultiset& b);

 private:
  std::vector<Entry> linear_;
  std::vector<GroundFactRef> persistent_;
};
std::string to_string(const FactMultiset& s);

/// Bindings from variable labels to ground values.
class Substitution {
 public:
  Substitution() = default;
  Substitution(std::initializer_list<std::pair<const std::string, Value>> init) : map_(init) {}

  const Value* find(const std::string& var) const;
  bool contains(const std::string& var) const { return find(var) != nullptr; }
  /// Binds `var`; returns false if it is already bound to a different value.
  bool bind(const std::string& var, const Value& v);
  /// Union of two substitutions; none if they disagree on a shared variable.
  std::optional<Substitution> compose(const Substitution& other) const;
  std::size_t size() const { return map_.size(); }
  const std::map<std::string, Value>& bindings() const { return map_; }

  friend bool operator==(const Substitution&, const Substitution&) = default;
  friend bool operator<(const Substitution& a, const Substitution& b) { return a.map_ < b.map_; }

 private:
  std::map<std::string, Value> map_;
};
std::string to_string(const Substitution& s);

/// One observed library call: `name(args...) -> ret`.
struct ProgramEvent {
  std::string name;
  std::vector<Bytes> args;
  Bytes ret;

  friend bool operator==(const ProgramEvent&, const ProgramEvent&) = default;
};
std::string to_string(const ProgramEvent& e);

/// `Trig(function, <args>, result)`, also used for hints and emissions.
struct TriggerPattern {
  std::string function;
  std::vector<Term> args;
  Term result;

  friend bool operator==(const TriggerPattern&, const TriggerPattern&) = default;
};
std::string to_string(const TriggerPattern& t);

// Matching ----------------------------------------------------------------

/// Most general σ with `ground = pattern·σ` extending `seed`, or none.
/// Format-string subpatterns are parsed with the registry.
std::optional<Substitution> mgs(const Value& ground, const Term& pattern, const FormatRegistry& formats,
                                const Substitution& seed = {});
/// Ground symbolic term against a pattern. Variables bind only to literal
/// leaves; a variable facing a function application does not match.
std::optional<Substitution> mgs(const Term& ground, const Term& pattern, const FormatRegistry& formats,
                                const Substitution& seed = {});
/// Program event against a trigger pattern.
std::optional<Substitution> mgs(const ProgramEvent& event, const TriggerPattern& trigger,
                                const FormatRegistry& formats, const Substitution& seed = {});

/// Instantiates `t`; bound variables become literals and fully ground format
/// applications are constructed into bit literals.
Term apply_subst(const Term& t, const Substitution& s, const FormatRegistry& formats);
TriggerPattern apply_subst(const TriggerPattern& t, const Substitution& s, const FormatRegistry& formats);

/// Evaluates a term to a ground value. Throws EvalError.
Value evaluate(const Term& t, const Substitution& s, const FormatRegistry& formats);
GroundFact instantiate(const Fact& f, const Substitution& s, const FormatRegistry& formats);

/// A premise instantiation together with the state facts it consumes.
struct PremiseMatch {
  Substitution sigma;
  std::vector<GroundFactRef> linear;
};

/// Every most general σ with `premise·σ ⊆# state`, each distinct σ once.
std::vector<PremiseMatch> conflict_set(const FactMultiset& state, std::span<const Fact> premise,
                                       const FormatRegistry& formats, const Substitution& seed = {});
std::vector<Substitution> multiset_match(const FactMultiset& state, std::span<const Fact> premise,
                                         const FormatRegistry& formats);

}  // namespace msrmon
