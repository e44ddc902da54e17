#pragma once

// Single-file parameter injection.
//
// A config file is a list of flat assignments:
//
//   # comment
//   DQNAgent.epsilon_train = 0.01
//   Runner.termination_mode = GameOver
//   Network.hidden_units = 512
//
// The final two path segments name a component and one of its parameters;
// any leading segments form an optional scope. Literals are 64-bit integers,
// decimals, True/False, quoted strings, identifiers (bare or @-prefixed), and
// bracketed homogeneous lists. Later bindings for the same path win.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace valrl::config {

struct Identifier {
  std::string name;
  friend bool operator==(const Identifier&, const Identifier&) = default;
};

class Literal {
 public:
  enum class Kind { kInteger, kDecimal, kBoolean, kString, kIdentifier, kList };
  using List = std::vector<Literal>;
  using Value = std::variant<std::int64_t, double, bool, std::string, Identifier, List>;

  Literal() : value_(std::int64_t{0}) {}
  Literal(std::int64_t v) : value_(v) {}
  Literal(int v) : value_(std::int64_t{v}) {}
  Literal(double v) : value_(v) {}
  Literal(bool v) : value_(v) {}
  Literal(std::string v) : value_(std::move(v)) {}
  Literal(const char* v) : value_(std::string(v)) {}
  Literal(Identifier v) : value_(std::move(v)) {}
  Literal(List v) : value_(std::move(v)) {}

  Kind kind() const { return static_cast<Kind>(value_.index()); }
  const Value& value() const { return value_; }

  std::int64_t as_integer() const { return std::get<std::int64_t>(value_); }
  double as_decimal() const { return std::get<double>(value_); }
  bool as_boolean() const { return std::get<bool>(value_); }
  const std::string& as_string() const { return std::get<std::string>(value_); }
  const Identifier& as_identifier() const { return std::get<Identifier>(value_); }
  const List& as_list() const { return std::get<List>(value_); }

  // Config-file syntax; decimals print in shortest round-trip form.
  std::string to_string() const;

  friend bool operator==(const Literal&, const Literal&) = default;

 private:
  Value value_;
};

const char* kind_name(Literal::Kind kind);

struct Binding {
  std::vector<std::string> scope_path;  // >= 2 segments
  Literal value;
  std::size_t line = 0;

  std::string path() const;
  const std::string& component() const { return scope_path[scope_path.size() - 2]; }
  const std::string& parameter() const { return scope_path.back(); }
  // Leading segments joined with '.', empty when unscoped.
  std::string scope() const;
};

class ConfigSet {
 public:
  ConfigSet() = default;
  explicit ConfigSet(std::string source_name) : source_name_(std::move(source_name)) {}

  const std::string& source_name() const { return source_name_; }
  const std::vector<Binding>& bindings() const { return bindings_; }
  bool empty() const { return bindings_.empty(); }

  void append(Binding binding) { bindings_.push_back(std::move(binding)); }
  void append(const ConfigSet& other);

  // Last binding for component.param visible from `scope` (unscoped
  // bindings are visible everywhere), or nullptr.
  const Binding* find(std::string_view component, std::string_view param,
                      std::string_view scope = {}) const;

 private:
  std::string source_name_;
  std::vector<Binding> bindings_;
};

ConfigSet parse_config(std::string_view text, std::string source_name = "<string>");
ConfigSet load_config_file(const std::filesystem::path& path);

// Parses a single `key=value` override as given on the command line.
Binding parse_binding(std::string_view assignment);

// Returns the effective value of component.param: the last matching binding
// converted to the declared type (the kind of `default_value`), else the
// default. Integers widen to decimals; strings and identifiers interconvert.
// Throws ConfigError naming the path on a type mismatch.
Literal resolve(const ConfigSet& cfg, std::string_view component, std::string_view param,
                const Literal& default_value, std::string_view scope = {});

// Records every parameter a component asks for, with its default, so the
// effective configuration can be archived and unknown bindings reported.
class ParameterRegistry {
 public:
  void declare(const std::string& component, const std::string& param, const Literal& default_value);
  bool declared(std::string_view component, std::string_view param) const;
  // (component, param) -> default, in sorted order.
  const std::map<std::pair<std::string, std::string>, Literal>& entries() const { return entries_; }

 private:
  std::map<std::pair<std::string, std::string>, Literal> entries_;
};

// Emits `Component.param = value` for every declared parameter, sorted.
// Re-parsing the text reproduces identical resolution.
std::string dump_effective_config(const ConfigSet& cfg, const ParameterRegistry& registry);

// Bindings whose component.param no component declared. Each one is also
// passed to valrl::warn.
std::vector<Binding> report_unknown_bindings(const ConfigSet& cfg, const ParameterRegistry& registry);

// Typed access for one component. Every lookup is declared in the registry
// (when one is attached).
class ConfigReader {
 public:
  ConfigReader(const ConfigSet& cfg, ParameterRegistry* registry, std::string component)
      : cfg_(cfg), registry_(registry), component_(std::move(component)) {}

  const std::string& component() const { return component_; }

  std::int64_t get_int(const std::string& param, std::int64_t default_value) const;
  double get_double(const std::string& param, double default_value) const;
  bool get_bool(const std::string& param, bool default_value) const;
  std::string get_string(const std::string& param, const std::string& default_value) const;
  // Enum-like names (termination modes, optimizer names). Declared as
  // identifiers so the dump prints them bare.
  std::string get_identifier(const std::string& param, const std::string& default_value) const;

 private:
  Literal get(const std::string& param, const Literal& default_value) const;

  const ConfigSet& cfg_;
  ParameterRegistry* registry_;
  std::string component_;
};

}  // namespace valrl::config
