#include "valrl/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "valrl/errors.hpp"
#include "valrl/warnings.hpp"

namespace valrl::config {
namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string format_decimal(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

// Recursive-descent parser for the right-hand side of one assignment.
class LiteralParser {
 public:
  LiteralParser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  Literal parse_complete() {
    skip_space();
    Literal lit = parse_literal();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return lit;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    std::size_t end = pos_;
    while (end < text_.size() && !std::isspace(static_cast<unsigned char>(text_[end]))) ++end;
    std::string token(text_.substr(pos_, end - pos_));
    if (token.empty()) token = "<end of line>";
    throw ParseError(line_, token, message);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  Literal parse_literal() {
    if (pos_ >= text_.size()) fail("expected a value");
    const char c = text_[pos_];
    if (c == '"' || c == '\'') return parse_string();
    if (c == '[') return parse_list();
    if (c == '@') {
      ++pos_;
      if (pos_ >= text_.size() || !is_ident_start(text_[pos_])) fail("expected identifier after '@'");
      return Identifier{parse_dotted_name()};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') return parse_number();
    if (is_ident_start(c)) {
      std::string name = parse_dotted_name();
      if (name == "True") return true;
      if (name == "False") return false;
      return Identifier{std::move(name)};
    }
    fail("unrecognized value");
  }

  std::string parse_dotted_name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (is_ident_char(text_[pos_]) || text_[pos_] == '.')) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  Literal parse_string() {
    const char quote_char = text_[pos_];
    const std::size_t start = pos_;
    ++pos_;
    std::string out;
    while (pos_ < text_.size()) {
      const char c = text_[pos_++];
      if (c == quote_char) return out;
      if (c == '\\') {
        if (pos_ >= text_.size()) break;
        const char e = text_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default: out += e;
        }
      } else {
        out += c;
      }
    }
    pos_ = start;
    fail("unterminated string");
  }

  Literal parse_number() {
    const std::size_t start = pos_;
    if (text_[pos_] == '+' || text_[pos_] == '-') ++pos_;
    bool decimal = false;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '.') {
        decimal = true;
        ++pos_;
      } else if (c == 'e' || c == 'E') {
        decimal = true;
        ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      } else {
        break;
      }
    }
    std::string_view token = text_.substr(start, pos_ - start);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    if (decimal) {
      double v = 0;
      auto res = std::from_chars(token.data(), token.data() + token.size(), v);
      if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
        pos_ = start;
        fail("malformed decimal");
      }
      return v;
    }
    std::int64_t v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
      pos_ = start;
      fail(res.ec == std::errc::result_out_of_range ? "integer out of 64-bit range" : "malformed integer");
    }
    return v;
  }

  Literal parse_list() {
    ++pos_;  // '['
    Literal::List items;
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return items;
    }
    for (;;) {
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == ']') {  // trailing comma
        ++pos_;
        break;
      }
      items.push_back(parse_literal());
      skip_space();
      if (pos_ >= text_.size()) fail("unterminated list");
      if (text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        break;
      }
      fail("expected ',' or ']' in list");
    }
    return homogenize(std::move(items));
  }

  Literal homogenize(Literal::List items) {
    bool any_decimal = false;
    for (const auto& item : items) any_decimal |= item.kind() == Literal::Kind::kDecimal;
    if (any_decimal) {
      for (auto& item : items) {
        if (item.kind() == Literal::Kind::kInteger) item = static_cast<double>(item.as_integer());
      }
    }
    for (const auto& item : items) {
      if (item.kind() != items.front().kind()) {
        throw ParseError(line_, item.to_string(), "list mixes value kinds");
      }
    }
    return items;
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

// Position of the first `ch` outside quotes, or npos.
std::size_t find_unquoted(std::string_view line, char ch, std::size_t from = 0) {
  char in_quote = 0;
  for (std::size_t i = from; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quote) {
      if (c == '\\') {
        ++i;
      } else if (c == in_quote) {
        in_quote = 0;
      }
    } else if (c == '"' || c == '\'') {
      in_quote = c;
    } else if (c == ch) {
      return i;
    }
  }
  return std::string_view::npos;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> parse_path(std::string_view path, std::size_t line) {
  std::vector<std::string> segments;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = path.find('.', start);
    std::string_view seg = path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    if (seg.empty() || !is_ident_start(seg.front())) {
      throw ParseError(line, std::string(path), "malformed parameter path");
    }
    for (char c : seg) {
      if (!is_ident_char(c)) throw ParseError(line, std::string(path), "malformed parameter path");
    }
    segments.emplace_back(seg);
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  if (segments.size() < 2) {
    throw ParseError(line, std::string(path), "parameter path needs Component.parameter");
  }
  return segments;
}

Binding parse_assignment(std::string_view content, std::size_t line) {
  const std::size_t eq = find_unquoted(content, '=');
  if (eq == std::string_view::npos) {
    throw ParseError(line, std::string(trim(content)), "expected 'path = value'");
  }
  if (const std::size_t second = find_unquoted(content, '=', eq + 1); second != std::string_view::npos) {
    throw ParseError(line, std::string(trim(content.substr(second))), "duplicate '='");
  }
  const std::string_view lhs = trim(content.substr(0, eq));
  const std::string_view rhs = trim(content.substr(eq + 1));
  Binding binding;
  binding.scope_path = parse_path(lhs, line);
  binding.value = LiteralParser(rhs, line).parse_complete();
  binding.line = line;
  return binding;
}

}  // namespace

const char* kind_name(Literal::Kind kind) {
  switch (kind) {
    case Literal::Kind::kInteger: return "integer";
    case Literal::Kind::kDecimal: return "decimal";
    case Literal::Kind::kBoolean: return "boolean";
    case Literal::Kind::kString: return "string";
    case Literal::Kind::kIdentifier: return "identifier";
    case Literal::Kind::kList: return "list";
  }
  return "?";
}

std::string Literal::to_string() const {
  switch (kind()) {
    case Kind::kInteger: return std::to_string(as_integer());
    case Kind::kDecimal: return format_decimal(as_decimal());
    case Kind::kBoolean: return as_boolean() ? "True" : "False";
    case Kind::kString: return quote(as_string());
    case Kind::kIdentifier: return as_identifier().name;
    case Kind::kList: {
      std::string out = "[";
      const auto& items = as_list();
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += items[i].to_string();
      }
      return out + "]";
    }
  }
  return {};
}

std::string Binding::path() const {
  std::string out;
  for (std::size_t i = 0; i < scope_path.size(); ++i) {
    if (i) out += '.';
    out += scope_path[i];
  }
  return out;
}

std::string Binding::scope() const {
  std::string out;
  for (std::size_t i = 0; i + 2 < scope_path.size(); ++i) {
    if (i) out += '.';
    out += scope_path[i];
  }
  return out;
}

void ConfigSet::append(const ConfigSet& other) {
  for (const auto& b : other.bindings()) bindings_.push_back(b);
}

const Binding* ConfigSet::find(std::string_view component, std::string_view param,
                               std::string_view scope) const {
  for (auto it = bindings_.rbegin(); it != bindings_.rend(); ++it) {
    if (it->component() != component || it->parameter() != param) continue;
    const std::string binding_scope = it->scope();
    if (binding_scope.empty() || binding_scope == scope) return &*it;
  }
  return nullptr;
}

ConfigSet parse_config(std::string_view text, std::string source_name) {
  ConfigSet cfg(std::move(source_name));
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;
    if (const std::size_t hash = find_unquoted(line, '#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    if (!trim(line).empty()) cfg.append(parse_assignment(line, line_no));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return cfg;
}

ConfigSet load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

Binding parse_binding(std::string_view assignment) { return parse_assignment(assignment, 1); }

Literal resolve(const ConfigSet& cfg, std::string_view component, std::string_view param,
                const Literal& default_value, std::string_view scope) {
  if (component.empty() || param.empty()) {
    throw ContractViolation("resolve: component and parameter must be nonempty");
  }
  const Binding* binding = cfg.find(component, param, scope);
  if (!binding) return default_value;

  using Kind = Literal::Kind;
  const Literal& v = binding->value;
  const Kind want = default_value.kind();
  if (v.kind() == want) {
    if (want == Kind::kList && !default_value.as_list().empty() && !v.as_list().empty()) {
      Kind elem_want = default_value.as_list().front().kind();
      Kind elem_have = v.as_list().front().kind();
      if (elem_want == Kind::kDecimal && elem_have == Kind::kInteger) {
        Literal::List widened;
        for (const auto& item : v.as_list()) widened.emplace_back(static_cast<double>(item.as_integer()));
        return widened;
      }
      if (elem_want != elem_have) {
        throw ConfigError(binding->path() + ": expected a list of " + kind_name(elem_want) + " but got " +
                          kind_name(elem_have) + " elements");
      }
    }
    return v;
  }
  if (want == Kind::kDecimal && v.kind() == Kind::kInteger) return static_cast<double>(v.as_integer());
  if (want == Kind::kIdentifier && v.kind() == Kind::kString) return Identifier{v.as_string()};
  if (want == Kind::kString && v.kind() == Kind::kIdentifier) return v.as_identifier().name;
  throw ConfigError(binding->path() + ": expected " + kind_name(want) + " but config gives " +
                    kind_name(v.kind()) + " '" + v.to_string() + "' (" + cfg.source_name() + ":" +
                    std::to_string(binding->line) + ")");
}

void ParameterRegistry::declare(const std::string& component, const std::string& param,
                                const Literal& default_value) {
  entries_.insert_or_assign({component, param}, default_value);
}

bool ParameterRegistry::declared(std::string_view component, std::string_view param) const {
  return entries_.count({std::string(component), std::string(param)}) > 0;
}

std::string dump_effective_config(const ConfigSet& cfg, const ParameterRegistry& registry) {
  std::string out = "# effective configuration\n";
  std::string last_component;
  for (const auto& [key, default_value] : registry.entries()) {
    const auto& [component, param] = key;
    if (!last_component.empty() && component != last_component) out += '\n';
    last_component = component;
    out += component + "." + param + " = " + resolve(cfg, component, param, default_value).to_string() + "\n";
  }
  return out;
}

std::vector<Binding> report_unknown_bindings(const ConfigSet& cfg, const ParameterRegistry& registry) {
  std::vector<Binding> unknown;
  for (const auto& b : cfg.bindings()) {
    if (!registry.declared(b.component(), b.parameter())) {
      unknown.push_back(b);
      warn("config: binding '" + b.path() + "' (" + cfg.source_name() + ":" + std::to_string(b.line) +
           ") does not match any parameter");
    }
  }
  return unknown;
}

Literal ConfigReader::get(const std::string& param, const Literal& default_value) const {
  if (registry_) registry_->declare(component_, param, default_value);
  return resolve(cfg_, component_, param, default_value);
}

std::int64_t ConfigReader::get_int(const std::string& param, std::int64_t default_value) const {
  return get(param, default_value).as_integer();
}

double ConfigReader::get_double(const std::string& param, double default_value) const {
  return get(param, default_value).as_decimal();
}

bool ConfigReader::get_bool(const std::string& param, bool default_value) const {
  return get(param, default_value).as_boolean();
}

std::string ConfigReader::get_string(const std::string& param, const std::string& default_value) const {
  return get(param, Literal(default_value)).as_string();
}

std::string ConfigReader::get_identifier(const std::string& param, const std::string& default_value) const {
  return get(param, Identifier{default_value}).as_identifier().name;
}

}  // namespace valrl::config
