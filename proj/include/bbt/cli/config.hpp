#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bbt/error.hpp"
#include "bbt/text.hpp"

namespace bbt::cli {

enum class Kind { integer, real, text, path, choice, flag, paths };

enum class Bound { none, positive, non_negative, unit_open };

struct OptionSpec {
  std::string name;
  Kind kind = Kind::text;
  std::string help;
  std::optional<std::string> default_value;
  bool required = false;
  Bound bound = Bound::none;
  std::vector<std::string> choices;
};

struct CommandSpec {
  std::string name;
  std::string summary;
  std::vector<OptionSpec> options;

  const OptionSpec* find(std::string_view key) const {
    for (const auto& o : options)
      if (o.name == key) return &o;
    return nullptr;
  }
};

// Unvalidated key -> values, as read from a config file or the command line.
using RawValues = std::map<std::string, std::vector<std::string>, std::less<>>;

// `key = value` lines; `#` starts a comment line. A `paths` value may list
// several whitespace-separated paths.
inline RawValues parse_config(std::string_view content, const std::string& path = "<config>") {
  RawValues values;
  const auto ls = text::lines(content);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const auto line = text::trim(ls[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InputError(at_line(path, i + 1) + "expected `key = value`");
    const auto key = std::string(text::trim(line.substr(0, eq)));
    const auto value = text::trim(line.substr(eq + 1));
    if (key.empty()) throw InputError(at_line(path, i + 1) + "empty key");
    auto& slot = values[key];
    slot.clear();
    for (auto v : text::split_whitespace(value)) slot.emplace_back(v);
    if (slot.empty()) slot.emplace_back();
  }
  return values;
}

inline RawValues load_config_values(const std::string& path) { return parse_config(text::read_file(path), path); }

struct ParsedArgs {
  std::string command;
  RawValues flags;
  std::optional<std::string> config_path;
  bool help = false;
};

// Parses `--key value`, `--key=value`, bare `--flag`, and for `paths`
// options every following argument up to the next `--key`.
inline ParsedArgs parse_args(const CommandSpec& spec, const std::vector<std::string>& args) {
  ParsedArgs parsed{spec.name, {}, std::nullopt, false};
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string_view arg = args[i];
    if (arg == "--help" || arg == "-h") {
      parsed.help = true;
      continue;
    }
    if (!arg.starts_with("--")) throw InputError(spec.name + ": unexpected argument '" + std::string(arg) + "'");
    arg.remove_prefix(2);
    std::optional<std::string> inline_value;
    if (const auto eq = arg.find('='); eq != std::string_view::npos) {
      inline_value = std::string(arg.substr(eq + 1));
      arg = arg.substr(0, eq);
    }
    const std::string key(arg);
    const auto take_one = [&]() -> std::string {
      if (inline_value) return *inline_value;
      if (i + 1 >= args.size()) throw InputError(spec.name + ": option --" + key + " needs a value");
      return args[++i];
    };
    if (key == "config") {
      parsed.config_path = take_one();
      continue;
    }
    const auto* opt = spec.find(key);
    if (!opt) throw InputError(spec.name + ": unknown option --" + key);
    auto& slot = parsed.flags[key];
    if (opt->kind == Kind::flag) {
      slot = {inline_value.value_or("true")};
    } else if (opt->kind == Kind::paths) {
      if (inline_value) slot.push_back(*inline_value);
      while (i + 1 < args.size() && !std::string_view(args[i + 1]).starts_with("--")) slot.push_back(args[++i]);
      if (slot.empty()) throw InputError(spec.name + ": option --" + key + " needs at least one path");
    } else {
      slot = {take_one()};
    }
  }
  return parsed;
}

// Fully resolved, validated parameters for one command.
class RunConfig {
 public:
  RunConfig() = default;
  RunConfig(std::string command, std::map<std::string, std::vector<std::string>, std::less<>> values, std::uint64_t seed)
      : command_(std::move(command)), values_(std::move(values)), seed_(seed) {}

  const std::string& command() const { return command_; }
  std::uint64_t seed() const { return seed_; }
  bool has(std::string_view key) const { return values_.find(key) != values_.end(); }

  std::int64_t integer(std::string_view key) const { return *text::parse_number<std::int64_t>(one(key)); }
  double real(std::string_view key) const { return *text::parse_number<double>(one(key)); }
  const std::string& text(std::string_view key) const { return one(key); }
  bool flag(std::string_view key) const { return has(key) && one(key) == "true"; }
  const std::vector<std::string>& paths(std::string_view key) const { return at(key); }
  std::optional<std::string> optional_text(std::string_view key) const {
    return has(key) ? std::optional<std::string>(one(key)) : std::nullopt;
  }

 private:
  const std::vector<std::string>& at(std::string_view key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw InputError(command_ + ": missing value for '" + std::string(key) + "'");
    return it->second;
  }
  const std::string& one(std::string_view key) const { return at(key).front(); }

  std::string command_;
  std::map<std::string, std::vector<std::string>, std::less<>> values_;
  std::uint64_t seed_ = 0;
};

namespace detail {

inline void check_value(const std::string& command, const OptionSpec& opt, const std::vector<std::string>& values) {
  const auto fail = [&](const std::string& what) {
    throw InputError(command + ": key '" + opt.name + "': " + what);
  };
  if (opt.kind == Kind::paths) {
    if (values.empty() || values.front().empty()) fail("expected at least one path");
    return;
  }
  if (values.size() != 1) fail("expected a single value, got " + std::to_string(values.size()));
  const auto& v = values.front();
  double number = 0.0;
  switch (opt.kind) {
    case Kind::integer: {
      const auto n = text::parse_number<std::int64_t>(v);
      if (!n) fail("expected integer, got '" + v + "'");
      number = static_cast<double>(*n);
      break;
    }
    case Kind::real: {
      const auto x = text::parse_number<double>(v);
      if (!x || !std::isfinite(*x)) fail("expected real number, got '" + v + "'");
      number = *x;
      break;
    }
    case Kind::choice: {
      bool ok = false;
      std::string all;
      for (const auto& c : opt.choices) {
        ok = ok || c == v;
        all += (all.empty() ? "" : ", ") + c;
      }
      if (!ok) fail("expected one of {" + all + "}, got '" + v + "'");
      return;
    }
    case Kind::flag:
      if (v != "true" && v != "false") fail("expected true or false, got '" + v + "'");
      return;
    case Kind::text:
    case Kind::path:
      if (v.empty()) fail("empty value");
      return;
    case Kind::paths:
      return;
  }
  switch (opt.bound) {
    case Bound::positive:
      if (!(number > 0)) fail("must be > 0, got " + v);
      break;
    case Bound::non_negative:
      if (number < 0) fail("must be >= 0, got " + v);
      break;
    case Bound::unit_open:
      if (!(number > 0 && number < 1)) fail("must be in (0,1), got " + v);
      break;
    case Bound::none:
      break;
  }
}

}  // namespace detail

// Command-line flags override config-file values; unknown keys, type errors
// and missing required keys are rejected with the key named.
inline RunConfig resolve_config(const CommandSpec& spec, const RawValues& file_values, const RawValues& flag_values) {
  std::map<std::string, std::vector<std::string>, std::less<>> merged;
  for (const auto* source : {&file_values, &flag_values})
    for (const auto& [key, values] : *source) {
      if (!spec.find(key)) throw InputError(spec.name + ": unknown key '" + key + "'");
      merged[key] = values;
    }
  // Type errors in given values are reported before missing keys.
  for (const auto& opt : spec.options)
    if (auto it = merged.find(opt.name); it != merged.end()) detail::check_value(spec.name, opt, it->second);
  for (const auto& opt : spec.options) {
    if (merged.count(opt.name)) continue;
    if (opt.default_value) {
      merged[opt.name] = {*opt.default_value};
    } else if (opt.required) {
      throw InputError(spec.name + ": missing required key '" + opt.name + "'");
    }
  }
  std::uint64_t seed = 0;
  if (auto it = merged.find("seed"); it != merged.end()) {
    const auto s = text::parse_number<std::uint64_t>(it->second.front());
    if (!s) throw InputError(spec.name + ": key 'seed': expected non-negative integer, got '" + it->second.front() + "'");
    seed = *s;
  }
  return RunConfig(spec.name, std::move(merged), seed);
}

inline RunConfig load_config(const std::string& path, const CommandSpec& spec, const RawValues& flag_values = {}) {
  return resolve_config(spec, load_config_values(path), flag_values);
}

inline std::string usage(const CommandSpec& spec) {
  std::string out = "usage: bbt " + spec.name + " [--config FILE] [options]\n  " + spec.summary + "\n";
  for (const auto& o : spec.options) {
    out += "  --" + o.name;
    if (o.kind == Kind::paths) out += " PATH...";
    else if (o.kind != Kind::flag) out += " VALUE";
    out += "  " + o.help;
    if (o.required) out += " (required)";
    if (o.default_value) out += " [default: " + *o.default_value + "]";
    out += "\n";
  }
  return out;
}

}  // namespace bbt::cli
