#pragma once

// Text forms accepted on the command line and in flat key=value config files.

#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "altpgd/attack.hpp"
#include "altpgd/dataset.hpp"
#include "altpgd/errors.hpp"
#include "altpgd/losses.hpp"
#include "altpgd/schedules.hpp"

namespace altpgd::cli {

/// Decimal ("0.03") or fraction ("8/255") syntax.
inline double parse_real_or_fraction(std::string_view text) {
  const auto parse = [&](std::string_view s) {
    s = detail::trim(s);
    std::string tmp(s);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (tmp.empty() || end != tmp.c_str() + tmp.size())
      throw ConfigError("bad number '" + std::string(text) + "'");
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return parse(text);
  const double den = parse(text.substr(slash + 1));
  if (den == 0.0) throw ConfigError("zero denominator in '" + std::string(text) + "'");
  return parse(text.substr(0, slash)) / den;
}

/// "ce,cw,dlr" -> stage order.
inline LossSchedule parse_losses(std::string_view text) {
  LossSchedule s;
  for (auto tok : detail::split_commas(text)) {
    const auto kind = parse_surrogate(detail::trim(tok));
    if (!kind) throw ConfigError("unknown loss '" + std::string(tok) + "' (expected ce, cw, dlr)");
    s.stages.push_back(*kind);
  }
  return s;
}

/// "ce;cw;ce,cw" -> one schedule per attack.
inline std::vector<LossSchedule> parse_loss_list(std::string_view text) {
  std::vector<LossSchedule> out;
  std::size_t start = 0;
  while (true) {
    const auto semi = text.find(';', start);
    const auto part = text.substr(start, semi == std::string_view::npos ? semi : semi - start);
    if (!detail::trim(part).empty()) out.push_back(parse_losses(part));
    if (semi == std::string_view::npos) break;
    start = semi + 1;
  }
  if (out.empty()) throw ConfigError("no losses given");
  return out;
}

inline Norm parse_norm(std::string_view text) {
  if (text == "inf" || text == "linf") return Norm::Inf;
  if (text == "2" || text == "l2") return Norm::Two;
  throw ConfigError("unknown norm '" + std::string(text) + "' (expected inf or 2)");
}

/// fixed-quarter | gama | md2 | md3 | fixed:<value>
inline StepSchedule parse_schedule(std::string_view text, double eps, std::size_t total) {
  if (text.starts_with("fixed:")) {
    StepSchedule s = FixedStep{parse_real_or_fraction(text.substr(6))};
    validate_schedule(s, total);
    return s;
  }
  return make_paper_schedule(text, eps, total);
}

inline Combiner parse_combiner(std::string_view text, double gamma) {
  if (text == "alternate") return {CombinerKind::Alternate, gamma};
  if (text == "convex") return {CombinerKind::Convex, gamma};
  if (text == "ensemble" || text == "ensemble-or") return {CombinerKind::EnsembleOr, gamma};
  throw ConfigError("unknown combiner '" + std::string(text) + "'");
}

inline InitStrategy parse_init(std::string_view text, std::uint64_t seed) {
  if (text == "clean") return CleanInit{};
  if (text == "random" || text == "random-sign") return RandomSignInit{seed};
  throw ConfigError("unknown init '" + std::string(text) + "'");
}

/// Flat key=value file -> "--key=value" arguments. Blank lines and
/// lines starting with '#' are skipped.
inline std::vector<std::string> config_file_args(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::vector<std::string> args;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    const auto key = detail::trim(t.substr(0, eq));
    const auto value = detail::trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    args.push_back("--" + std::string(key) + "=" + std::string(value));
  }
  return args;
}

}  // namespace altpgd::cli
