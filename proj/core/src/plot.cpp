#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "valrl/config.hpp"
#include "valrl/errors.hpp"
#include "valrl/io.hpp"
#include "valrl/telemetry.hpp"
#include "valrl/warnings.hpp"

namespace valrl::telemetry {
namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

Band parse_band(std::string_view name) {
  if (name == "minmax") return Band::kMinMax;
  if (name == "stderr") return Band::kStdErr;
  throw ConfigError("unknown band '" + std::string(name) + "' (expected minmax or stderr)");
}

Format parse_format(std::string_view name) {
  if (name == "csv") return Format::kCsv;
  if (name == "svg") return Format::kSvg;
  throw ConfigError("unknown format '" + std::string(name) + "' (expected csv or svg)");
}

std::vector<Curve> aggregate(const RunSet& runs, Metric metric, Band band) {
  std::vector<Curve> curves;
  for (const auto& [group, logs] : runs) {
    if (logs.empty()) throw ContractViolation("aggregate: group '" + group + "' has no runs");
    std::size_t length = logs.front().records.size();
    for (const auto& log : logs) length = std::min(length, log.records.size());
    for (const auto& log : logs) {
      if (log.records.size() != length) {
        warn("aggregate: group '" + group + "' truncated to " + std::to_string(length) +
             " iterations (shortest run)");
        break;
      }
    }
    Curve c;
    c.group = group;
    c.runs = logs.size();
    const double n = static_cast<double>(logs.size());
    for (std::size_t it = 0; it < length; ++it) {
      std::vector<double> v;
      for (const auto& log : logs) v.push_back(metric_value(log.records[it], metric));
      double sum = 0.0;
      for (double x : v) sum += x;
      const double m = sum / n;
      c.mean.push_back(m);
      if (band == Band::kMinMax) {
        c.lo.push_back(*std::min_element(v.begin(), v.end()));
        c.hi.push_back(*std::max_element(v.begin(), v.end()));
      } else {
        double se = 0.0;
        if (v.size() > 1) {
          double ss = 0.0;
          for (double x : v) ss += (x - m) * (x - m);
          se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        }
        c.lo.push_back(m - se);
        c.hi.push_back(m + se);
      }
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

RunSet group_by(const std::vector<ExperimentLog>& logs, std::string_view binding) {
  const auto dot = binding.rfind('.');
  if (dot == std::string_view::npos) throw ConfigError("group-by binding must look like Component.param");
  const std::string component(binding.substr(0, dot));
  const std::string param(binding.substr(dot + 1));
  RunSet out;
  std::vector<std::uint64_t> fingerprints;
  for (const auto& log : logs) {
    const auto cfg = config::parse_config(log.header.config_dump, log.path.string());
    const auto* b = cfg.find(component, param);
    std::string key = b ? b->value.to_string() : "<unset>";
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& g) { return g.first == key; });
    if (it == out.end()) {
      out.emplace_back(key, std::vector<ExperimentLog>{});
      fingerprints.push_back(log.header.fingerprint());
      it = out.end() - 1;
    } else if (fingerprints[static_cast<std::size_t>(it - out.begin())] != log.header.fingerprint()) {
      warn("group '" + key + "': '" + log.path.string() + "' differs from the group in more than its seed");
    }
    it->second.push_back(log);
  }
  return out;
}

std::string render_csv(const std::vector<Curve>& curves) {
  std::string out = "iteration,group,mean,lo,hi\n";
  char buf[160];
  std::size_t length = 0;
  for (const auto& c : curves) length = std::max(length, c.mean.size());
  for (std::size_t it = 0; it < length; ++it) {
    for (const auto& c : curves) {
      if (it >= c.mean.size()) continue;
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", c.mean[it], c.lo[it], c.hi[it]);
      out += std::to_string(it) + "," + c.group + buf;
    }
  }
  return out;
}

std::string render_svg(const std::vector<Curve>& curves, const std::string& y_label) {
  constexpr double kW = 720, kH = 440, kLeft = 70, kRight = 190, kTop = 30, kBottom = 60;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  std::size_t length = 1;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& c : curves) {
    length = std::max(length, c.mean.size());
    for (std::size_t i = 0; i < c.mean.size(); ++i) {
      lo = std::min(lo, c.lo[i]);
      hi = std::max(hi, c.hi[i]);
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-9) lo -= 0.5, hi += 0.5;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto x_of = [&](std::size_t i) {
    return kLeft + (length > 1 ? pw * static_cast<double>(i) / static_cast<double>(length - 1) : pw / 2);
  };
  auto y_of = [&](double v) { return kTop + ph * (hi - v) / (hi - lo); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
    << kW << " " << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // Axes and ticks.
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    const double y = y_of(v);
    s << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << fmt("%.2f", y) << "\" x2=\"" << kLeft << "\" y2=\""
      << fmt("%.2f", y) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt("%.2f", y + 4) << "\" text-anchor=\"end\">" << fmt("%.3g", v)
      << "</text>\n";
  }
  for (int t = 0; t <= 4; ++t) {
    const auto i = static_cast<std::size_t>(std::llround(static_cast<double>(length - 1) * t / 4.0));
    const double x = x_of(i);
    s << "<line x1=\"" << fmt("%.2f", x) << "\" y1=\"" << kTop + ph << "\" x2=\"" << fmt("%.2f", x) << "\" y2=\""
      << kTop + ph + 4 << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << fmt("%.2f", x) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << i
      << "</text>\n";
  }
  s << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">Iteration</text>\n";
  s << "<text transform=\"translate(18," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(y_label) << "</text>\n";

  for (std::size_t g = 0; g < curves.size(); ++g) {
    const auto& c = curves[g];
    const char* color = kPalette[g % std::size(kPalette)];
    if (!c.mean.empty()) {
      s << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < c.hi.size(); ++i) s << fmt("%.2f", x_of(i)) << "," << fmt("%.2f", y_of(c.hi[i])) << " ";
      for (std::size_t i = c.lo.size(); i-- > 0;) s << fmt("%.2f", x_of(i)) << "," << fmt("%.2f", y_of(c.lo[i])) << " ";
      s << "\"/>\n";
      s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < c.mean.size(); ++i) {
        s << fmt("%.2f", x_of(i)) << "," << fmt("%.2f", y_of(c.mean[i])) << (i + 1 < c.mean.size() ? " " : "");
      }
      s << "\"/>\n";
    }
    const double ly = kTop + 10 + 20.0 * static_cast<double>(g);
    s << "<line x1=\"" << kW - kRight + 15 << "\" y1=\"" << ly << "\" x2=\"" << kW - kRight + 40 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
    s << "<text x=\"" << kW - kRight + 46 << "\" y=\"" << ly + 4 << "\">" << xml_escape(c.group) << " (n=" << c.runs
      << ")</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void plot(const std::vector<Curve>& curves, const std::filesystem::path& out, Format format,
          const std::string& y_label) {
  if (curves.empty()) throw ContractViolation("plot: no groups to plot");
  const std::string text = format == Format::kCsv ? render_csv(curves) : render_svg(curves, y_label);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  io::atomic_write(out, text);
}

std::vector<SummaryRow> summarize(const std::vector<Curve>& curves) {
  std::vector<SummaryRow> rows;
  for (const auto& c : curves) {
    SummaryRow r;
    r.group = c.group;
    r.runs = c.runs;
    r.iterations = c.mean.size();
    const std::size_t tail = std::max<std::size_t>(1, c.mean.size() / 10);
    if (!c.mean.empty()) {
      double s = 0.0;
      for (std::size_t i = c.mean.size() - tail; i < c.mean.size(); ++i) s += c.mean[i];
      r.final_mean = s / static_cast<double>(tail);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_summary(const std::vector<SummaryRow>& rows) {
  std::string out = "group,runs,iterations,final_mean\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.final_mean);
    out += r.group + "," + std::to_string(r.runs) + "," + std::to_string(r.iterations) + "," + buf + "\n";
  }
  return out;
}

std::vector<SummaryRow> compare_against_baseline(const std::vector<ExperimentLog>& new_runs,
                                                 const std::filesystem::path& baseline_dir,
                                                 const std::filesystem::path& out, Metric metric) {
  if (new_runs.empty()) throw ContractViolation("compare: no runs given");
  std::set<std::string> environments;
  for (const auto& log : new_runs) environments.insert(log.header.environment);

  std::vector<ExperimentLog> baselines;
  std::set<std::string> mismatched;
  for (const auto& path : find_logs(baseline_dir)) {
    auto log = read_log(path);
    if (!environments.count(log.header.environment)) mismatched.insert(log.header.environment);
    baselines.push_back(std::move(log));
  }
  if (baselines.empty()) warn("compare: no baseline logs under '" + baseline_dir.string() + "'");
  for (const auto& env : mismatched) {
    warn("compare: baselines include environment '" + env + "', which none of the new runs use");
  }

  RunSet runs = group_by(new_runs, "Runner.agent_name");
  for (auto& [name, logs] : group_by(baselines, "Runner.agent_name")) {
    const std::string label = "baseline/" + name;
    runs.emplace_back(label, std::move(logs));
  }
  const auto curves = aggregate(runs, metric, Band::kStdErr);
  const auto ext = out.extension().string();
  plot(curves, out, ext == ".csv" ? Format::kCsv : Format::kSvg, to_string(metric));
  const auto rows = summarize(curves);
  std::filesystem::path summary = out;
  summary += ".summary.csv";
  io::atomic_write(summary, render_summary(rows));
  return rows;
}

}  // namespace valrl::telemetry
