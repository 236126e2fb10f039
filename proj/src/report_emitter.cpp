#include "counterprobe/report_emitter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "counterprobe/errors.hpp"
#include "counterprobe/text.hpp"

namespace counterprobe {

std::string_view to_string(GroupBy g) { return g == GroupBy::KnowledgeKind ? "kind" : "occupation"; }

GroupBy group_by_from_string(std::string_view s) {
  if (s == "kind") return GroupBy::KnowledgeKind;
  if (s == "occupation") return GroupBy::Occupation;
  throw UsageError("unknown grouping '" + std::string(s) + "' (expected kind or occupation)");
}

std::string_view to_string(ReportFormat f) {
  switch (f) {
    case ReportFormat::TableText:
      return "table-text";
    case ReportFormat::Csv:
      return "csv";
    case ReportFormat::ChartSvg:
      return "chart-svg";
    case ReportFormat::ChartData:
      return "chart-data";
  }
  return "?";
}

ReportFormat report_format_from_string(std::string_view s) {
  for (ReportFormat f : {ReportFormat::TableText, ReportFormat::Csv, ReportFormat::ChartSvg, ReportFormat::ChartData}) {
    if (to_string(f) == s) return f;
  }
  throw UsageError("unknown report format '" + std::string(s) + "'");
}

void ReportSpec::validate() const {
  if (ks.empty()) throw UsageError("report needs at least one k");
  if (formats.empty()) throw UsageError("report needs at least one format");
  for (auto k : ks) {
    if (k == 0) throw UsageError("k must be >= 1");
  }
}

namespace {

struct Accum {
  double female = 0.0;
  double male = 0.0;
  std::size_t n = 0;
  std::size_t non_gendered = 0;

  void add(double f, double m) {
    female += f;
    male += m;
    ++n;
  }
  double female_mean() const { return n ? female / static_cast<double>(n) : 0.0; }
  double male_mean() const { return n ? male / static_cast<double>(n) : 0.0; }
};

std::string file_safe(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return out;
}

std::string slice_stem(const ReportSlice& s) { return file_safe(s.model_id) + "_k" + std::to_string(s.k); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string pad_left(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

std::vector<BarGroup> bar_groups(std::span<const ConditionResult> conditions, const std::string& model_id,
                                 std::size_t k, GroupBy group_by) {
  // Per-occupation cell means first, so multi-sample kinds count once per occupation.
  std::map<std::pair<std::string, PromptKind>, Accum> cells;
  for (const auto& c : conditions) {
    if (c.model_id != model_id || c.k != k) continue;
    auto& cell = cells[{c.occupation, c.kind}];
    cell.add(c.p_female, c.p_male);
    if (c.non_gendered) ++cell.non_gendered;
  }

  std::vector<BarGroup> groups;
  if (group_by == GroupBy::KnowledgeKind) {
    std::array<Accum, kAllPromptKinds.size()> per_kind{};
    for (const auto& [key, cell] : cells) {
      auto& acc = per_kind[static_cast<std::size_t>(key.second)];
      acc.add(cell.female_mean(), cell.male_mean());
      acc.non_gendered += cell.non_gendered;
    }
    for (PromptKind kind : kAllPromptKinds) {
      const auto& acc = per_kind[static_cast<std::size_t>(kind)];
      groups.push_back({std::string(to_string(kind)), acc.female_mean(), acc.male_mean(), acc.n, acc.non_gendered});
    }
  } else {
    std::map<std::string, Accum> per_occupation;
    for (const auto& [key, cell] : cells) {
      auto& acc = per_occupation[key.first];
      acc.add(cell.female_mean(), cell.male_mean());
      acc.non_gendered += cell.non_gendered;
    }
    for (const auto& [occupation, acc] : per_occupation) {
      groups.push_back({occupation, acc.female_mean(), acc.male_mean(), 1, acc.non_gendered});
    }
  }
  return groups;
}

nlohmann::json chart_data_json(const ReportSlice& slice, GroupBy group_by) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : slice.groups) {
    groups.push_back({{"label", g.label},
                      {"female", g.female_mean},
                      {"male", g.male_mean},
                      {"n_occupations", g.n_occupations},
                      {"n_non_gendered", g.n_non_gendered}});
  }
  return nlohmann::json{
      {"schema", "counterprobe.chart/1"},
      {"model", slice.model_id},
      {"k", slice.k},
      {"group_by", to_string(group_by)},
      {"aggregate", "unweighted mean across occupations"},
      {"series", nlohmann::json::array({{{"name", "female"}, {"color", kFemaleColor}},
                                        {{"name", "male"}, {"color", kMaleColor}}})},
      {"groups", std::move(groups)},
  };
}

std::string render_bar_chart_svg(const ReportSlice& slice, GroupBy group_by) {
  constexpr int kBarWidth = 14;
  constexpr int kGroupGap = 18;
  constexpr int kPlotHeight = 260;
  constexpr int kLeft = 60;
  constexpr int kTop = 50;
  constexpr int kLabelSpace = 170;

  double max_value = 0.0;
  for (const auto& g : slice.groups) max_value = std::max({max_value, g.female_mean, g.male_mean});
  // Round the axis up to the next tenth; keep a visible range for empty slices.
  const double axis_max = max_value > 0.0 ? std::ceil(max_value * 10.0 - 1e-9) / 10.0 : 0.1;

  const int group_width = 2 * kBarWidth + kGroupGap;
  const int plot_width = std::max<int>(static_cast<int>(slice.groups.size()) * group_width, 200);
  const int width = kLeft + plot_width + 130;
  const int height = kTop + kPlotHeight + kLabelSpace;
  const int baseline = kTop + kPlotHeight;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"14\" font-weight=\"bold\">"
      << xml_escape(slice.model_id) << ", top-" << slice.k << " mean gender probability by "
      << to_string(group_by) << "</text>\n";

  for (int tick = 0; tick <= 5; ++tick) {
    const double v = axis_max * tick / 5.0;
    const int y = baseline - static_cast<int>(std::lround(kPlotHeight * tick / 5.0));
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kLeft + plot_width << "\" y2=\"" << y
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fixed(v, 2) << "</text>\n";
  }
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << baseline
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << baseline << "\" x2=\"" << kLeft + plot_width << "\" y2=\"" << baseline
      << "\" stroke=\"black\"/>\n";

  const auto bar = [&](int x, double value, std::string_view color, const std::string& title) {
    const int h = static_cast<int>(std::lround(kPlotHeight * std::min(value / axis_max, 1.0)));
    svg << "<rect x=\"" << x << "\" y=\"" << baseline - h << "\" width=\"" << kBarWidth << "\" height=\"" << h
        << "\" fill=\"" << color << "\"><title>" << xml_escape(title) << "</title></rect>\n";
  };

  for (std::size_t i = 0; i < slice.groups.size(); ++i) {
    const auto& g = slice.groups[i];
    const int x0 = kLeft + kGroupGap / 2 + static_cast<int>(i) * group_width;
    bar(x0, g.female_mean, kFemaleColor, g.label + " female " + fixed(g.female_mean, 4));
    bar(x0 + kBarWidth, g.male_mean, kMaleColor, g.label + " male " + fixed(g.male_mean, 4));
    const int lx = x0 + kBarWidth;
    const int ly = baseline + 10;
    svg << "<text x=\"" << lx << "\" y=\"" << ly << "\" text-anchor=\"end\" transform=\"rotate(-60 " << lx << " " << ly
        << ")\">" << xml_escape(g.label) << "</text>\n";
  }

  const int legend_x = kLeft + plot_width + 20;
  svg << "<rect x=\"" << legend_x << "\" y=\"" << kTop << "\" width=\"12\" height=\"12\" fill=\"" << kFemaleColor
      << "\"/>\n<text x=\"" << legend_x + 18 << "\" y=\"" << kTop + 10 << "\">female</text>\n";
  svg << "<rect x=\"" << legend_x << "\" y=\"" << kTop + 20 << "\" width=\"12\" height=\"12\" fill=\"" << kMaleColor
      << "\"/>\n<text x=\"" << legend_x + 18 << "\" y=\"" << kTop + 30 << "\">male</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

Report build_report(const ParsedResults& results, const ReportSpec& spec) {
  spec.validate();

  std::vector<std::string> models = spec.models;
  if (models.empty()) {
    std::set<std::string> seen;
    for (const auto& c : results.conditions) seen.insert(c.model_id);
    models.assign(seen.begin(), seen.end());
  }

  std::set<std::pair<std::string, std::size_t>> present;
  for (const auto& c : results.conditions) present.insert({c.model_id, c.k});

  Report report;
  for (const auto& model : models) {
    for (auto k : spec.ks) {
      if (!present.contains({model, k})) {
        report.gaps.emplace_back(model, k);
        continue;
      }
      ReportSlice slice;
      slice.model_id = model;
      slice.k = k;
      slice.groups = bar_groups(results.conditions, model, k, spec.group_by);
      for (const auto& e : results.effects) {
        if (e.model_id != model || e.k != k) continue;
        auto& counts = slice.effects[static_cast<std::size_t>(e.kind)];
        switch (e.effect) {
          case Effect::Enhanced:
            ++counts.enhanced;
            break;
          case Effect::Mitigated:
            ++counts.mitigated;
            break;
          case Effect::Overturned:
            ++counts.overturned;
            break;
          case Effect::Unchanged:
            ++counts.unchanged;
            break;
        }
      }
      report.slices.push_back(std::move(slice));
    }
  }

  const auto has = [&](ReportFormat f) { return spec.formats.contains(f); };
  const std::string group_header = spec.group_by == GroupBy::KnowledgeKind ? "kind" : "occupation";

  if (has(ReportFormat::Csv)) {
    std::string csv = "model,k," + group_header + ",p_female_mean,p_male_mean,n_occupations,n_non_gendered\n";
    std::string effects = "model,k,kind,enhanced,mitigated,overturned,unchanged\n";
    for (const auto& s : report.slices) {
      for (const auto& g : s.groups) {
        csv += s.model_id + "," + std::to_string(s.k) + "," + g.label + "," + format_double(g.female_mean) + "," +
               format_double(g.male_mean) + "," + std::to_string(g.n_occupations) + "," +
               std::to_string(g.n_non_gendered) + "\n";
      }
      for (PromptKind kind : kAllPromptKinds) {
        if (kind == PromptKind::Base) continue;
        const auto& c = s.effects[static_cast<std::size_t>(kind)];
        effects += s.model_id + "," + std::to_string(s.k) + "," + std::string(to_string(kind)) + "," +
                   std::to_string(c.enhanced) + "," + std::to_string(c.mitigated) + "," +
                   std::to_string(c.overturned) + "," + std::to_string(c.unchanged) + "\n";
      }
    }
    report.artifacts["summary.csv"] = std::move(csv);
    report.artifacts["effects.csv"] = std::move(effects);
  }

  for (const auto& s : report.slices) {
    if (has(ReportFormat::ChartData)) {
      report.artifacts["chart_" + slice_stem(s) + ".json"] = chart_data_json(s, spec.group_by).dump(2) + "\n";
    }
    if (has(ReportFormat::ChartSvg)) {
      report.artifacts["chart_" + slice_stem(s) + ".svg"] = render_bar_chart_svg(s, spec.group_by);
    }
  }

  const std::size_t requested = models.size() * spec.ks.size();
  std::string gaps;
  for (const auto& [model, k] : report.gaps) gaps += model + "\tk=" + std::to_string(k) + "\n";
  report.artifacts["gaps.txt"] = gaps;

  if (has(ReportFormat::TableText)) {
    std::ostringstream txt;
    txt << "Gender probability report (unweighted means across occupations)\n";
    txt << "slices: " << report.slices.size() << " of " << requested << "; gaps: " << report.gaps.size();
    if (requested > 0) txt << " (" << fixed(100.0 * static_cast<double>(report.gaps.size()) / requested, 1) << "%)";
    txt << "\n";
    for (const auto& [model, k] : report.gaps) txt << "  gap: " << model << " k=" << k << "\n";

    for (const auto& s : report.slices) {
      txt << "\n== " << s.model_id << ", top-" << s.k << " ==\n";
      txt << pad_right(group_header, 36) << pad_left("p_female", 10) << pad_left("p_male", 10)
          << pad_left("n_occ", 7) << pad_left("n_nongen", 10) << "\n";
      for (const auto& g : s.groups) {
        txt << pad_right(g.label, 36) << pad_left(fixed(g.female_mean, 4), 10) << pad_left(fixed(g.male_mean, 4), 10)
            << pad_left(std::to_string(g.n_occupations), 7) << pad_left(std::to_string(g.n_non_gendered), 10) << "\n";
      }
      txt << "\n" << pad_right("effects by kind", 36) << pad_left("enh", 6) << pad_left("mit", 6)
          << pad_left("over", 6) << pad_left("unch", 6) << "\n";
      for (PromptKind kind : kAllPromptKinds) {
        if (kind == PromptKind::Base) continue;
        const auto& c = s.effects[static_cast<std::size_t>(kind)];
        txt << pad_right(std::string(to_string(kind)), 36) << pad_left(std::to_string(c.enhanced), 6)
            << pad_left(std::to_string(c.mitigated), 6) << pad_left(std::to_string(c.overturned), 6)
            << pad_left(std::to_string(c.unchanged), 6) << "\n";
      }
    }
    report.artifacts["report.txt"] = txt.str();
  }
  return report;
}

}  // namespace counterprobe
