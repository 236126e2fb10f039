#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "counterprobe/metrics_engine.hpp"

namespace counterprobe {

enum class GroupBy { KnowledgeKind, Occupation };
enum class ReportFormat { TableText, Csv, ChartSvg, ChartData };

std::string_view to_string(GroupBy g);
GroupBy group_by_from_string(std::string_view s);
std::string_view to_string(ReportFormat f);
ReportFormat report_format_from_string(std::string_view s);

inline constexpr std::string_view kFemaleColor = "#1f77b4";  // blue
inline constexpr std::string_view kMaleColor = "#ff7f0e";    // orange

struct ReportSpec {
  // Empty: every model present in the results.
  std::vector<std::string> models;
  std::vector<std::size_t> ks{3, 5, 10};
  GroupBy group_by = GroupBy::KnowledgeKind;
  std::set<ReportFormat> formats{ReportFormat::TableText, ReportFormat::Csv, ReportFormat::ChartSvg,
                                 ReportFormat::ChartData};

  // Throws UsageError when ks or formats is empty, or a k is 0.
  void validate() const;
};

struct BarGroup {
  std::string label;
  double female_mean = 0.0;
  double male_mean = 0.0;
  std::size_t n_occupations = 0;
  std::size_t n_non_gendered = 0;
};

struct EffectCounts {
  std::size_t enhanced = 0;
  std::size_t mitigated = 0;
  std::size_t overturned = 0;
  std::size_t unchanged = 0;

  std::size_t total() const noexcept { return enhanced + mitigated + overturned + unchanged; }
};

struct ReportSlice {
  std::string model_id;
  std::size_t k = 0;
  std::vector<BarGroup> groups;
  // Indexed by PromptKind; Base stays zero.
  std::array<EffectCounts, kAllPromptKinds.size()> effects{};
};

struct Report {
  std::vector<ReportSlice> slices;
  std::vector<std::pair<std::string, std::size_t>> gaps;  // (model, k) without results
  // File name -> contents, ready to be written under the output directory.
  std::map<std::string, std::string> artifacts;
};

// Unweighted means across occupations of each occupation's per-cell mean.
// With GroupBy::KnowledgeKind there is one group per PromptKind in
// declaration order; with GroupBy::Occupation one group per occupation,
// sorted by name, averaging every kind of that occupation.
std::vector<BarGroup> bar_groups(std::span<const ConditionResult> conditions, const std::string& model_id,
                                 std::size_t k, GroupBy group_by);

std::string render_bar_chart_svg(const ReportSlice& slice, GroupBy group_by);
nlohmann::json chart_data_json(const ReportSlice& slice, GroupBy group_by);

Report build_report(const ParsedResults& results, const ReportSpec& spec);

}  // namespace counterprobe
