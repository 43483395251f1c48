#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "scarq/metrics.hpp"
#include "scarq/pipeline.hpp"

namespace scarq {

inline constexpr const char* report_header =
    "subject_id,slice,class,dsc,hd_mm,vol_manual_cm3,vol_auto_cm3,vol_diff_cm3,scar_burden_pct";

/// Numbers use 10 significant digits; NaN is written as "nan".
std::string format_report_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_report_csv(std::string_view text);

std::string format_events_csv(const std::vector<QcEvent>& events);

/// Rows, events, subject summaries and the config echo as one JSON document.
std::string format_report_json(const QuantReport& report);

/// Manual vs automatic volumes of `cls` from the per-subject ("all") rows.
PairedSeries volume_series(const std::vector<MetricRow>& rows, std::string_view cls);

/// Scatter of automatic against manual values with the identity line and Pearson r.
std::string scatter_svg(const PairedSeries& series, std::string_view title);

/// Mean against difference with bias and 1.96 sd limits.
std::string bland_altman_svg(const PairedSeries& series, std::string_view title);

}  // namespace scarq
