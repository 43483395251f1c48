#include "scarq/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace scarq {

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream out;
    out << std::setprecision(10) << v;
    return out.str();
}

double parse_field(const std::string& s) {
    if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError("report: bad number '" + s + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

nlohmann::json json_number(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

std::string escape_xml(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    double pixel_lo = 0.0;
    double pixel_hi = 1.0;
    double map(double v) const { return pixel_lo + (v - lo) / (hi - lo) * (pixel_hi - pixel_lo); }
};

Axis make_axis(double lo, double hi, double p0, double p1) {
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad, p0, p1};
}

constexpr int svg_w = 480;
constexpr int svg_h = 400;
constexpr int margin = 50;

void svg_open(std::ostringstream& out, std::string_view title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_w << "\" height=\"" << svg_h
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << svg_w / 2 << "\" y=\"20\" text-anchor=\"middle\">" << escape_xml(title) << "</text>\n"
        << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << svg_w - 2 * margin << "\" height=\""
        << svg_h - 2 * margin << "\" fill=\"none\" stroke=\"black\"/>\n";
}

void svg_axis_labels(std::ostringstream& out, const Axis& x, const Axis& y, std::string_view xl, std::string_view yl) {
    out << std::setprecision(4);
    out << "<text x=\"" << margin << "\" y=\"" << svg_h - margin + 15 << "\">" << x.lo << "</text>\n"
        << "<text x=\"" << svg_w - margin << "\" y=\"" << svg_h - margin + 15 << "\" text-anchor=\"end\">" << x.hi
        << "</text>\n"
        << "<text x=\"" << margin - 4 << "\" y=\"" << svg_h - margin << "\" text-anchor=\"end\">" << y.lo << "</text>\n"
        << "<text x=\"" << margin - 4 << "\" y=\"" << margin + 10 << "\" text-anchor=\"end\">" << y.hi << "</text>\n"
        << "<text x=\"" << svg_w / 2 << "\" y=\"" << svg_h - 12 << "\" text-anchor=\"middle\">" << escape_xml(xl)
        << "</text>\n"
        << "<text x=\"14\" y=\"" << svg_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << svg_h / 2
        << ")\">" << escape_xml(yl) << "</text>\n";
}

}  // namespace

std::string format_report_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream out;
    out << report_header << '\n';
    for (const auto& r : rows) {
        out << r.subject_id << ',' << r.slice << ',' << r.cls << ',' << num(r.dsc) << ',' << num(r.hd_mm) << ','
            << num(r.vol_manual_cm3) << ',' << num(r.vol_auto_cm3) << ',' << num(r.vol_diff_cm3) << ','
            << num(r.scar_burden_pct) << '\n';
    }
    return out.str();
}

std::vector<MetricRow> parse_report_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) throw FormatError("report: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != report_header) throw FormatError("report: unexpected header");
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 9) throw FormatError("report: expected 9 fields, got " + std::to_string(f.size()));
        MetricRow r;
        r.subject_id = f[0];
        r.slice = f[1];
        r.cls = f[2];
        r.dsc = parse_field(f[3]);
        r.hd_mm = parse_field(f[4]);
        r.vol_manual_cm3 = parse_field(f[5]);
        r.vol_auto_cm3 = parse_field(f[6]);
        r.vol_diff_cm3 = parse_field(f[7]);
        r.scar_burden_pct = parse_field(f[8]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string format_events_csv(const std::vector<QcEvent>& events) {
    std::ostringstream out;
    out << "subject_id,slice,kind,detail\n";
    for (const auto& e : events) {
        std::string detail = e.detail;
        std::replace(detail.begin(), detail.end(), ',', ';');
        std::replace(detail.begin(), detail.end(), '\n', ' ');
        out << e.subject_id << ',' << (e.slice < 0 ? std::string("subject") : std::to_string(e.slice)) << ','
            << e.kind << ',' << detail << '\n';
    }
    return out.str();
}

std::string format_report_json(const QuantReport& report) {
    nlohmann::ordered_json doc;
    doc["config"] = report.config_echo;
    doc["partial"] = report.partial();
    auto& rows = doc["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json j;
        j["subject_id"] = r.subject_id;
        j["slice"] = r.slice;
        j["class"] = r.cls;
        j["dsc"] = json_number(r.dsc);
        j["hd_mm"] = json_number(r.hd_mm);
        j["vol_manual_cm3"] = json_number(r.vol_manual_cm3);
        j["vol_auto_cm3"] = json_number(r.vol_auto_cm3);
        j["vol_diff_cm3"] = json_number(r.vol_diff_cm3);
        j["scar_burden_pct"] = json_number(r.scar_burden_pct);
        rows.push_back(std::move(j));
    }
    auto& subjects = doc["subjects"] = nlohmann::ordered_json::array();
    for (const auto& s : report.subjects) {
        nlohmann::ordered_json j;
        j["subject_id"] = s.subject_id;
        j["scar_predicted"] = s.scar_predicted;
        j["scar_manual"] = s.scar_manual ? nlohmann::ordered_json(*s.scar_manual) : nlohmann::ordered_json(nullptr);
        j["slices"] = s.slices;
        j["failed_slices"] = s.failed_slices;
        subjects.push_back(std::move(j));
    }
    auto& events = doc["events"] = nlohmann::ordered_json::array();
    for (const auto& e : report.events) {
        events.push_back({{"subject_id", e.subject_id}, {"slice", e.slice}, {"kind", e.kind}, {"detail", e.detail}});
    }
    return doc.dump(2) + "\n";
}

PairedSeries volume_series(const std::vector<MetricRow>& rows, std::string_view cls) {
    PairedSeries s;
    for (const auto& r : rows) {
        if (r.slice != slice_all || r.cls != cls) continue;
        if (std::isnan(r.vol_manual_cm3) || std::isnan(r.vol_auto_cm3)) continue;
        s.manual.push_back(r.vol_manual_cm3);
        s.automatic.push_back(r.vol_auto_cm3);
    }
    return s;
}

std::string scatter_svg(const PairedSeries& series, std::string_view title) {
    series.validate();
    const auto [mlo, mhi] = std::minmax_element(series.manual.begin(), series.manual.end());
    const auto [alo, ahi] = std::minmax_element(series.automatic.begin(), series.automatic.end());
    const double lo = std::min(*mlo, *alo);
    const double hi = std::max(*mhi, *ahi);
    const Axis x = make_axis(lo, hi, margin, svg_w - margin);
    const Axis y = make_axis(lo, hi, svg_h - margin, margin);

    std::ostringstream out;
    svg_open(out, title);
    out << std::setprecision(6);
    out << "<line x1=\"" << x.map(x.lo) << "\" y1=\"" << y.map(x.lo) << "\" x2=\"" << x.map(x.hi) << "\" y2=\""
        << y.map(x.hi) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    for (std::size_t i = 0; i < series.manual.size(); ++i) {
        out << "<circle cx=\"" << x.map(series.manual[i]) << "\" cy=\"" << y.map(series.automatic[i])
            << "\" r=\"3\" fill=\"steelblue\"/>\n";
    }
    std::ostringstream r_text;
    const double r = pearson_r(series);
    r_text << "r = " << std::fixed << std::setprecision(3) << r;
    out << "<text x=\"" << margin + 8 << "\" y=\"" << margin + 16 << "\">" << r_text.str() << "</text>\n";
    svg_axis_labels(out, x, y, "manual", "automatic");
    out << "</svg>\n";
    return out.str();
}

std::string bland_altman_svg(const PairedSeries& series, std::string_view title) {
    series.validate();
    const AgreementResult ba = bland_altman(series);
    std::vector<double> mean(series.manual.size());
    std::vector<double> diff(series.manual.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
        mean[i] = 0.5 * (series.manual[i] + series.automatic[i]);
        diff[i] = series.automatic[i] - series.manual[i];
    }
    const auto [xlo, xhi] = std::minmax_element(mean.begin(), mean.end());
    double ylo = std::min(*std::min_element(diff.begin(), diff.end()), ba.loa_low);
    double yhi = std::max(*std::max_element(diff.begin(), diff.end()), ba.loa_high);
    const Axis x = make_axis(*xlo, *xhi, margin, svg_w - margin);
    const Axis y = make_axis(ylo, yhi, svg_h - margin, margin);

    std::ostringstream out;
    svg_open(out, title);
    out << std::setprecision(6);
    auto hline = [&](double v, const char* colour, const char* dash, const std::string& label) {
        out << "<line x1=\"" << margin << "\" y1=\"" << y.map(v) << "\" x2=\"" << svg_w - margin << "\" y2=\""
            << y.map(v) << "\" stroke=\"" << colour << "\"" << (dash ? std::string(" stroke-dasharray=\"") + dash + "\"" : "")
            << "/>\n"
            << "<text x=\"" << svg_w - margin - 4 << "\" y=\"" << y.map(v) - 4 << "\" text-anchor=\"end\">"
            << escape_xml(label) << "</text>\n";
    };
    auto fmt = [](const char* name, double v) {
        std::ostringstream s;
        s << name << ' ' << std::fixed << std::setprecision(3) << v;
        return s.str();
    };
    hline(ba.bias, "black", nullptr, fmt("bias", ba.bias));
    hline(ba.loa_high, "firebrick", "4 3", fmt("+1.96 sd", ba.loa_high));
    hline(ba.loa_low, "firebrick", "4 3", fmt("-1.96 sd", ba.loa_low));
    for (std::size_t i = 0; i < mean.size(); ++i) {
        out << "<circle cx=\"" << x.map(mean[i]) << "\" cy=\"" << y.map(diff[i]) << "\" r=\"3\" fill=\"steelblue\"/>\n";
    }
    svg_axis_labels(out, x, y, "mean of manual and automatic", "automatic - manual");
    out << "</svg>\n";
    return out.str();
}

}  // namespace scarq
