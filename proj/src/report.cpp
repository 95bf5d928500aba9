#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "maskgen/error.hpp"
#include "maskgen/experiment.hpp"

namespace maskgen {

namespace fs = std::filesystem;

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

bool ResultRow::operator==(const ResultRow& o) const {
    const bool same_value = value == o.value || (std::isnan(value) && std::isnan(o.value));
    return experiment_id == o.experiment_id && regime == o.regime && predictor_id == o.predictor_id &&
           strategy == o.strategy && ratio == o.ratio && metric_name == o.metric_name && same_value &&
           n_docs == o.n_docs && seed == o.seed;
}

namespace {

auto key_of(const ResultRow& r) {
    return std::tie(r.experiment_id, r.regime, r.predictor_id, r.strategy, r.ratio, r.metric_name);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line, std::size_t lineno) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", lineno);
    out.push_back(std::move(cur));
    return out;
}

double parse_double(const std::string& s, std::size_t lineno) {
    if (s == "nan") return std::nan("");
    double v = 0.0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) throw ParseError("bad number '" + s + "'", lineno);
    return v;
}

template <class T>
T parse_uint(const std::string& s, std::size_t lineno) {
    T v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) throw ParseError("bad integer '" + s + "'", lineno);
    return v;
}

}  // namespace

void ResultsTable::add(ResultRow row) {
    auto it = std::lower_bound(rows_.begin(), rows_.end(), row,
                               [](const ResultRow& a, const ResultRow& b) { return key_of(a) < key_of(b); });
    if (it != rows_.end() && key_of(*it) == key_of(row))
        throw ValidationError("duplicate result row for " + row.experiment_id + " " + row.regime + " " +
                              row.predictor_id + " " + row.strategy + " " + row.metric_name);
    rows_.insert(it, std::move(row));
}

std::string ResultsTable::to_csv() const {
    std::string out = std::string(kHeader) + "\n";
    for (const auto& r : rows_) {
        out += csv_field(r.experiment_id) + ',' + csv_field(r.regime) + ',' + csv_field(r.predictor_id) + ',' +
               csv_field(r.strategy) + ',' + (r.ratio ? format_number(*r.ratio) : std::string()) + ',' +
               csv_field(r.metric_name) + ',' + format_number(r.value) + ',' + std::to_string(r.n_docs) + ',' +
               std::to_string(r.seed) + '\n';
    }
    return out;
}

ResultsTable ResultsTable::parse_csv(std::string_view text) {
    ResultsTable t;
    std::size_t lineno = 0, pos = 0;
    bool header = true;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (header) {
            if (line != kHeader) throw ParseError("unexpected results header", lineno);
            header = false;
            continue;
        }
        if (line.empty()) continue;
        const auto f = split_csv_line(line, lineno);
        if (f.size() != 9) throw ParseError("expected 9 fields, got " + std::to_string(f.size()), lineno);
        ResultRow r{f[0], f[1], f[2], f[3], std::nullopt, f[5], parse_double(f[6], lineno),
                    parse_uint<std::size_t>(f[7], lineno), parse_uint<std::uint64_t>(f[8], lineno)};
        if (!f[4].empty()) r.ratio = parse_double(f[4], lineno);
        try {
            t.add(std::move(r));
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    if (header) throw ParseError("results file is empty");
    return t;
}

// ---------------------------------------------------------------- plots

namespace {

constexpr double kW = 720, kH = 440, kLeft = 60, kRight = 250, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr const char* kDashes[] = {"6,4", "2,3", "10,3,2,3", "1,5", "8,2,2,2,2,2"};

std::string esc(std::string_view s) {
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

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

std::string render_plot(const ResultsTable& table, std::string_view experiment_id, std::string_view metric) {
    using Series = std::tuple<std::string, std::string, std::string>;  // regime, predictor, strategy
    std::map<Series, std::vector<std::pair<double, double>>> curves;
    std::map<Series, double> flats;
    std::set<std::pair<std::string, std::string>> models;
    std::set<std::string> flat_strategies;
    double ymax = 1.0;
    for (const auto& r : table.rows()) {
        if (r.experiment_id != experiment_id || r.metric_name != metric || std::isnan(r.value)) continue;
        Series s{r.regime, r.predictor_id, r.strategy};
        models.emplace(r.regime, r.predictor_id);
        if (r.ratio) {
            curves[s].emplace_back(*r.ratio, r.value);
        } else {
            flats[s] = r.value;
            flat_strategies.insert(r.strategy);
        }
        ymax = std::max(ymax, r.value);
    }
    std::map<std::pair<std::string, std::string>, const char*> color;
    for (const auto& m : models) color[m] = kPalette[color.size() % std::size(kPalette)];
    std::map<std::string, const char*> dash;
    for (const auto& s : flat_strategies) dash[s] = kDashes[dash.size() % std::size(kDashes)];

    const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
    auto X = [&](double x) { return kLeft + x * pw; };
    auto Y = [&](double y) { return kTop + (1.0 - y / ymax) * ph; };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
                      "\" viewBox=\"0 0 " + num(kW) + " " + num(kH) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + num(kLeft) + "\" y=\"24\" font-size=\"15\">" + esc(experiment_id) + " " + esc(metric) +
           "</text>\n";
    svg += "<g stroke=\"#999\" stroke-width=\"1\">\n";
    svg += "<line x1=\"" + num(X(0)) + "\" y1=\"" + num(Y(0)) + "\" x2=\"" + num(X(1)) + "\" y2=\"" + num(Y(0)) + "\"/>\n";
    svg += "<line x1=\"" + num(X(0)) + "\" y1=\"" + num(Y(0)) + "\" x2=\"" + num(X(0)) + "\" y2=\"" + num(Y(ymax)) +
           "\"/>\n</g>\n";
    for (int i = 0; i <= 10; ++i) {
        const double x = i / 10.0, y = ymax * i / 10.0;
        svg += "<text x=\"" + num(X(x)) + "\" y=\"" + num(Y(0) + 16) + "\" text-anchor=\"middle\">" + num(x).substr(0, 3) +
               "</text>\n";
        svg += "<text x=\"" + num(X(0) - 6) + "\" y=\"" + num(Y(y) + 4) + "\" text-anchor=\"end\">" + num(y) + "</text>\n";
    }
    svg += "<text x=\"" + num(X(0.5)) + "\" y=\"" + num(kH - 10) + "\" text-anchor=\"middle\">masking ratio</text>\n";

    std::vector<std::pair<std::string, std::string>> legend;  // label, style attrs
    for (const auto& [s, pts] : curves) {
        auto sorted = pts;
        std::sort(sorted.begin(), sorted.end());
        const char* c = color[{std::get<0>(s), std::get<1>(s)}];
        std::string points;
        for (const auto& [x, y] : sorted) points += num(X(x)) + "," + num(Y(y)) + " ";
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
        for (const auto& [x, y] : sorted)
            svg += "<circle cx=\"" + num(X(x)) + "\" cy=\"" + num(Y(y)) + "\" r=\"3\" fill=\"" + c + "\"/>\n";
        legend.emplace_back(std::get<0>(s) + " " + std::get<1>(s) + " " + std::get<2>(s),
                            "stroke=\"" + std::string(c) + "\"");
    }
    for (const auto& [s, y] : flats) {
        const char* c = color[{std::get<0>(s), std::get<1>(s)}];
        const std::string style =
            "stroke=\"" + std::string(c) + "\" stroke-dasharray=\"" + dash[std::get<2>(s)] + "\"";
        svg += "<line x1=\"" + num(X(0)) + "\" y1=\"" + num(Y(y)) + "\" x2=\"" + num(X(1)) + "\" y2=\"" + num(Y(y)) +
               "\" stroke-width=\"2\" " + style + "/>\n";
        legend.emplace_back(std::get<0>(s) + " " + std::get<1>(s) + " " + std::get<2>(s), style);
    }
    double ly = kTop + 8;
    for (const auto& [label, style] : legend) {
        const double lx = kW - kRight + 16;
        svg += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 28) + "\" y2=\"" + num(ly) +
               "\" stroke-width=\"2\" " + style + "/>\n";
        svg += "<text x=\"" + num(lx + 34) + "\" y=\"" + num(ly + 4) + "\">" + esc(label) + "</text>\n";
        ly += 18;
    }
    svg += "</svg>\n";
    return svg;
}

std::vector<fs::path> emit_report(const ResultsTable& table, const fs::path& outdir) {
    if (table.empty()) throw ValidationError("cannot report an empty results table");
    std::error_code ec;
    fs::create_directories(outdir, ec);
    if (ec) throw Error("cannot create " + outdir.string() + ": " + ec.message());

    std::vector<fs::path> written;
    auto write = [&](const fs::path& p, const std::string& content) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out || !(out << content)) throw Error("cannot write " + p.string());
        written.push_back(p);
    };
    write(outdir / "results.csv", table.to_csv());

    std::set<std::pair<std::string, std::string>> plots;
    for (const auto& r : table.rows())
        if (r.metric_name != "error") plots.emplace(r.experiment_id, r.metric_name);
    for (const auto& [exp, metric] : plots) {
        std::string name = exp + "_" + metric + ".svg";
        for (char& c : name)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '-';
        write(outdir / name, render_plot(table, exp, metric));
    }
    return written;
}

}  // namespace maskgen
