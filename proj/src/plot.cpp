#include "lpsd/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "lpsd/errors.hpp"
#include "lpsd/io.hpp"

namespace lpsd::plot {

namespace {

struct Series {
    std::string name;
    std::vector<double> y;
};

constexpr const char* kPalette[] = {"#1f6fb4", "#d1495b", "#2e8b57",
                                    "#8c5e99", "#c98a18", "#4a4a4a"};

bool parse_double(const std::string& s, double& out) {
    try {
        std::size_t used = 0;
        out = std::stod(s, &used);
        return used == s.size();
    } catch (...) {
        return false;
    }
}

int find_column(const io::CsvTable& t, const std::string& name) {
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == name) return static_cast<int>(i);
    return -1;
}

std::vector<double> numeric_column(const io::CsvTable& t, int col) {
    std::vector<double> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        double v;
        if (static_cast<std::size_t>(col) >= row.size() ||
            !parse_double(row[static_cast<std::size_t>(col)], v))
            continue;
        out.push_back(v);
    }
    return out;
}

struct Panel {
    std::string title;
    std::vector<double> x;
    std::vector<Series> series;
};

void draw_panel(std::ostream& os, const Panel& panel, double ox, double oy,
                double width, double height) {
    double xmin = std::numeric_limits<double>::max(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (double v : panel.x) {
        xmin = std::min(xmin, v);
        xmax = std::max(xmax, v);
    }
    for (const auto& s : panel.series)
        for (double v : s.y) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    if (!(xmax > xmin)) xmax = xmin + 1.0;
    if (!(ymax > ymin)) {
        ymax = ymin + 1.0;
        ymin -= 1.0;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    auto sx = [&](double v) { return ox + (v - xmin) / (xmax - xmin) * width; };
    auto sy = [&](double v) {
        return oy + height - (v - ymin) / (ymax - ymin) * height;
    };

    os << "<rect x='" << ox << "' y='" << oy << "' width='" << width
       << "' height='" << height
       << "' fill='white' stroke='#999' stroke-width='1'/>\n";
    if (ymin < 0.0 && ymax > 0.0)
        os << "<line x1='" << ox << "' y1='" << sy(0.0) << "' x2='" << ox + width
           << "' y2='" << sy(0.0) << "' stroke='#ddd' stroke-width='1'/>\n";
    os << "<text x='" << ox << "' y='" << oy - 8
       << "' font-family='sans-serif' font-size='13'>" << panel.title
       << "</text>\n";

    for (std::size_t si = 0; si < panel.series.size(); ++si) {
        const Series& s = panel.series[si];
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        os << "<polyline fill='none' stroke='" << color
           << "' stroke-width='1.2' points='";
        const std::size_t count = std::min(panel.x.size(), s.y.size());
        for (std::size_t i = 0; i < count; ++i) {
            if (!std::isfinite(s.y[i])) continue;
            os << sx(panel.x[i]) << ',' << sy(s.y[i]) << ' ';
        }
        os << "'/>\n";
        os << "<text x='" << ox + width - 140 << "' y='"
           << oy + 16 + 16 * static_cast<double>(si)
           << "' font-family='sans-serif' font-size='12' fill='" << color
           << "'>" << s.name << "</text>\n";
    }
}

void write_svg(const std::vector<Panel>& panels, const std::string& path) {
    const double width = 900, panel_h = 260, margin = 48;
    const double total_h =
        margin + static_cast<double>(panels.size()) * (panel_h + margin);
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
       << "' height='" << total_h << "' viewBox='0 0 " << width << ' '
       << total_h << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    double oy = margin;
    for (const auto& p : panels) {
        draw_panel(os, p, margin, oy, width - 2 * margin, panel_h);
        oy += panel_h + margin;
    }
    os << "</svg>\n";
    if (!os) throw FormatError("write to '" + path + "' failed");
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

void render(const std::string& report_path, const std::string& out_path) {
    io::CsvTable table = io::read_csv(report_path);
    if (table.header.empty())
        throw FormatError("'" + report_path + "': no columns");

    const int ct = find_column(table, "t");
    const int ctrue = find_column(table, "x_true");
    const int chat = find_column(table, "x_hat");
    const bool overlay = ct >= 0 && ctrue >= 0 && chat >= 0;

    std::vector<Panel> panels;
    if (overlay) {
        Panel recon;
        recon.title = "reconstruction";
        recon.x = numeric_column(table, ct);
        recon.series.push_back({"x_true", numeric_column(table, ctrue)});
        recon.series.push_back({"x_hat", numeric_column(table, chat)});

        Panel resid;
        resid.title = "residual (x_hat - x_true)";
        resid.x = recon.x;
        int cres = find_column(table, "residual");
        std::vector<double> residual;
        if (cres >= 0) {
            residual = numeric_column(table, cres);
        } else {
            const auto& a = recon.series[1].y;
            const auto& b = recon.series[0].y;
            residual.resize(std::min(a.size(), b.size()));
            for (std::size_t i = 0; i < residual.size(); ++i)
                residual[i] = a[i] - b[i];
            table.header.push_back("residual");
            for (std::size_t i = 0; i < table.rows.size(); ++i)
                table.rows[i].push_back(
                    i < residual.size() ? io::format_double(residual[i]) : "");
        }
        resid.series.push_back({"residual", std::move(residual)});
        panels.push_back(std::move(recon));
        panels.push_back(std::move(resid));
    } else {
        Panel p;
        p.title = report_path;
        p.x = numeric_column(table, 0);
        for (std::size_t c = 1; c < table.header.size(); ++c) {
            std::vector<double> y = numeric_column(table, static_cast<int>(c));
            if (y.size() == table.rows.size() || y.size() == p.x.size())
                p.series.push_back({table.header[c], std::move(y)});
        }
        if (p.series.empty())
            throw FormatError("'" + report_path + "': no numeric columns to plot");
        panels.push_back(std::move(p));
    }

    if (ends_with(out_path, ".csv")) {
        io::write_csv(table, out_path);
    } else if (ends_with(out_path, ".svg")) {
        write_svg(panels, out_path);
    } else {
        throw std::invalid_argument("plot: output must end in .svg or .csv");
    }
}

} // namespace lpsd::plot
