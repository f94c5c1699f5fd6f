#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cla/errors.hpp"
#include "cla/tensor.hpp"

namespace claprobe {

// Shortest round-trip decimal form; deterministic and locale-independent.
inline std::string fmt_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open '" + path + "' for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw ConfigError("short write to '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + path + "'");
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// Row-oriented CSV builder. The provenance hash goes into a leading comment
// line so every artifact can be traced to its configuration.
class CsvWriter {
public:
    explicit CsvWriter(std::string config_hash = {}) {
        if (!config_hash.empty()) out_ += "# config_hash=" + config_hash + "\n";
    }

    void header(const std::vector<std::string>& names) { raw_row(names); }

    void row(const std::vector<std::string>& cells) { raw_row(cells); }

    std::string& str() { return out_; }
    const std::string& str() const { return out_; }

    void save(const std::string& path) const { write_text_file(path, out_); }

private:
    void raw_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ += ',';
            out_ += cells[i];
        }
        out_ += '\n';
    }
    std::string out_;
};

// ---------------------------------------------------------------------------
// SVG emission (no external plotting dependency; files are deterministic)
// ---------------------------------------------------------------------------

struct SvgSeries {
    std::string name;
    std::string color;
    std::vector<std::pair<double, double>> points;
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

} // namespace detail

// Simple line chart: one polyline per series, linear axes with min/max fit.
inline std::string svg_line_chart(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<SvgSeries>& series,
                                  const std::string& config_hash = {}) {
    const double w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (first) {
                xmin = xmax = x;
                ymin = ymax = y;
                first = false;
            }
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      detail::svg_num(w) + "\" height=\"" + detail::svg_num(h) + "\">\n";
    if (!config_hash.empty()) svg += "<!-- config_hash=" + config_hash + " -->\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + detail::svg_num(w / 2) + "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"16\">" + title + "</text>\n";
    svg += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" + detail::svg_num(h - mb) +
           "\" x2=\"" + detail::svg_num(w - mr) + "\" y2=\"" + detail::svg_num(h - mb) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" + detail::svg_num(mt) + "\" x2=\"" +
           detail::svg_num(ml) + "\" y2=\"" + detail::svg_num(h - mb) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::svg_num(w / 2) + "\" y=\"" + detail::svg_num(h - 12) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + x_label +
           "</text>\n";
    svg += "<text x=\"16\" y=\"" + detail::svg_num(h / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 16 " + detail::svg_num(h / 2) + ")\">" + y_label +
           "</text>\n";
    // axis extremes
    svg += "<text x=\"" + detail::svg_num(ml) + "\" y=\"" + detail::svg_num(h - mb + 16) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + fmt_double(xmin) + "</text>\n";
    svg += "<text x=\"" + detail::svg_num(w - mr) + "\" y=\"" + detail::svg_num(h - mb + 16) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
           fmt_double(xmax) + "</text>\n";
    svg += "<text x=\"" + detail::svg_num(ml - 6) + "\" y=\"" + detail::svg_num(h - mb) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
           fmt_double(ymin) + "</text>\n";
    svg += "<text x=\"" + detail::svg_num(ml - 6) + "\" y=\"" + detail::svg_num(mt + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
           fmt_double(ymax) + "</text>\n";

    double legend_y = mt + 8;
    for (const auto& s : series) {
        if (!s.points.empty()) {
            std::string pts;
            for (const auto& [x, y] : s.points) {
                if (!pts.empty()) pts += ' ';
                pts += detail::svg_num(px(x)) + "," + detail::svg_num(py(y));
            }
            svg += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.6\" "
                   "points=\"" + pts + "\"/>\n";
        }
        svg += "<text x=\"" + detail::svg_num(w - mr - 4) + "\" y=\"" +
               detail::svg_num(legend_y) + "\" text-anchor=\"end\" fill=\"" + s.color +
               "\" font-family=\"sans-serif\" font-size=\"11\">" + s.name + "</text>\n";
        legend_y += 14;
    }
    svg += "</svg>\n";
    return svg;
}

// Heatmap of per-axis activation profiles: one row per latent axis, one cell
// per grid sample, blue-white-red diverging colors around zero.
inline std::string svg_profile_heatmap(const std::string& title,
                                       const std::vector<std::vector<double>>& rows,
                                       const std::string& config_hash = {}) {
    const std::size_t nrows = rows.size();
    const std::size_t ncols = nrows ? rows.front().size() : 0;
    const double cell = 14.0, ml = 60, mt = 40;
    const double w = ml + cell * static_cast<double>(ncols) + 20;
    const double h = mt + cell * static_cast<double>(nrows) + 20;
    double vmax = 0.0;
    for (const auto& r : rows)
        for (double v : r) vmax = std::max(vmax, std::abs(v));
    if (vmax == 0.0) vmax = 1.0;

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      detail::svg_num(w) + "\" height=\"" + detail::svg_num(h) + "\">\n";
    if (!config_hash.empty()) svg += "<!-- config_hash=" + config_hash + " -->\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + detail::svg_num(w / 2) + "\" y=\"22\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"14\">" + title + "</text>\n";
    for (std::size_t r = 0; r < nrows; ++r) {
        svg += "<text x=\"" + detail::svg_num(ml - 8) + "\" y=\"" +
               detail::svg_num(mt + cell * (static_cast<double>(r) + 0.75)) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">axis " +
               std::to_string(r) + "</text>\n";
        for (std::size_t c = 0; c < ncols; ++c) {
            const double t = rows[r][c] / vmax; // in [-1, 1]
            int rr, gg, bb;
            if (t >= 0) {
                rr = 255;
                gg = bb = static_cast<int>(255 * (1.0 - t));
            } else {
                bb = 255;
                rr = gg = static_cast<int>(255 * (1.0 + t));
            }
            svg += "<rect x=\"" + detail::svg_num(ml + cell * static_cast<double>(c)) +
                   "\" y=\"" + detail::svg_num(mt + cell * static_cast<double>(r)) +
                   "\" width=\"" + detail::svg_num(cell) + "\" height=\"" +
                   detail::svg_num(cell) + "\" fill=\"rgb(" + std::to_string(rr) + "," +
                   std::to_string(gg) + "," + std::to_string(bb) + ")\"/>\n";
        }
    }
    svg += "</svg>\n";
    return svg;
}

// ---------------------------------------------------------------------------
// Image emission for image-shaped outputs
// ---------------------------------------------------------------------------

// Binary PPM (P6). `lo`/`hi` give the value range mapped to 0..255 so that
// paired before/after images share one scale.
inline void write_ppm(const std::string& path, const Tensor& img, double lo, double hi,
                      const std::string& config_hash = {}) {
    if (img.shape.size() != 3 || (img.shape[0] != 1 && img.shape[0] != 3))
        throw ConfigError("write_ppm: image must be [1|3, H, W]");
    const std::size_t c = img.shape[0], h = img.shape[1], w = img.shape[2];
    const double span = hi > lo ? hi - lo : 1.0;
    std::string out = "P6\n";
    if (!config_hash.empty()) out += "# config_hash=" + config_hash + "\n";
    out += std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + 3 * w * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double v = img.at3(c == 3 ? ch : 0, y, x);
                const double t = std::clamp((v - lo) / span, 0.0, 1.0);
                out += static_cast<char>(static_cast<int>(t * 255.0 + 0.5));
            }
    write_text_file(path, out);
}

} // namespace claprobe
