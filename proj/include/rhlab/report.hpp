#pragma once

// Result persistence and reporting: CSV tables (17-significant-digit
// round-trip), key=value config files, JSON run manifests with a content-hash
// run id, deterministic SVG line charts, and an on-disk kernel cache.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhlab/blocks.hpp"
#include "rhlab/kernel.hpp"
#include "rhlab/params.hpp"

namespace rhlab {

inline constexpr const char* kCodeVersion = "rhlab-1.0.0";
inline constexpr const char* kCutoffFamilyVersion = "wfam-1";

// ---------------------------------------------------------------------------
// Numeric text formatting: every numeric cell round-trips at 17 significant
// digits.

inline std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// CSV tables: comma-separated, \n line endings, mandatory header row.

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> cells) {
        if (cells.size() != header.size())
            throw std::logic_error("csv row width does not match the header");
        rows.push_back(std::move(cells));
    }
    std::string to_string() const {
        std::string out;
        auto emit = [&out](const std::vector<std::string>& cells) {
            for (size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        emit(header);
        for (const auto& r : rows) emit(r);
        return out;
    }
};

// ---------------------------------------------------------------------------
// FNV-1a 64-bit content hash: the run id is the hash of the effective config
// bytes plus the code version string, so identical configs reproduce ids.

inline uint64_t fnv1a64(const std::string& bytes, uint64_t h = 14695981039346656037ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string run_id_of(const std::string& config_bytes) {
    uint64_t h = fnv1a64(std::string(kCodeVersion) + "\n" + config_bytes);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Config files: `key = value` lines, `#` comments, optional cosmetic
// `[section]` headers. The parser keeps line numbers so unknown keys can be
// rejected with their location.

struct ConfigEntry {
    int line = 0;
    std::string key, value;
};

inline std::string trim_copy(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<ConfigEntry> parse_config_text(const std::string& text) {
    std::vector<ConfigEntry> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::string t = trim_copy(line);
        if (t.empty()) continue;
        if (t.front() == '[' && t.back() == ']') continue;   // cosmetic section header
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) +
                                  ": expected `key = value`, got `" + t + "`");
        ConfigEntry e;
        e.line = lineno;
        e.key = trim_copy(t.substr(0, eq));
        e.value = trim_copy(t.substr(eq + 1));
        if (e.key.empty())
            throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
        out.push_back(std::move(e));
    }
    return out;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write file: " + path);
    out << content;
    if (!out) throw ValidationError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Output staging: artifacts are written with a `.partial` suffix and renamed
// to their final names only when the whole run finishes, so a failed run
// leaves its partial outputs identifiable.

class OutputSet {
public:
    explicit OutputSet(std::string dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }
    void add(const std::string& name, const std::string& content) {
        std::string staged = (std::filesystem::path(dir_) / (name + ".partial")).string();
        write_text_file(staged, content);
        staged_.push_back(name);
    }
    void add_kernel(const std::string& name, const Kernel& k) {
        std::string staged = (std::filesystem::path(dir_) / (name + ".partial")).string();
        write_kernel_text(k, staged);
        staged_.push_back(name);
    }
    // Rename staged files to final names; returns the final paths.
    std::vector<std::string> finalize() {
        std::vector<std::string> final_paths;
        for (const auto& name : staged_) {
            auto from = std::filesystem::path(dir_) / (name + ".partial");
            auto to = std::filesystem::path(dir_) / name;
            std::filesystem::rename(from, to);
            final_paths.push_back(to.string());
        }
        staged_.clear();
        return final_paths;
    }
    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
    std::vector<std::string> staged_;
};

// ---------------------------------------------------------------------------
// Deterministic SVG line charts (no external renderer, no timestamps).

struct ChartSeries {
    std::string label;
    std::vector<double> x, y;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
            case '&': o += "&amp;"; break;
            case '<': o += "&lt;"; break;
            case '>': o += "&gt;"; break;
            default: o += c;
        }
    }
    return o;
}

} // namespace detail

// A fixed-size log-log or linear line chart. Points with nonpositive
// coordinates are dropped in log-log mode.
inline std::string svg_line_chart(const std::string& title, const std::vector<ChartSeries>& series,
                                  bool loglog, const std::string& xlabel, const std::string& ylabel) {
    const double W = 720, Hh = 460;
    const double ml = 70, mr = 20, mt = 40, mb = 55;
    auto tx = [&](double v) { return loglog ? std::log10(v) : v; };
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (loglog && (s.x[i] <= 0.0 || s.y[i] <= 0.0)) continue;
            xmin = std::min(xmin, tx(s.x[i]));
            xmax = std::max(xmax, tx(s.x[i]));
            ymin = std::min(ymin, tx(s.y[i]));
            ymax = std::max(ymax, tx(s.y[i]));
        }
    if (xmin > xmax) { xmin = 0; xmax = 1; }
    if (ymin > ymax) { ymin = 0; ymax = 1; }
    if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
    if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }
    double xr = xmax - xmin, yr = ymax - ymin;
    xmin -= 0.04 * xr; xmax += 0.04 * xr;
    ymin -= 0.06 * yr; ymax += 0.06 * yr;
    auto px = [&](double v) { return ml + (tx(v) - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double v) { return Hh - mb - (tx(v) - ymin) / (ymax - ymin) * (Hh - mt - mb); };
    const char* palette[] = {"#1f6feb", "#d73a49", "#2da44e", "#b08800", "#8250df", "#57606a"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hh
        << "\" viewBox=\"0 0 " << W << " " << Hh << "\">\n";
    svg << "<rect width=\"" << W << "\" height=\"" << Hh << "\" fill=\"#ffffff\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"15\" fill=\"#24292f\">" << detail::svg_escape(title) << "</text>\n";
    // axes box
    svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << (W - ml - mr) << "\" height=\""
        << (Hh - mt - mb) << "\" fill=\"none\" stroke=\"#57606a\" stroke-width=\"1\"/>\n";
    // ticks (5 per axis in transformed coordinates)
    for (int i = 0; i <= 4; ++i) {
        double fx = xmin + (xmax - xmin) * i / 4.0;
        double fy = ymin + (ymax - ymin) * i / 4.0;
        double gx = ml + (W - ml - mr) * i / 4.0;
        double gy = Hh - mb - (Hh - mt - mb) * i / 4.0;
        double vx = loglog ? std::pow(10.0, fx) : fx;
        double vy = loglog ? std::pow(10.0, fy) : fy;
        svg << "<line x1=\"" << gx << "\" y1=\"" << (Hh - mb) << "\" x2=\"" << gx << "\" y2=\""
            << (Hh - mb + 5) << "\" stroke=\"#57606a\"/>\n";
        svg << "<text x=\"" << gx << "\" y=\"" << (Hh - mb + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#24292f\">"
            << fmt_g6(vx) << "</text>\n";
        svg << "<line x1=\"" << (ml - 5) << "\" y1=\"" << gy << "\" x2=\"" << ml << "\" y2=\"" << gy
            << "\" stroke=\"#57606a\"/>\n";
        svg << "<text x=\"" << (ml - 8) << "\" y=\"" << (gy + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#24292f\">"
            << fmt_g6(vy) << "</text>\n";
    }
    svg << "<text x=\"" << (ml + (W - ml - mr) / 2) << "\" y=\"" << (Hh - 12)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#24292f\">"
        << detail::svg_escape(xlabel) << "</text>\n";
    svg << "<text x=\"16\" y=\"" << (mt + (Hh - mt - mb) / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#24292f\" "
           "transform=\"rotate(-90 16 " << (mt + (Hh - mt - mb) / 2) << ")\">"
        << detail::svg_escape(ylabel) << "</text>\n";
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = palette[si % 6];
        std::ostringstream pts;
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (loglog && (s.x[i] <= 0.0 || s.y[i] <= 0.0)) continue;
            pts << fmt_g6(px(s.x[i])) << "," << fmt_g6(py(s.y[i])) << " ";
        }
        svg << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.8\"/>\n";
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (loglog && (s.x[i] <= 0.0 || s.y[i] <= 0.0)) continue;
            svg << "<circle cx=\"" << fmt_g6(px(s.x[i])) << "\" cy=\"" << fmt_g6(py(s.y[i]))
                << "\" r=\"2.6\" fill=\"" << color << "\"/>\n";
        }
        svg << "<text x=\"" << (W - mr - 8) << "\" y=\"" << (mt + 18 + 16 * static_cast<double>(si))
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color
            << "\">" << detail::svg_escape(s.label) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

// ---------------------------------------------------------------------------
// Kernel cache: assembled kernels keyed by the exact parameter bits and the
// cutoff-family version, stored under $RHLAB_CACHE (no caching when unset).

namespace detail {

inline uint64_t double_bits(double v) {
    uint64_t b;
    static_assert(sizeof(b) == sizeof(v));
    std::memcpy(&b, &v, sizeof(b));
    return b;
}

} // namespace detail

inline std::string cache_key(const Params& p) {
    std::string material = std::string(kCutoffFamilyVersion) + "|" +
                           std::to_string(detail::double_bits(p.alpha)) + "|" +
                           std::to_string(detail::double_bits(p.delta)) + "|" +
                           std::to_string(detail::double_bits(p.theta)) + "|" +
                           std::to_string(p.M) + "|" + (p.mode == Mode::gap ? "gap" : "full");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(material)));
    return buf;
}

// Assemble through the cache when RHLAB_CACHE is set; transparent otherwise.
inline Assembly cached_assemble(const Params& p) {
    const char* dir = std::getenv("RHLAB_CACHE");
    if (dir == nullptr || *dir == '\0') return assemble(p);
    std::filesystem::path base(dir);
    std::filesystem::create_directories(base);
    std::string key = cache_key(p);
    auto path_of = [&](const char* part) {
        return (base / (key + "-" + part + ".kern")).string();
    };
    const char* parts[3] = {"h", "hminus", "hplus"};
    bool all_present = true;
    for (const char* part : parts)
        if (!std::filesystem::exists(path_of(part))) { all_present = false; break; }
    if (all_present) {
        Assembly a;
        a.H = read_kernel_text(path_of("h"));
        a.Hminus = read_kernel_text(path_of("hminus"));
        a.Hplus = read_kernel_text(path_of("hplus"));
        return a;
    }
    Assembly a = assemble(p);
    write_kernel_text(a.H, path_of("h"));
    write_kernel_text(a.Hminus, path_of("hminus"));
    write_kernel_text(a.Hplus, path_of("hplus"));
    return a;
}

} // namespace rhlab
