#pragma once

// CSV and JSON output. CSV is UTF-8 with '\n' line endings and '.' decimals
// regardless of the global locale.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <locale>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spde/grid.hpp"

namespace spde::io {

class IoError : public std::runtime_error {
public:
    IoError(const std::filesystem::path& path, const std::string& what)
        : std::runtime_error(path.string() + ": " + what), path_(path) {}
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string format_double(double v) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return s.str();
}

inline std::ofstream open_for_write(const std::filesystem::path& path, bool binary = false) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(path.parent_path(), "cannot create directory: " + ec.message());
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    if (!os) throw IoError(path, "cannot open for writing");
    os.imbue(std::locale::classic());
    return os;
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    auto os = open_for_write(path, true);
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    if (!os) throw IoError(path, "write failed");
}

/// Snapshot table with header (t, x, value), one row per cell per snapshot.
inline void write_field_csv(const std::filesystem::path& path, const std::vector<FieldState>& snapshots) {
    auto os = open_for_write(path, true);
    os << "t,x,value\n";
    for (const auto& s : snapshots)
        for (int j = 0; j < s.grid.size(); ++j)
            os << format_double(s.t) << ',' << format_double(s.grid.center(j)) << ','
               << format_double(s.values[static_cast<std::size_t>(j)]) << '\n';
    if (!os) throw IoError(path, "write failed");
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    auto os = open_for_write(path, true);
    os << j.dump(2) << '\n';
    if (!os) throw IoError(path, "write failed");
}

}  // namespace spde::io
