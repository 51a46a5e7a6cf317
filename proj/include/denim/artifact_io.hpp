#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "denim/common.hpp"

namespace denim {

// Line-buffered CSV writer with a fixed column set. Numeric cells are
// formatted with %.9g so files are byte-stable across runs with equal data.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns);

    void row(const std::vector<double>& cells);
    void row_mixed(const std::vector<std::string>& cells);
    const std::filesystem::path& path() const { return path_; }

    static std::string format_cell(double v);

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t columns_ = 0;
};

// Parse a CSV written by CsvWriter (header row + numeric cells).
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column_index(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

// FNV-1a hash of a file's bytes, as fixed-width hex.
std::string hash_file(const std::filesystem::path& path);

// Same hash over an in-memory string.
std::string hash_string(std::string_view s);

}  // namespace denim
