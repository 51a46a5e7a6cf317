#include "denim/artifact_io.hpp"

#include <cstdio>
#include <sstream>

namespace denim {

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns) : path_(path) {
    if (columns.empty()) throw ArgError("csv: need at least one column");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::trunc);
    if (!out_) throw IoError("cannot open csv for writing: " + path.string());
    columns_ = columns.size();
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
}

std::string CsvWriter::format_cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void CsvWriter::row(const std::vector<double>& cells) {
    if (cells.size() != columns_) throw ArgError("csv: row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << format_cell(cells[i]);
    out_ << "\n";
    out_.flush();
    if (!out_) throw IoError("csv write failed: " + path_.string());
}

void CsvWriter::row_mixed(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw ArgError("csv: row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
    out_.flush();
    if (!out_) throw IoError("csv write failed: " + path_.string());
}

std::size_t CsvTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw ArgError("csv: no column named \"" + name + "\"");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open csv: " + path.string());
    CsvTable table;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (header) {
            table.columns = cells;
            header = false;
            continue;
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(std::stod(c));
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open json for writing: " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("json write failed: " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open json: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

std::string hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for hashing: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    return to_hex(h);
}

std::string hash_string(std::string_view s) { return to_hex(fnv1a64(s.data(), s.size())); }

}  // namespace denim
