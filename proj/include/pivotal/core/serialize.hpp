#pragma once
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

#include <json.hpp>

#include <pivotal/core/matrix.hpp>

namespace pivotal {

using Json = nlohmann::json;

/// Shortest decimal text that round-trips to the same double ('.' decimal, locale-free).
inline std::string format_double(double x)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text, const std::string& context)
{
    std::size_t b = 0, e = text.size();
    while (b < e && (text[b] == ' ' || text[b] == '\t' || text[b] == '\r')) ++b;
    while (e > b && (text[e - 1] == ' ' || text[e - 1] == '\t' || text[e - 1] == '\r')) --e;
    double x = 0.0;
    auto res = std::from_chars(text.data() + b, text.data() + e, x);
    if (res.ec != std::errc{} || res.ptr != text.data() + e) {
        throw InvalidInput(context + ": cannot parse number '" + text + "'");
    }
    return x;
}

/// One matrix row per line, comma separated, no header, LF endings.
inline std::string matrix_to_csv(const Eigen::Ref<const Matrix>& m)
{
    std::string out;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

inline Matrix matrix_from_csv(const std::string& text)
{
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            row.push_back(parse_double(line.substr(start, comma - start),
                                       "csv line " + std::to_string(lineno)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw InvalidInput("csv line " + std::to_string(lineno) + ": ragged row");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidInput("csv: no rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    require_finite(m, "csv");
    return m;
}

/// {"rows": r, "cols": c, "data": [row-major entries]}
inline Json matrix_to_json(const Eigen::Ref<const Matrix>& m)
{
    Json data = Json::array();
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const Json& j)
{
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
        throw InvalidInput("matrix json: expected {rows, cols, data}");
    }
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const auto& data = j.at("data");
    if (rows < 1 || cols < 1 || !data.is_array() || static_cast<Index>(data.size()) != rows * cols) {
        throw InvalidInput("matrix json: data length does not match rows*cols");
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index c = 0; c < cols; ++c) m(i, c) = data[static_cast<std::size_t>(i * cols + c)].get<double>();
    require_finite(m, "matrix json");
    return m;
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

} // namespace pivotal
