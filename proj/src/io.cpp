#include "resgp/io.hpp"

#include "resgp/error.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace resgp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

int suffix_index(const std::string& name, char prefix) {
    if (name.size() < 2 || name[0] != prefix) return -1;
    char* end = nullptr;
    long v = std::strtol(name.c_str() + 1, &end, 10);
    if (*end != '\0' || v < 1) return -1;
    return static_cast<int>(v);
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp);
        out << contents;
        if (!out) throw DataError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw DataError("cannot rename " + tmp + " to " + path);
    }
}

long CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<long>(i);
    }
    return -1;
}

CsvTable parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    CsvTable t;
    long lineno = 0;
    bool have_header = false;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split(line);
        if (!have_header) {
            t.header = cells;
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw DataError("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                            " fields, got " + std::to_string(cells.size()));
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            char* end = nullptr;
            errno = 0;
            double v = std::strtod(c.c_str(), &end);
            if (c.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
                throw DataError("CSV line " + std::to_string(lineno) + ": bad number '" + c + "'");
            }
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (!have_header) throw DataError("CSV has no header row");
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return t;
}

CsvTable read_csv(const std::string& path) {
    return parse_csv(read_file(path));
}

std::string format_csv(const std::vector<std::string>& header, const Eigen::Ref<const Eigen::MatrixXd>& values) {
    std::ostringstream out;
    out << std::setprecision(17);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) out << (c ? "," : "") << values(r, c);
        out << '\n';
    }
    return out.str();
}

MultiFidelityData dataset_from_csv(const CsvTable& t) {
    std::map<int, long> xs, ys;
    long fid = -1;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        const auto& h = t.header[i];
        if (h == "fidelity") fid = static_cast<long>(i);
        else if (int k = suffix_index(h, 'x'); k > 0) xs[k] = static_cast<long>(i);
        else if (int k2 = suffix_index(h, 'y'); k2 > 0) ys[k2] = static_cast<long>(i);
    }
    if (fid < 0 || xs.empty() || ys.empty()) throw DataError("dataset CSV needs columns x1..xl, y1..yd, fidelity");
    if (xs.rbegin()->first != static_cast<int>(xs.size()) || ys.rbegin()->first != static_cast<int>(ys.size())) {
        throw DataError("dataset CSV columns must be x1..xl and y1..yd without gaps");
    }
    int max_f = 0;
    for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
        double f = t.values(r, fid);
        if (f < 1 || f != std::floor(f)) {
            throw DataError("CSV data row " + std::to_string(r + 1) + ": fidelity must be a positive integer");
        }
        max_f = std::max(max_f, static_cast<int>(f));
    }
    MultiFidelityData data;
    data.levels.resize(static_cast<std::size_t>(max_f));
    const auto l = static_cast<Eigen::Index>(xs.size()), d = static_cast<Eigen::Index>(ys.size());
    for (int f = 1; f <= max_f; ++f) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
            if (static_cast<int>(t.values(r, fid)) == f) rows.push_back(r);
        }
        auto& lv = data.levels[static_cast<std::size_t>(f - 1)];
        lv.inputs.resize(static_cast<Eigen::Index>(rows.size()), l);
        lv.outputs.resize(static_cast<Eigen::Index>(rows.size()), d);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            for (const auto& [i, c] : xs) lv.inputs(static_cast<Eigen::Index>(k), i - 1) = t.values(rows[k], c);
            for (const auto& [i, c] : ys) lv.outputs(static_cast<Eigen::Index>(k), i - 1) = t.values(rows[k], c);
        }
    }
    return data;
}

std::string dataset_to_csv(const MultiFidelityData& data) {
    const Eigen::Index l = data.input_dim(), d = data.output_dim();
    std::vector<std::string> header;
    for (Eigen::Index i = 1; i <= l; ++i) header.push_back("x" + std::to_string(i));
    for (Eigen::Index i = 1; i <= d; ++i) header.push_back("y" + std::to_string(i));
    header.push_back("fidelity");
    Eigen::Index total = 0;
    for (const auto& lv : data.levels) total += lv.inputs.rows();
    Eigen::MatrixXd m(total, l + d + 1);
    Eigen::Index r = 0;
    for (std::size_t f = 0; f < data.levels.size(); ++f) {
        const auto& lv = data.levels[f];
        for (Eigen::Index n = 0; n < lv.inputs.rows(); ++n, ++r) {
            m.block(r, 0, 1, l) = lv.inputs.row(n);
            m.block(r, l, 1, d) = lv.outputs.row(n);
            m(r, l + d) = double(f + 1);
        }
    }
    return format_csv(header, m);
}

Eigen::MatrixXd inputs_from_csv(const CsvTable& t, Eigen::Index input_dim) {
    Eigen::MatrixXd x(t.values.rows(), input_dim);
    for (Eigen::Index i = 1; i <= input_dim; ++i) {
        long c = t.column("x" + std::to_string(i));
        if (c < 0) {
            throw DimensionError("query CSV lacks column x" + std::to_string(i) + " (model input dimension " +
                                 std::to_string(input_dim) + ")");
        }
        x.col(i - 1) = t.values.col(c);
    }
    if (t.column("x" + std::to_string(input_dim + 1)) >= 0) {
        throw DimensionError("query CSV has more input columns than the model's " + std::to_string(input_dim));
    }
    return x;
}

}  // namespace resgp
