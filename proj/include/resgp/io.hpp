#pragma once

#include "resgp/model.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace resgp {

std::string read_file(const std::string& path);

// Writes to `path + ".tmp"` then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);

struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;  // rows x header.size()

    // Column index by name, or -1.
    long column(const std::string& name) const;
};

// Numeric CSV with a header row. Malformed rows throw DataError naming the line.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);
std::string format_csv(const std::vector<std::string>& header, const Eigen::Ref<const Eigen::MatrixXd>& values);

// Dataset convention: columns x1..xl, y1..yd, fidelity (1-based integer).
MultiFidelityData dataset_from_csv(const CsvTable& table);
std::string dataset_to_csv(const MultiFidelityData& data);

// Query convention: columns x1..xl (other columns ignored).
Eigen::MatrixXd inputs_from_csv(const CsvTable& table, Eigen::Index input_dim);

}  // namespace resgp
