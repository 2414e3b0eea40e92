#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ddvc/csv.hpp"
#include "ddvc/errors.hpp"

namespace ddvc {

/// Column names used when loading a dictionary from CSV. The defaults match
/// the canonical schema `k,u1..u{n_u},x1..x{n_x}`.
struct CsvSchema {
    std::string index = "k";
    std::string input_prefix = "u";
    std::string state_prefix = "x";
};

/// One input-state sequence sampled from the plant under study.
///
/// Columns of `inputs` and `states` are samples ordered by time; there are
/// length() of them. The sample time is informational only.
class DataDictionary {
public:
    DataDictionary(Eigen::MatrixXd inputs, Eigen::MatrixXd states,
                   double sample_time)
        : inputs_(std::move(inputs)), states_(std::move(states)),
          sample_time_(sample_time) {
        if (inputs_.cols() != states_.cols())
            throw DimensionError("input/state sample counts differ");
        if (states_.cols() < 2)
            throw InsufficientDataError(
                "a dictionary needs at least 2 samples, got " +
                std::to_string(states_.cols()));
        if (!inputs_.allFinite() || !states_.allFinite())
            throw NumericError("dictionary contains non-finite samples");
    }

    Eigen::Index length() const { return states_.cols(); }
    Eigen::Index state_dim() const { return states_.rows(); }
    Eigen::Index input_dim() const { return inputs_.rows(); }
    double sample_time() const { return sample_time_; }

    const Eigen::MatrixXd& inputs() const { return inputs_; }
    const Eigen::MatrixXd& states() const { return states_; }

    Eigen::VectorXd input(Eigen::Index k) const { return inputs_.col(k); }
    Eigen::VectorXd state(Eigen::Index k) const { return states_.col(k); }

private:
    Eigen::MatrixXd inputs_; // n_u x length
    Eigen::MatrixXd states_; // n_x x length
    double sample_time_;
};

/// Loads a dictionary from a CSV file with columns `k,u1..,x1..`.
///
/// The index column must be contiguous (unit steps); gaps are rejected
/// because increments across a gap would be meaningless.
inline DataDictionary load_dictionary(const std::string& path,
                                      const CsvSchema& schema = {},
                                      double sample_time = 0.01) {
    const csv::Table t = csv::read(path);

    const int k_col = t.column(schema.index);
    if (k_col < 0)
        throw SchemaError(path + ": missing index column '" + schema.index + "'");

    std::vector<int> u_cols, x_cols;
    for (int i = 1;; ++i) {
        const int c = t.column(schema.input_prefix + std::to_string(i));
        if (c < 0) break;
        u_cols.push_back(c);
    }
    for (int i = 1;; ++i) {
        const int c = t.column(schema.state_prefix + std::to_string(i));
        if (c < 0) break;
        x_cols.push_back(c);
    }
    if (x_cols.empty())
        throw SchemaError(path + ": no state columns '" + schema.state_prefix +
                          "1..' found");
    if (t.rows.size() < 2)
        throw InsufficientDataError(path + ": need at least 2 rows, got " +
                                    std::to_string(t.rows.size()));

    const auto n = static_cast<Eigen::Index>(t.rows.size());
    Eigen::MatrixXd U(static_cast<Eigen::Index>(u_cols.size()), n);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(x_cols.size()), n);
    double prev_k = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& row = t.rows[static_cast<std::size_t>(j)];
        const double kj = row[static_cast<std::size_t>(k_col)];
        if (j > 0 && kj != prev_k + 1)
            throw DataGapError(path + ": index column jumps from " +
                               csv::format(prev_k) + " to " + csv::format(kj));
        prev_k = kj;
        for (std::size_t i = 0; i < u_cols.size(); ++i)
            U(static_cast<Eigen::Index>(i), j) =
                row[static_cast<std::size_t>(u_cols[i])];
        for (std::size_t i = 0; i < x_cols.size(); ++i)
            X(static_cast<Eigen::Index>(i), j) =
                row[static_cast<std::size_t>(x_cols[i])];
    }
    return DataDictionary(std::move(U), std::move(X), sample_time);
}

inline void save_dictionary(const std::string& path, const DataDictionary& d) {
    csv::Table t;
    t.header.push_back("k");
    for (Eigen::Index i = 0; i < d.input_dim(); ++i)
        t.header.push_back("u" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < d.state_dim(); ++i)
        t.header.push_back("x" + std::to_string(i + 1));
    for (Eigen::Index k = 0; k < d.length(); ++k) {
        std::vector<double> row;
        row.push_back(static_cast<double>(k + 1));
        for (Eigen::Index i = 0; i < d.input_dim(); ++i)
            row.push_back(d.inputs()(i, k));
        for (Eigen::Index i = 0; i < d.state_dim(); ++i)
            row.push_back(d.states()(i, k));
        t.rows.push_back(std::move(row));
    }
    csv::write(path, t);
}

} // namespace ddvc
