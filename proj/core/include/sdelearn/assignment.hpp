#pragma once

#include <Eigen/Dense>

#include <vector>

namespace sdelearn {

struct Assignment {
    /// row_to_col[i] is the column matched to row i.
    std::vector<int> row_to_col;
    double cost = 0.0;
};

/// Exact minimum-cost perfect matching of a square cost matrix
/// (shortest augmenting paths with potentials, O(n^3)).
Assignment solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace sdelearn
