#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

namespace xcorr {

// A set partition of {0, ..., n-1}. Blocks are sorted, and ordered by their smallest element.
struct Partition {
    std::vector<std::vector<int>> blocks;
};

// All set partitions of n elements (Bell(n) of them), n in 1..8. Memoized per n.
std::vector<Partition> partitions(int n);

// E prod xi_j for a centered Gaussian vector: the sum over perfect pairings of prod cov(pair).
double isserlis_moment(const Eigen::MatrixXd& cov);

// Index multiset, e.g. {0, 0, 1} stands for E[X0^2 X1] or cum(X0, X0, X1). Kept sorted.
using IndexTuple = std::vector<int>;
using MomentTable = std::map<IndexTuple, double>;

// Moebius inversion over set partitions. Returns cumulants for every key of the table of
// size <= order. Throws MissingMoment if a sub-moment is absent.
MomentTable moments_to_cumulants(const MomentTable& joint_moments, int order);
MomentTable cumulants_to_moments(const MomentTable& cumulants, int order);

struct CumulantReport {
    int order = 0;
    IndexTuple indices;
    double estimate = 0.0;
    double std_error = 0.0;
    int n_replicates = 0;
};

// Unbiased joint k-statistics of every index multiset of size 1..max_order over the columns of
// an R x m replicate matrix, with delete-1 jackknife standard errors. R must be at least 100.
std::vector<CumulantReport> sample_joint_cumulants(const Eigen::MatrixXd& replicates, int max_order = 4);

void write_cumulants_csv(std::ostream& os, const std::vector<CumulantReport>& reports);

// Cells of the m x 2 table are numbered 2 * row + column.
// All pairings of the 2m cells that no proper sub-union of pairs turns into a union of rows,
// for m in 1..6. m = 1 yields none.
std::vector<Partition> indecomposable_pair_partitions(int m);

// For a pairing of the m x 2 table: rows visited along the chain D_1, ..., D_m, where
// consecutive rows share a pair and the last pair closes back to the first row.
// Empty when the pairing splits into several chains (it is decomposable).
std::optional<std::vector<int>> row_chain(const Partition& pairing, int m);

}  // namespace xcorr
