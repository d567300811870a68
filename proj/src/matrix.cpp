#include "psim/matrix.hpp"

#include <Eigen/Dense>

namespace psim {

namespace {
using MapC = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                            Eigen::RowMajor>>;
using Map = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    Map(out.data(), out.rows(), out.cols()).noalias() =
        MapC(a.data(), a.rows(), a.cols()) * MapC(b.data(), b.rows(), b.cols());
    return out;
}

}  // namespace psim
