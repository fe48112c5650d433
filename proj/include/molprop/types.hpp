#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace molprop {

// All numerics are 64-bit. Dense storage is row-major so that flattening a
// matrix (e.g. an n*n pair table) is a linear reinterpretation of memory.
using Real = double;
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using IMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using Coords = Eigen::Matrix<Real, Eigen::Dynamic, 3, Eigen::RowMajor>;

}  // namespace molprop
