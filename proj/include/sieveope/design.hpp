#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace sieveope {

/// Row-banded design matrix. Every row stores `width` consecutive entries
/// starting at a per-row column offset; all other entries are zero. B-spline
/// features have degree+1 contiguous nonzeros and indicator features have
/// one, so Gram accumulation costs O(n * width^2) instead of O(n * D^2).
class Design {
 public:
  Design(std::size_t cols, std::size_t width) : cols_(cols), width_(width) {
    if (width == 0 || width > cols) {
      throw std::invalid_argument("Design: row width must be in [1, cols]");
    }
  }

  /// Dense matrix as a design with full-width rows.
  static Design from_dense(const Eigen::MatrixXd& x) {
    Design d(static_cast<std::size_t>(x.cols()), static_cast<std::size_t>(x.cols()));
    d.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      auto row = d.append_row(0);
      for (Eigen::Index j = 0; j < x.cols(); ++j) row[j] = x(i, j);
    }
    return d;
  }

  void reserve(std::size_t rows) {
    offsets_.reserve(rows);
    values_.reserve(rows * width_);
  }

  /// Appends a zero row whose band starts at `offset`; returns the band.
  std::span<double> append_row(std::size_t offset) {
    if (offset + width_ > cols_) throw std::out_of_range("Design: band exceeds column count");
    offsets_.push_back(offset);
    values_.resize(values_.size() + width_, 0.0);
    return {values_.data() + values_.size() - width_, width_};
  }

  std::size_t rows() const { return offsets_.size(); }
  std::size_t cols() const { return cols_; }
  std::size_t width() const { return width_; }
  std::size_t offset(std::size_t i) const { return offsets_[i]; }
  std::span<const double> band(std::size_t i) const {
    return {values_.data() + i * width_, width_};
  }

  /// x_i^T v
  double row_dot(std::size_t i, const Eigen::VectorXd& v) const {
    const auto b = band(i);
    const std::size_t off = offsets_[i];
    double acc = 0.0;
    for (std::size_t k = 0; k < width_; ++k) acc += b[k] * v[static_cast<Eigen::Index>(off + k)];
    return acc;
  }

  /// out += scale * x_i
  void add_row_to(std::size_t i, double scale, Eigen::VectorXd& out) const {
    const auto b = band(i);
    const std::size_t off = offsets_[i];
    for (std::size_t k = 0; k < width_; ++k) out[static_cast<Eigen::Index>(off + k)] += scale * b[k];
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows()),
                                              static_cast<Eigen::Index>(cols_));
    for (std::size_t i = 0; i < rows(); ++i) {
      const auto b = band(i);
      for (std::size_t k = 0; k < width_; ++k) {
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(offsets_[i] + k)) = b[k];
      }
    }
    return x;
  }

 private:
  std::size_t cols_;
  std::size_t width_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

}  // namespace sieveope
