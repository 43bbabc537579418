#pragma once

/// \file
/// Time discretization and piecewise-constant series shared by the whole
/// engine. Cells are indexed from 0; cell k covers the half-open interval
/// [origin + k*delta, origin + (k+1)*delta).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tproj/error.hpp"

namespace tproj {

class TimeGrid {
 public:
  TimeGrid(double origin, double delta, std::size_t omega) : origin_(origin), delta_(delta), omega_(omega) {
    if (!(delta > 0.0) || !std::isfinite(delta)) {
      throw PreconditionError("time grid step must be positive and finite");
    }
    if (omega == 0) {
      throw PreconditionError("time grid horizon must hold at least one cell");
    }
    if (!std::isfinite(origin)) {
      throw PreconditionError("time grid origin must be finite");
    }
  }

  double origin() const noexcept { return origin_; }
  double delta() const noexcept { return delta_; }
  std::size_t omega() const noexcept { return omega_; }

  double cell_start(std::size_t cell) const noexcept { return origin_ + static_cast<double>(cell) * delta_; }
  double cell_end(std::size_t cell) const noexcept { return cell_start(cell + 1); }
  double end() const noexcept { return cell_start(omega_); }
  double span() const noexcept { return static_cast<double>(omega_) * delta_; }

  bool contains(double t) const noexcept { return t >= origin_ && cell_index(t) < static_cast<double>(omega_); }

  /// Cell containing t, or nullopt when t lies outside [origin, end).
  std::optional<std::size_t> cell_of(double t) const noexcept {
    if (!contains(t)) return std::nullopt;
    return static_cast<std::size_t>(cell_index(t));
  }

  /// Cell containing t, clamped into [0, omega-1].
  std::size_t clamp_cell(double t) const noexcept {
    if (t < origin_) return 0;
    const double idx = cell_index(t);
    if (idx >= static_cast<double>(omega_)) return omega_ - 1;
    return static_cast<std::size_t>(idx);
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  // Times that land within round-off of a cell boundary belong to the later cell.
  double cell_index(double t) const noexcept { return std::floor((t - origin_) / delta_ + 1e-9); }

  double origin_;
  double delta_;
  std::size_t omega_;
};

/// Piecewise-constant function of time over a grid: values[k] applies over cell k.
class StepSeries {
 public:
  explicit StepSeries(TimeGrid grid) : grid_(grid), values_(grid.omega(), 0.0) {}

  StepSeries(TimeGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.omega()) {
      throw PreconditionError("series length " + std::to_string(values_.size()) + " does not match grid horizon " +
                              std::to_string(grid_.omega()));
    }
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }

  double operator[](std::size_t cell) const noexcept { return values_[cell]; }
  double& operator[](std::size_t cell) noexcept { return values_[cell]; }

  double at(std::size_t cell) const {
    if (cell >= values_.size()) throw PreconditionError("cell " + std::to_string(cell) + " outside series");
    return values_[cell];
  }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  friend bool operator==(const StepSeries&, const StepSeries&) = default;

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

/// Sum of values*delta over the inclusive cell range [first, last].
inline double series_integral(const StepSeries& s, std::size_t first, std::size_t last) {
  if (first > last || last >= s.size()) {
    throw PreconditionError("integral range [" + std::to_string(first) + ", " + std::to_string(last) +
                            "] invalid for series of " + std::to_string(s.size()) + " cells");
  }
  double sum = 0.0;
  for (std::size_t k = first; k <= last; ++k) sum += s[k];
  return sum * s.grid().delta();
}

inline double series_integral(const StepSeries& s) { return series_integral(s, 0, s.size() - 1); }

/// Integer ratio coarse/fine when fine subdivides coarse evenly.
inline std::optional<std::size_t> subdivision_ratio(double coarse, double fine) {
  const double ratio = coarse / fine;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded) return std::nullopt;
  return static_cast<std::size_t>(rounded);
}

/// Replicates each cell of s across the sub-cells of a finer grid covering the same span.
inline StepSeries resample(const StepSeries& s, const TimeGrid& finer) {
  const TimeGrid& coarse = s.grid();
  const auto ratio = subdivision_ratio(coarse.delta(), finer.delta());
  if (!ratio) {
    throw ResampleMismatch("step " + std::to_string(finer.delta()) + " does not evenly divide " +
                           std::to_string(coarse.delta()));
  }
  const double tol = 1e-9 * std::max(1.0, std::abs(coarse.delta()));
  if (std::abs(coarse.origin() - finer.origin()) > tol || coarse.omega() * *ratio != finer.omega()) {
    throw ResampleMismatch("grids do not cover the same span");
  }
  StepSeries out(finer);
  for (std::size_t k = 0; k < coarse.omega(); ++k) {
    for (std::size_t j = 0; j < *ratio; ++j) out[k * *ratio + j] = s[k];
  }
  return out;
}

}  // namespace tproj
