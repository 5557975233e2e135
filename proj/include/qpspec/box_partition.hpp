#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"
#include "torus_flow.hpp"

namespace qpspec {

/// Sheared coordinates of a torus point: y = sum_{j != pivot} t_j e_j + s*alpha,
/// with t in [0,1)^(d-1) and s in [0, 1/|alpha_pivot|).
struct ShearedCoords {
  std::vector<double> t;
  double s = 0.0;
};

/// One parallelepiped gamma + sum t_j e_j + t_d alpha, 0 <= t_j < ell_j.
struct Box {
  TorusPoint gamma;
  std::vector<double> ell;  // ell[0..d-2] along the free axes, ell[d-1] along alpha
};

/// Partition of T^d into sheared boxes: the image of an axis-aligned grid on
/// [0,1)^(d-1) x [0, 1/|alpha_pivot|) under the sheared-coordinate map.
class BoxPartition {
 public:
  /// counts[0..d-2] subdivide the free axes (in increasing axis order);
  /// counts[d-1] subdivides the alpha direction.
  BoxPartition(FlowParams flow, std::vector<std::size_t> counts)
      : flow_(std::move(flow)), counts_(std::move(counts)) {
    const std::size_t d = flow_.dim();
    detail::require(counts_.size() == d, "BoxPartition: need one count per dimension");
    pivot_ = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(flow_.alpha()[j]) > std::abs(flow_.alpha()[pivot_])) pivot_ = j;
    pivot_alpha_ = flow_.alpha()[pivot_];
    for (std::size_t j = 0; j < d; ++j)
      if (j != pivot_) free_axes_.push_back(j);

    ell_.resize(d);
    for (std::size_t i = 0; i + 1 < d; ++i) {
      detail::require(counts_[i] >= 2, "BoxPartition: free-axis counts must be >= 2 (ell < 1)");
      ell_[i] = 1.0 / static_cast<double>(counts_[i]);
    }
    detail::require(counts_[d - 1] >= 1, "BoxPartition: alpha-axis count must be >= 1");
    period_ = 1.0 / std::abs(pivot_alpha_);
    ell_[d - 1] = period_ / static_cast<double>(counts_[d - 1]);
    detail::require(ell_[d - 1] < 1.0, "BoxPartition: alpha-direction box length must be < 1");

    delta_ = *std::max_element(ell_.begin(), ell_.end());
    size_ = 1;
    for (auto c : counts_) size_ *= c;
  }

  const FlowParams& flow() const { return flow_; }
  std::size_t dim() const { return flow_.dim(); }
  std::size_t pivot() const { return pivot_; }
  const std::vector<std::size_t>& free_axes() const { return free_axes_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  const std::vector<double>& ell() const { return ell_; }
  double ell_d() const { return ell_.back(); }
  /// Length of the s-range, 1/|alpha_pivot|.
  double s_period() const { return period_; }
  double delta() const { return delta_; }
  std::size_t size() const { return size_; }

  /// Per-wrap shift of the free coordinates when s passes 1/|alpha_pivot|.
  double wrap_shift(std::size_t free_index) const {
    return flow_.alpha()[free_axes_[free_index]] / std::abs(pivot_alpha_);
  }

  ShearedCoords to_sheared(std::span<const double> y) const {
    ShearedCoords c;
    const double yp = reduce_mod1(y[pivot_]);
    c.s = pivot_alpha_ > 0 ? yp / pivot_alpha_ : reduce_mod1(-yp) / -pivot_alpha_;
    if (c.s >= period_) c.s = 0.0;
    c.t.resize(free_axes_.size());
    for (std::size_t i = 0; i < free_axes_.size(); ++i) {
      const std::size_t j = free_axes_[i];
      c.t[i] = reduce_mod1(y[j] - c.s * flow_.alpha()[j]);
    }
    return c;
  }

  TorusPoint from_sheared(const ShearedCoords& c) const {
    std::vector<double> y(dim());
    y[pivot_] = c.s * pivot_alpha_;
    for (std::size_t i = 0; i < free_axes_.size(); ++i) {
      const std::size_t j = free_axes_[i];
      y[j] = c.t[i] + c.s * flow_.alpha()[j];
    }
    return TorusPoint(std::move(y));
  }

  /// Box index holding the sheared point plus the local offset along alpha.
  struct Location {
    std::size_t index;
    double t_local;
  };

  Location locate_sheared(const ShearedCoords& c) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < free_axes_.size(); ++i) {
      auto k = static_cast<std::size_t>(c.t[i] * static_cast<double>(counts_[i]));
      idx = idx * counts_[i] + std::min(k, counts_[i] - 1);
    }
    const std::size_t nd = counts_.back();
    auto kd = std::min(static_cast<std::size_t>(c.s / ell_d()), nd - 1);
    idx = idx * nd + kd;
    return {idx, c.s - static_cast<double>(kd) * ell_d()};
  }

  Location locate(std::span<const double> y) const { return locate_sheared(to_sheared(y)); }

  /// Grid indices (free axes first, alpha axis last) of a box.
  std::vector<std::size_t> grid_index(std::size_t index) const {
    std::vector<std::size_t> g(counts_.size());
    for (std::size_t i = counts_.size(); i-- > 0;) {
      g[i] = index % counts_[i];
      index /= counts_[i];
    }
    return g;
  }

  /// Sheared coordinates of a point at fractional position u in [0,1)^d inside a box.
  ShearedCoords box_point(std::size_t index, std::span<const double> u) const {
    auto g = grid_index(index);
    ShearedCoords c;
    c.t.resize(free_axes_.size());
    for (std::size_t i = 0; i < free_axes_.size(); ++i)
      c.t[i] = (static_cast<double>(g[i]) + u[i]) * ell_[i];
    c.s = (static_cast<double>(g.back()) + u.back()) * ell_d();
    return c;
  }

  Box box(std::size_t index) const {
    std::vector<double> zero(dim(), 0.0);
    return Box{from_sheared(box_point(index, zero)), ell_};
  }

 private:
  FlowParams flow_;
  std::vector<std::size_t> counts_;
  std::size_t pivot_ = 0;
  double pivot_alpha_ = 1.0;
  std::vector<std::size_t> free_axes_;
  std::vector<double> ell_;
  double period_ = 1.0;
  double delta_ = 1.0;
  std::size_t size_ = 1;
};

}  // namespace qpspec
