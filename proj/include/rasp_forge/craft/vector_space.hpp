// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "rasp_forge/rasp/value.hpp"

namespace rasp_forge::craft {

/// A labelled residual direction: `group` alone for numerical or special
/// dims ("one", "is_x"), `group:value` for categorical one-hots.
struct BasisDirection {
  std::string group;
  std::optional<Value> value;

  std::string label() const;
  friend bool operator==(const BasisDirection&, const BasisDirection&) = default;
};

class VectorSpace {
 public:
  VectorSpace() = default;
  explicit VectorSpace(std::vector<BasisDirection> basis);

  std::size_t size() const { return basis_.size(); }
  const std::vector<BasisDirection>& basis() const { return basis_; }
  const BasisDirection& operator[](std::size_t i) const { return basis_[i]; }
  bool contains(const BasisDirection& d) const { return index_.count(d.label()) != 0; }
  /// Index of `d`; throws CompileError when absent.
  std::size_t index_of(const BasisDirection& d) const;
  std::optional<std::size_t> find(const BasisDirection& d) const;
  std::vector<std::string> labels() const;

 private:
  std::vector<BasisDirection> basis_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Order-preserving union; repeated directions are kept once.
VectorSpace direct_sum(std::span<const VectorSpace> spaces);
VectorSpace direct_sum(const VectorSpace& a, const VectorSpace& b);

/// |sub| x |space| selection matrix P with P(i, index_of(sub[i])) = 1.
Eigen::MatrixXd injection(const VectorSpace& sub, const VectorSpace& space);

struct LinearMap {
  VectorSpace input;
  VectorSpace output;
  Eigen::MatrixXd matrix;  // |input| x |output|

  /// Row vectors over `from` (directions missing from `input` read 0),
  /// mapped into `to` (directions missing from `to` must carry zeros).
  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows, const VectorSpace& from, const VectorSpace& to) const;
  /// The same map embedded as a |from| x |to| matrix.
  Eigen::MatrixXd embedded(const VectorSpace& from, const VectorSpace& to) const;
};

}  // namespace rasp_forge::craft
