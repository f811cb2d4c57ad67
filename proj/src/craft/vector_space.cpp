// Copyright 2026 The rasp-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rasp_forge/craft/vector_space.hpp"

#include "rasp_forge/errors.hpp"

namespace rasp_forge::craft {

std::string BasisDirection::label() const { return value ? group + ":" + value->to_string() : group; }

VectorSpace::VectorSpace(std::vector<BasisDirection> basis) : basis_(std::move(basis)) {
  for (std::size_t i = 0; i < basis_.size(); ++i) {
    if (!index_.emplace(basis_[i].label(), i).second) {
      throw CompileError("duplicate basis direction '" + basis_[i].label() + "'");
    }
  }
}

std::optional<std::size_t> VectorSpace::find(const BasisDirection& d) const {
  auto it = index_.find(d.label());
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t VectorSpace::index_of(const BasisDirection& d) const {
  auto i = find(d);
  if (!i) {
    throw CompileError("basis direction '" + d.label() + "' is not in the space");
  }
  return *i;
}

std::vector<std::string> VectorSpace::labels() const {
  std::vector<std::string> out;
  out.reserve(basis_.size());
  for (const auto& d : basis_) out.push_back(d.label());
  return out;
}

VectorSpace direct_sum(std::span<const VectorSpace> spaces) {
  std::vector<BasisDirection> basis;
  std::unordered_map<std::string, const BasisDirection*> seen;
  for (const auto& space : spaces) {
    for (const auto& d : space.basis()) {
      auto [it, inserted] = seen.emplace(d.label(), &d);
      if (inserted) {
        basis.push_back(d);
      } else if (!(*it->second == d)) {
        // Same printed label from two different directions, e.g. the
        // string "1" and the number 1 in one group.
        throw CompileError("two directions share the label '" + d.label() + "'");
      }
    }
  }
  return VectorSpace(std::move(basis));
}

VectorSpace direct_sum(const VectorSpace& a, const VectorSpace& b) {
  const VectorSpace both[] = {a, b};
  return direct_sum(both);
}

Eigen::MatrixXd injection(const VectorSpace& sub, const VectorSpace& space) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sub.size()), static_cast<Eigen::Index>(space.size()));
  for (std::size_t i = 0; i < sub.size(); ++i) {
    p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(space.index_of(sub[i]))) = 1.0;
  }
  return p;
}

Eigen::MatrixXd LinearMap::embedded(const VectorSpace& from, const VectorSpace& to) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(from.size()), static_cast<Eigen::Index>(to.size()));
  for (std::size_t i = 0; i < input.size(); ++i) {
    auto row = from.find(input[i]);
    if (!row) continue;
    for (std::size_t j = 0; j < output.size(); ++j) {
      const double v = matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (v == 0.0) continue;
      auto col = to.find(output[j]);
      if (!col) {
        throw CompileError("linear map writes '" + output[j].label() + "' outside the target space");
      }
      out(static_cast<Eigen::Index>(*row), static_cast<Eigen::Index>(*col)) += v;
    }
  }
  return out;
}

Eigen::MatrixXd LinearMap::apply(const Eigen::MatrixXd& rows, const VectorSpace& from, const VectorSpace& to) const {
  if (rows.cols() != static_cast<Eigen::Index>(from.size())) {
    throw CompileError("shape mismatch: rows have " + std::to_string(rows.cols()) + " columns, space has " +
                       std::to_string(from.size()));
  }
  return rows * embedded(from, to);
}

}  // namespace rasp_forge::craft
