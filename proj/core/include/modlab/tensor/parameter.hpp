#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "modlab/tensor/tensor.hpp"

namespace modlab {

struct InitSpec {
  enum class Kind { normal, constant, identity };

  Kind kind = Kind::constant;
  double mean = 0.0;
  double std = 0.0;
  double value = 0.0;

  static InitSpec normal(double mean, double std) { return {Kind::normal, mean, std, 0.0}; }
  static InitSpec constant(double c) { return {Kind::constant, 0.0, 0.0, c}; }
  // Ones on the trailing diagonal: element (i, j) is 1 iff j == i + cols - rows.
  // A square matrix gets the usual identity; a (1, n) row gets a one-hot last entry.
  static InitSpec identity() { return {Kind::identity, 0.0, 0.0, 0.0}; }

  std::string describe() const;
  static InitSpec parse(const std::string& text);
  bool operator==(const InitSpec&) const = default;
};

struct Parameter {
  std::string name;
  Tensor tensor;
  InitSpec init;
  bool decay = true;  // subject to decoupled weight decay
};

// Ordered, name-unique collection of parameters. Initialization of each
// parameter draws from its own stream derived from (seed, name), so a
// parameter's initial value does not depend on which other parameters exist.
class ParameterSet {
 public:
  Tensor add(std::string name, Shape shape, InitSpec init, bool decay = true);

  void initialize(std::uint64_t seed);
  static void initialize_one(Parameter& p, std::uint64_t seed);

  const Parameter& at(const std::string& name) const;
  Parameter& at(const std::string& name);
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  std::vector<Tensor> tensors() const;

 private:
  std::deque<Parameter> params_;
};

std::uint64_t stream_seed(std::uint64_t seed, const std::string& name);

}  // namespace modlab
