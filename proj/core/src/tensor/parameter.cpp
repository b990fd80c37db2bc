#include "modlab/tensor/parameter.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "modlab/errors.hpp"

namespace modlab {

std::string InitSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::normal: os << "normal(" << mean << ',' << std << ')'; break;
    case Kind::constant: os << "constant(" << value << ')'; break;
    case Kind::identity: os << "identity"; break;
  }
  return os.str();
}

InitSpec InitSpec::parse(const std::string& text) {
  if (text == "identity") return identity();
  auto args = [&](std::size_t prefix) {
    if (text.back() != ')') throw ContractError("malformed init spec: " + text);
    return text.substr(prefix, text.size() - prefix - 1);
  };
  if (text.rfind("constant(", 0) == 0) return constant(std::stod(args(9)));
  if (text.rfind("normal(", 0) == 0) {
    const std::string body = args(7);
    const auto comma = body.find(',');
    if (comma == std::string::npos) throw ContractError("malformed init spec: " + text);
    return normal(std::stod(body.substr(0, comma)), std::stod(body.substr(comma + 1)));
  }
  throw ContractError("unknown init spec: " + text);
}

std::uint64_t stream_seed(std::uint64_t seed, const std::string& name) {
  // FNV-1a over the name, folded into the seed with a splitmix64 finalizer.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor ParameterSet::add(std::string name, Shape shape, InitSpec init, bool decay) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  const auto n = numel(shape);
  Tensor t = Tensor::variable(std::move(shape), std::vector<double>(n, 0.0));
  params_.push_back(Parameter{std::move(name), t, init, decay});
  return t;
}

void ParameterSet::initialize_one(Parameter& p, std::uint64_t seed) {
  auto v = p.tensor.mutable_values();
  switch (p.init.kind) {
    case InitSpec::Kind::normal: {
      std::mt19937_64 rng(stream_seed(seed, p.name));
      std::normal_distribution<double> dist(p.init.mean, p.init.std);
      for (auto& x : v) x = dist(rng);
      break;
    }
    case InitSpec::Kind::constant:
      std::fill(v.begin(), v.end(), p.init.value);
      break;
    case InitSpec::Kind::identity: {
      const std::size_t rows = p.tensor.rows(), cols = p.tensor.cols();
      if (cols < rows) throw ConfigError("identity init needs cols >= rows for " + p.name);
      std::fill(v.begin(), v.end(), 0.0);
      for (std::size_t i = 0; i < rows; ++i) v[i * cols + i + (cols - rows)] = 1.0;
      break;
    }
  }
}

void ParameterSet::initialize(std::uint64_t seed) {
  for (auto& p : params_) initialize_one(p, seed);
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = std::find_if(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return *it;
}

Parameter& ParameterSet::at(const std::string& name) {
  return const_cast<Parameter&>(static_cast<const ParameterSet&>(*this).at(name));
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

std::size_t ParameterSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<Tensor> ParameterSet::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

}  // namespace modlab
