#include "modlab/train/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "modlab/errors.hpp"

namespace modlab::train {

std::string_view to_string(Signature s) {
  switch (s) {
    case Signature::none: return "none";
    case Signature::single_step_spike: return "single_step_spike";
    case Signature::direct_collapse: return "direct_collapse";
    case Signature::monotone_rise: return "monotone_rise";
    case Signature::sustained_inflation: return "sustained_inflation";
  }
  return "none";
}

std::optional<Signature> parse_signature(std::string_view text) {
  for (auto s : {Signature::none, Signature::single_step_spike, Signature::direct_collapse, Signature::monotone_rise,
                 Signature::sustained_inflation}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Signature classify_signature(std::span<const double> window, const SignatureThresholds& th) {
  std::vector<double> finite;
  bool nan_follows = false;
  for (double v : window) {
    if (!std::isfinite(v)) {
      nan_follows = true;
      break;
    }
    finite.push_back(v);
  }
  if (finite.size() < 2) {
    throw ContractError("classify_signature needs at least two finite entries before any NaN");
  }
  const std::size_t n = finite.size();
  const double ref = median(std::vector<double>(finite.begin(), finite.begin() + static_cast<std::ptrdiff_t>((n + 1) / 2)));

  std::size_t run_start = n - 1;
  while (run_start > 0 && finite[run_start - 1] < finite[run_start]) --run_start;
  const std::size_t run_len = n - run_start;
  if (run_len >= th.rise_min_length && finite[run_start] > 0.0 &&
      finite.back() / finite[run_start] > th.rise_ratio) {
    return Signature::monotone_rise;
  }

  const std::size_t tail = n / 2;
  std::size_t high = 0;
  for (std::size_t i = n - tail; i < n; ++i) high += finite[i] > th.inflation_factor * ref;
  if (tail > 0 && static_cast<double>(high) > th.inflation_fraction * static_cast<double>(tail)) {
    return Signature::sustained_inflation;
  }

  if (nan_follows) {
    if (finite.back() > th.spike_factor * ref) return Signature::single_step_spike;
    if (finite.back() <= th.collapse_factor * ref) return Signature::direct_collapse;
  }
  return Signature::none;
}

void DivergenceSignal::record(long step, double grad_norm) {
  window.emplace_back(step, grad_norm);
  while (window.size() > capacity) window.pop_front();
}

std::vector<double> DivergenceSignal::values() const {
  std::vector<double> out;
  for (const auto& [_, v] : window) out.push_back(v);
  return out;
}

}  // namespace modlab::train
