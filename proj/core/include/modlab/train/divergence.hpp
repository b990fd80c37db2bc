#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace modlab::train {

enum class Signature { none, single_step_spike, direct_collapse, monotone_rise, sustained_inflation };

std::string_view to_string(Signature s);
std::optional<Signature> parse_signature(std::string_view text);

struct SignatureThresholds {
  double spike_factor = 4.0;      // last finite > 4x reference
  double collapse_factor = 1.5;   // last finite <= 1.5x reference
  double rise_ratio = 10.0;       // strictly increasing run growing > 10x
  std::size_t rise_min_length = 3;
  double inflation_factor = 10.0;    // entries > 10x reference ...
  double inflation_fraction = 0.25;  // ... in more than 25% of the trailing half
};

// Classifies a grad-norm trajectory. Entries after the first non-finite value
// are ignored; a non-finite entry marks a NaN step. The reference level is
// the median of the first half of the finite entries. Rules, first match wins:
//   monotone_rise        trailing strictly increasing run of >= rise_min_length
//                        entries whose last/first ratio exceeds rise_ratio
//   sustained_inflation  more than inflation_fraction of the trailing half
//                        exceeds inflation_factor x reference
//   single_step_spike    NaN follows a last finite value > spike_factor x reference
//   direct_collapse      NaN follows a last finite value <= collapse_factor x reference
//   none                 otherwise
// Throws ContractError with fewer than two finite entries.
Signature classify_signature(std::span<const double> window, const SignatureThresholds& th = {});

// Ring buffer of recent (step, grad-norm) pairs plus the outcome.
struct DivergenceSignal {
  explicit DivergenceSignal(std::size_t capacity = 64) : capacity(capacity) {}

  void record(long step, double grad_norm);
  // Values in step order, for classify_signature.
  std::vector<double> values() const;

  std::size_t capacity;
  std::deque<std::pair<long, double>> window;
  std::optional<long> nan_step;
  Signature signature = Signature::none;
};

}  // namespace modlab::train
