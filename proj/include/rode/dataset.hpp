#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "rode/matrix.hpp"

namespace rode {

enum class Modality : std::uint8_t { Visible = 0, Infrared = 1 };

inline constexpr Modality kModalities[] = {Modality::Visible, Modality::Infrared};

inline Modality other(Modality m) {
  return m == Modality::Visible ? Modality::Infrared : Modality::Visible;
}
inline std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }

std::string_view to_string(Modality m);  // "V" or "I"
Modality parse_modality(std::string_view s);

struct Sample {
  int identity = 0;  // ground truth; only evaluation and diagnostics read it
  Modality modality = Modality::Visible;
  std::vector<double> feature;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  std::vector<Sample> samples;
  std::size_t dim = 0;

  std::size_t size() const { return samples.size(); }
  std::size_t count(Modality m) const;
  // Positions of the samples of one modality, in dataset order.
  std::vector<std::size_t> indices(Modality m) const;
  // Features of one modality stacked in dataset order.
  Matrix features(Modality m) const;
  std::vector<int> identities(Modality m) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Throws rode::Error if the dataset breaks an invariant: empty, missing a
// modality, inconsistent dimension, or non-finite features.
void validate(const Dataset& dataset);

struct SynthSpec {
  int identities = 20;
  int samples_per_modality = 10;  // per identity
  int dim = 32;
  double center_spread = 1.0;
  double noise_sigma = 0.1;
  double modality_offset = 0.5;
  double outlier_fraction = 0.0;
  std::uint64_t seed = 0;
};

void validate(const SynthSpec& spec);

struct SyntheticDataset {
  Dataset data;
  Matrix identity_centers;             // identities x dim
  std::vector<double> offset;          // shared infrared shift
  std::vector<bool> outlier;           // per sample
};

// Samples are laid out identity-major: for each identity, its visible samples
// followed by its infrared samples.
SyntheticDataset generate_synthetic_detailed(const SynthSpec& spec);
Dataset generate_synthetic(const SynthSpec& spec);

// Keeps the samples whose identity is in [first, last).
Dataset select_identities(const Dataset& dataset, int first, int last);

// Line-delimited JSON records:
//   {"identity":3,"modality":"V","feature":[0.1,-0.2,...]}
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace rode
