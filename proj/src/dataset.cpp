#include "rode/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rode/error.hpp"

namespace rode {

using nlohmann::json;

std::string_view to_string(Modality m) { return m == Modality::Visible ? "V" : "I"; }

Modality parse_modality(std::string_view s) {
  if (s == "V") return Modality::Visible;
  if (s == "I") return Modality::Infrared;
  throw Error("unknown modality '" + std::string(s) + "' (expected V or I)");
}

std::size_t Dataset::count(Modality m) const {
  return static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(), [m](const Sample& s) { return s.modality == m; }));
}

std::vector<std::size_t> Dataset::indices(Modality m) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].modality == m) out.push_back(i);
  return out;
}

Matrix Dataset::features(Modality m) const {
  Matrix out(0, dim);
  for (const auto& s : samples)
    if (s.modality == m) out.append_row(s.feature);
  return out;
}

std::vector<int> Dataset::identities(Modality m) const {
  std::vector<int> out;
  for (const auto& s : samples)
    if (s.modality == m) out.push_back(s.identity);
  return out;
}

void validate(const Dataset& dataset) {
  if (dataset.samples.empty()) throw Error("dataset has no samples");
  if (dataset.dim == 0) throw Error("dataset feature dimension is zero");
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    if (s.feature.size() != dataset.dim)
      throw Error("sample " + std::to_string(i) + " has dimension " +
                  std::to_string(s.feature.size()) + ", expected " + std::to_string(dataset.dim));
    if (!all_finite(s.feature))
      throw Error("sample " + std::to_string(i) + " has a non-finite feature value");
    if (s.identity < 0) throw Error("sample " + std::to_string(i) + " has a negative identity");
  }
  for (Modality m : kModalities)
    if (dataset.count(m) == 0)
      throw Error("dataset has no samples of modality " + std::string(to_string(m)));
}

void validate(const SynthSpec& spec) {
  if (spec.identities < 1) throw Error("synthetic spec: identities must be >= 1");
  if (spec.samples_per_modality < 1)
    throw Error("synthetic spec: samples per modality must be >= 1");
  if (spec.dim < 1) throw Error("synthetic spec: dim must be >= 1");
  if (!(spec.center_spread > 0.0)) throw Error("synthetic spec: center spread must be > 0");
  if (!(spec.noise_sigma >= 0.0)) throw Error("synthetic spec: noise sigma must be >= 0");
  if (!(spec.modality_offset >= 0.0)) throw Error("synthetic spec: modality offset must be >= 0");
  if (!(spec.outlier_fraction >= 0.0 && spec.outlier_fraction <= 1.0))
    throw Error("synthetic spec: outlier fraction must be in [0, 1]");
}

SyntheticDataset generate_synthetic_detailed(const SynthSpec& spec) {
  validate(spec);
  const auto dim = static_cast<std::size_t>(spec.dim);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  SyntheticDataset out;
  out.offset.resize(dim);
  for (double& x : out.offset) x = unit(rng);
  normalize_in_place(out.offset);
  for (double& x : out.offset) x *= spec.modality_offset;

  out.identity_centers = Matrix(static_cast<std::size_t>(spec.identities), dim);
  out.data.dim = dim;
  for (int id = 0; id < spec.identities; ++id) {
    auto center = out.identity_centers.row(static_cast<std::size_t>(id));
    for (double& x : center) x = spec.center_spread * unit(rng);
    for (Modality m : kModalities) {
      for (int k = 0; k < spec.samples_per_modality; ++k) {
        Sample s{id, m, std::vector<double>(dim)};
        for (std::size_t d = 0; d < dim; ++d) {
          s.feature[d] = center[d] + spec.noise_sigma * unit(rng);
          if (m == Modality::Infrared) s.feature[d] += out.offset[d];
        }
        out.data.samples.push_back(std::move(s));
      }
    }
  }

  const std::size_t n = out.data.samples.size();
  out.outlier.assign(n, false);
  const auto n_out = static_cast<std::size_t>(std::llround(spec.outlier_fraction * double(n)));
  if (n_out > 0) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_out));
    for (std::size_t k = 0; k < n_out; ++k) {
      auto& s = out.data.samples[order[k]];
      for (double& x : s.feature) x = spec.center_spread * unit(rng);
      out.outlier[order[k]] = true;
    }
  }
  return out;
}

Dataset generate_synthetic(const SynthSpec& spec) {
  return generate_synthetic_detailed(spec).data;
}

Dataset select_identities(const Dataset& dataset, int first, int last) {
  Dataset out;
  out.dim = dataset.dim;
  for (const auto& s : dataset.samples)
    if (s.identity >= first && s.identity < last) out.samples.push_back(s);
  return out;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file " + path.string());
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::size_t first_dim_line = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Sample s;
    try {
      const json rec = json::parse(line);
      s.identity = rec.at("identity").get<int>();
      s.modality = parse_modality(rec.at("modality").get<std::string>());
      s.feature = rec.at("feature").get<std::vector<double>>();
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    if (s.feature.empty())
      throw Error(path.string() + ":" + std::to_string(line_no) + ": empty feature");
    if (ds.samples.empty()) {
      ds.dim = s.feature.size();
      first_dim_line = line_no;
    } else if (s.feature.size() != ds.dim) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": dimension mismatch: feature has " +
                  std::to_string(s.feature.size()) + " values but line " +
                  std::to_string(first_dim_line) + " established " + std::to_string(ds.dim));
    }
    ds.samples.push_back(std::move(s));
  }
  validate(ds);
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  validate(dataset);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& s : dataset.samples) {
    json rec = {{"identity", s.identity},
                {"modality", std::string(to_string(s.modality))},
                {"feature", s.feature}};
    out << rec.dump() << '\n';
  }
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace rode
