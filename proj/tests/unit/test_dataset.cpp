#include <doctest.h>

#include <cmath>
#include <fstream>

#include "rode/dataset.hpp"
#include "rode/error.hpp"
#include "support.hpp"

using namespace rode;

namespace {

void write_lines(const std::filesystem::path& path, std::initializer_list<const char*> lines) {
  std::ofstream out(path, std::ios::trunc);
  for (const char* l : lines) out << l << '\n';
}

}  // namespace

TEST_CASE("zero-noise pairs differ by exactly the shared offset") {
  SynthSpec spec;
  spec.identities = 2;
  spec.samples_per_modality = 1;
  spec.noise_sigma = 0.0;
  spec.modality_offset = 0.7;
  spec.seed = 5;
  const SyntheticDataset s = generate_synthetic_detailed(spec);
  REQUIRE(s.data.size() == 4);
  CHECK(testing::cosine(s.offset, s.offset) == doctest::Approx(1.0));
  CHECK(norm(s.offset) == doctest::Approx(0.7));
  for (int id = 0; id < 2; ++id) {
    const Sample& v = s.data.samples[2 * id];
    const Sample& i = s.data.samples[2 * id + 1];
    CHECK(v.modality == Modality::Visible);
    CHECK(i.modality == Modality::Infrared);
    CHECK(v.identity == id);
    CHECK(i.identity == id);
    for (std::size_t d = 0; d < s.data.dim; ++d)
      CHECK(i.feature[d] - v.feature[d] == doctest::Approx(s.offset[d]).epsilon(1e-12));
  }
}

TEST_CASE("without outliers every feature lies within 6 sigma of its center") {
  SynthSpec spec;
  spec.identities = 5;
  spec.samples_per_modality = 4;
  spec.dim = 8;
  spec.noise_sigma = 0.3;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    spec.seed = seed;
    const SyntheticDataset s = generate_synthetic_detailed(spec);
    for (const Sample& x : s.data.samples) {
      const auto c = s.identity_centers.row(static_cast<std::size_t>(x.identity));
      for (std::size_t d = 0; d < s.data.dim; ++d) {
        double shift = x.modality == Modality::Infrared ? s.offset[d] : 0.0;
        REQUIRE(std::abs(x.feature[d] - c[d] - shift) <= 6.0 * spec.noise_sigma);
      }
    }
  }
}

TEST_CASE("outlier fraction replaces the requested share of samples") {
  SynthSpec spec;
  spec.identities = 10;
  spec.samples_per_modality = 5;
  spec.outlier_fraction = 0.2;
  const SyntheticDataset s = generate_synthetic_detailed(spec);
  CHECK(std::count(s.outlier.begin(), s.outlier.end(), true) == 20);
}

TEST_CASE("generation is deterministic per seed") {
  SynthSpec spec;
  spec.seed = 42;
  CHECK(generate_synthetic(spec) == generate_synthetic(spec));
  SynthSpec other_seed = spec;
  other_seed.seed = 43;
  CHECK_FALSE(generate_synthetic(spec) == generate_synthetic(other_seed));
}

TEST_CASE("synthetic spec validation") {
  SynthSpec spec;
  spec.identities = 0;
  CHECK_THROWS_AS(generate_synthetic(spec), Error);
  spec = {};
  spec.noise_sigma = -1.0;
  CHECK_THROWS_AS(generate_synthetic(spec), Error);
  spec = {};
  spec.outlier_fraction = 1.5;
  CHECK_THROWS_AS(generate_synthetic(spec), Error);
}

TEST_CASE("dataset accessors split by modality in order") {
  SynthSpec spec;
  spec.identities = 3;
  spec.samples_per_modality = 2;
  const Dataset ds = generate_synthetic(spec);
  CHECK(ds.count(Modality::Visible) == 6);
  CHECK(ds.indices(Modality::Infrared) == std::vector<std::size_t>{2, 3, 6, 7, 10, 11});
  CHECK(ds.identities(Modality::Visible) == std::vector<int>{0, 0, 1, 1, 2, 2});
  const Matrix f = ds.features(Modality::Infrared);
  CHECK(f.rows() == 6);
  CHECK(std::equal(f.row(0).begin(), f.row(0).end(), ds.samples[2].feature.begin()));
  const Dataset sub = select_identities(ds, 1, 3);
  CHECK(sub.size() == 8);
  CHECK(sub.samples.front().identity == 1);
}

TEST_CASE("loading line-delimited records") {
  const auto path = testing::temp_path("two_lines.jsonl");
  write_lines(path, {R"({"identity":0,"modality":"V","feature":[1,2,3]})",
                     R"({"identity":0,"modality":"I","feature":[1,2,4.5]})"});
  const Dataset ds = load_dataset(path);
  CHECK(ds.size() == 2);
  CHECK(ds.dim == 3);
  CHECK(ds.samples[1].modality == Modality::Infrared);
  CHECK(ds.samples[1].feature[2] == 4.5);
}

TEST_CASE("load errors") {
  const auto path = testing::temp_path("bad.jsonl");
  SUBCASE("dimension mismatch") {
    write_lines(path, {R"({"identity":0,"modality":"V","feature":[1,2,3,4]})",
                       R"({"identity":0,"modality":"I","feature":[1,2,3]})"});
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("dimension mismatch"), Error);
  }
  SUBCASE("single modality") {
    write_lines(path, {R"({"identity":0,"modality":"V","feature":[1,2]})",
                       R"({"identity":1,"modality":"V","feature":[3,4]})"});
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("modality I"), Error);
  }
  SUBCASE("malformed line") {
    write_lines(path, {R"({"identity":0,"modality":"V","feature":[1,2]})", "not json"});
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains(":2: malformed"), Error);
  }
  SUBCASE("unknown modality") {
    write_lines(path, {R"({"identity":0,"modality":"X","feature":[1,2]})"});
    CHECK_THROWS_AS(load_dataset(path), Error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_dataset(testing::temp_path("does_not_exist.jsonl")), Error);
  }
}

TEST_CASE("save and load round-trip exactly") {
  SynthSpec spec;
  spec.identities = 4;
  spec.samples_per_modality = 3;
  spec.outlier_fraction = 0.1;
  spec.seed = 9;
  const Dataset ds = generate_synthetic(spec);
  const auto path = testing::temp_path("roundtrip.jsonl");
  save_dataset(ds, path);
  CHECK(load_dataset(path) == ds);
}

TEST_CASE("saving refuses an empty dataset") {
  CHECK_THROWS_AS(save_dataset(Dataset{}, testing::temp_path("empty.jsonl")), Error);
}

TEST_CASE("saving overwrites an existing file") {
  const auto path = testing::temp_path("overwrite.jsonl");
  SynthSpec a;
  a.identities = 5;
  save_dataset(generate_synthetic(a), path);
  SynthSpec b;
  b.identities = 2;
  b.seed = 1;
  const Dataset small = generate_synthetic(b);
  save_dataset(small, path);
  CHECK(load_dataset(path) == small);
}

TEST_CASE("validate rejects non-finite features and negative identities") {
  SynthSpec spec;
  spec.identities = 2;
  Dataset ds = generate_synthetic(spec);
  Dataset bad = ds;
  bad.samples[0].feature[0] = std::nan("");
  CHECK_THROWS_AS(validate(bad), Error);
  bad = ds;
  bad.samples[0].identity = -1;
  CHECK_THROWS_AS(validate(bad), Error);
  CHECK_NOTHROW(validate(ds));
}
