#include <fstream>

#include <json.hpp>

#include "rode/error.hpp"
#include "rode/trainer.hpp"

namespace rode {

namespace {

using nlohmann::json;

constexpr int kCheckpointVersion = 1;

json to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()},
          {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols) throw Error("checkpoint: matrix data has the wrong length");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data().begin());
  return m;
}

json to_json(const ModelState& model) {
  json enc = json::array();
  for (const Encoder& e : model.encoders)
    enc.push_back({{"in", e.in}, {"hidden", e.hidden}, {"out", e.out}, {"params", e.params}});
  json j = {{"id", model.id == ModelId::A ? "A" : "B"}, {"encoders", enc}};
  if (model.banks) {
    json banks = json::array();
    for (const MemoryBank& b : *model.banks)
      banks.push_back({{"eta", b.eta()}, {"tau", b.tau()}, {"centers", to_json(b.centers())}});
    j["banks"] = banks;
  }
  return j;
}

ModelState model_from_json(const json& j) {
  ModelState m;
  m.id = j.at("id").get<std::string>() == "A" ? ModelId::A : ModelId::B;
  const json& enc = j.at("encoders");
  if (enc.size() != 2) throw Error("checkpoint: expected two encoders per model");
  for (std::size_t k = 0; k < 2; ++k) {
    Encoder e = make_encoder(enc[k].at("in").get<std::size_t>(), enc[k].at("hidden").get<std::size_t>(),
                             enc[k].at("out").get<std::size_t>());
    e.params = enc[k].at("params").get<std::vector<double>>();
    if (e.params.size() != e.param_count()) throw Error("checkpoint: encoder parameter count mismatch");
    m.encoders[k] = std::move(e);
  }
  if (j.contains("banks")) {
    const json& banks = j.at("banks");
    if (banks.size() != 2) throw Error("checkpoint: expected two memory banks per model");
    BankSet set;
    for (std::size_t k = 0; k < 2; ++k)
      set[k] = init_memory(matrix_from_json(banks[k].at("centers")), banks[k].at("eta").get<double>(),
                           banks[k].at("tau").get<double>());
    m.banks = std::move(set);
  }
  return m;
}

}  // namespace

void save_checkpoint(const TrainingState& state, const std::filesystem::path& path) {
  const json j = {{"format", "rode-checkpoint"},
                  {"version", kCheckpointVersion},
                  {"step", state.step},
                  {"models", {to_json(state.a), to_json(state.b)}}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

TrainingState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("checkpoint " + path.string() + " is not valid: " + e.what());
  }
  if (j.value("format", "") != "rode-checkpoint") throw Error("not a checkpoint file: " + path.string());
  if (j.value("version", 0) != kCheckpointVersion)
    throw Error("unsupported checkpoint version in " + path.string());
  TrainingState s;
  s.step = j.value("step", std::uint64_t{0});
  s.a = model_from_json(j.at("models").at(0));
  s.b = model_from_json(j.at("models").at(1));
  return s;
}

}  // namespace rode
