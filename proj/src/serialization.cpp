#include "nwband/serialization.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nwband/errors.hpp"

namespace nwband {

nlohmann::json to_json(const SymmetricBandwidth& h) {
  const Vector& v = h.halfvec();
  return {{"dim", h.dim()}, {"halfvec", std::vector<double>(v.data(), v.data() + v.size())}};
}

SymmetricBandwidth bandwidth_from_json(const nlohmann::json& j) {
  try {
    const int dim = j.at("dim").get<int>();
    const auto values = j.at("halfvec").get<std::vector<double>>();
    Vector v(static_cast<Eigen::Index>(values.size()));
    for (std::size_t k = 0; k < values.size(); ++k) v[static_cast<Eigen::Index>(k)] = values[k];
    return SymmetricBandwidth(dim, v);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed bandwidth: ") + e.what());
  }
}

nlohmann::json to_json(const IterationRecord& r) {
  return {{"iteration", r.iteration},
          {"cv_value", r.cv_value},
          {"step_size", r.step_size},
          {"gradient_norm", r.gradient_norm},
          {"projection_active", r.projection_active}};
}

void write_trace_jsonl(const OptimizerTrace& trace, std::ostream& out) {
  for (const auto& r : trace.records) out << to_json(r).dump() << '\n';
}

std::filesystem::path sidecar_path(const std::filesystem::path& model_path) {
  return std::filesystem::path(model_path.string() + ".data.csv");
}

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_model(const ModelBundle& model, const std::filesystem::path& path) {
  if (model.bandwidth.dim() != model.train.p()) throw InvalidInput("bandwidth dimension does not match the data");
  const auto data_path = sidecar_path(path);
  {
    std::ofstream out(data_path);
    if (!out) throw InvalidInput("cannot write " + data_path.string());
    for (int j = 0; j < model.train.p(); ++j) out << 'x' << j + 1 << ',';
    out << "y\n";
    for (int i = 0; i < model.train.n(); ++i) {
      for (int j = 0; j < model.train.p(); ++j) out << exact(model.train.x()(i, j)) << ',';
      out << exact(model.train.y()[i]) << '\n';
    }
    if (!out) throw InvalidInput("failed writing " + data_path.string());
  }
  const nlohmann::json j = {{"format", "nwband-model"},
                            {"preprocess", to_json(model.spec)},
                            {"bandwidth", to_json(model.bandwidth)},
                            {"n", model.train.n()},
                            {"p", model.train.p()},
                            {"data_file", data_path.filename().string()},
                            {"metadata", model.metadata}};
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw InvalidInput("failed writing " + path.string());
}

ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open model " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("model " + path.string() + " is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != "nwband-model") throw InvalidInput(path.string() + " is not a model bundle");

  PreprocessSpec spec = preprocess_spec_from_json(j.at("preprocess"));
  SymmetricBandwidth bandwidth = bandwidth_from_json(j.at("bandwidth"));
  const int n = j.at("n").get<int>();
  const int p = j.at("p").get<int>();
  if (p != spec.p() || p != bandwidth.dim()) throw InvalidInput("model bundle dimensions are inconsistent");

  const auto data_path = path.parent_path() / j.at("data_file").get<std::string>();
  std::ifstream data(data_path);
  if (!data) throw InvalidInput("cannot open model data " + data_path.string());
  std::string line;
  std::getline(data, line);
  if (std::count(line.begin(), line.end(), ',') != p) throw InvalidInput("model data header does not match the bundle");

  Matrix x(n, p);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(data, line)) throw InvalidInput("model data has fewer rows than the bundle records");
    std::stringstream ss(line);
    std::string cell;
    for (int col = 0; col <= p; ++col) {
      if (!std::getline(ss, cell, ',')) throw InvalidInput("model data row " + std::to_string(i + 1) + " is short");
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw InvalidInput("model data row " + std::to_string(i + 1) + " has a non-numeric value");
      if (col < p)
        x(i, col) = v;
      else
        y[i] = v;
    }
  }
  Dataset train(std::move(x), std::move(y), spec.feature_names());
  return {std::move(spec), std::move(bandwidth), std::move(train),
          j.value("metadata", nlohmann::json::object())};
}

}  // namespace nwband
