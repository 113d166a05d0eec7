#include "reid/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "reid/errors.hpp"

namespace reid {

LabeledDataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.num_ids < 2) throw Error("gen_synthetic: need at least 2 identities");
  if (spec.samples_per_id < 2)
    throw Error("gen_synthetic: need at least 2 samples per identity");
  if (spec.within_spread <= 0.0)
    throw Error("gen_synthetic: within_spread must be positive");
  Rng rng(spec.seed);
  LabeledDataset ds;
  const std::size_t m = spec.num_ids * spec.samples_per_id;
  ds.features = Matrix(m, spec.input_dim);
  ds.ids.resize(m);
  std::size_t row = 0;
  for (std::size_t id = 0; id < spec.num_ids; ++id) {
    Vector centroid(spec.input_dim);
    for (double& c : centroid)
      c = (2.0 * rng.uniform() - 1.0) * spec.centroid_scale;
    for (std::size_t s = 0; s < spec.samples_per_id; ++s, ++row) {
      ds.ids[row] = static_cast<int>(id);
      for (std::size_t k = 0; k < spec.input_dim; ++k)
        ds.features.at(row, k) = centroid[k] + spec.within_spread * rng.normal();
    }
  }
  return ds;
}

void save_features(const LabeledDataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write feature file: " + path);
  os << "id,camera";
  for (std::size_t k = 0; k < ds.dim(); ++k) os << ",f" << k;
  os << "\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    os << ds.ids[i] << ",";
    if (!ds.cameras.empty()) os << ds.cameras[i];
    for (std::size_t k = 0; k < ds.dim(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.features.at(i, k));
      os << "," << buf;
    }
    os << "\n";
  }
}

static std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

LabeledDataset load_features(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open feature file: " + path);
  std::string line;
  std::size_t lineno = 0;

  // Header
  std::size_t dim = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv(line);
    if (fields.size() < 3 || fields[0] != "id" || fields[1] != "camera")
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected header id,camera,f0,...");
    dim = fields.size() - 2;
    break;
  }
  if (dim == 0) throw ParseError(path + ": missing header");

  LabeledDataset ds;
  std::vector<double> values;
  std::vector<int> ids, cameras;
  bool any_camera = false;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv(line);
    if (fields.size() != dim + 2)
      throw InconsistentDimension(path + ":" + std::to_string(lineno) + ": has " +
                                  std::to_string(fields.size() - 2) +
                                  " features, expected " + std::to_string(dim));
    std::size_t pos = 0;
    try {
      ids.push_back(std::stoi(fields[0], &pos));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad id field");
    }
    if (fields[1].empty()) {
      cameras.push_back(-1);
    } else {
      try {
        cameras.push_back(std::stoi(fields[1]));
        any_camera = true;
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": bad camera field");
      }
    }
    for (std::size_t k = 0; k < dim; ++k) {
      double v;
      try {
        v = std::stod(fields[2 + k], &pos);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": column " +
                         std::to_string(2 + k) + " is not a number");
      }
      if (!std::isfinite(v))
        throw NonFiniteFeature(path + ":" + std::to_string(lineno) +
                               ": non-finite feature value");
      values.push_back(v);
    }
    ++rows;
  }
  ds.features = Matrix(rows, dim);
  ds.features.data = std::move(values);
  ds.ids = std::move(ids);
  if (any_camera) ds.cameras = std::move(cameras);
  return ds;
}

Split split(const LabeledDataset& ds, double train_frac, Rng& rng) {
  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < ds.size(); ++i) by_id[ds.ids[i]].push_back(i);
  std::vector<int> id_list;
  for (const auto& [id, rows] : by_id) id_list.push_back(id);
  if (id_list.size() < 2)
    throw InsufficientIdentities("split: need at least 2 identities");

  for (std::size_t i = 0; i + 1 < id_list.size(); ++i)
    std::swap(id_list[i], id_list[i + rng.below(id_list.size() - i)]);

  std::size_t n_train = static_cast<std::size_t>(
      std::llround(train_frac * static_cast<double>(id_list.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, id_list.size() - 1);

  std::vector<int> test_ids(id_list.begin() + n_train, id_list.end());
  for (int id : test_ids)
    if (by_id[id].size() < 2)
      throw InsufficientSamplesPerIdentity(
          "split: test identity " + std::to_string(id) +
          " has fewer than 2 samples");

  auto gather_rows = [&](const std::vector<std::size_t>& rows) {
    LabeledDataset out;
    out.features = Matrix(rows.size(), ds.dim());
    out.ids.resize(rows.size());
    if (!ds.cameras.empty()) out.cameras.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(ds.features.row(rows[i]), ds.features.row(rows[i]) + ds.dim(),
                out.features.row(i));
      out.ids[i] = ds.ids[rows[i]];
      if (!ds.cameras.empty()) out.cameras[i] = ds.cameras[rows[i]];
    }
    return out;
  };

  std::vector<std::size_t> train_rows, query_rows, gallery_rows;
  for (std::size_t i = 0; i < n_train; ++i)
    for (std::size_t r : by_id[id_list[i]]) train_rows.push_back(r);
  for (int id : test_ids) {
    const auto& rows = by_id[id];
    const std::size_t q = rng.below(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      (i == q ? query_rows : gallery_rows).push_back(rows[i]);
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(query_rows.begin(), query_rows.end());
  std::sort(gallery_rows.begin(), gallery_rows.end());

  return {gather_rows(train_rows), gather_rows(query_rows),
          gather_rows(gallery_rows)};
}

}  // namespace reid
