#include "reid/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "reid/errors.hpp"

namespace reid {

// splitmix64
std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t Rng::below(std::size_t n) {
  // 64-bit state, n at most a few thousand here; modulo bias is negligible.
  return static_cast<std::size_t>(next() % n);
}

double Rng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

static std::map<int, std::vector<std::size_t>> rows_by_id(
    const std::vector<int>& ids) {
  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < ids.size(); ++i) by_id[ids[i]].push_back(i);
  return by_id;
}

PkBatch pk_sample(const LabeledDataset& ds, std::size_t p, std::size_t k,
                  Rng& rng) {
  if (k < 2) throw KTooSmall("pk_sample: k must be >= 2");
  auto by_id = rows_by_id(ds.ids);
  if (by_id.size() < p)
    throw InsufficientIdentities("pk_sample: dataset has fewer than p identities");

  // Identities with fewer than k samples are excluded, not padded.
  std::vector<int> eligible;
  for (const auto& [id, rows] : by_id)
    if (rows.size() >= k) eligible.push_back(id);
  if (eligible.size() < p)
    throw InsufficientSamplesPerIdentity(
        "pk_sample: fewer than p identities have >= k samples");

  // Partial Fisher-Yates over the eligible ids.
  for (std::size_t i = 0; i < p; ++i)
    std::swap(eligible[i], eligible[i + rng.below(eligible.size() - i)]);

  PkBatch batch;
  batch.p = p;
  batch.k = k;
  batch.indices.reserve(p * k);
  for (std::size_t i = 0; i < p; ++i) {
    std::vector<std::size_t> rows = by_id[eligible[i]];
    for (std::size_t j = 0; j < k; ++j) {
      std::swap(rows[j], rows[j + rng.below(rows.size() - j)]);
      batch.indices.push_back(rows[j]);
    }
  }
  return batch;
}

// In-batch identity labels for the positions of a PkBatch.
static std::vector<int> batch_ids(const PkBatch& batch,
                                  const std::vector<int>& ds_ids) {
  std::vector<int> ids(batch.indices.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = ds_ids[batch.indices[i]];
  return ids;
}

std::vector<Triplet> sample_triplets(const PkBatch& batch,
                                     const std::vector<int>& ds_ids, Rng& rng) {
  const auto ids = batch_ids(batch, ds_ids);
  const std::size_t n = ids.size();
  std::vector<Triplet> out;
  out.reserve(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == a) continue;
      (ids[i] == ids[a] ? pos : neg).push_back(i);
    }
    out.push_back({a, pos[rng.below(pos.size())], neg[rng.below(neg.size())]});
  }
  return out;
}

std::vector<Quadruplet> sample_quadruplets(const PkBatch& batch,
                                           const std::vector<int>& ds_ids,
                                           Rng& rng) {
  if (batch.p < 3)
    throw NeedThreeIdentities("sample_quadruplets: batch has fewer than 3 identities");
  const auto ids = batch_ids(batch, ds_ids);
  const std::size_t n = ids.size();
  auto by_id = rows_by_id(ids);
  std::vector<int> distinct;
  for (const auto& [id, rows] : by_id) distinct.push_back(id);

  std::vector<Quadruplet> out;
  out.reserve(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < n; ++i)
      if (i != a && ids[i] == ids[a]) pos.push_back(i);

    std::vector<int> others;
    for (int id : distinct)
      if (id != ids[a]) others.push_back(id);
    const std::size_t bi = rng.below(others.size());
    std::size_t ci = rng.below(others.size() - 1);
    if (ci >= bi) ++ci;
    const auto& b_rows = by_id[others[bi]];
    const auto& c_rows = by_id[others[ci]];
    out.push_back({a, pos[rng.below(pos.size())],
                   b_rows[rng.below(b_rows.size())],
                   c_rows[rng.below(c_rows.size())]});
  }
  return out;
}

EmbeddingBatch gather(const LabeledDataset& ds, const PkBatch& batch) {
  EmbeddingBatch out;
  out.features = Matrix(batch.indices.size(), ds.dim());
  out.ids.resize(batch.indices.size());
  if (!ds.cameras.empty()) out.cameras.resize(batch.indices.size());
  for (std::size_t i = 0; i < batch.indices.size(); ++i) {
    const std::size_t r = batch.indices[i];
    std::copy(ds.features.row(r), ds.features.row(r) + ds.dim(),
              out.features.row(i));
    out.ids[i] = ds.ids[r];
    if (!ds.cameras.empty()) out.cameras[i] = ds.cameras[r];
  }
  return out;
}

}  // namespace reid
