#include "reid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "reid/distance.hpp"
#include "reid/errors.hpp"

namespace reid {

std::vector<std::size_t> rank_gallery(
    const Vector& query_emb, const EmbeddingBatch& gallery,
    const std::vector<std::size_t>& exclusions) {
  if (gallery.dim() != query_emb.size())
    throw ShapeMismatch("rank_gallery: dimension mismatch");
  std::set<std::size_t> excluded(exclusions.begin(), exclusions.end());
  std::vector<std::size_t> order;
  std::vector<double> dist;
  for (std::size_t g = 0; g < gallery.size(); ++g) {
    if (excluded.count(g)) continue;
    order.push_back(g);
    dist.push_back(distance(query_emb.data(), gallery.features.row(g),
                            query_emb.size()));
  }
  if (order.empty())
    throw EmptyGalleryAfterExclusion("rank_gallery: nothing left to rank");
  std::vector<std::size_t> perm(order.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) {
    if (dist[x] != dist[y]) return dist[x] < dist[y];
    return order[x] < order[y];
  });
  std::vector<std::size_t> ranked(order.size());
  for (std::size_t i = 0; i < perm.size(); ++i) ranked[i] = order[perm[i]];
  return ranked;
}

std::vector<double> cmc(const std::vector<std::vector<bool>>& relevance,
                        std::size_t max_rank) {
  std::vector<double> curve(max_rank, 0.0);
  for (const auto& flags : relevance) {
    std::size_t first = flags.size();
    for (std::size_t i = 0; i < flags.size(); ++i)
      if (flags[i]) { first = i; break; }
    if (first == flags.size())
      throw QueryWithoutMatch("cmc: query has no relevant gallery item");
    for (std::size_t r = first; r < max_rank; ++r) curve[r] += 1.0;
  }
  for (double& v : curve) v /= static_cast<double>(relevance.size());
  return curve;
}

double average_precision(const std::vector<bool>& relevance) {
  std::size_t relevant = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < relevance.size(); ++k) {
    if (relevance[k]) {
      ++relevant;
      sum += static_cast<double>(relevant) / static_cast<double>(k + 1);
    }
  }
  if (relevant == 0)
    throw QueryWithoutMatch("average_precision: no relevant items");
  return sum / static_cast<double>(relevant);
}

Histogram distance_histogram(const EmbeddingBatch& emb, std::size_t bins) {
  const std::size_t n = emb.size();
  DistanceMatrix d = pairwise_distances(emb);
  double maxd = 0.0;
  std::size_t npos = 0, nneg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      maxd = std::max(maxd, d.at(i, j));
      (emb.ids[i] == emb.ids[j] ? npos : nneg)++;
    }
  }
  if (nneg == 0)
    throw SingleIdentityBatch("distance_histogram: no negative pairs");
  if (npos == 0) throw NoPositivePairs("distance_histogram: no positive pairs");

  Histogram h;
  const double top = maxd > 0.0 ? maxd : 1.0;
  for (std::size_t b = 0; b <= bins; ++b)
    h.edges.push_back(top * static_cast<double>(b) / static_cast<double>(bins));
  h.pos.assign(bins, 0);
  h.neg.assign(bins, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      std::size_t b = static_cast<std::size_t>(d.at(i, j) / top *
                                               static_cast<double>(bins));
      if (b >= bins) b = bins - 1;  // max lands in the last bin
      (emb.ids[i] == emb.ids[j] ? h.pos : h.neg)[b]++;
    }
  }
  return h;
}

EvalReport evaluate(const EmbeddingBatch& queries, const EmbeddingBatch& gallery,
                    const EvalProtocol& protocol) {
  if (queries.dim() != gallery.dim())
    throw ShapeMismatch("evaluate: query/gallery dimension mismatch");
  const std::size_t nq = queries.size();
  const bool use_cameras = protocol.camera_exclusion &&
                           !queries.cameras.empty() && !gallery.cameras.empty();

  auto exclusions_for = [&](std::size_t q) {
    std::vector<std::size_t> exclusions;
    if (use_cameras) {
      for (std::size_t g = 0; g < gallery.size(); ++g)
        if (gallery.ids[g] == queries.ids[q] &&
            gallery.cameras[g] == queries.cameras[q])
          exclusions.push_back(g);
    }
    return exclusions;
  };

  // Validate up front; the parallel loop below must not throw.
  for (std::size_t q = 0; q < nq; ++q) {
    const auto excl = exclusions_for(q);
    std::set<std::size_t> excluded(excl.begin(), excl.end());
    bool has_match = false;
    for (std::size_t g = 0; g < gallery.size(); ++g)
      if (!excluded.count(g) && gallery.ids[g] == queries.ids[q]) {
        has_match = true;
        break;
      }
    if (!has_match)
      throw QueryWithoutMatch("evaluate: query " + std::to_string(q) +
                              " has no valid gallery match");
  }

  std::vector<std::vector<bool>> relevance(nq);
  std::vector<double> aps(nq);
#pragma omp parallel for schedule(static)
  for (std::size_t q = 0; q < nq; ++q) {
    const auto exclusions = exclusions_for(q);
    Vector qe(queries.features.row(q), queries.features.row(q) + queries.dim());
    const auto ranked = rank_gallery(qe, gallery, exclusions);
    std::vector<bool> flags(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i)
      flags[i] = gallery.ids[ranked[i]] == queries.ids[q];
    aps[q] = average_precision(flags);
    relevance[q] = std::move(flags);
  }

  EvalReport report;
  report.cmc = cmc(relevance, protocol.max_rank);
  report.per_query_ap = aps;
  report.map = std::accumulate(aps.begin(), aps.end(), 0.0) /
               static_cast<double>(nq);

  // Distance distributions over the union of queries and gallery.
  EmbeddingBatch all;
  all.features = Matrix(nq + gallery.size(), queries.dim());
  std::copy(queries.features.data.begin(), queries.features.data.end(),
            all.features.data.begin());
  std::copy(gallery.features.data.begin(), gallery.features.data.end(),
            all.features.data.begin() + queries.features.data.size());
  all.ids = queries.ids;
  all.ids.insert(all.ids.end(), gallery.ids.begin(), gallery.ids.end());
  report.hist = distance_histogram(all, protocol.histogram_bins);

  DistanceMatrix d = pairwise_distances(all);
  double max_pos = 0.0, min_neg = 0.0;
  bool have_neg = false;
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      if (all.ids[i] == all.ids[j]) {
        max_pos = std::max(max_pos, d.at(i, j));
      } else if (!have_neg || d.at(i, j) < min_neg) {
        min_neg = d.at(i, j);
        have_neg = true;
      }
    }
  }
  report.demarcation = min_neg - max_pos;
  return report;
}

void save_report_json(const EvalReport& report, const std::string& path,
                      std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["seed"] = seed;
  auto rank = [&](std::size_t r) {
    return r <= report.cmc.size() ? report.cmc[r - 1] : 1.0;
  };
  j["rank_1"] = rank(1);
  j["rank_5"] = rank(5);
  j["rank_10"] = rank(10);
  j["mAP"] = report.map;
  j["cmc"] = report.cmc;
  j["demarcation"] = report.demarcation;
  j["per_query_ap"] = report.per_query_ap;
  std::ofstream os(path);
  if (!os) throw Error("cannot write report: " + path);
  os << j.dump(2) << "\n";
}

void save_histogram_csv(const Histogram& hist, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write histogram: " + path);
  os << "bin_left,bin_right,pos_count,neg_count\n";
  char buf[64];
  for (std::size_t b = 0; b + 1 < hist.edges.size(); ++b) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,", hist.edges[b],
                  hist.edges[b + 1]);
    os << buf << hist.pos[b] << "," << hist.neg[b] << "\n";
  }
}

}  // namespace reid
