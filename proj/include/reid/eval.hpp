#pragma once

#include <string>
#include <vector>

#include "reid/batch.hpp"

namespace reid {

struct EvalProtocol {
  // Exclude gallery items sharing both id and camera with the query
  // (Market1501-style). Ignored when camera labels are absent.
  bool camera_exclusion = true;
  std::size_t max_rank = 10;
  std::size_t histogram_bins = 50;
};

struct Histogram {
  std::vector<double> edges;        // bins + 1 edges
  std::vector<std::size_t> pos;     // same-id pair counts
  std::vector<std::size_t> neg;     // different-id pair counts
};

struct EvalReport {
  std::vector<double> cmc;          // rank-1..max_rank accuracies
  double map = 0.0;
  std::vector<double> per_query_ap;
  Histogram hist;
  double demarcation = 0.0;         // min neg dist - max pos dist, union set
};

// Gallery indices sorted by ascending distance to the query; ties break
// toward the smaller index.
std::vector<std::size_t> rank_gallery(const Vector& query_emb,
                                      const EmbeddingBatch& gallery,
                                      const std::vector<std::size_t>& exclusions);

// cmc[i-1] = fraction of queries whose first relevant item is at rank <= i.
std::vector<double> cmc(const std::vector<std::vector<bool>>& relevance,
                        std::size_t max_rank);

double average_precision(const std::vector<bool>& relevance);

EvalReport evaluate(const EmbeddingBatch& queries, const EmbeddingBatch& gallery,
                    const EvalProtocol& protocol);

Histogram distance_histogram(const EmbeddingBatch& emb, std::size_t bins);

void save_report_json(const EvalReport& report, const std::string& path,
                      std::uint64_t seed);
void save_histogram_csv(const Histogram& hist, const std::string& path);

}  // namespace reid
