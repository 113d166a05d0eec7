#pragma once

#include <string>
#include <vector>

#include "reid/batch.hpp"
#include "reid/distance.hpp"
#include "reid/sampling.hpp"

namespace reid {

struct MarginConfig {
  double alpha = 0.3;
  double beta = 0.2;
  // Normalize embedding rows before computing distances; the normalization
  // backward is part of the returned gradient.
  bool normalize_inputs = true;
};

enum class PairKind { Positive, Negative };

struct MinedPair {
  PairKind kind;
  std::size_t i, j;
  double dist;
};

struct LossOutput {
  double value = 0.0;
  Matrix grad;                    // N x D, w.r.t. the raw embedding batch
  std::vector<MinedPair> mined;
};

// Output of the softmax cross-entropy head; gradient is w.r.t. logits.
struct ClassificationOutput {
  double value = 0.0;
  Matrix grad;  // N x C
};

struct CombinedOutput {
  double value = 0.0;
  Matrix grad_embeddings;  // N x D
  Matrix grad_logits;      // N x C
  std::vector<MinedPair> mined;
};

// max(z, 0); subgradient is 0 at z = 0 so zero loss implies zero grad.
double hinge(double z);
double hinge_grad(double z);

LossOutput triplet_loss(const EmbeddingBatch& emb,
                        const std::vector<Triplet>& triplets,
                        const MarginConfig& cfg);

LossOutput quadruplet_loss(const EmbeddingBatch& emb,
                           const std::vector<Quadruplet>& quads,
                           const MarginConfig& cfg);

// Single-margin form: hinge(d(a,a') - d(c,b) + alpha); c may share the
// anchor identity.
LossOutput quad_prime_loss(const EmbeddingBatch& emb,
                           const std::vector<Quadruplet>& quads,
                           const MarginConfig& cfg);

// Per-anchor hardest positive / hardest negative.
LossOutput trihard_loss(const EmbeddingBatch& emb, const MarginConfig& cfg);

// Single hardest positive pair and single hardest negative pair over the
// whole batch; one hinge term, not averaged.
LossOutput msml_loss(const EmbeddingBatch& emb, const MarginConfig& cfg);

ClassificationOutput classification_loss(const Matrix& logits,
                                         const std::vector<int>& class_ids);

CombinedOutput combined_loss(const LossOutput& metric,
                             const ClassificationOutput& cls, double w_cls);

// min over negative pairs minus max over positive pairs; positive when the
// batch is perfectly separated.
double demarcation(const DistanceMatrix& d, const std::vector<int>& ids);

}  // namespace reid
