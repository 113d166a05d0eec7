#include "reid/losses.hpp"

#include <cmath>
#include <set>

#include "reid/errors.hpp"

namespace reid {

double hinge(double z) { return z > 0.0 ? z : 0.0; }
double hinge_grad(double z) { return z > 0.0 ? 1.0 : 0.0; }

namespace {

// Embeddings the distances are measured on, plus what is needed to route
// gradients back to the raw inputs.
struct Working {
  Matrix emb;
  const Matrix* raw;
  bool normalized;
};

Working make_working(const EmbeddingBatch& batch, const MarginConfig& cfg) {
  if (batch.size() < 2) throw EmptyBatch("loss: batch has fewer than 2 rows");
  Working w{batch.features, &batch.features, cfg.normalize_inputs};
  if (cfg.normalize_inputs) {
    for (std::size_t i = 0; i < w.emb.rows; ++i) {
      const double n = l2_norm(w.emb.row(i), w.emb.cols);
      if (n <= kNormEps)
        throw ZeroNormError("loss: cannot normalize a zero embedding row");
      for (std::size_t k = 0; k < w.emb.cols; ++k) w.emb.at(i, k) /= n;
    }
  }
  return w;
}

// Adds weight * d dist(i,j) / d emb to rows i and j of grad.
void accumulate_pair(const Working& w, std::size_t i, std::size_t j,
                     double weight, Matrix& grad) {
  const double d = distance(w.emb.row(i), w.emb.row(j), w.emb.cols);
  for (std::size_t k = 0; k < w.emb.cols; ++k) {
    const double g = weight * (w.emb.at(i, k) - w.emb.at(j, k)) / d;
    grad.at(i, k) += g;
    grad.at(j, k) -= g;
  }
}

// Chain the accumulated gradient through the row normalization.
Matrix finalize_grad(const Working& w, const Matrix& grad) {
  if (!w.normalized) return grad;
  Matrix out(grad.rows, grad.cols);
  for (std::size_t i = 0; i < grad.rows; ++i)
    l2_normalize_backward(w.raw->row(i), grad.row(i), grad.cols, out.row(i));
  return out;
}

double dist_ij(const Working& w, std::size_t i, std::size_t j) {
  return distance(w.emb.row(i), w.emb.row(j), w.emb.cols);
}

void check_mining_preconditions(const EmbeddingBatch& emb) {
  std::set<int> distinct(emb.ids.begin(), emb.ids.end());
  if (distinct.size() < 2)
    throw SingleIdentityBatch("loss: batch contains a single identity");
  for (int id : distinct) {
    std::size_t count = 0;
    for (int x : emb.ids) count += (x == id);
    if (count < 2)
      throw IdentityWithoutPositive("loss: identity " + std::to_string(id) +
                                    " has no positive pair in the batch");
  }
}

}  // namespace

LossOutput triplet_loss(const EmbeddingBatch& emb,
                        const std::vector<Triplet>& triplets,
                        const MarginConfig& cfg) {
  if (triplets.empty()) throw EmptyTupleList("triplet_loss: no triplets");
  const Working w = make_working(emb, cfg);
  Matrix grad(emb.size(), emb.dim());
  LossOutput out;
  const double inv = 1.0 / static_cast<double>(triplets.size());
  for (const Triplet& t : triplets) {
    const double dpos = dist_ij(w, t.a, t.a_pos);
    const double dneg = dist_ij(w, t.a, t.b);
    const double z = dpos - dneg + cfg.alpha;
    out.value += hinge(z) * inv;
    const double g = hinge_grad(z) * inv;
    if (g > 0.0) {
      accumulate_pair(w, t.a, t.a_pos, g, grad);
      accumulate_pair(w, t.a, t.b, -g, grad);
    }
    out.mined.push_back({PairKind::Positive, t.a, t.a_pos, dpos});
    out.mined.push_back({PairKind::Negative, t.a, t.b, dneg});
  }
  out.grad = finalize_grad(w, grad);
  return out;
}

LossOutput quadruplet_loss(const EmbeddingBatch& emb,
                           const std::vector<Quadruplet>& quads,
                           const MarginConfig& cfg) {
  if (quads.empty()) throw EmptyTupleList("quadruplet_loss: no quadruplets");
  const Working w = make_working(emb, cfg);
  Matrix grad(emb.size(), emb.dim());
  LossOutput out;
  const double inv = 1.0 / static_cast<double>(quads.size());
  for (const Quadruplet& q : quads) {
    const double dpos = dist_ij(w, q.a, q.a_pos);
    const double dneg_rel = dist_ij(w, q.a, q.b);
    const double dneg_abs = dist_ij(w, q.c, q.b);

    const double z1 = dpos - dneg_rel + cfg.alpha;
    out.value += hinge(z1) * inv;
    if (hinge_grad(z1) > 0.0) {
      accumulate_pair(w, q.a, q.a_pos, inv, grad);
      accumulate_pair(w, q.a, q.b, -inv, grad);
    }

    const double z2 = dpos - dneg_abs + cfg.beta;
    out.value += hinge(z2) * inv;
    if (hinge_grad(z2) > 0.0) {
      accumulate_pair(w, q.a, q.a_pos, inv, grad);
      accumulate_pair(w, q.c, q.b, -inv, grad);
    }

    out.mined.push_back({PairKind::Positive, q.a, q.a_pos, dpos});
    out.mined.push_back({PairKind::Negative, q.a, q.b, dneg_rel});
    out.mined.push_back({PairKind::Negative, q.c, q.b, dneg_abs});
  }
  out.grad = finalize_grad(w, grad);
  return out;
}

LossOutput quad_prime_loss(const EmbeddingBatch& emb,
                           const std::vector<Quadruplet>& quads,
                           const MarginConfig& cfg) {
  if (quads.empty()) throw EmptyTupleList("quad_prime_loss: no quadruplets");
  const Working w = make_working(emb, cfg);
  Matrix grad(emb.size(), emb.dim());
  LossOutput out;
  const double inv = 1.0 / static_cast<double>(quads.size());
  for (const Quadruplet& q : quads) {
    const double dpos = dist_ij(w, q.a, q.a_pos);
    const double dneg = dist_ij(w, q.c, q.b);
    const double z = dpos - dneg + cfg.alpha;
    out.value += hinge(z) * inv;
    if (hinge_grad(z) > 0.0) {
      accumulate_pair(w, q.a, q.a_pos, inv, grad);
      accumulate_pair(w, q.c, q.b, -inv, grad);
    }
    out.mined.push_back({PairKind::Positive, q.a, q.a_pos, dpos});
    out.mined.push_back({PairKind::Negative, q.c, q.b, dneg});
  }
  out.grad = finalize_grad(w, grad);
  return out;
}

LossOutput trihard_loss(const EmbeddingBatch& emb, const MarginConfig& cfg) {
  check_mining_preconditions(emb);
  const Working w = make_working(emb, cfg);
  const std::size_t n = emb.size();
  Matrix grad(n, emb.dim());
  LossOutput out;
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t a = 0; a < n; ++a) {
    // Ties break toward the smallest index.
    std::size_t hard_pos = n, hard_neg = n;
    double dpos = -1.0, dneg = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      const double d = dist_ij(w, a, j);
      if (emb.ids[j] == emb.ids[a]) {
        if (d > dpos) { dpos = d; hard_pos = j; }
      } else if (hard_neg == n || d < dneg) {
        dneg = d;
        hard_neg = j;
      }
    }
    const double z = dpos - dneg + cfg.alpha;
    out.value += hinge(z) * inv;
    if (hinge_grad(z) > 0.0) {
      accumulate_pair(w, a, hard_pos, inv, grad);
      accumulate_pair(w, a, hard_neg, -inv, grad);
    }
    out.mined.push_back({PairKind::Positive, a, hard_pos, dpos});
    out.mined.push_back({PairKind::Negative, a, hard_neg, dneg});
  }
  out.grad = finalize_grad(w, grad);
  return out;
}

LossOutput msml_loss(const EmbeddingBatch& emb, const MarginConfig& cfg) {
  check_mining_preconditions(emb);
  const Working w = make_working(emb, cfg);
  const std::size_t n = emb.size();

  // Scan unordered pairs (i<j) in row-major order; first occurrence wins ties.
  std::size_t pi = n, pj = n, ni = n, nj = n;
  double max_pos = -1.0, min_neg = 0.0;
  bool have_neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = dist_ij(w, i, j);
      if (emb.ids[i] == emb.ids[j]) {
        if (d > max_pos) { max_pos = d; pi = i; pj = j; }
      } else if (!have_neg || d < min_neg) {
        min_neg = d;
        ni = i;
        nj = j;
        have_neg = true;
      }
    }
  }

  LossOutput out;
  Matrix grad(n, emb.dim());
  const double z = max_pos - min_neg + cfg.alpha;
  out.value = hinge(z);
  if (hinge_grad(z) > 0.0) {
    accumulate_pair(w, pi, pj, 1.0, grad);
    accumulate_pair(w, ni, nj, -1.0, grad);
  }
  out.mined.push_back({PairKind::Positive, pi, pj, max_pos});
  out.mined.push_back({PairKind::Negative, ni, nj, min_neg});
  out.grad = finalize_grad(w, grad);
  return out;
}

ClassificationOutput classification_loss(const Matrix& logits,
                                         const std::vector<int>& class_ids) {
  const std::size_t n = logits.rows, c = logits.cols;
  if (class_ids.size() != n)
    throw ShapeMismatch("classification_loss: label count mismatch");
  for (int id : class_ids)
    if (id < 0 || static_cast<std::size_t>(id) >= c)
      throw LabelOutOfRange("classification_loss: class index " +
                            std::to_string(id) + " out of range");
  ClassificationOutput out;
  out.grad = Matrix(n, c);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(logits.at(i, j) - mx);
    const double lse = mx + std::log(sum);
    out.value += (lse - logits.at(i, class_ids[i])) * inv;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(logits.at(i, j) - lse);
      out.grad.at(i, j) =
          (p - (static_cast<std::size_t>(class_ids[i]) == j ? 1.0 : 0.0)) * inv;
    }
  }
  return out;
}

CombinedOutput combined_loss(const LossOutput& metric,
                             const ClassificationOutput& cls, double w_cls) {
  CombinedOutput out;
  out.value = metric.value + w_cls * cls.value;
  out.grad_embeddings = metric.grad;
  out.grad_logits = scale(cls.grad, w_cls);
  out.mined = metric.mined;
  return out;
}

double demarcation(const DistanceMatrix& d, const std::vector<int>& ids) {
  double max_pos = -1.0, min_neg = 0.0;
  bool have_pos = false, have_neg = false;
  for (std::size_t i = 0; i < d.n; ++i) {
    for (std::size_t j = i + 1; j < d.n; ++j) {
      if (ids[i] == ids[j]) {
        if (!have_pos || d.at(i, j) > max_pos) max_pos = d.at(i, j);
        have_pos = true;
      } else {
        if (!have_neg || d.at(i, j) < min_neg) min_neg = d.at(i, j);
        have_neg = true;
      }
    }
  }
  if (!have_neg) throw SingleIdentityBatch("demarcation: no negative pairs");
  if (!have_pos) throw NoPositivePairs("demarcation: no positive pairs");
  return min_neg - max_pos;
}

}  // namespace reid
