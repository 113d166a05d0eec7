#include "reid/gradcheck.hpp"

#include <cmath>
#include <numeric>

#include "reid/distance.hpp"
#include "reid/errors.hpp"

namespace reid {

Matrix finite_difference(const std::function<double(const Matrix&)>& f,
                         const Matrix& x, double step) {
  Matrix g(x.rows, x.cols);
  Matrix probe = x;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double saved = probe.data[i];
    probe.data[i] = saved + step;
    const double hi = f(probe);
    probe.data[i] = saved - step;
    const double lo = f(probe);
    probe.data[i] = saved;
    g.data[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

double grad_rel_err(const Matrix& a, const Matrix& b, double floor) {
  if (a.data.size() != b.data.size())
    throw ShapeMismatch("grad_rel_err: size mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    diff += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    na += a.data[i] * a.data[i];
    nb += b.data[i] * b.data[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

bool GradCheckReport::all_pass() const {
  for (const auto& e : entries)
    if (!e.pass) return false;
  return true;
}

namespace {

EmbeddingBatch random_batch(Rng& rng, std::size_t n_ids, std::size_t k,
                            std::size_t dim) {
  EmbeddingBatch emb;
  emb.features = Matrix(n_ids * k, dim);
  for (double& x : emb.features.data) x = rng.normal();
  emb.ids.resize(n_ids * k);
  for (std::size_t i = 0; i < emb.ids.size(); ++i)
    emb.ids[i] = static_cast<int>(i / k);
  return emb;
}

Matrix normalized_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows; ++i) {
    const double n = l2_norm(out.row(i), out.cols);
    for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) /= n;
  }
  return out;
}

double min_offdiag(const DistanceMatrix& d) {
  double mn = 1e300;
  for (std::size_t i = 0; i < d.n; ++i)
    for (std::size_t j = i + 1; j < d.n; ++j) mn = std::min(mn, d.at(i, j));
  return mn;
}

PkBatch identity_pk(std::size_t p, std::size_t k) {
  PkBatch b;
  b.p = p;
  b.k = k;
  b.indices.resize(p * k);
  std::iota(b.indices.begin(), b.indices.end(), 0);
  return b;
}

// Arguments fed to the hinge for each loss, so margins can be nudged away
// from the kink before differencing.
std::vector<double> hinge_args(LossKind kind, const DistanceMatrix& d,
                               const std::vector<int>& ids,
                               const std::vector<Triplet>& tris,
                               const std::vector<Quadruplet>& quads,
                               const MarginConfig& cfg) {
  std::vector<double> z;
  switch (kind) {
    case LossKind::Tri:
      for (const auto& t : tris)
        z.push_back(d.at(t.a, t.a_pos) - d.at(t.a, t.b) + cfg.alpha);
      break;
    case LossKind::Quad:
      for (const auto& q : quads) {
        z.push_back(d.at(q.a, q.a_pos) - d.at(q.a, q.b) + cfg.alpha);
        z.push_back(d.at(q.a, q.a_pos) - d.at(q.c, q.b) + cfg.beta);
      }
      break;
    case LossKind::QuadPrime:
      for (const auto& q : quads)
        z.push_back(d.at(q.a, q.a_pos) - d.at(q.c, q.b) + cfg.alpha);
      break;
    case LossKind::TriHard:
      for (std::size_t a = 0; a < ids.size(); ++a) {
        double dpos = -1.0, dneg = 1e300;
        for (std::size_t j = 0; j < ids.size(); ++j) {
          if (j == a) continue;
          if (ids[j] == ids[a])
            dpos = std::max(dpos, d.at(a, j));
          else
            dneg = std::min(dneg, d.at(a, j));
        }
        z.push_back(dpos - dneg + cfg.alpha);
      }
      break;
    case LossKind::Msml: {
      double mp = -1.0, mn = 1e300;
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
          if (ids[i] == ids[j])
            mp = std::max(mp, d.at(i, j));
          else
            mn = std::min(mn, d.at(i, j));
        }
      z.push_back(mp - mn + cfg.alpha);
      break;
    }
    case LossKind::Cls:
      break;
  }
  return z;
}

// Nudge alpha (and beta, same shift) until no hinge argument is within
// `margin` of zero.
void condition_margins(LossKind kind, const DistanceMatrix& d,
                       const std::vector<int>& ids,
                       const std::vector<Triplet>& tris,
                       const std::vector<Quadruplet>& quads, MarginConfig& cfg,
                       double margin = 1e-4) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    bool ok = true;
    for (double z : hinge_args(kind, d, ids, tris, quads, cfg))
      if (std::fabs(z) < margin) ok = false;
    if (ok) return;
    cfg.alpha += 1e-3;
    cfg.beta += 1e-3;
  }
  throw Error("gradcheck: could not condition margins away from hinge kinks");
}

LossOutput eval_loss(LossKind kind, const EmbeddingBatch& emb,
                     const std::vector<Triplet>& tris,
                     const std::vector<Quadruplet>& quads,
                     const MarginConfig& cfg) {
  switch (kind) {
    case LossKind::Tri: return triplet_loss(emb, tris, cfg);
    case LossKind::Quad: return quadruplet_loss(emb, quads, cfg);
    case LossKind::QuadPrime: return quad_prime_loss(emb, quads, cfg);
    case LossKind::TriHard: return trihard_loss(emb, cfg);
    case LossKind::Msml: return msml_loss(emb, cfg);
    case LossKind::Cls: break;
  }
  throw Error("eval_loss: unsupported kind");
}

// --- flat views over model parameters ---

std::vector<double> flatten(const MlpModel& m) {
  std::vector<double> out;
  for (const Layer& l : m.layers) {
    out.insert(out.end(), l.w.data.begin(), l.w.data.end());
    out.insert(out.end(), l.b.begin(), l.b.end());
  }
  out.insert(out.end(), m.head.w.data.begin(), m.head.w.data.end());
  out.insert(out.end(), m.head.b.begin(), m.head.b.end());
  return out;
}

std::vector<double> flatten(const ModelGrads& g) {
  std::vector<double> out;
  for (const Layer& l : g.layers) {
    out.insert(out.end(), l.w.data.begin(), l.w.data.end());
    out.insert(out.end(), l.b.begin(), l.b.end());
  }
  out.insert(out.end(), g.head.w.data.begin(), g.head.w.data.end());
  out.insert(out.end(), g.head.b.begin(), g.head.b.end());
  return out;
}

void unflatten(const std::vector<double>& flat, MlpModel& m) {
  std::size_t pos = 0;
  for (Layer& l : m.layers) {
    std::copy(flat.begin() + pos, flat.begin() + pos + l.w.data.size(),
              l.w.data.begin());
    pos += l.w.data.size();
    std::copy(flat.begin() + pos, flat.begin() + pos + l.b.size(), l.b.begin());
    pos += l.b.size();
  }
  std::copy(flat.begin() + pos, flat.begin() + pos + m.head.w.data.size(),
            m.head.w.data.begin());
  pos += m.head.w.data.size();
  std::copy(flat.begin() + pos, flat.begin() + pos + m.head.b.size(),
            m.head.b.begin());
}

Matrix as_row(const std::vector<double>& v) {
  Matrix m(1, v.size());
  m.data = v;
  return m;
}

// Hidden pre-activations and embedding row norms must sit away from their
// own kinks for central differences to be trustworthy.
bool well_conditioned_model(const MlpModel& model, const Matrix& x,
                            double margin = 1e-3) {
  Matrix a = x;
  for (std::size_t li = 0; li + 1 < model.layers.size(); ++li) {
    Matrix z = gemm(a, model.layers[li].w);
    for (std::size_t i = 0; i < z.rows; ++i)
      for (std::size_t j = 0; j < z.cols; ++j) {
        z.at(i, j) += model.layers[li].b[j];
        if (std::fabs(z.at(i, j)) < margin) return false;
      }
    for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    a = z;
  }
  Matrix pre = gemm(a, model.layers.back().w);
  for (std::size_t i = 0; i < pre.rows; ++i) {
    for (std::size_t j = 0; j < pre.cols; ++j)
      pre.at(i, j) += model.layers.back().b[j];
    if (l2_norm(pre.row(i), pre.cols) < margin) return false;
  }
  return true;
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed, double tolerance,
                              bool corrupt) {
  GradCheckReport report;
  const LossKind kinds[] = {LossKind::Tri, LossKind::Quad, LossKind::QuadPrime,
                            LossKind::TriHard, LossKind::Msml};

  auto push = [&](const std::string& name, const Matrix& analytic_in,
                  const Matrix& fd) {
    Matrix analytic = analytic_in;
    if (corrupt && !analytic.data.empty()) analytic.data[0] += 0.1;
    GradCheckEntry e;
    e.name = name;
    e.rel_err = grad_rel_err(analytic, fd);
    e.pass = e.rel_err < tolerance;
    report.entries.push_back(e);
  };

  // Standalone: gradient w.r.t. the raw embedding batch, chained through the
  // input normalization.
  std::uint64_t sub = seed;
  for (LossKind kind : kinds) {
    const std::size_t n_ids = 3, k = 3, dim = 6;
    EmbeddingBatch emb;
    DistanceMatrix d;
    for (;;) {
      Rng rng(++sub);
      emb = random_batch(rng, n_ids, k, dim);
      d = pairwise_distances(normalized_rows(emb.features));
      if (min_offdiag(d) > 1e-3) break;
    }
    Rng trng(seed + 1000);
    const PkBatch pk = identity_pk(n_ids, k);
    const auto tris = sample_triplets(pk, emb.ids, trng);
    const auto quads = sample_quadruplets(pk, emb.ids, trng);

    MarginConfig cfg;
    cfg.normalize_inputs = true;
    condition_margins(kind, d, emb.ids, tris, quads, cfg);

    const LossOutput out = eval_loss(kind, emb, tris, quads, cfg);
    const Matrix fd = finite_difference(
        [&](const Matrix& x) {
          EmbeddingBatch probe = emb;
          probe.features = x;
          return eval_loss(kind, probe, tris, quads, cfg).value;
        },
        emb.features);
    push(loss_kind_name(kind), out.grad, fd);
  }

  // Classification head, gradient w.r.t. logits.
  {
    Rng rng(seed + 2000);
    Matrix logits(6, 3);
    for (double& x : logits.data) x = rng.normal();
    std::vector<int> ids = {0, 1, 2, 0, 1, 2};
    const ClassificationOutput out = classification_loss(logits, ids);
    const Matrix fd = finite_difference(
        [&](const Matrix& x) { return classification_loss(x, ids).value; },
        logits);
    push("cls", out.grad, fd);
  }

  // End to end: loss composed with forward, differenced over the parameters.
  sub = seed + 3000;
  for (LossKind kind : kinds) {
    const std::size_t n_ids = 3, k = 3, input_dim = 4;
    MlpModel model;
    Matrix x;
    EmbeddingBatch data;
    DistanceMatrix d;
    MarginConfig cfg;
    cfg.normalize_inputs = false;  // the model normalizes
    for (;;) {
      Rng rng(++sub);
      model = init_model(input_dim, {5}, 3, n_ids, true, rng);
      data = random_batch(rng, n_ids, k, input_dim);
      x = data.features;
      if (!well_conditioned_model(model, x)) continue;
      ForwardResult fwd = forward(model, x);
      d = pairwise_distances(fwd.embeddings);
      if (min_offdiag(d) > 1e-3) break;
    }
    Rng trng(seed + 4000);
    const PkBatch pk = identity_pk(n_ids, k);
    const auto tris = sample_triplets(pk, data.ids, trng);
    const auto quads = sample_quadruplets(pk, data.ids, trng);
    condition_margins(kind, d, data.ids, tris, quads, cfg);

    ForwardResult fwd = forward(model, x);
    EmbeddingBatch emb_out{fwd.embeddings, data.ids, {}};
    const LossOutput out = eval_loss(kind, emb_out, tris, quads, cfg);
    const Matrix zero_logits(x.rows, model.num_classes());
    const ModelGrads grads = backward(model, fwd.cache, out.grad, zero_logits);

    const std::vector<double> base = flatten(model);
    MlpModel probe_model = model;
    const Matrix fd = finite_difference(
        [&](const Matrix& flat) {
          unflatten(flat.data, probe_model);
          ForwardResult pf = forward(probe_model, x);
          EmbeddingBatch pe{pf.embeddings, data.ids, {}};
          return eval_loss(kind, pe, tris, quads, cfg).value;
        },
        as_row(base));
    push("forward+" + loss_kind_name(kind), as_row(flatten(grads)), fd);
  }

  // End to end through the classifier branch.
  {
    Rng rng(seed + 5000);
    MlpModel model = init_model(4, {5}, 3, 3, true, rng);
    EmbeddingBatch data = random_batch(rng, 3, 3, 4);
    ForwardResult fwd = forward(model, data.features);
    const ClassificationOutput cls = classification_loss(fwd.logits, data.ids);
    const Matrix zero_emb(data.size(), model.embedding_dim());
    const ModelGrads grads = backward(model, fwd.cache, zero_emb, cls.grad);

    MlpModel probe_model = model;
    const Matrix fd = finite_difference(
        [&](const Matrix& flat) {
          unflatten(flat.data, probe_model);
          ForwardResult pf = forward(probe_model, data.features);
          return classification_loss(pf.logits, data.ids).value;
        },
        as_row(flatten(model)));
    push("forward+cls", as_row(flatten(grads)), fd);
  }

  return report;
}

}  // namespace reid
