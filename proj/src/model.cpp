#include "reid/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "reid/distance.hpp"
#include "reid/errors.hpp"

namespace reid {

static Layer init_layer(std::size_t in, std::size_t out, Rng& rng) {
  Layer l;
  l.w = Matrix(in, out);
  l.b = Vector(out, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& x : l.w.data) x = (2.0 * rng.uniform() - 1.0) * bound;
  return l;
}

MlpModel init_model(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                    std::size_t emb_dim, std::size_t num_classes, bool normalize,
                    Rng& rng) {
  MlpModel m;
  m.normalize_embeddings = normalize;
  std::size_t in = input_dim;
  for (std::size_t h : hidden) {
    m.layers.push_back(init_layer(in, h, rng));
    in = h;
  }
  m.layers.push_back(init_layer(in, emb_dim, rng));
  m.head = init_layer(emb_dim, num_classes, rng);
  return m;
}

static Matrix affine(const Matrix& x, const Layer& l) {
  Matrix z = gemm(x, l.w);
  for (std::size_t i = 0; i < z.rows; ++i)
    for (std::size_t j = 0; j < z.cols; ++j) z.at(i, j) += l.b[j];
  return z;
}

ForwardResult forward(const MlpModel& model, const Matrix& x) {
  if (x.cols != model.input_dim())
    throw ShapeMismatch("forward: input dim does not match model");
  ForwardResult r;
  r.cache.input = x;
  Matrix a = x;
  for (std::size_t li = 0; li + 1 < model.layers.size(); ++li) {
    a = affine(a, model.layers[li]);
    for (double& v : a.data) v = v > 0.0 ? v : 0.0;
    r.cache.activations.push_back(a);
  }
  r.cache.embedding_pre = affine(a, model.layers.back());
  r.logits = affine(r.cache.embedding_pre, model.head);
  r.embeddings = r.cache.embedding_pre;
  if (model.normalize_embeddings) {
    for (std::size_t i = 0; i < r.embeddings.rows; ++i) {
      const double n = l2_norm(r.embeddings.row(i), r.embeddings.cols);
      if (n <= kNormEps)
        throw ZeroNormError("forward: zero embedding row cannot be normalized");
      for (std::size_t j = 0; j < r.embeddings.cols; ++j)
        r.embeddings.at(i, j) /= n;
    }
  }
  return r;
}

static void colsum_into(const Matrix& g, Vector& out) {
  for (std::size_t i = 0; i < g.rows; ++i)
    for (std::size_t j = 0; j < g.cols; ++j) out[j] += g.at(i, j);
}

ModelGrads backward(const MlpModel& model, const ForwardCache& cache,
                    const Matrix& grad_embeddings, const Matrix& grad_logits) {
  if (cache.input.cols != model.input_dim() ||
      cache.activations.size() + 1 != model.layers.size() ||
      cache.embedding_pre.cols != model.embedding_dim())
    throw CacheMismatch("backward: cache does not match model");
  const std::size_t n = cache.input.rows;
  if (grad_embeddings.rows != n || grad_logits.rows != n)
    throw CacheMismatch("backward: upstream gradient batch size mismatch");

  ModelGrads g;
  g.head.w = Matrix(model.head.w.rows, model.head.w.cols);
  g.head.b = Vector(model.head.b.size(), 0.0);
  for (const Layer& l : model.layers)
    g.layers.push_back({Matrix(l.w.rows, l.w.cols), Vector(l.b.size(), 0.0)});

  // Route the embedding gradient back through the normalization.
  Matrix g_pre(n, model.embedding_dim());
  if (model.normalize_embeddings) {
    for (std::size_t i = 0; i < n; ++i)
      l2_normalize_backward(cache.embedding_pre.row(i), grad_embeddings.row(i),
                            g_pre.cols, g_pre.row(i));
  } else {
    g_pre = grad_embeddings;
  }

  // Classifier head branches from the pre-normalization embedding.
  g.head.w = gemm(transpose(cache.embedding_pre), grad_logits);
  colsum_into(grad_logits, g.head.b);
  g_pre = add(g_pre, gemm(grad_logits, transpose(model.head.w)));

  Matrix upstream = g_pre;
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const Matrix& input =
        li == 0 ? cache.input : cache.activations[li - 1];
    g.layers[li].w = gemm(transpose(input), upstream);
    colsum_into(upstream, g.layers[li].b);
    if (li == 0) break;
    upstream = gemm(upstream, transpose(model.layers[li].w));
    const Matrix& act = cache.activations[li - 1];
    for (std::size_t idx = 0; idx < upstream.data.size(); ++idx)
      if (act.data[idx] <= 0.0) upstream.data[idx] = 0.0;
  }
  return g;
}

AdamState init_adam(const MlpModel& model) {
  AdamState s;
  auto zero_like = [](const Layer& l) {
    return Layer{Matrix(l.w.rows, l.w.cols), Vector(l.b.size(), 0.0)};
  };
  for (const Layer& l : model.layers) {
    s.m.push_back(zero_like(l));
    s.v.push_back(zero_like(l));
  }
  s.head_m = zero_like(model.head);
  s.head_v = zero_like(model.head);
  return s;
}

static void adam_update(std::vector<double>& p, std::vector<double>& m,
                        std::vector<double>& v, const std::vector<double>& g,
                        const AdamState& s, double lr) {
  if (p.size() != g.size()) throw ShapeMismatch("adam_step: shape mismatch");
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + s.eps);
  }
}

void adam_step(AdamState& state, MlpModel& model, const ModelGrads& grads,
               double lr) {
  if (grads.layers.size() != model.layers.size())
    throw ShapeMismatch("adam_step: layer count mismatch");
  ++state.step;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    adam_update(model.layers[i].w.data, state.m[i].w.data, state.v[i].w.data,
                grads.layers[i].w.data, state, lr);
    adam_update(model.layers[i].b, state.m[i].b, state.v[i].b,
                grads.layers[i].b, state, lr);
  }
  adam_update(model.head.w.data, state.head_m.w.data, state.head_v.w.data,
              grads.head.w.data, state, lr);
  adam_update(model.head.b, state.head_m.b, state.head_v.b, grads.head.b,
              state, lr);
}

double lr_at(const LrSchedule& schedule, std::size_t epoch) {
  double lr = schedule.base_lr;
  for (const auto& [boundary, value] : schedule.boundaries) {
    if (epoch >= boundary) lr = value;
  }
  return lr;
}

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Cls: return "cls";
    case LossKind::Tri: return "tri";
    case LossKind::Quad: return "quad";
    case LossKind::QuadPrime: return "quad_prime";
    case LossKind::TriHard: return "trihard";
    case LossKind::Msml: return "msml";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "cls") return LossKind::Cls;
  if (name == "tri") return LossKind::Tri;
  if (name == "quad") return LossKind::Quad;
  if (name == "quad_prime") return LossKind::QuadPrime;
  if (name == "trihard") return LossKind::TriHard;
  if (name == "msml") return LossKind::Msml;
  throw Error("unknown loss kind: " + name);
}

TrainResult train(const LabeledDataset& ds, const TrainConfig& cfg, Rng& rng) {
  std::set<int> distinct(ds.ids.begin(), ds.ids.end());
  std::map<int, int> class_of;
  int next = 0;
  for (int id : distinct) class_of[id] = next++;

  TrainResult result;
  result.model = init_model(ds.dim(), cfg.hidden, cfg.emb_dim, distinct.size(),
                            cfg.margins.normalize_inputs, rng);
  for (const auto& [id, c] : class_of) {
    if (static_cast<std::size_t>(id) >= result.class_of_id.size())
      result.class_of_id.resize(id + 1, -1);
    result.class_of_id[id] = c;
  }

  AdamState adam = init_adam(result.model);
  const std::size_t batch_size = cfg.p * cfg.k;
  const std::size_t batches_per_epoch =
      (ds.size() + batch_size - 1) / batch_size;

  // The model already normalizes; losses must not re-normalize.
  MarginConfig loss_cfg = cfg.margins;
  loss_cfg.normalize_inputs = false;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(cfg.schedule, epoch);
    double loss_sum = 0.0, dem_sum = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      PkBatch batch = pk_sample(ds, cfg.p, cfg.k, rng);
      EmbeddingBatch emb = gather(ds, batch);
      ForwardResult fwd = forward(result.model, emb.features);

      EmbeddingBatch out_batch;
      out_batch.features = fwd.embeddings;
      out_batch.ids = emb.ids;

      LossOutput metric;
      metric.grad = Matrix(emb.size(), cfg.emb_dim);
      switch (cfg.loss) {
        case LossKind::Cls:
          break;
        case LossKind::Tri:
          metric = triplet_loss(out_batch,
                                sample_triplets(batch, ds.ids, rng), loss_cfg);
          break;
        case LossKind::Quad:
          metric = quadruplet_loss(
              out_batch, sample_quadruplets(batch, ds.ids, rng), loss_cfg);
          break;
        case LossKind::QuadPrime:
          metric = quad_prime_loss(
              out_batch, sample_quadruplets(batch, ds.ids, rng), loss_cfg);
          break;
        case LossKind::TriHard:
          metric = trihard_loss(out_batch, loss_cfg);
          break;
        case LossKind::Msml:
          metric = msml_loss(out_batch, loss_cfg);
          break;
      }

      const double w_cls = cfg.loss == LossKind::Cls ? 1.0 : cfg.w_cls;
      ClassificationOutput cls;
      cls.grad = Matrix(emb.size(), result.model.num_classes());
      if (w_cls != 0.0) {
        std::vector<int> classes(emb.size());
        for (std::size_t i = 0; i < emb.size(); ++i)
          classes[i] = result.class_of_id[emb.ids[i]];
        cls = classification_loss(fwd.logits, classes);
      }
      CombinedOutput combined = combined_loss(metric, cls, w_cls);

      if (!std::isfinite(combined.value))
        throw NonFiniteLoss("train: non-finite loss at epoch " +
                            std::to_string(epoch) + " batch " +
                            std::to_string(b));

      ModelGrads grads = backward(result.model, fwd.cache,
                                  combined.grad_embeddings, combined.grad_logits);
      adam_step(adam, result.model, grads, lr);

      const double dem =
          demarcation(pairwise_distances(fwd.embeddings), emb.ids);
      result.history.batches.push_back({epoch, combined.value, dem});
      loss_sum += combined.value;
      dem_sum += dem;
    }
    result.history.epochs.push_back(
        {epoch, loss_sum / batches_per_epoch, dem_sum / batches_per_epoch, lr});
  }
  return result;
}

EmbeddingBatch embed(const MlpModel& model, const LabeledDataset& ds) {
  ForwardResult fwd = forward(model, ds.features);
  EmbeddingBatch out;
  out.features = fwd.embeddings;
  out.ids = ds.ids;
  out.cameras = ds.cameras;
  return out;
}

// --- checkpoint io ---

static void write_values(std::ostream& os, const std::vector<double>& v) {
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    os << (i ? " " : "") << buf;
  }
  os << "\n";
}

static void write_layer(std::ostream& os, const Layer& l) {
  os << l.w.rows << " " << l.w.cols << "\n";
  write_values(os, l.w.data);
  write_values(os, l.b);
}

void save_checkpoint(const MlpModel& model, const std::string& path,
                     std::uint64_t seed) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open checkpoint for writing: " + path);
  os << "reid-checkpoint 1\n";
  os << "seed " << seed << "\n";
  os << "normalize " << (model.normalize_embeddings ? 1 : 0) << "\n";
  os << "layers " << model.layers.size() << "\n";
  for (const Layer& l : model.layers) write_layer(os, l);
  os << "head\n";
  write_layer(os, model.head);
}

static Layer read_layer(std::istream& is, const std::string& path) {
  Layer l;
  std::size_t r, c;
  if (!(is >> r >> c)) throw ParseError("checkpoint truncated: " + path);
  l.w = Matrix(r, c);
  for (double& x : l.w.data)
    if (!(is >> x)) throw ParseError("checkpoint truncated: " + path);
  l.b = Vector(c);
  for (double& x : l.b)
    if (!(is >> x)) throw ParseError("checkpoint truncated: " + path);
  return l;
}

MlpModel load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != "reid-checkpoint" || version != 1)
    throw ParseError("not a recognized checkpoint file: " + path);
  std::string key;
  std::uint64_t seed;
  int normalize, nlayers;
  is >> key >> seed;
  is >> key >> normalize;
  is >> key >> nlayers;
  if (!is || nlayers < 1) throw ParseError("malformed checkpoint: " + path);
  MlpModel m;
  m.normalize_embeddings = normalize != 0;
  for (int i = 0; i < nlayers; ++i) m.layers.push_back(read_layer(is, path));
  is >> key;
  if (key != "head") throw ParseError("malformed checkpoint: " + path);
  m.head = read_layer(is, path);
  return m;
}

}  // namespace reid
