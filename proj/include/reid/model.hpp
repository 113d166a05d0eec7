#pragma once

#include <string>
#include <vector>

#include "reid/linalg.hpp"
#include "reid/losses.hpp"
#include "reid/sampling.hpp"

namespace reid {

struct Layer {
  Matrix w;   // in x out
  Vector b;   // out
};

// Small fully-connected embedding network with a classifier head branching
// from the pre-normalization embedding.
struct MlpModel {
  std::vector<Layer> layers;  // hidden layers (relu) then linear embedding layer
  Layer head;                 // emb_dim x num_classes
  bool normalize_embeddings = true;

  std::size_t input_dim() const { return layers.front().w.rows; }
  std::size_t embedding_dim() const { return layers.back().w.cols; }
  std::size_t num_classes() const { return head.w.cols; }
};

MlpModel init_model(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                    std::size_t emb_dim, std::size_t num_classes, bool normalize,
                    Rng& rng);

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> activations;  // post-relu output of each hidden layer
  Matrix embedding_pre;             // before normalization
};

struct ForwardResult {
  Matrix embeddings;  // normalized when configured
  Matrix logits;
  ForwardCache cache;
};

ForwardResult forward(const MlpModel& model, const Matrix& x);

// Parameter gradients, shaped exactly like the model.
struct ModelGrads {
  std::vector<Layer> layers;
  Layer head;
};

ModelGrads backward(const MlpModel& model, const ForwardCache& cache,
                    const Matrix& grad_embeddings, const Matrix& grad_logits);

struct AdamState {
  std::vector<Layer> m, v;  // first/second moments, model-shaped
  Layer head_m, head_v;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState init_adam(const MlpModel& model);

void adam_step(AdamState& state, MlpModel& model, const ModelGrads& grads,
               double lr);

struct LrSchedule {
  double base_lr = 1e-3;
  // (epoch boundary, lr from that epoch on); boundaries strictly increasing.
  std::vector<std::pair<std::size_t, double>> boundaries = {{50, 1e-4},
                                                            {200, 1e-5}};
};

double lr_at(const LrSchedule& schedule, std::size_t epoch);

enum class LossKind { Cls, Tri, Quad, QuadPrime, TriHard, Msml };

std::string loss_kind_name(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

struct TrainConfig {
  LossKind loss = LossKind::Msml;
  MarginConfig margins;
  double w_cls = 0.0;
  std::size_t p = 8;
  std::size_t k = 4;
  std::size_t epochs = 200;
  LrSchedule schedule;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t emb_dim = 32;
};

struct BatchRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double demarcation = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_demarcation = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<BatchRecord> batches;
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  MlpModel model;
  TrainHistory history;
  std::vector<int> class_of_id;  // identity label -> classifier column
};

TrainResult train(const LabeledDataset& ds, const TrainConfig& cfg, Rng& rng);

// Apply the model to every row of a dataset.
EmbeddingBatch embed(const MlpModel& model, const LabeledDataset& ds);

// Versioned text checkpoint; values are written with round-trip precision.
void save_checkpoint(const MlpModel& model, const std::string& path,
                     std::uint64_t seed);
MlpModel load_checkpoint(const std::string& path);

}  // namespace reid
