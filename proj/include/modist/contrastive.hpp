#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "modist/encoders.hpp"

namespace modist {

struct ContrastiveConfig {
  double tau = 0.1;
  int bank_capacity = 512;
  double w_v = 1.0;
  double w_m = 1.0;
  double w_mv = 1.0;

  // Only the visual objective is active (the RGB-only baseline).
  bool visual_only() const { return w_m == 0.0 && w_mv == 0.0; }
};

void validate(const ContrastiveConfig& cfg);

struct LossBreakdown {
  double l_v = 0.0;
  double l_m = 0.0;
  double l_mv = 0.0;
  double total = 0.0;
};

// -log softmax of the positive logit among [q.k, q.n_1, ...] / tau.
double info_nce(const Embedding& q, const Embedding& k, std::span<const Embedding> negatives, double tau);

// IN(v_q, m_k, v_negs) + IN(m_q, v_k, m_negs).
double cross_modal_loss(const Embedding& v_q, const Embedding& m_k, std::span<const Embedding> v_negs,
                        const Embedding& m_q, const Embedding& v_k, std::span<const Embedding> m_negs, double tau);

// Fixed-capacity FIFO of (embedding, video index) for one modality.
class MemoryBank {
 public:
  MemoryBank() = default;
  MemoryBank(Modality modality, int capacity, int dim);

  Modality modality() const { return modality_; }
  int capacity() const { return capacity_; }
  int dim() const { return dim_; }
  int size() const { return fill_; }
  int cursor() const { return cursor_; }
  bool empty() const { return fill_ == 0; }

  void push(const Embedding& e);
  void push(std::span<const Embedding> batch);

  // Entry i in storage order (not push order).
  std::span<const double> row(int i) const;
  std::int64_t index_at(int i) const { return indices_[i]; }
  // Oldest first.
  std::vector<Embedding> entries() const;
  std::vector<Embedding> negatives(std::int64_t exclude_video_index) const;

  const std::vector<double>& storage() const { return vectors_; }
  const std::vector<std::int64_t>& stored_indices() const { return indices_; }
  // Restores raw state, used by checkpoint loading.
  void restore(std::vector<double> vectors, std::vector<std::int64_t> indices, int cursor, int fill);

 private:
  Modality modality_ = Modality::visual;
  int capacity_ = 0;
  int dim_ = 0;
  int cursor_ = 0;
  int fill_ = 0;
  std::vector<double> vectors_;
  std::vector<std::int64_t> indices_;
};

MemoryBank bank_push(MemoryBank bank, std::span<const Embedding> batch);
std::vector<Embedding> bank_negatives(const MemoryBank& bank, std::int64_t exclude_video_index);

// Embeddings of one training sample. Motion entries may be empty when only
// the visual objective is active.
struct SampleEmbeddings {
  Embedding v_query, v_key, m_query, m_key;
  std::int64_t video_index = 0;
};

// Gradients w.r.t. the normalized query embeddings, one per sample.
struct QueryGradients {
  std::vector<std::vector<double>> v_query;
  std::vector<std::vector<double>> m_query;
};

// Weighted objective averaged over the batch. Negatives for each query come
// from its own modality's bank with same-video entries excluded; an empty
// negative set contributes exactly 0.
LossBreakdown total_loss(std::span<const SampleEmbeddings> batch, const MemoryBank& visual_bank,
                         const MemoryBank& motion_bank, const ContrastiveConfig& cfg, QueryGradients* grads = nullptr);

}  // namespace modist
