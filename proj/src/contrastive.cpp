#include "modist/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

namespace modist {

void validate(const ContrastiveConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw ConfigError("temperature must be > 0");
  if (cfg.bank_capacity < 1) throw ConfigError("bank capacity must be >= 1");
  if (cfg.w_v < 0.0 || cfg.w_m < 0.0 || cfg.w_mv < 0.0) throw ConfigError("loss weights must be >= 0");
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Cross-entropy with the positive at logit 0.
double softmax_xent(double positive, std::span<const double> negatives) {
  double m = positive;
  for (double l : negatives) m = std::max(m, l);
  double sum = std::exp(positive - m);
  for (double l : negatives) sum += std::exp(l - m);
  return (m - positive) + std::log(sum);
}

}  // namespace

double info_nce(const Embedding& q, const Embedding& k, std::span<const Embedding> negatives, double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be > 0");
  const std::size_t d = q.vector.size();
  if (k.vector.size() != d) throw ConfigError("query and key dimensions differ");
  std::vector<double> logits;
  logits.reserve(negatives.size());
  for (const auto& n : negatives) {
    if (n.vector.size() != d) throw ConfigError("negative dimension differs from the query");
    logits.push_back(dot(q.vector, n.vector) / tau);
  }
  return softmax_xent(dot(q.vector, k.vector) / tau, logits);
}

double cross_modal_loss(const Embedding& v_q, const Embedding& m_k, std::span<const Embedding> v_negs,
                        const Embedding& m_q, const Embedding& v_k, std::span<const Embedding> m_negs, double tau) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ContractError(std::string("cross-modal loss: ") + what);
  };
  require(v_q.modality == Modality::visual, "first query must be visual");
  require(m_k.modality == Modality::motion, "first key must be motion");
  require(m_q.modality == Modality::motion, "second query must be motion");
  require(v_k.modality == Modality::visual, "second key must be visual");
  for (const auto& n : v_negs) require(n.modality == Modality::visual, "visual query needs visual negatives");
  for (const auto& n : m_negs) require(n.modality == Modality::motion, "motion query needs motion negatives");
  return info_nce(v_q, m_k, v_negs, tau) + info_nce(m_q, v_k, m_negs, tau);
}

// --- MemoryBank --------------------------------------------------------------

MemoryBank::MemoryBank(Modality modality, int capacity, int dim)
    : modality_(modality),
      capacity_(capacity),
      dim_(dim),
      vectors_(static_cast<std::size_t>(capacity) * dim, 0.0),
      indices_(capacity, -1) {
  if (capacity < 1 || dim < 1) throw ConfigError("bank capacity and dimension must be positive");
}

void MemoryBank::push(const Embedding& e) {
  if (e.modality != modality_) {
    throw ContractError("cannot push a " + to_string(e.modality) + " embedding into the " + to_string(modality_) +
                        " bank");
  }
  if (static_cast<int>(e.vector.size()) != dim_) throw ConfigError("embedding dimension differs from the bank");
  const double norm = std::sqrt(dot(e.vector, e.vector));
  if (std::abs(norm - 1.0) > 1e-5) throw ContractError("bank entries must be unit-norm");
  std::copy(e.vector.begin(), e.vector.end(), vectors_.begin() + static_cast<std::ptrdiff_t>(cursor_) * dim_);
  indices_[cursor_] = e.video_index;
  cursor_ = (cursor_ + 1) % capacity_;
  fill_ = std::min(fill_ + 1, capacity_);
}

void MemoryBank::push(std::span<const Embedding> batch) {
  for (const auto& e : batch) push(e);
}

std::span<const double> MemoryBank::row(int i) const {
  return {vectors_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
}

std::vector<Embedding> MemoryBank::entries() const {
  std::vector<Embedding> out;
  out.reserve(fill_);
  const int oldest = fill_ < capacity_ ? 0 : cursor_;
  for (int k = 0; k < fill_; ++k) {
    const int i = (oldest + k) % capacity_;
    const auto r = row(i);
    out.push_back({{r.begin(), r.end()}, modality_, Role::negative, indices_[i]});
  }
  return out;
}

std::vector<Embedding> MemoryBank::negatives(std::int64_t exclude_video_index) const {
  auto all = entries();
  std::erase_if(all, [&](const Embedding& e) { return e.video_index == exclude_video_index; });
  return all;
}

void MemoryBank::restore(std::vector<double> vectors, std::vector<std::int64_t> indices, int cursor, int fill) {
  if (vectors.size() != vectors_.size() || indices.size() != indices_.size() || cursor < 0 || cursor >= capacity_ ||
      fill < 0 || fill > capacity_) {
    throw FormatError("memory bank state does not match its capacity");
  }
  vectors_ = std::move(vectors);
  indices_ = std::move(indices);
  cursor_ = cursor;
  fill_ = fill;
}

MemoryBank bank_push(MemoryBank bank, std::span<const Embedding> batch) {
  bank.push(batch);
  return bank;
}

std::vector<Embedding> bank_negatives(const MemoryBank& bank, std::int64_t exclude_video_index) {
  return bank.negatives(exclude_video_index);
}

// --- total_loss --------------------------------------------------------------

namespace {

using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Logits of every query against every filled bank row.
MatrixD bank_logits(const std::vector<const Embedding*>& queries, const MemoryBank& bank, double tau) {
  const int B = static_cast<int>(queries.size());
  const int D = bank.dim();
  MatrixD q(B, D);
  for (int b = 0; b < B; ++b) {
    if (static_cast<int>(queries[b]->vector.size()) != D) throw ConfigError("query dimension differs from the bank");
    for (int d = 0; d < D; ++d) q(b, d) = queries[b]->vector[d];
  }
  Eigen::Map<const MatrixD> rows(bank.storage().data(), bank.size(), D);
  return (q * rows.transpose()) / tau;
}

// One InfoNCE term for query row b. `neg_logits` is the row of bank logits;
// entries sharing the query's video are skipped. Adds weight * dL/dq to dq.
double term(const Embedding& q, const Embedding& k, const MatrixD& neg_logits, int b, const MemoryBank& bank,
            std::int64_t video, double tau, double weight, std::vector<double>* dq) {
  const std::size_t D = q.vector.size();
  if (k.vector.size() != D) throw ConfigError("query and key dimensions differ");
  const double pos = dot(q.vector, k.vector) / tau;
  double m = pos;
  const int n = bank.size();
  for (int i = 0; i < n; ++i) {
    if (bank.index_at(i) != video) m = std::max(m, neg_logits(b, i));
  }
  double sum = std::exp(pos - m);
  for (int i = 0; i < n; ++i) {
    if (bank.index_at(i) != video) sum += std::exp(neg_logits(b, i) - m);
  }
  const double loss = (m - pos) + std::log(sum);
  if (dq && weight != 0.0) {
    // dL/dq = (sum_j p_j x_j - k) / tau with x_0 = k
    const double p0 = std::exp(pos - m) / sum;
    for (std::size_t d = 0; d < D; ++d) (*dq)[d] += weight * (p0 - 1.0) * k.vector[d] / tau;
    for (int i = 0; i < n; ++i) {
      if (bank.index_at(i) == video) continue;
      const double p = std::exp(neg_logits(b, i) - m) / sum;
      const auto r = bank.row(i);
      for (std::size_t d = 0; d < D; ++d) (*dq)[d] += weight * p * r[d] / tau;
    }
  }
  return loss;
}

}  // namespace

LossBreakdown total_loss(std::span<const SampleEmbeddings> batch, const MemoryBank& visual_bank,
                         const MemoryBank& motion_bank, const ContrastiveConfig& cfg, QueryGradients* grads) {
  validate(cfg);
  if (batch.empty()) return {};
  const int B = static_cast<int>(batch.size());
  const bool use_motion = !cfg.visual_only();
  if (visual_bank.modality() != Modality::visual || (use_motion && motion_bank.modality() != Modality::motion)) {
    throw ContractError("banks are swapped");
  }
  const bool use_visual_query = cfg.w_v != 0.0 || cfg.w_mv != 0.0;

  std::vector<const Embedding*> vq;
  std::vector<const Embedding*> mq;
  for (const auto& s : batch) {
    vq.push_back(&s.v_query);
    mq.push_back(&s.m_query);
    if (s.v_query.modality != Modality::visual || s.v_key.modality != Modality::visual) {
      throw ContractError("visual slots must hold visual embeddings");
    }
    if (use_motion && (s.m_query.modality != Modality::motion || s.m_key.modality != Modality::motion)) {
      throw ContractError("motion slots must hold motion embeddings");
    }
  }
  const MatrixD vlog = use_visual_query ? bank_logits(vq, visual_bank, cfg.tau) : MatrixD();
  const MatrixD mlog = use_motion ? bank_logits(mq, motion_bank, cfg.tau) : MatrixD();

  if (grads) {
    grads->v_query.assign(B, std::vector<double>(visual_bank.dim(), 0.0));
    grads->m_query.assign(B, use_motion ? std::vector<double>(motion_bank.dim(), 0.0) : std::vector<double>());
  }
  const double inv_b = 1.0 / B;
  LossBreakdown out;
  for (int b = 0; b < B; ++b) {
    const auto& s = batch[b];
    auto* gv = grads ? &grads->v_query[b] : nullptr;
    auto* gm = grads ? &grads->m_query[b] : nullptr;
    if (cfg.w_v != 0.0) {
      out.l_v += term(s.v_query, s.v_key, vlog, b, visual_bank, s.video_index, cfg.tau, cfg.w_v * inv_b, gv);
    }
    if (cfg.w_m != 0.0) {
      out.l_m += term(s.m_query, s.m_key, mlog, b, motion_bank, s.video_index, cfg.tau, cfg.w_m * inv_b, gm);
    }
    if (cfg.w_mv != 0.0) {
      out.l_mv += term(s.v_query, s.m_key, vlog, b, visual_bank, s.video_index, cfg.tau, cfg.w_mv * inv_b, gv);
      out.l_mv += term(s.m_query, s.v_key, mlog, b, motion_bank, s.video_index, cfg.tau, cfg.w_mv * inv_b, gm);
    }
  }
  out.l_v *= inv_b;
  out.l_m *= inv_b;
  out.l_mv *= inv_b;
  out.total = cfg.w_v * out.l_v + cfg.w_m * out.l_m + cfg.w_mv * out.l_mv;
  return out;
}

}  // namespace modist
