#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hqmq/codec.hpp"

namespace hqmq {

/// Q is (B, H_q, T_q, d_h); K and V are (B, H_kv, T_kv, d_h); the output has
/// Q's shape. Query head h reads KV head h / (H_q / H_kv).
///
/// With `causal`, query i sees keys j <= i + (T_kv - T_q). A query row with
/// no visible key produces a zero output row.
struct AttentionConfig {
    std::uint32_t batch = 1;
    std::uint32_t q_heads = 1;
    std::uint32_t kv_heads = 1;
    std::uint32_t q_tokens = 1;
    std::uint32_t kv_tokens = 1;
    std::uint32_t head_dim = 4;
    bool causal = false;

    double scale() const;
    std::uint32_t group_size() const { return q_heads / kv_heads; }
    std::size_t q_elements() const { return std::size_t{batch} * q_heads * q_tokens * head_dim; }
    std::size_t kv_elements() const { return std::size_t{batch} * kv_heads * kv_tokens * head_dim; }
    /// Number of keys visible to query i.
    std::size_t visible_keys(std::size_t i) const;
};

/// Throws InvalidArgument unless heads divide evenly and dimensions are positive.
void check_attention_config(const AttentionConfig& cfg);

/// Default number of KV rows decoded per tile in fused_attend.
inline constexpr std::size_t kDefaultKvTile = 32;

/// Dense two-pass softmax attention (row max subtracted before exp).
template <typename Real>
std::vector<Real> reference_attend(std::span<const Real> q, std::span<const Real> k,
                                   std::span<const Real> v, const AttentionConfig& cfg);

/// Softmax probability rows of reference_attend, shape (B, H_q, T_q, T_kv).
template <typename Real>
std::vector<Real> attention_probabilities(std::span<const Real> q, std::span<const Real> k,
                                          const AttentionConfig& cfg);

/// Attention over packed K/V with an online-softmax recurrence. K and V are
/// decoded tile by tile (kv_tile rows at a time, per KV head) inside the
/// loop; the dense cache is never built.
///
/// Throws ConfigMismatch if a codebook set does not match its tensor's
/// configuration or the roles are not K and V, InvalidArgument on shape
/// mismatch or head_dim % 4 != 0.
template <typename Real>
std::vector<Real> fused_attend(std::span<const Real> q, const QuantizedTensor& packed_k,
                               const QuantizedTensor& packed_v, const CodebookSet& books_k,
                               const CodebookSet& books_v, const AttentionConfig& cfg,
                               std::size_t kv_tile = kDefaultKvTile);

extern template std::vector<double> reference_attend<double>(std::span<const double>,
                                                             std::span<const double>,
                                                             std::span<const double>,
                                                             const AttentionConfig&);
extern template std::vector<float> reference_attend<float>(std::span<const float>,
                                                           std::span<const float>,
                                                           std::span<const float>,
                                                           const AttentionConfig&);
extern template std::vector<double> attention_probabilities<double>(std::span<const double>,
                                                                    std::span<const double>,
                                                                    const AttentionConfig&);
extern template std::vector<float> attention_probabilities<float>(std::span<const float>,
                                                                  std::span<const float>,
                                                                  const AttentionConfig&);
extern template std::vector<double> fused_attend<double>(std::span<const double>,
                                                         const QuantizedTensor&,
                                                         const QuantizedTensor&,
                                                         const CodebookSet&, const CodebookSet&,
                                                         const AttentionConfig&, std::size_t);
extern template std::vector<float> fused_attend<float>(std::span<const float>,
                                                       const QuantizedTensor&,
                                                       const QuantizedTensor&, const CodebookSet&,
                                                       const CodebookSet&, const AttentionConfig&,
                                                       std::size_t);

} // namespace hqmq
