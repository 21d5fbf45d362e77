#include "hqmq/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hqmq/errors.hpp"

namespace hqmq {

double AttentionConfig::scale() const {
    return 1.0 / std::sqrt(static_cast<double>(head_dim));
}

std::size_t AttentionConfig::visible_keys(std::size_t i) const {
    if (!causal) {
        return kv_tokens;
    }
    // i + (T_kv - T_q) + 1, clamped to [0, T_kv].
    const auto limit = static_cast<std::int64_t>(i) + kv_tokens - q_tokens + 1;
    return static_cast<std::size_t>(std::clamp<std::int64_t>(limit, 0, kv_tokens));
}

void check_attention_config(const AttentionConfig& cfg) {
    HQMQ_THROW_IF_NOT(cfg.batch >= 1 && cfg.q_heads >= 1 && cfg.kv_heads >= 1 &&
                          cfg.head_dim >= 1,
                      InvalidArgument, "attention dimensions must be positive");
    HQMQ_THROW_IF_NOT(cfg.q_heads % cfg.kv_heads == 0, InvalidArgument,
                      "query heads must be a multiple of KV heads");
}

namespace {

template <typename Real>
Real dot_row(const Real* a, const Real* b, std::size_t d) {
    Real s = 0;
    for (std::size_t x = 0; x < d; ++x) {
        s += a[x] * b[x];
    }
    return s;
}

template <typename Real>
void check_dense(std::span<const Real> q, std::span<const Real> k, const AttentionConfig& cfg) {
    check_attention_config(cfg);
    HQMQ_THROW_IF_NOT(q.size() == cfg.q_elements(), InvalidArgument, "Q has the wrong size");
    HQMQ_THROW_IF_NOT(k.size() == cfg.kv_elements(), InvalidArgument, "K/V have the wrong size");
}

} // namespace

template <typename Real>
std::vector<Real> attention_probabilities(std::span<const Real> q, std::span<const Real> k,
                                          const AttentionConfig& cfg) {
    check_dense(q, k, cfg);
    const std::size_t d = cfg.head_dim;
    const Real scale = static_cast<Real>(cfg.scale());
    std::vector<Real> probs(std::size_t{cfg.batch} * cfg.q_heads * cfg.q_tokens * cfg.kv_tokens,
                            Real{0});
    for (std::size_t b = 0; b < cfg.batch; ++b) {
        for (std::size_t h = 0; h < cfg.q_heads; ++h) {
            const std::size_t hk = h / cfg.group_size();
            const Real* kbase = k.data() + (b * cfg.kv_heads + hk) * cfg.kv_tokens * d;
            for (std::size_t i = 0; i < cfg.q_tokens; ++i) {
                const Real* qi = q.data() + ((b * cfg.q_heads + h) * cfg.q_tokens + i) * d;
                Real* p = probs.data() + ((b * cfg.q_heads + h) * cfg.q_tokens + i) * cfg.kv_tokens;
                const std::size_t visible = cfg.visible_keys(i);
                if (visible == 0) {
                    continue;
                }
                Real m = -std::numeric_limits<Real>::infinity();
                for (std::size_t j = 0; j < visible; ++j) {
                    p[j] = dot_row(qi, kbase + j * d, d) * scale;
                    m = std::max(m, p[j]);
                }
                Real l = 0;
                for (std::size_t j = 0; j < visible; ++j) {
                    p[j] = std::exp(p[j] - m);
                    l += p[j];
                }
                for (std::size_t j = 0; j < visible; ++j) {
                    p[j] /= l;
                }
            }
        }
    }
    return probs;
}

template <typename Real>
std::vector<Real> reference_attend(std::span<const Real> q, std::span<const Real> k,
                                   std::span<const Real> v, const AttentionConfig& cfg) {
    check_dense(q, k, cfg);
    HQMQ_THROW_IF_NOT(v.size() == k.size(), InvalidArgument, "V has the wrong size");
    const std::vector<Real> probs = attention_probabilities(q, k, cfg);
    const std::size_t d = cfg.head_dim;
    std::vector<Real> out(q.size(), Real{0});
    for (std::size_t b = 0; b < cfg.batch; ++b) {
        for (std::size_t h = 0; h < cfg.q_heads; ++h) {
            const std::size_t hk = h / cfg.group_size();
            const Real* vbase = v.data() + (b * cfg.kv_heads + hk) * cfg.kv_tokens * d;
            for (std::size_t i = 0; i < cfg.q_tokens; ++i) {
                const std::size_t row = (b * cfg.q_heads + h) * cfg.q_tokens + i;
                const Real* p = probs.data() + row * cfg.kv_tokens;
                Real* o = out.data() + row * d;
                for (std::size_t j = 0; j < cfg.visible_keys(i); ++j) {
                    for (std::size_t x = 0; x < d; ++x) {
                        o[x] += p[j] * vbase[j * d + x];
                    }
                }
            }
        }
    }
    return out;
}

template <typename Real>
std::vector<Real> fused_attend(std::span<const Real> q, const QuantizedTensor& packed_k,
                               const QuantizedTensor& packed_v, const CodebookSet& books_k,
                               const CodebookSet& books_v, const AttentionConfig& cfg,
                               std::size_t kv_tile) {
    check_attention_config(cfg);
    HQMQ_THROW_IF_NOT(cfg.head_dim % 4 == 0, InvalidArgument, "fused attention needs head_dim % 4 == 0");
    HQMQ_THROW_IF_NOT(kv_tile >= 1, InvalidArgument, "KV tile must be >= 1");
    HQMQ_THROW_IF_NOT(q.size() == cfg.q_elements(), InvalidArgument, "Q has the wrong size");
    const TensorShape kv_shape{cfg.batch, cfg.kv_heads, cfg.kv_tokens, cfg.head_dim};
    HQMQ_THROW_IF_NOT(packed_k.shape == kv_shape && packed_v.shape == kv_shape, InvalidArgument,
                      "packed K/V shape does not match the attention config");
    if (packed_k.config.role != Role::K || packed_v.config.role != Role::V) {
        throw ConfigMismatch("packed K/V tensors carry the wrong roles");
    }
    if (!books_k.matches(packed_k.config, cfg.kv_heads) ||
        !books_v.matches(packed_v.config, cfg.kv_heads)) {
        throw ConfigMismatch("codebooks do not match the packed tensors' seed/S/layer/role");
    }
    validate(packed_k);
    validate(packed_v);

    const RowLocator loc_k(packed_k);
    const RowLocator loc_v(packed_v);
    const std::size_t d = cfg.head_dim;
    const Real scale = static_cast<Real>(cfg.scale());
    const Real neg_inf = -std::numeric_limits<Real>::infinity();

    std::vector<Real> out(q.size(), Real{0});
    std::vector<double> row_buf(d);
    std::vector<Real> k_tile(kv_tile * d);
    std::vector<Real> v_tile(kv_tile * d);
    std::vector<Real> m_i(cfg.q_tokens);
    std::vector<Real> l_i(cfg.q_tokens);
    std::vector<Real> acc(std::size_t{cfg.q_tokens} * d);
    std::vector<Real> s(kv_tile);

    for (std::size_t b = 0; b < cfg.batch; ++b) {
        for (std::size_t h = 0; h < cfg.q_heads; ++h) {
            const std::size_t hk = h / cfg.group_size();
            std::fill(m_i.begin(), m_i.end(), neg_inf);
            std::fill(l_i.begin(), l_i.end(), Real{0});
            std::fill(acc.begin(), acc.end(), Real{0});

            for (std::size_t j0 = 0; j0 < cfg.kv_tokens; j0 += kv_tile) {
                const std::size_t j1 = std::min<std::size_t>(j0 + kv_tile, cfg.kv_tokens);
                for (std::size_t j = j0; j < j1; ++j) {
                    const std::size_t row = kv_shape.row_index(b, hk, j);
                    decode_row(packed_k, loc_k, books_k[hk], row, row_buf);
                    std::transform(row_buf.begin(), row_buf.end(), k_tile.begin() + (j - j0) * d,
                                   [](double x) { return static_cast<Real>(x); });
                    decode_row(packed_v, loc_v, books_v[hk], row, row_buf);
                    std::transform(row_buf.begin(), row_buf.end(), v_tile.begin() + (j - j0) * d,
                                   [](double x) { return static_cast<Real>(x); });
                }

                for (std::size_t i = 0; i < cfg.q_tokens; ++i) {
                    const std::size_t jend = std::min(j1, cfg.visible_keys(i));
                    if (jend <= j0) {
                        continue;
                    }
                    const Real* qi = q.data() + ((b * cfg.q_heads + h) * cfg.q_tokens + i) * d;
                    Real m_tile = neg_inf;
                    for (std::size_t j = j0; j < jend; ++j) {
                        s[j - j0] = dot_row(qi, k_tile.data() + (j - j0) * d, d) * scale;
                        m_tile = std::max(m_tile, s[j - j0]);
                    }
                    const Real m_new = std::max(m_i[i], m_tile);
                    const Real alpha = std::exp(m_i[i] - m_new);
                    Real* o = acc.data() + i * d;
                    for (std::size_t x = 0; x < d; ++x) {
                        o[x] *= alpha;
                    }
                    Real l_tile = 0;
                    for (std::size_t j = j0; j < jend; ++j) {
                        const Real p = std::exp(s[j - j0] - m_new);
                        l_tile += p;
                        const Real* vj = v_tile.data() + (j - j0) * d;
                        for (std::size_t x = 0; x < d; ++x) {
                            o[x] += p * vj[x];
                        }
                    }
                    l_i[i] = alpha * l_i[i] + l_tile;
                    m_i[i] = m_new;
                }
            }

            for (std::size_t i = 0; i < cfg.q_tokens; ++i) {
                if (l_i[i] == Real{0}) {
                    continue;
                }
                Real* dst = out.data() + ((b * cfg.q_heads + h) * cfg.q_tokens + i) * d;
                for (std::size_t x = 0; x < d; ++x) {
                    dst[x] = acc[i * d + x] / l_i[i];
                }
            }
        }
    }
    return out;
}

template std::vector<double> reference_attend<double>(std::span<const double>,
                                                      std::span<const double>,
                                                      std::span<const double>,
                                                      const AttentionConfig&);
template std::vector<float> reference_attend<float>(std::span<const float>,
                                                    std::span<const float>,
                                                    std::span<const float>,
                                                    const AttentionConfig&);
template std::vector<double> attention_probabilities<double>(std::span<const double>,
                                                             std::span<const double>,
                                                             const AttentionConfig&);
template std::vector<float> attention_probabilities<float>(std::span<const float>,
                                                           std::span<const float>,
                                                           const AttentionConfig&);
template std::vector<double> fused_attend<double>(std::span<const double>, const QuantizedTensor&,
                                                  const QuantizedTensor&, const CodebookSet&,
                                                  const CodebookSet&, const AttentionConfig&,
                                                  std::size_t);
template std::vector<float> fused_attend<float>(std::span<const float>, const QuantizedTensor&,
                                                const QuantizedTensor&, const CodebookSet&,
                                                const CodebookSet&, const AttentionConfig&,
                                                std::size_t);

} // namespace hqmq
