#include "analogion/objective.hpp"

#include <algorithm>
#include <cmath>

#include "analogion/errors.hpp"

namespace analogion {

std::string_view to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::simple_classifier: return "simple_classifier";
    case ObjectiveKind::offset_ab: return "offset_ab";
    case ObjectiveKind::offset_ac: return "offset_ac";
  }
  return "?";
}

ObjectiveKind parse_objective(std::string_view s) {
  if (s == "simple_classifier") return ObjectiveKind::simple_classifier;
  if (s == "offset_ab") return ObjectiveKind::offset_ab;
  if (s == "offset_ac") return ObjectiveKind::offset_ac;
  throw ConfigError("unknown objective '" + std::string(s) + "'");
}

OffsetVariant offset_variant(ObjectiveKind k) {
  if (k == ObjectiveKind::simple_classifier) throw ConfigError("simple_classifier has no offset variant");
  return k == ObjectiveKind::offset_ab ? OffsetVariant::AB : OffsetVariant::AC;
}

void LossConfig::validate() const {
  if (!(margin >= -1.0 && margin <= 1.0)) throw ConfigError("margin must lie in [-1, 1]");
}

Cosine cosine(const WordVector& x, const WordVector& y) {
  if (x.size() != y.size()) throw ValidationError("cosine of vectors with different dimensions");
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) return {0.0, true};
  return {std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0), false};
}

Cosine offset_score(const WordVector& va, const WordVector& vb, const WordVector& vc, const WordVector& vd,
                    OffsetVariant variant) {
  if (va.size() != vb.size() || va.size() != vc.size() || va.size() != vd.size())
    throw ValidationError("offset_score on vectors with different dimensions");
  if (variant == OffsetVariant::AB) return cosine(va - vb, vc - vd);
  return cosine(va - vc, vb - vd);
}

LossValue cosine_embedding_loss(const WordVector& x1, const WordVector& x2, PairLabel y, double margin) {
  const auto c = cosine(x1, x2);
  const double loss = y.y > 0 ? 1.0 - c.value : std::max(0.0, c.value - margin);
  return {loss, c.degenerate};
}

LossGradient cosine_embedding_loss_grad(const WordVector& x1, const WordVector& x2, PairLabel y, double margin) {
  LossGradient out;
  out.d_x1 = WordVector::Zero(x1.size());
  out.d_x2 = WordVector::Zero(x2.size());
  if (x1.size() != x2.size()) throw ValidationError("loss on vectors with different dimensions");
  const double n1 = x1.norm();
  const double n2 = x2.norm();
  if (n1 == 0.0 || n2 == 0.0) {
    out.degenerate = true;
    out.loss = y.y > 0 ? 1.0 : std::max(0.0, -margin);
    return out;
  }
  const double cos = x1.dot(x2) / (n1 * n2);
  double d_cos = 0.0;
  if (y.y > 0) {
    out.loss = 1.0 - cos;
    d_cos = -1.0;
  } else {
    out.loss = std::max(0.0, cos - margin);
    d_cos = cos > margin ? 1.0 : 0.0;
  }
  if (d_cos != 0.0) {
    out.d_x1 = d_cos * (x2 / (n1 * n2) - cos * x1 / (n1 * n1));
    out.d_x2 = d_cos * (x1 / (n1 * n2) - cos * x2 / (n2 * n2));
  }
  return out;
}

namespace {

// Adds one quad's offset loss and gradient.
double offset_quad(const AnalogyQuad& q, const ContextualBackend& backend, OffsetVariant variant, double margin,
                   double weight, Eigen::VectorXd& grad, std::size_t& degenerate) {
  const std::string left[2] = {q.a, q.b};
  const std::string right[2] = {q.c, q.d};
  const auto enc_ab = backend.encode(left);
  const auto enc_cd = backend.encode(right);
  const WordVector va = backend.pool(enc_ab, enc_ab.spans[0]);
  const WordVector vb = backend.pool(enc_ab, enc_ab.spans[1]);
  const WordVector vc = backend.pool(enc_cd, enc_cd.spans[0]);
  const WordVector vd = backend.pool(enc_cd, enc_cd.spans[1]);

  const bool ab = variant == OffsetVariant::AB;
  const WordVector x1 = ab ? WordVector(va - vb) : WordVector(va - vc);
  const WordVector x2 = ab ? WordVector(vc - vd) : WordVector(vb - vd);
  const auto lg = cosine_embedding_loss_grad(x1, x2, PairLabel::from(q.label), margin);
  if (lg.degenerate) ++degenerate;

  // d/d(word vectors)
  WordVector ga, gb, gc, gd;
  if (ab) {
    ga = lg.d_x1;
    gb = -lg.d_x1;
    gc = lg.d_x2;
    gd = -lg.d_x2;
  } else {
    ga = lg.d_x1;
    gc = -lg.d_x1;
    gb = lg.d_x2;
    gd = -lg.d_x2;
  }

  auto push = [&](const ContextualBackend::Encoded& enc, const WordVector& g0, const WordVector& g1) {
    if (g0.isZero(0.0) && g1.isZero(0.0)) return;
    const auto& out = enc.output(backend.output_layer());
    Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(out.rows(), out.cols());
    const TokenSpan* spans[2] = {&enc.spans[0], &enc.spans[1]};
    const WordVector* gs[2] = {&g0, &g1};
    for (int k = 0; k < 2; ++k) {
      const double inv = weight / static_cast<double>(spans[k]->size());
      for (std::size_t t = spans[k]->begin; t < spans[k]->end; ++t)
        d_out.col(static_cast<Eigen::Index>(t)) += inv * *gs[k];
    }
    backend.backward(enc, d_out, grad);
  };
  push(enc_ab, ga, gb);
  push(enc_cd, gc, gd);
  return lg.loss;
}

ContextualBackend::Encoded encode_concat(const ContextualBackend& backend, const AnalogyQuad& q) {
  const std::string words[4] = {q.a, q.b, q.c, q.d};
  return backend.encode(words);
}

Eigen::Vector2d softmax(const Eigen::Vector2d& logits) {
  const double m = logits.maxCoeff();
  Eigen::Vector2d e = (logits.array() - m).exp();
  return e / e.sum();
}

}  // namespace

BatchResult batch_objective(const std::vector<const AnalogyQuad*>& batch, const ContextualBackend& backend,
                            ObjectiveKind objective, double margin) {
  if (batch.empty()) throw ValidationError("batch_objective called with an empty batch");
  BatchResult result;
  result.gradient = Eigen::VectorXd::Zero(backend.parameters().size());
  const double weight = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto* q : batch) {
    if (objective == ObjectiveKind::simple_classifier) {
      const auto enc = encode_concat(backend, *q);
      const Eigen::Vector2d p = softmax(backend.head_logits(enc));
      const int target = q->label ? 1 : 0;
      total += -std::log(std::max(p[target], 1e-300));
      Eigen::Vector2d d_logits = p;
      d_logits[target] -= 1.0;
      backend.head_backward(enc, weight * d_logits, result.gradient);
    } else {
      total += offset_quad(*q, backend, offset_variant(objective), margin, weight, result.gradient, result.degenerate);
    }
  }
  result.loss = total * weight;
  result.gradient.array() *= backend.trainable_mask().array();
  return result;
}

double concat_classifier_score(const ContextualBackend& backend, const AnalogyQuad& quad) {
  const auto enc = encode_concat(backend, quad);
  return softmax(backend.head_logits(enc))[1];
}

}  // namespace analogion
