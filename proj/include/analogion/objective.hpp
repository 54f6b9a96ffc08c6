#pragma once

#include <Eigen/Dense>
#include <string_view>
#include <vector>

#include "analogion/corpus.hpp"
#include "analogion/embedding.hpp"

namespace analogion {

/// AB pairs (a - b, c - d); AC pairs (a - c, b - d).
enum class OffsetVariant { AB, AC };

enum class ObjectiveKind { simple_classifier, offset_ab, offset_ac };

std::string_view to_string(ObjectiveKind k);
ObjectiveKind parse_objective(std::string_view s);
OffsetVariant offset_variant(ObjectiveKind k);

/// +1 for a true analogy, -1 otherwise.
struct PairLabel {
  int y = 1;
  static PairLabel from(bool is_analogy) { return PairLabel{is_analogy ? 1 : -1}; }
};

struct LossConfig {
  double margin = 0.0;
  OffsetVariant variant = OffsetVariant::AB;
  void validate() const;
};

/// A cosine value and whether an input vector was zero (cosine then 0).
struct Cosine {
  double value = 0.0;
  bool degenerate = false;
};

Cosine cosine(const WordVector& x, const WordVector& y);

Cosine offset_score(const WordVector& va, const WordVector& vb, const WordVector& vc, const WordVector& vd,
                    OffsetVariant variant);

struct LossValue {
  double loss = 0.0;
  bool degenerate = false;
};

/// y = +1: 1 - cos(x1, x2);  y = -1: max(0, cos(x1, x2) - margin).
LossValue cosine_embedding_loss(const WordVector& x1, const WordVector& x2, PairLabel y, double margin);

struct LossGradient {
  double loss = 0.0;
  bool degenerate = false;
  WordVector d_x1;
  WordVector d_x2;
};

/// Loss plus its gradient. The hinge subgradient at cos == margin is 0, and
/// degenerate (zero-vector) inputs get a zero gradient.
LossGradient cosine_embedding_loss_grad(const WordVector& x1, const WordVector& x2, PairLabel y, double margin);

struct BatchResult {
  double loss = 0.0;
  /// Same layout as backend.parameters(); zero on frozen groups.
  Eigen::VectorXd gradient;
  std::size_t degenerate = 0;
};

/// Mean per-quad loss over the batch and its parameter gradient. Offset
/// objectives use the cosine embedding loss on the variant's difference
/// pair; the simple classifier uses softmax cross-entropy on the head.
BatchResult batch_objective(const std::vector<const AnalogyQuad*>& batch, const ContextualBackend& backend,
                            ObjectiveKind objective, double margin = 0.0);

/// Positive-class probability for "[CLS] a [SEP] b [SEP] c [SEP] d [SEP]".
double concat_classifier_score(const ContextualBackend& backend, const AnalogyQuad& quad);

}  // namespace analogion
