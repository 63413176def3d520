#include "gdl/training/loss.hpp"

#include <vector>

#include "gdl/autodiff/ops.hpp"
#include "gdl/core/error.hpp"

namespace gdl::training {

std::string loss_name(LossKind kind) { return kind == LossKind::L1 ? "l1" : "mse"; }

LossKind parse_loss(const std::string& name) {
  if (name == "l1") return LossKind::L1;
  if (name == "mse") return LossKind::MSE;
  throw ConfigError("unknown loss '" + name + "' (expected l1 or mse)");
}

ad::Tensor compute_loss(const ad::Tensor& pred, std::span<const double> target, LossKind kind) {
  if (target.empty() || pred.numel() == 0) throw EmptySetError("loss over an empty batch");
  if (pred.numel() != target.size()) {
    throw DimensionError("loss: " + std::to_string(pred.numel()) + " predictions for " +
                         std::to_string(target.size()) + " targets");
  }
  const ad::Tensor t(pred.shape(), std::vector<double>(target.begin(), target.end()));
  const ad::Tensor diff = ad::sub(pred, t);
  return ad::mean(kind == LossKind::L1 ? ad::abs(diff) : ad::square(diff));
}

}  // namespace gdl::training
