#pragma once

#include <cmath>

#include "mhdm/error.hpp"
#include "mhdm/grid.hpp"
#include "mhdm/operators.hpp"
#include "mhdm/solvers/params.hpp"

namespace mhdm {

/// Whether `mode` resolves to the fidelity-minimizing start for this
/// model/variant. The refined variants default to it, except AA-log refined
/// under blur, which starts from the constant 1.
inline bool uses_fidelity_init(Model model, Variant variant, InitMode mode, const BlurOperator& T) {
  if (mode != InitMode::Auto) return mode == InitMode::Fidelity;
  if (variant != Variant::Refined) return false;
  if (model == Model::AAlog) return T.is_identity();
  return model == Model::SO;
}

/// Starting iterate for scale k: w^0 for SO (log domain), u^0 otherwise.
inline ImageGrid initialize(Model model, Variant variant, const ImageGrid& f_delta, const ScaleState& state,
                            const BlurOperator& T, InitMode mode = InitMode::Auto) {
  const bool fidelity = uses_fidelity_init(model, variant, mode, T);
  const std::size_t w = f_delta.width(), h = f_delta.height();

  if (model == Model::SO) {
    require_same_shape(f_delta, state.y_prev, "initialize (SO)");
    if (fidelity) return pointwise_log(f_delta) - state.y_prev;
    if (variant == Variant::Refined) return ImageGrid(w, h, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < f_delta.size(); ++i) acc += f_delta[i] * std::exp(-state.y_prev[i]);
    return ImageGrid(w, h, std::log(acc / static_cast<double>(f_delta.size())));
  }

  require_same_shape(f_delta, state.x_prev, "initialize");
  if (fidelity) return f_delta / state.x_prev;
  if (variant == Variant::Refined) return ImageGrid(w, h, 1.0);

  const ImageGrid r = f_delta / apply(T, state.x_prev);
  if (model == Model::TNVlog || model == Model::TNV) {
    return ImageGrid(w, h, inner(r, r) / sum(r));
  }
  return ImageGrid(w, h, mean(r));
}

}  // namespace mhdm
