#include <algorithm>
#include <cctype>

#include "layerscope/intrinsic_dim.hpp"

namespace layerscope {

const std::vector<ReferenceScale>& reference_scales() {
  static const std::vector<ReferenceScale> table = {
      {"opt-125m", 64, 0, 0},
      {"opt-1.3b", 32, 0, 0},
      {"opt-13b", 32, 0, 0},
      {"pythia-410m", 128, 0, 0},
      {"pythia-160m", 128, 0, 0},
      {"pythia-6.9b", 16, 0, 0},
      // Pythia-6.9b training checkpoints, keyed by step.
      {"pythia-6.9b@64000", 16, 0, 0},
      {"pythia-6.9b@32000", 32, 0, 0},
      {"pythia-6.9b@16000", 32, 0, 0},
      {"pythia-6.9b@8000", 32, 0, 0},
      {"pythia-6.9b@4000", 64, 0, 0},
      {"pythia-6.9b@2000", 16, 0, 0},
      {"pythia-6.9b@1000", 16, 0, 0},
      {"wavlm-base-plus", 1, 2, 5},
      {"wavlm-base-plus-uts02", 1, 2, 5},
      {"wavlm-base-plus-uts03", 1, 2, 5},
      {"wavlm-large", 1, 2, 8},
      {"whisper-large", 16, 0, 0},
  };
  return table;
}

std::optional<std::size_t> reference_scale(std::string_view model, int layer) {
  std::string key(model);
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const auto& entry : reference_scales()) {
    if (entry.model != key) continue;
    if (entry.early_layers > 0 && layer >= 0 && static_cast<std::size_t>(layer) < entry.early_layers)
      return entry.early_k;
    return entry.k;
  }
  return std::nullopt;
}

}  // namespace layerscope
