#pragma once

#include "bsr/experiment.hpp"

namespace bsr {

// Subcommand bodies; each throws on configuration or I/O errors and returns
// 0 on success. Artifacts land under cfg.output_dir (and checkpoint paths),
// every emitted file starts with the '#'-prefixed effective configuration,
// and reruns with the same config are byte-identical.
int cmd_train(const ExperimentConfig& cfg);
int cmd_attack(const ExperimentConfig& cfg);
int cmd_eval(const ExperimentConfig& cfg);
int cmd_ablate(const ExperimentConfig& cfg);
int cmd_heatmap(const ExperimentConfig& cfg);

}  // namespace bsr
