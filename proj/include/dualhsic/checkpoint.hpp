#pragma once

// Versioned text checkpoint: a JSON spec header followed by a flat
// name -> tensor map in hexfloat (exact double round-trip). Holds the
// network, the projection head, and optionally the rehearsal buffer so an
// experiment can resume.
//
// Layout (documented contract, stable across versions):
//   line 1   dualhsic-checkpoint v1
//   line 2   JSON header: spec dims/activation, init record, head dims,
//            buffer summary (or null)
//   then     repeated blocks:  "tensor <name> <rows> <cols>" + one line of
//            space-separated hexfloat values per row

#include <optional>
#include <string>

#include "dualhsic/buffer.hpp"
#include "dualhsic/network.hpp"

namespace dualhsic {

struct Checkpoint {
  MlpParams params;
  ProjectionHead head;
  std::optional<RehearsalBuffer> buffer;
};

void save_checkpoint(const std::string& path, const MlpParams& params, const ProjectionHead& head,
                     const RehearsalBuffer* buffer = nullptr);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace dualhsic
