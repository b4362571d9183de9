// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint directory: manifest.txt (config, metadata and array table),
// arrays.bin (little-endian float64 blob), ontology.tsv (padded tree) and
// vocab.tsv.
#pragma once

#include <filesystem>

#include "cgl/model.hpp"
#include "cgl/ontology.hpp"
#include "cgl/text.hpp"

namespace cgl {

struct Checkpoint {
  CglModel model;
  OntologyTree tree;
  Vocabulary vocab;
};

/// The model must be frozen.
void save_checkpoint(const std::filesystem::path& dir, CglModel& model, const OntologyTree& tree,
                     const Vocabulary& vocab);

/// Throws IoError for missing files and ParseError for malformed content.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace cgl
