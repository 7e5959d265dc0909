#pragma once

#include <filesystem>

#include "planrisk/types.hpp"

namespace planrisk {

// Parses and eagerly validates a manifest JSON document. Dataset root is the
// manifest's parent directory; every tensor path must resolve to an existing
// file. Throws ValidationError (naming the offender) on any invariant breach.
SceneManifest load_manifest(const std::filesystem::path& path);

// Inverse of load_manifest, used by the synthetic generator.
void save_manifest(const SceneManifest& m, const std::filesystem::path& path);

}  // namespace planrisk
