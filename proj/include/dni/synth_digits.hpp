// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

namespace dni {

/// Generates a deterministic 28x28 digit-glyph dataset in the standard IDX
/// layout (train/t10k splits, gzipped). Digits are stroke templates with
/// randomized rotation, scale, shear, translation, stroke width and pixel
/// noise. A stand-in with the same interface and value range as MNIST for
/// environments without the real files.
void make_synthetic_digits(const std::string& out_dir, std::size_t n_train, std::size_t n_test,
                           std::uint64_t seed);

/// Returns a directory containing train/t10k IDX splits: DNI_DATA_DIR when it
/// holds them, otherwise fallback_dir (generating the synthetic set there on
/// first use).
std::string resolve_data_root(const std::string& fallback_dir);

}  // namespace dni
