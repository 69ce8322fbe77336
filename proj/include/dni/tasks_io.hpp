// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dni/rng.hpp"
#include "dni/tensor.hpp"

namespace dni {

// ---- sequence tasks -----------------------------------------------------------

/// One stream period of a memorization task. Episodes are consumed
/// back-to-back: the reproduction of a sequence is due during the NEXT
/// period, so targets here belong to the sequence presented one episode
/// earlier. The period length doubles as the difficulty label:
/// t_task = N + 3 for Copy and N*R + 3 for Repeat Copy.
struct Episode {
    Tensor inputs;   // [t_task x (data_bits + 3 marker channels)]
    Tensor targets;  // [t_task x data_bits]
    Tensor mask;     // [t_task], 1 where targets are scored
    std::size_t t_task = 0;
    std::size_t n = 0;
    std::size_t r = 1;
};

/// Generator state: the RNG plus the sequence still awaiting reproduction.
/// Pure state machine; equal states yield equal episode streams.
struct TaskStreamState {
    RngState rng;
    std::size_t data_bits = 8;
    bool has_pending = false;
    Tensor pending;  // [prev_n x data_bits]
    std::size_t pending_r = 1;

    std::size_t symbol_dim() const { return data_bits + 3; }
};

/// Input channel layout: [0, data_bits) symbol bits, then start, stop, and a
/// scalar channel carrying R/8 on the stop step.
Episode gen_copy(std::size_t n, TaskStreamState& state);
Episode gen_repeat_copy(std::size_t n, std::size_t r, TaskStreamState& state);

/// Masked binary cross-entropy in base 2, summed over the episode.
/// predictions are probabilities in (0,1), clamped at 1e-12 so inverted
/// targets stay finite.
double bits_error(const Tensor& predictions, const Episode& episode);

// ---- curriculum -----------------------------------------------------------------

struct CurriculumState {
    enum class Kind { copy, repeat_copy };
    Kind kind = Kind::copy;
    std::size_t n = 1;
    std::size_t r = 1;
    double threshold_bits = 0.15;
    std::size_t window = 50;  // rolling episode count the average is taken over
    bool next_increment_is_n = true;
    std::vector<double> recent;

    std::size_t t_task() const { return n * r + 3; }
};

/// Records one episode's bits error; when the rolling window is full and its
/// mean is below the threshold, bumps the difficulty (Copy: N+1; Repeat Copy:
/// N and R alternately, N first) and clears the window. Returns true when the
/// difficulty changed.
bool curriculum_advance(CurriculumState& state, double episode_bits);

// ---- mnist ----------------------------------------------------------------------

struct MnistDataset {
    Tensor images;  // [n x 784], scaled to [0,1]
    std::vector<std::size_t> labels;

    std::size_t size() const { return labels.size(); }
};

/// Reads an IDX image/label file pair. Both gzip-compressed and raw files
/// work (the reader is transparent to compression). Throws on bad magic,
/// truncation, or count mismatch.
MnistDataset load_mnist(const std::string& images_path, const std::string& labels_path);

/// Locates a standard split ("train" or "t10k") under root, preferring the
/// gzipped names.
MnistDataset load_mnist_split(const std::string& root, const std::string& split);

/// Writes IDX files (gzipped when the path ends in .gz). pixels are u8 rows
/// of length rows*cols per image.
void write_idx_images(const std::string& path, const std::vector<std::vector<unsigned char>>& images,
                      std::size_t rows, std::size_t cols);
void write_idx_labels(const std::string& path, const std::vector<unsigned char>& labels);

// ---- char streams ----------------------------------------------------------------

/// Next-character prediction pairs over a byte buffer with a vocabulary built
/// from the sorted unique bytes.
struct CharStream {
    std::vector<unsigned char> vocab;       // sorted unique bytes
    std::vector<std::size_t> ids;           // byte index per position
    std::size_t size() const { return ids.empty() ? 0 : ids.size() - 1; }
    std::size_t input_at(std::size_t t) const { return ids.at(t); }
    std::size_t target_at(std::size_t t) const { return ids.at(t + 1); }
};

CharStream char_stream(const std::vector<unsigned char>& bytes);

}  // namespace dni
