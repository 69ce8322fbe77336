// SPDX-License-Identifier: Apache-2.0
#include "dni/tasks_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <stdexcept>

namespace dni {

namespace {

Episode gen_episode(std::size_t n, std::size_t r, TaskStreamState& state) {
    if (n == 0 || r == 0) throw std::invalid_argument("episode: n and r must be positive");
    const std::size_t bits = state.data_bits;
    const std::size_t dim = state.symbol_dim();
    Episode ep;
    ep.n = n;
    ep.r = r;
    ep.t_task = n * r + 3;
    ep.inputs = Tensor({ep.t_task, dim});
    ep.targets = Tensor({ep.t_task, bits});
    ep.mask = Tensor({ep.t_task});

    // Input phase: start marker, the symbols, then a stop marker carrying R.
    ep.inputs(0, bits) = 1.0;
    Tensor symbols({n, bits});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < bits; ++j) {
            const double bit = state.rng.next_below(2) ? 1.0 : 0.0;
            symbols(i, j) = bit;
            ep.inputs(1 + i, j) = bit;
        }
    ep.inputs(n + 1, bits + 1) = 1.0;
    ep.inputs(n + 1, bits + 2) = static_cast<double>(r) / 8.0;

    // Output phase: the PREVIOUS episode's sequence, repeated, is due now.
    if (state.has_pending) {
        const std::size_t prev_n = state.pending.rows();
        const std::size_t total = prev_n * state.pending_r;
        if (total > ep.t_task) {
            throw std::invalid_argument("episode: pending reproduction does not fit the period");
        }
        for (std::size_t k = 0; k < total; ++k) {
            for (std::size_t j = 0; j < bits; ++j) ep.targets(k, j) = state.pending(k % prev_n, j);
            ep.mask[k] = 1.0;
        }
    }
    state.pending = symbols;
    state.pending_r = r;
    state.has_pending = true;
    return ep;
}

std::uint32_t read_be32(gzFile f, const std::string& path) {
    unsigned char buf[4];
    if (gzread(f, buf, 4) != 4) {
        gzclose(f);
        throw std::runtime_error("idx read: truncated header in " + path);
    }
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(gzFile f, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    gzwrite(f, buf, 4);
}

gzFile open_or_throw(const std::string& path, const char* mode) {
    gzFile f = gzopen(path.c_str(), mode);
    if (f == nullptr) throw std::runtime_error("idx: cannot open " + path);
    return f;
}

}  // namespace

Episode gen_copy(std::size_t n, TaskStreamState& state) { return gen_episode(n, 1, state); }

Episode gen_repeat_copy(std::size_t n, std::size_t r, TaskStreamState& state) {
    return gen_episode(n, r, state);
}

double bits_error(const Tensor& predictions, const Episode& episode) {
    require_same_shape(predictions, episode.targets, "bits_error");
    const double ln2 = std::log(2.0);
    double bits = 0.0;
    for (std::size_t t = 0; t < episode.t_task; ++t) {
        if (episode.mask[t] == 0.0) continue;
        for (std::size_t j = 0; j < predictions.cols(); ++j) {
            const double p = std::clamp(predictions(t, j), 1e-12, 1.0 - 1e-12);
            const double y = episode.targets(t, j);
            bits -= (y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) / ln2;
        }
    }
    return bits;
}

bool curriculum_advance(CurriculumState& state, double episode_bits) {
    state.recent.push_back(episode_bits);
    if (state.recent.size() < state.window) return false;
    if (state.recent.size() > state.window) state.recent.erase(state.recent.begin());
    const double mean = std::accumulate(state.recent.begin(), state.recent.end(), 0.0) /
                        static_cast<double>(state.recent.size());
    if (mean >= state.threshold_bits) return false;
    if (state.kind == CurriculumState::Kind::copy) {
        state.n += 1;
    } else if (state.next_increment_is_n) {
        state.n += 1;
        state.next_increment_is_n = false;
    } else {
        state.r += 1;
        state.next_increment_is_n = true;
    }
    state.recent.clear();
    return true;
}

MnistDataset load_mnist(const std::string& images_path, const std::string& labels_path) {
    gzFile fi = open_or_throw(images_path, "rb");
    const std::uint32_t magic_i = read_be32(fi, images_path);
    if (magic_i != 0x00000803u) {
        gzclose(fi);
        throw std::runtime_error("idx: bad image magic in " + images_path);
    }
    const std::uint32_t count = read_be32(fi, images_path);
    const std::uint32_t rows = read_be32(fi, images_path);
    const std::uint32_t cols = read_be32(fi, images_path);
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> buf(static_cast<std::size_t>(count) * pixels);
    if (!buf.empty() &&
        gzread(fi, buf.data(), static_cast<unsigned>(buf.size())) != static_cast<int>(buf.size())) {
        gzclose(fi);
        throw std::runtime_error("idx: truncated image data in " + images_path);
    }
    gzclose(fi);

    gzFile fl = open_or_throw(labels_path, "rb");
    const std::uint32_t magic_l = read_be32(fl, labels_path);
    if (magic_l != 0x00000801u) {
        gzclose(fl);
        throw std::runtime_error("idx: bad label magic in " + labels_path);
    }
    const std::uint32_t lcount = read_be32(fl, labels_path);
    if (lcount != count) {
        gzclose(fl);
        throw std::runtime_error("idx: image/label count mismatch");
    }
    std::vector<unsigned char> lbuf(lcount);
    if (!lbuf.empty() &&
        gzread(fl, lbuf.data(), static_cast<unsigned>(lbuf.size())) != static_cast<int>(lbuf.size())) {
        gzclose(fl);
        throw std::runtime_error("idx: truncated label data in " + labels_path);
    }
    gzclose(fl);

    MnistDataset ds;
    ds.images = Tensor({count, pixels});
    for (std::size_t i = 0; i < buf.size(); ++i) ds.images[i] = static_cast<double>(buf[i]) / 255.0;
    ds.labels.assign(lbuf.begin(), lbuf.end());
    return ds;
}

MnistDataset load_mnist_split(const std::string& root, const std::string& split) {
    namespace fs = std::filesystem;
    const std::string img_base = split + "-images-idx3-ubyte";
    const std::string lbl_base = split + "-labels-idx1-ubyte";
    for (const char* suffix : {".gz", ""}) {
        const fs::path img = fs::path(root) / (img_base + suffix);
        const fs::path lbl = fs::path(root) / (lbl_base + suffix);
        if (fs::exists(img) && fs::exists(lbl)) return load_mnist(img.string(), lbl.string());
    }
    throw std::runtime_error("mnist: no " + split + " split under " + root);
}

void write_idx_images(const std::string& path, const std::vector<std::vector<unsigned char>>& images,
                      std::size_t rows, std::size_t cols) {
    gzFile f = open_or_throw(path, path.size() > 3 && path.substr(path.size() - 3) == ".gz" ? "wb"
                                                                                            : "wbT");
    write_be32(f, 0x00000803u);
    write_be32(f, static_cast<std::uint32_t>(images.size()));
    write_be32(f, static_cast<std::uint32_t>(rows));
    write_be32(f, static_cast<std::uint32_t>(cols));
    for (const auto& img : images) {
        if (img.size() != rows * cols) {
            gzclose(f);
            throw std::invalid_argument("write_idx_images: pixel count mismatch");
        }
        gzwrite(f, img.data(), static_cast<unsigned>(img.size()));
    }
    gzclose(f);
}

void write_idx_labels(const std::string& path, const std::vector<unsigned char>& labels) {
    gzFile f = open_or_throw(path, path.size() > 3 && path.substr(path.size() - 3) == ".gz" ? "wb"
                                                                                            : "wbT");
    write_be32(f, 0x00000801u);
    write_be32(f, static_cast<std::uint32_t>(labels.size()));
    if (!labels.empty()) gzwrite(f, labels.data(), static_cast<unsigned>(labels.size()));
    gzclose(f);
}

CharStream char_stream(const std::vector<unsigned char>& bytes) {
    CharStream cs;
    cs.vocab = bytes;
    std::sort(cs.vocab.begin(), cs.vocab.end());
    cs.vocab.erase(std::unique(cs.vocab.begin(), cs.vocab.end()), cs.vocab.end());
    cs.ids.reserve(bytes.size());
    for (unsigned char b : bytes) {
        const auto it = std::lower_bound(cs.vocab.begin(), cs.vocab.end(), b);
        cs.ids.push_back(static_cast<std::size_t>(it - cs.vocab.begin()));
    }
    return cs;
}

}  // namespace dni
