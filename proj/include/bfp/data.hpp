#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "bfp/error.hpp"
#include "bfp/matrix.hpp"
#include "bfp/rng.hpp"

namespace bfp {

/// Inputs live in columns (width x n); labels are class indices in
/// [0, class_count).
struct LabeledDataset {
  Matrix inputs;
  std::vector<int> labels;
  int class_count = 0;
  // Original IDX image geometry, kept so a load/save round trip is
  // byte-exact. Zero for synthetic data.
  std::uint32_t idx_rows = 0;
  std::uint32_t idx_cols = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t width() const { return inputs.rows; }
};

struct TaskData {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<int> classes;  // ascending
};

/// Ordered tasks with pairwise-disjoint class sets.
struct TaskStream {
  std::vector<TaskData> tasks;
  int class_count = 0;

  std::size_t task_count() const { return tasks.size(); }
  std::size_t input_width() const { return tasks.front().train.width(); }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path,
                               std::streamoff offset) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(path + ": truncated at offset " + std::to_string(offset));
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

/// Parse an IDX image/label pair. Pixels are scaled by 1/255 into [0,1];
/// images are flattened column-wise into the input matrix.
inline LabeledDataset load_idx(const std::string& images_path,
                               const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError(images_path + ": cannot open");
  const std::uint32_t img_magic = detail::read_be32(img, images_path, 0);
  if (img_magic != 0x00000803)
    throw FormatError(images_path + ": bad magic at offset 0 (expected 0x00000803)");
  const std::uint32_t n = detail::read_be32(img, images_path, 4);
  const std::uint32_t rows = detail::read_be32(img, images_path, 8);
  const std::uint32_t cols = detail::read_be32(img, images_path, 12);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError(labels_path + ": cannot open");
  const std::uint32_t lab_magic = detail::read_be32(lab, labels_path, 0);
  if (lab_magic != 0x00000801)
    throw FormatError(labels_path + ": bad magic at offset 0 (expected 0x00000801)");
  const std::uint32_t n_lab = detail::read_be32(lab, labels_path, 4);
  if (n != n_lab)
    throw FormatError(images_path + ": image count " + std::to_string(n) +
                      " does not match label count " + std::to_string(n_lab));

  const std::size_t width = std::size_t(rows) * cols;
  LabeledDataset ds;
  ds.idx_rows = rows;
  ds.idx_cols = cols;
  ds.inputs = Matrix(width, n);
  ds.labels.resize(n);

  std::vector<unsigned char> buf(width);
  for (std::uint32_t j = 0; j < n; ++j) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(width)))
      throw FormatError(images_path + ": truncated at offset " +
                        std::to_string(16 + std::size_t(j) * width));
    for (std::size_t i = 0; i < width; ++i)
      ds.inputs(i, j) = static_cast<double>(buf[i]) / 255.0;
  }
  for (std::uint32_t j = 0; j < n; ++j) {
    char c;
    if (!lab.get(c))
      throw FormatError(labels_path + ": truncated at offset " + std::to_string(8 + j));
    ds.labels[j] = static_cast<unsigned char>(c);
  }
  ds.class_count = ds.labels.empty()
                       ? 0
                       : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  return ds;
}

/// Re-serialize a dataset loaded from IDX. Byte-exact inverse of load_idx.
inline void save_idx(const LabeledDataset& ds, const std::string& images_path,
                     const std::string& labels_path) {
  if (ds.idx_rows == 0 || ds.idx_cols == 0)
    throw InvalidInput("save_idx: dataset has no IDX geometry");
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw FormatError(images_path + ": cannot open for writing");
  detail::write_be32(img, 0x00000803);
  detail::write_be32(img, static_cast<std::uint32_t>(ds.size()));
  detail::write_be32(img, ds.idx_rows);
  detail::write_be32(img, ds.idx_cols);
  std::vector<unsigned char> buf(ds.width());
  for (std::size_t j = 0; j < ds.size(); ++j) {
    for (std::size_t i = 0; i < ds.width(); ++i)
      buf[i] = static_cast<unsigned char>(std::lround(ds.inputs(i, j) * 255.0));
    img.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
  }
  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError(labels_path + ": cannot open for writing");
  detail::write_be32(lab, 0x00000801);
  detail::write_be32(lab, static_cast<std::uint32_t>(ds.size()));
  for (int y : ds.labels) lab.put(static_cast<char>(static_cast<unsigned char>(y)));
}

namespace detail {

inline LabeledDataset select(const LabeledDataset& ds, const std::vector<std::size_t>& idx) {
  LabeledDataset out;
  out.class_count = ds.class_count;
  out.idx_rows = ds.idx_rows;
  out.idx_cols = ds.idx_cols;
  out.inputs = Matrix(ds.width(), idx.size());
  out.labels.resize(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    for (std::size_t i = 0; i < ds.width(); ++i) out.inputs(i, j) = ds.inputs(i, idx[j]);
    out.labels[j] = ds.labels[idx[j]];
  }
  return out;
}

inline void check_disjoint_classes(const TaskStream& s) {
  std::vector<bool> seen(static_cast<std::size_t>(s.class_count), false);
  for (const auto& t : s.tasks)
    for (int c : t.classes) {
      if (seen[static_cast<std::size_t>(c)])
        throw InvalidInput("task stream: class sets are not disjoint");
      seen[static_cast<std::size_t>(c)] = true;
    }
}

}  // namespace detail

/// Class-incremental split: tasks take consecutive class-index blocks in
/// ascending order (task 1 = {0..k-1}, ...). Train and test must share the
/// class universe and class_count must divide evenly.
inline TaskStream split_by_classes(const LabeledDataset& train,
                                   const LabeledDataset& test,
                                   int classes_per_task) {
  if (classes_per_task <= 0) throw InvalidInput("split_by_classes: classes_per_task <= 0");
  const int c = std::max(train.class_count, test.class_count);
  if (c % classes_per_task != 0)
    throw InvalidInput("split_by_classes: class count " + std::to_string(c) +
                       " not divisible by " + std::to_string(classes_per_task));
  TaskStream stream;
  stream.class_count = c;
  const int task_count = c / classes_per_task;
  for (int t = 0; t < task_count; ++t) {
    TaskData task;
    for (int k = 0; k < classes_per_task; ++k)
      task.classes.push_back(t * classes_per_task + k);
    auto pick = [&](const LabeledDataset& ds) {
      std::vector<std::size_t> idx;
      for (std::size_t j = 0; j < ds.size(); ++j)
        if (ds.labels[j] >= task.classes.front() && ds.labels[j] <= task.classes.back())
          idx.push_back(j);
      LabeledDataset part = detail::select(ds, idx);
      part.class_count = c;
      return part;
    };
    task.train = pick(train);
    task.test = pick(test);
    stream.tasks.push_back(std::move(task));
  }
  detail::check_disjoint_classes(stream);
  return stream;
}

/// Synthetic stream: every class is an isotropic unit-variance Gaussian
/// centered on a cross-polytope vertex scaled so pairwise mean distances
/// are at least `separation`. 80/20 train/test split, deterministic in seed.
inline TaskStream make_gaussian_tasks(int task_count, int classes_per_task, int dim,
                                      double separation, int n_per_class,
                                      std::uint64_t seed) {
  if (task_count <= 0 || classes_per_task <= 0 || dim <= 0 || n_per_class <= 0)
    throw InvalidInput("make_gaussian_tasks: counts must be positive");
  const int classes = task_count * classes_per_task;
  if (classes > 2 * dim)
    throw InvalidInput("make_gaussian_tasks: need dim >= classes/2 for vertex placement");

  const double scale = separation / std::sqrt(2.0);
  Rng rng(seed);
  TaskStream stream;
  stream.class_count = classes;
  const int n_test = std::max(1, n_per_class / 5);
  const int n_train = n_per_class - n_test;

  for (int t = 0; t < task_count; ++t) {
    TaskData task;
    auto init = [&](LabeledDataset& ds, int per_class) {
      ds.class_count = classes;
      ds.inputs = Matrix(static_cast<std::size_t>(dim),
                         static_cast<std::size_t>(per_class) * classes_per_task);
      ds.labels.assign(static_cast<std::size_t>(per_class) * classes_per_task, 0);
    };
    init(task.train, n_train);
    init(task.test, n_test);
    for (int k = 0; k < classes_per_task; ++k) {
      const int cls = t * classes_per_task + k;
      task.classes.push_back(cls);
      const int axis = cls % dim;
      const double sign = cls < dim ? 1.0 : -1.0;
      auto fill = [&](LabeledDataset& ds, int per_class, int offset) {
        for (int m = 0; m < per_class; ++m) {
          const std::size_t j = static_cast<std::size_t>(offset + m);
          for (int i = 0; i < dim; ++i)
            ds.inputs(static_cast<std::size_t>(i), j) =
                rng.normal() + (i == axis ? sign * scale : 0.0);
          ds.labels[j] = cls;
        }
      };
      fill(task.train, n_train, k * n_train);
      fill(task.test, n_test, k * n_test);
    }
    stream.tasks.push_back(std::move(task));
  }
  detail::check_disjoint_classes(stream);
  return stream;
}

/// Seeded permutation of [0, n) cut into batches; the final short batch is
/// kept.
inline std::vector<std::vector<std::size_t>> batch_iter(std::size_t n,
                                                        std::size_t batch_size,
                                                        std::uint64_t epoch_seed) {
  if (batch_size == 0) throw InvalidInput("batch_iter: batch_size must be >= 1");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(epoch_seed);
  rng.shuffle(perm);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

/// Materialize a batch (inputs + labels) from a dataset by index list.
inline std::pair<Matrix, std::vector<int>> gather(const LabeledDataset& ds,
                                                  const std::vector<std::size_t>& idx) {
  Matrix x(ds.width(), idx.size());
  std::vector<int> y(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    for (std::size_t i = 0; i < ds.width(); ++i) x(i, j) = ds.inputs(i, idx[j]);
    y[j] = ds.labels[idx[j]];
  }
  return {std::move(x), std::move(y)};
}

/// Concatenate datasets (joint training, seen-data unions).
inline LabeledDataset concat(const std::vector<const LabeledDataset*>& parts) {
  if (parts.empty()) throw InvalidInput("concat: no datasets");
  std::size_t total = 0;
  for (const auto* p : parts) total += p->size();
  LabeledDataset out;
  out.class_count = 0;
  out.idx_rows = parts.front()->idx_rows;
  out.idx_cols = parts.front()->idx_cols;
  out.inputs = Matrix(parts.front()->width(), total);
  out.labels.reserve(total);
  std::size_t col = 0;
  for (const auto* p : parts) {
    if (p->width() != out.inputs.rows) throw InvalidInput("concat: width mismatch");
    out.class_count = std::max(out.class_count, p->class_count);
    for (std::size_t j = 0; j < p->size(); ++j, ++col)
      for (std::size_t i = 0; i < p->width(); ++i) out.inputs(i, col) = p->inputs(i, j);
    out.labels.insert(out.labels.end(), p->labels.begin(), p->labels.end());
  }
  return out;
}

}  // namespace bfp
