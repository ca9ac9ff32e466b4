#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "splitbargain/nn.hpp"

namespace splitbargain {

/// Labeled samples with pixel values normalized to [0, 1].
struct Dataset {
  std::size_t width = 0;
  std::vector<float> pixels;  // row-major, size() * width
  std::vector<int> labels;
  std::string name;

  std::size_t size() const { return labels.size(); }
  const float* sample(std::size_t i) const { return pixels.data() + i * width; }
  int n_classes() const;

  /// Assembles the rows named by indices into a batch matrix.
  Matrix gather(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
};

/// Reads a big-endian IDX image/label file pair (magic 0x00000803 for images,
/// 0x00000801 for labels); pixels are scaled by 1/255. Throws parse_error with
/// the failing byte offset for bad magic, truncation or a count mismatch
/// between the two files.
Dataset read_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// Writes the dataset back out as an IDX pair (pixels re-quantized to bytes);
/// exact round-trip partner of read_idx.
void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct TrainValTest {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Deterministic shuffled split; sizes must sum to at most the dataset size.
TrainValTest split_train_val_test(const Dataset& dataset, SplitSizes sizes, std::uint64_t seed);

/// Label-skewed assignment of dataset rows to devices.
struct Partition {
  std::vector<std::vector<std::size_t>> device_indices;
  std::vector<std::vector<int>> device_major_labels;
  std::size_t n_labels = 0;

  std::size_t n_devices() const { return device_indices.size(); }
  std::vector<std::size_t> device_sample_counts() const;
};

/// How oversubscribed per-label quotas are resolved.
enum class QuotaMode {
  /// Scale all fractions by the common oversubscription factor so the label is
  /// used exactly once and device slices stay disjoint.
  kNormalized,
  /// Honor the nominal fractions by drawing each device's share independently
  /// from the label pool; slices of different devices may overlap.
  kWithReplacement,
};

/// Non-iid partition: each device gets major_per_device major labels (every
/// label is major for the same number of devices), a major_frac share of each
/// of its major labels and minor_frac of the rest. The nominal per-label
/// demand (2 * 40% + 8 * 5% = 120% at the defaults) is oversubscribed; see
/// QuotaMode for the two resolutions. Throws validation_error for infeasible
/// quota configurations.
Partition partition_noniid(const Dataset& dataset, std::size_t n_devices,
                           std::size_t major_per_device, double major_frac, double minor_frac,
                           std::uint64_t seed, QuotaMode mode = QuotaMode::kNormalized);

inline Partition partition_noniid(const Dataset& dataset, std::size_t n_devices,
                                  std::uint64_t seed) {
  return partition_noniid(dataset, n_devices, 2, 0.40, 0.05, seed);
}

/// Partitions another dataset (validation/test) with an already chosen major
/// assignment so the per-device skew matches the training partition.
Partition partition_with_majors(const Dataset& dataset,
                                const std::vector<std::vector<int>>& device_major_labels,
                                std::size_t n_labels, double major_frac, double minor_frac,
                                std::uint64_t seed, QuotaMode mode = QuotaMode::kNormalized);

/// Synthetic classification set: one Gaussian cluster per class with means on
/// distinct axes of [0,1]^width, noise sigma = 0.25 / margin, samples clamped
/// to [0,1]. Labels are dealt round-robin, so the histogram is uniform within
/// 1. Larger margin separates the clusters further.
Dataset synth_dataset(std::size_t n_samples, std::size_t n_classes, std::size_t input_width,
                      std::uint64_t seed, double margin = 1.0);

/// FNV-1a over the dataset bytes; manifest integrity checks.
std::uint64_t dataset_checksum(const Dataset& dataset);
std::uint64_t partition_checksum(const Partition& partition);

}  // namespace splitbargain
