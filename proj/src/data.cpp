#include "splitbargain/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "splitbargain/errors.hpp"
#include "splitbargain/rng.hpp"

namespace splitbargain {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be_u32(std::istream& in, std::size_t offset, const std::string& file) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4))
    throw parse_error(file + ": truncated at byte offset " + std::to_string(offset));
  return std::uint32_t(bytes[0]) << 24 | std::uint32_t(bytes[1]) << 16 |
         std::uint32_t(bytes[2]) << 8 | std::uint32_t(bytes[3]);
}

void write_be_u32(std::ostream& out, std::uint32_t v) {
  unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint64_t fnv1a(std::uint64_t hash, const unsigned char* bytes, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

constexpr std::uint64_t kFnvBasis = 14695981039346656037ULL;

}  // namespace

int Dataset::n_classes() const {
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  return max_label + 1;
}

Matrix Dataset::gather(std::span<const std::size_t> indices) const {
  Matrix batch(indices.size(), width);
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy_n(sample(indices[r]), width, batch.row(r));
  return batch;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) out[r] = labels[indices[r]];
  return out;
}

Dataset read_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw parse_error("cannot open IDX image file: " + images_path.string());
  const std::uint32_t img_magic = read_be_u32(img, 0, images_path.string());
  if (img_magic != kImageMagic)
    throw parse_error(images_path.string() + ": bad magic 0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%08x", img_magic);
      return std::string(buf);
    }() + " at byte offset 0 (expected 0x00000803)");
  const std::uint32_t n_images = read_be_u32(img, 4, images_path.string());
  const std::uint32_t rows = read_be_u32(img, 8, images_path.string());
  const std::uint32_t cols = read_be_u32(img, 12, images_path.string());

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw parse_error("cannot open IDX label file: " + labels_path.string());
  const std::uint32_t lab_magic = read_be_u32(lab, 0, labels_path.string());
  if (lab_magic != kLabelMagic)
    throw parse_error(labels_path.string() + ": bad magic at byte offset 0 (expected 0x00000801)");
  const std::uint32_t n_labels = read_be_u32(lab, 4, labels_path.string());
  if (n_images != n_labels)
    throw parse_error("IDX count mismatch: " + std::to_string(n_images) + " images vs " +
                      std::to_string(n_labels) + " labels");

  Dataset ds;
  ds.width = static_cast<std::size_t>(rows) * cols;
  ds.name = images_path.filename().string();
  ds.pixels.resize(static_cast<std::size_t>(n_images) * ds.width);
  ds.labels.resize(n_images);

  std::vector<unsigned char> buffer(ds.width);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    if (!img.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(ds.width)))
      throw parse_error(images_path.string() + ": truncated at byte offset " +
                        std::to_string(16 + static_cast<std::size_t>(i) * ds.width));
    float* dst = ds.pixels.data() + static_cast<std::size_t>(i) * ds.width;
    for (std::size_t j = 0; j < ds.width; ++j) dst[j] = static_cast<float>(buffer[j]) / 255.0f;
  }
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    unsigned char b;
    if (!lab.read(reinterpret_cast<char*>(&b), 1))
      throw parse_error(labels_path.string() + ": truncated at byte offset " +
                        std::to_string(8 + i));
    ds.labels[i] = b;
  }
  return ds;
}

void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  // Square image header when the width is a perfect square, else 1 x width.
  std::uint32_t rows = 1;
  std::uint32_t cols = static_cast<std::uint32_t>(dataset.width);
  const auto root = static_cast<std::uint32_t>(std::lround(std::sqrt(double(dataset.width))));
  if (static_cast<std::size_t>(root) * root == dataset.width) rows = cols = root;

  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw parse_error("cannot write IDX image file: " + images_path.string());
  write_be_u32(img, kImageMagic);
  write_be_u32(img, static_cast<std::uint32_t>(dataset.size()));
  write_be_u32(img, rows);
  write_be_u32(img, cols);
  std::vector<unsigned char> buffer(dataset.width);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const float* src = dataset.sample(i);
    for (std::size_t j = 0; j < dataset.width; ++j)
      buffer[j] = static_cast<unsigned char>(
          std::clamp<long>(std::lround(src[j] * 255.0f), 0, 255));
    img.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(dataset.width));
  }

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw parse_error("cannot write IDX label file: " + labels_path.string());
  write_be_u32(lab, kLabelMagic);
  write_be_u32(lab, static_cast<std::uint32_t>(dataset.size()));
  for (int l : dataset.labels) {
    const unsigned char b = static_cast<unsigned char>(l);
    lab.write(reinterpret_cast<const char*>(&b), 1);
  }
}

namespace {

Dataset take(const Dataset& src, std::span<const std::size_t> indices, const std::string& tag) {
  Dataset out;
  out.width = src.width;
  out.name = src.name.empty() ? tag : src.name + "/" + tag;
  out.pixels.resize(indices.size() * src.width);
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(src.sample(indices[i]), src.width, out.pixels.data() + i * src.width);
    out.labels[i] = src.labels[indices[i]];
  }
  return out;
}

}  // namespace

TrainValTest split_train_val_test(const Dataset& dataset, SplitSizes sizes, std::uint64_t seed) {
  const std::size_t need = sizes.train + sizes.val + sizes.test;
  if (need > dataset.size())
    throw validation_error("split sizes sum to " + std::to_string(need) + " but only " +
                           std::to_string(dataset.size()) + " samples are available");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed);
  rng.shuffle(order);

  TrainValTest out;
  std::span<const std::size_t> all(order);
  out.train = take(dataset, all.subspan(0, sizes.train), "train");
  out.val = take(dataset, all.subspan(sizes.train, sizes.val), "val");
  out.test = take(dataset, all.subspan(sizes.train + sizes.val, sizes.test), "test");
  return out;
}

std::vector<std::size_t> Partition::device_sample_counts() const {
  std::vector<std::size_t> counts;
  counts.reserve(device_indices.size());
  for (const auto& idx : device_indices) counts.push_back(idx.size());
  return counts;
}

namespace {

Partition allocate_by_quota(const Dataset& dataset,
                            const std::vector<std::vector<int>>& majors, std::size_t n_labels,
                            double major_frac, double minor_frac, std::uint64_t seed,
                            QuotaMode mode) {
  const std::size_t n_devices = majors.size();
  std::vector<std::vector<bool>> is_major(n_devices, std::vector<bool>(n_labels, false));
  for (std::size_t d = 0; d < n_devices; ++d)
    for (int l : majors[d]) {
      if (l < 0 || static_cast<std::size_t>(l) >= n_labels)
        throw validation_error("major label out of range");
      is_major[d][static_cast<std::size_t>(l)] = true;
    }

  // Pool the sample indices of each label, shuffled once.
  std::vector<std::vector<std::size_t>> label_pool(n_labels);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int l = dataset.labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= n_labels)
      throw validation_error("dataset label " + std::to_string(l) + " outside [0, " +
                             std::to_string(n_labels) + ")");
    label_pool[static_cast<std::size_t>(l)].push_back(i);
  }
  RngStream rng(seed);
  for (std::size_t l = 0; l < n_labels; ++l) {
    RngStream stream = rng.derive(l);
    stream.shuffle(label_pool[l]);
  }

  Partition part;
  part.n_labels = n_labels;
  part.device_major_labels = majors;
  part.device_indices.resize(n_devices);

  for (std::size_t l = 0; l < n_labels; ++l) {
    const std::size_t supply = label_pool[l].size();
    if (supply == 0) continue;

    double demand = 0.0;
    std::vector<double> fraction(n_devices);
    for (std::size_t d = 0; d < n_devices; ++d) {
      fraction[d] = is_major[d][l] ? major_frac : minor_frac;
      demand += fraction[d];
    }
    if (demand <= 0.0)
      throw validation_error("label " + std::to_string(l) +
                             " has zero total quota; infeasible quota configuration");

    if (mode == QuotaMode::kWithReplacement) {
      // Nominal fractions verbatim; devices draw overlapping shares from a
      // per-device reshuffle of the label pool.
      for (std::size_t d = 0; d < n_devices; ++d) {
        const std::size_t quota = std::min(
            supply, static_cast<std::size_t>(std::llround(fraction[d] * double(supply))));
        std::vector<std::size_t> pool = label_pool[l];
        RngStream stream = rng.derive((l + 1) * 1000 + d);
        stream.shuffle(pool);
        part.device_indices[d].insert(part.device_indices[d].end(), pool.begin(),
                                      pool.begin() + quota);
      }
      continue;
    }

    // Normalize so the label is used exactly once, then round by largest
    // remainder so integer quotas still sum to the supply.
    std::vector<std::size_t> quota(n_devices);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t d = 0; d < n_devices; ++d) {
      const double exact = fraction[d] / demand * static_cast<double>(supply);
      quota[d] = static_cast<std::size_t>(exact);
      assigned += quota[d];
      remainders.push_back({exact - static_cast<double>(quota[d]), d});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t r = 0; assigned < supply; ++r, ++assigned) quota[remainders[r].second] += 1;

    std::size_t cursor = 0;
    for (std::size_t d = 0; d < n_devices; ++d) {
      for (std::size_t i = 0; i < quota[d]; ++i)
        part.device_indices[d].push_back(label_pool[l][cursor++]);
    }
  }

  for (std::size_t d = 0; d < n_devices; ++d)
    if (part.device_indices[d].empty())
      throw validation_error("device " + std::to_string(d) +
                             " received no samples; infeasible quota configuration");
  return part;
}

}  // namespace

Partition partition_noniid(const Dataset& dataset, std::size_t n_devices,
                           std::size_t major_per_device, double major_frac, double minor_frac,
                           std::uint64_t seed, QuotaMode mode) {
  if (n_devices < 1) throw validation_error("n_devices: must be >= 1");
  const int n_classes = dataset.n_classes();
  if (n_classes < 1) throw validation_error("dataset has no labels");
  const std::size_t n_labels = static_cast<std::size_t>(n_classes);
  if (major_per_device < 1 || major_per_device > n_labels)
    throw validation_error("major_per_device: must be in [1, n_labels]");
  if (major_frac <= 0.0 || major_frac > 1.0)
    throw validation_error("major_frac: must be in (0, 1]");
  if (minor_frac < 0.0 || minor_frac > 1.0)
    throw validation_error("minor_frac: must be in [0, 1]");
  if ((n_devices * major_per_device) % n_labels != 0)
    throw validation_error("n_devices * major_per_device must be divisible by the label count "
                           "for a balanced major assignment");

  // Balanced majors: deal shuffled labels round-robin; consecutive slots per
  // device are distinct because major_per_device <= n_labels.
  std::vector<int> label_order(n_labels);
  std::iota(label_order.begin(), label_order.end(), 0);
  RngStream rng(seed);
  RngStream major_stream = rng.derive(0x6d616a6f);  // distinct from pool shuffles
  major_stream.shuffle(label_order);
  std::vector<std::vector<int>> majors(n_devices);
  for (std::size_t d = 0; d < n_devices; ++d)
    for (std::size_t j = 0; j < major_per_device; ++j)
      majors[d].push_back(label_order[(d * major_per_device + j) % n_labels]);

  return allocate_by_quota(dataset, majors, n_labels, major_frac, minor_frac, seed, mode);
}

Partition partition_with_majors(const Dataset& dataset,
                                const std::vector<std::vector<int>>& device_major_labels,
                                std::size_t n_labels, double major_frac, double minor_frac,
                                std::uint64_t seed, QuotaMode mode) {
  if (device_major_labels.empty()) throw validation_error("n_devices: must be >= 1");
  return allocate_by_quota(dataset, device_major_labels, n_labels, major_frac, minor_frac, seed,
                           mode);
}

Dataset synth_dataset(std::size_t n_samples, std::size_t n_classes, std::size_t input_width,
                      std::uint64_t seed, double margin) {
  if (n_samples < 1 || n_classes < 1 || input_width < 1)
    throw validation_error("synth_dataset: counts must be >= 1");
  if (margin <= 0.0) throw validation_error("margin: must be > 0");

  const double sigma = 0.25 / margin;
  RngStream rng(seed);
  RngStream noise = rng.derive(1);
  RngStream order_stream = rng.derive(2);

  Dataset ds;
  ds.width = input_width;
  ds.name = "synthetic";
  ds.pixels.resize(n_samples * input_width);
  ds.labels.resize(n_samples);

  auto normal = [&noise]() {
    const double u1 = 1.0 - noise.uniform01();  // (0, 1]
    const double u2 = noise.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  };

  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::size_t cls = i % n_classes;  // round-robin: histogram uniform within 1
    const std::size_t axis = cls % input_width;
    float* row = ds.pixels.data() + i * input_width;
    for (std::size_t j = 0; j < input_width; ++j) {
      const double mean = (j == axis) ? 0.9 : 0.1;
      row[j] = static_cast<float>(std::clamp(mean + sigma * normal(), 0.0, 1.0));
    }
    ds.labels[i] = static_cast<int>(cls);
  }

  // Shuffle sample order; labels stay attached to their rows.
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), 0);
  order_stream.shuffle(order);
  Dataset shuffled = ds;
  for (std::size_t i = 0; i < n_samples; ++i) {
    std::copy_n(ds.sample(order[i]), input_width, shuffled.pixels.data() + i * input_width);
    shuffled.labels[i] = ds.labels[order[i]];
  }
  return shuffled;
}

std::uint64_t dataset_checksum(const Dataset& dataset) {
  std::uint64_t h = kFnvBasis;
  const std::uint64_t w = dataset.width;
  h = fnv1a(h, reinterpret_cast<const unsigned char*>(&w), sizeof(w));
  h = fnv1a(h, reinterpret_cast<const unsigned char*>(dataset.pixels.data()),
            dataset.pixels.size() * sizeof(float));
  for (int l : dataset.labels) {
    const std::uint32_t v = static_cast<std::uint32_t>(l);
    h = fnv1a(h, reinterpret_cast<const unsigned char*>(&v), sizeof(v));
  }
  return h;
}

std::uint64_t partition_checksum(const Partition& partition) {
  std::uint64_t h = kFnvBasis;
  for (const auto& device : partition.device_indices) {
    const std::uint64_t n = device.size();
    h = fnv1a(h, reinterpret_cast<const unsigned char*>(&n), sizeof(n));
    for (std::size_t idx : device) {
      const std::uint64_t v = idx;
      h = fnv1a(h, reinterpret_cast<const unsigned char*>(&v), sizeof(v));
    }
  }
  for (const auto& majors : partition.device_major_labels)
    for (int l : majors) {
      const std::uint32_t v = static_cast<std::uint32_t>(l);
      h = fnv1a(h, reinterpret_cast<const unsigned char*>(&v), sizeof(v));
    }
  return h;
}

}  // namespace splitbargain
