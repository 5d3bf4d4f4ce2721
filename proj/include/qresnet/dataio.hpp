#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace qresnet {

/// Decoded IDX container with unsigned-byte payload.
struct IdxTensor {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> data;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Parses a big-endian IDX buffer whose magic equals `expected_magic`.
/// Throws ParseError on a bad magic, truncated or oversized payload, or
/// dimension overflow; never reads past `bytes`.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic);
/// Accepts either the image or the label magic.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

struct RawImages {
    std::size_t count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols

    static RawImages from_idx(IdxTensor t);
    std::span<const std::uint8_t> image(std::size_t i) const;
};

std::vector<std::uint8_t> labels_from_idx(IdxTensor t);

enum class Split { Train, Test };

/// Images of the kept classes with labels remapped to 0/1 by their rank in
/// `keep` (so keep = {0, 1} keeps digit values).
struct Dataset {
    Split split = Split::Train;
    Eigen::MatrixXd features;  // D x k (pixels in [0, 1] before PCA)
    std::vector<std::uint8_t> labels;
    std::vector<std::uint8_t> original_labels;

    std::size_t size() const { return labels.size(); }
};

/// Order-preserving filter; pixel values are divided by 255.
Dataset filter_classes(const RawImages& images, std::span<const std::uint8_t> labels,
                       const std::set<std::uint8_t>& keep, Split split);

struct MnistFiles {
    Dataset train;
    Dataset test;
};

/// Loads the four standard IDX files from `dir` and keeps classes {0, 1}.
/// Throws IoError when a file is missing.
MnistFiles load_mnist_binary(const std::filesystem::path& dir);

/// `dir` if non-empty, else $QRESNET_DATA_DIR; empty when neither is set.
std::filesystem::path resolve_data_dir(const std::string& dir);

struct PcaModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;  // k x n, orthonormal rows
    Eigen::VectorXd explained_variance;
};

inline constexpr double kPcaTolerance = 1e-9;
inline constexpr int kPcaMaxIterations = 5000;

/// Top-k principal components of the rows of X by power iteration on the
/// covariance with Gram-Schmidt deflation. Each component's largest-magnitude
/// entry is made positive.
PcaModel pca_fit(const Eigen::MatrixXd& X, int k);

/// (X - mean) * components^T
Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& X);

struct ScaleRecord {
    Eigen::VectorXd min;
    Eigen::VectorXd max;
};

struct ScaledPair {
    Eigen::MatrixXd train;
    Eigen::MatrixXd test;
    ScaleRecord scale;
};

/// Per-feature affine map of the train [min, max] onto [0, pi], applied to
/// both sets without clipping.
ScaledPair scale_features(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test);

/// Binary feature cache: "QRNF", u32 version, u64 D, u64 k, D*k row-major
/// f64, D label bytes; all little-endian.
void write_feature_cache(const std::filesystem::path& path, const Eigen::MatrixXd& features,
                         std::span<const std::uint8_t> labels);

struct FeatureCache {
    Eigen::MatrixXd features;
    std::vector<std::uint8_t> labels;
};

FeatureCache read_feature_cache(const std::filesystem::path& path);

}  // namespace qresnet
