#include "qresnet/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numbers>

#include "qresnet/errors.hpp"
#include "qresnet/rng.hpp"

namespace qresnet {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

template <typename T>
void put_le(std::ofstream& out, T value) {
    unsigned char buf[sizeof(T)];
    std::uint64_t bits = 0;
    if constexpr (std::is_same_v<T, double>) {
        bits = std::bit_cast<std::uint64_t>(value);
    } else {
        bits = static_cast<std::uint64_t>(value);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

std::uint64_t get_le(std::span<const std::uint8_t> b, std::size_t at, std::size_t width) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v |= std::uint64_t{b[at + i]} << (8 * i);
    return v;
}

constexpr char kCacheMagic[4] = {'Q', 'R', 'N', 'F'};
constexpr std::uint32_t kCacheVersion = 1;

}  // namespace

IdxTensor parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic) {
    if (bytes.size() < 4) throw ParseError("IDX buffer shorter than its magic number");
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != expected_magic) {
        throw ParseError("bad IDX magic " + std::to_string(magic) + ", expected " + std::to_string(expected_magic));
    }
    const std::size_t ndims = magic & 0xFF;
    if (ndims == 0) throw ParseError("IDX tensor with zero dimensions");
    const std::size_t header = 4 + 4 * ndims;
    if (bytes.size() < header) throw ParseError("IDX header truncated");

    IdxTensor t;
    std::uint64_t total = 1;
    for (std::size_t d = 0; d < ndims; ++d) {
        const std::uint32_t dim = read_be32(bytes, 4 + 4 * d);
        t.dims.push_back(dim);
        if (dim != 0 && total > (UINT64_MAX / dim)) throw ParseError("IDX dimensions overflow");
        total *= dim;
    }
    const std::uint64_t payload = bytes.size() - header;
    if (total > payload) throw ParseError("IDX payload truncated");
    if (total < payload) throw ParseError("IDX payload longer than its declared dimensions");
    t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return t;
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw ParseError("IDX buffer shorter than its magic number");
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != kIdxImageMagic && magic != kIdxLabelMagic) throw ParseError("unsupported IDX magic");
    return parse_idx(bytes, magic);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RawImages RawImages::from_idx(IdxTensor t) {
    if (t.dims.size() != 3) throw ParseError("image tensor must have three dimensions");
    RawImages out;
    out.count = t.dims[0];
    out.rows = t.dims[1];
    out.cols = t.dims[2];
    out.pixels = std::move(t.data);
    return out;
}

std::span<const std::uint8_t> RawImages::image(std::size_t i) const {
    if (i >= count) throw DimensionError("image index out of range");
    return std::span(pixels).subspan(i * rows * cols, rows * cols);
}

std::vector<std::uint8_t> labels_from_idx(IdxTensor t) {
    if (t.dims.size() != 1) throw ParseError("label tensor must have one dimension");
    return std::move(t.data);
}

Dataset filter_classes(const RawImages& images, std::span<const std::uint8_t> labels,
                       const std::set<std::uint8_t>& keep, Split split) {
    if (labels.size() != images.count) throw DimensionError("label count does not match image count");
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (keep.contains(labels[i])) kept.push_back(i);

    const std::size_t width = images.rows * images.cols;
    Dataset ds;
    ds.split = split;
    ds.features.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < kept.size(); ++r) {
        const auto img = images.image(kept[r]);
        for (std::size_t c = 0; c < width; ++c) {
            ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = img[c] / 255.0;
        }
        const std::uint8_t digit = labels[kept[r]];
        ds.original_labels.push_back(digit);
        ds.labels.push_back(static_cast<std::uint8_t>(std::distance(keep.begin(), keep.find(digit))));
    }
    return ds;
}

std::filesystem::path resolve_data_dir(const std::string& dir) {
    if (!dir.empty()) return dir;
    if (const char* env = std::getenv("QRESNET_DATA_DIR"); env && *env) return env;
    return {};
}

MnistFiles load_mnist_binary(const std::filesystem::path& dir) {
    if (dir.empty()) throw IoError("no MNIST directory given (use --data-dir or QRESNET_DATA_DIR)");
    const auto load = [&](const char* name) {
        const auto path = dir / name;
        if (!std::filesystem::exists(path)) throw IoError("missing MNIST file " + path.string());
        return read_file_bytes(path);
    };
    const auto train_images = RawImages::from_idx(parse_idx(load("train-images-idx3-ubyte"), kIdxImageMagic));
    const auto train_labels = labels_from_idx(parse_idx(load("train-labels-idx1-ubyte"), kIdxLabelMagic));
    const auto test_images = RawImages::from_idx(parse_idx(load("t10k-images-idx3-ubyte"), kIdxImageMagic));
    const auto test_labels = labels_from_idx(parse_idx(load("t10k-labels-idx1-ubyte"), kIdxLabelMagic));
    const std::set<std::uint8_t> keep{0, 1};
    return {filter_classes(train_images, train_labels, keep, Split::Train),
            filter_classes(test_images, test_labels, keep, Split::Test)};
}

PcaModel pca_fit(const Eigen::MatrixXd& X, int k) {
    const auto d = X.rows();
    const auto n = X.cols();
    if (k < 1 || k > std::min<Eigen::Index>(d, n)) throw ValidationError("component count out of range");
    if (d <= k) throw ValidationError("PCA needs more samples than components");

    PcaModel model;
    model.mean = X.colwise().mean().transpose();
    const Eigen::MatrixXd centered = X.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(d - 1);

    const double trace = cov.trace();
    model.components.resize(k, n);
    model.explained_variance.resize(k);
    for (int c = 0; c < k; ++c) {
        Rng rng(0x5eed0000ULL + static_cast<std::uint64_t>(c));
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
        const auto deflate = [&](Eigen::VectorXd& w) {
            for (int p = 0; p < c; ++p) {
                const Eigen::VectorXd prev = model.components.row(p).transpose();
                w -= prev.dot(w) * prev;
            }
        };
        deflate(v);
        v.normalize();

        bool converged = false;
        for (int it = 0; it < kPcaMaxIterations; ++it) {
            Eigen::VectorXd w = cov * v;
            deflate(w);
            const double norm = w.norm();
            if (norm <= 1e-14 * std::max(1.0, trace)) {  // no variance left
                converged = true;
                break;
            }
            w /= norm;
            const double change = std::min((w - v).norm(), (w + v).norm());
            v = std::move(w);
            if (change < kPcaTolerance) {
                converged = true;
                break;
            }
        }
        if (!converged) throw ConvergenceError("power iteration did not converge for component " + std::to_string(c));

        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        model.components.row(c) = v.transpose();
        model.explained_variance(c) = v.dot(cov * v);
    }
    return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.mean.size()) throw DimensionError("PCA input has the wrong column count");
    return (X.rowwise() - model.mean.transpose()) * model.components.transpose();
}

ScaledPair scale_features(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test) {
    if (train.cols() != test.cols()) throw DimensionError("train and test feature counts differ");
    if (train.rows() == 0) throw ValidationError("cannot scale an empty training set");
    ScaledPair out;
    out.scale.min = train.colwise().minCoeff().transpose();
    out.scale.max = train.colwise().maxCoeff().transpose();
    const auto map = [&](const Eigen::MatrixXd& m) {
        Eigen::MatrixXd r(m.rows(), m.cols());
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double lo = out.scale.min(c), range = out.scale.max(c) - lo;
            r.col(c) = (m.col(c).array() - lo) * (std::numbers::pi / range);
        }
        return r;
    };
    for (Eigen::Index c = 0; c < train.cols(); ++c) {
        if (!(out.scale.max(c) > out.scale.min(c))) {
            throw ValidationError("feature " + std::to_string(c) + " has zero range on the training set");
        }
    }
    out.train = map(train);
    out.test = map(test);
    return out;
}

void write_feature_cache(const std::filesystem::path& path, const Eigen::MatrixXd& features,
                         std::span<const std::uint8_t> labels) {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw DimensionError("feature rows and labels differ in length");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kCacheMagic, 4);
    put_le<std::uint32_t>(out, kCacheVersion);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(features.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(features.cols()));
    for (Eigen::Index r = 0; r < features.rows(); ++r)
        for (Eigen::Index c = 0; c < features.cols(); ++c) put_le<double>(out, features(r, c));
    out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

FeatureCache read_feature_cache(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    const std::span<const std::uint8_t> b(bytes);
    if (b.size() < 24 || std::memcmp(b.data(), kCacheMagic, 4) != 0) throw ParseError("not a feature cache file");
    if (get_le(b, 4, 4) != kCacheVersion) throw ParseError("unsupported feature cache version");
    const std::uint64_t d = get_le(b, 8, 8), k = get_le(b, 16, 8);
    if (d > b.size() || (k != 0 && d > (UINT64_MAX / 9) / k)) throw ParseError("feature cache dimensions overflow");
    if (b.size() != 24 + d * k * 8 + d) throw ParseError("feature cache length does not match its header");

    FeatureCache out;
    out.features.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
    std::size_t at = 24;
    for (std::uint64_t r = 0; r < d; ++r)
        for (std::uint64_t c = 0; c < k; ++c, at += 8) {
            out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                std::bit_cast<double>(get_le(b, at, 8));
        }
    out.labels.assign(b.begin() + static_cast<std::ptrdiff_t>(at), b.end());
    return out;
}

}  // namespace qresnet
