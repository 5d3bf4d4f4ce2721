#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <filesystem>
#include <cstring>
#include <fstream>
#include <numbers>

#include "qresnet/dataio.hpp"
#include "qresnet/errors.hpp"
#include "qresnet/rng.hpp"

using namespace qresnet;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> idx_images(std::uint32_t n, std::uint32_t rows, std::uint32_t cols, Rng& rng) {
    std::vector<std::uint8_t> out;
    put_be32(out, kIdxImageMagic);
    put_be32(out, n);
    put_be32(out, rows);
    put_be32(out, cols);
    for (std::uint32_t i = 0; i < n * rows * cols; ++i) out.push_back(static_cast<std::uint8_t>(rng.below(256)));
    return out;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
    std::vector<std::uint8_t> out;
    put_be32(out, kIdxLabelMagic);
    put_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("qresnet_test_" + name);
}

}  // namespace

TEST_SUITE("dataio") {
    TEST_CASE("IDX headers decode big-endian dimensions") {
        Rng rng(1);
        const auto bytes = idx_images(3, 2, 5, rng);
        const IdxTensor t = parse_idx(bytes, kIdxImageMagic);
        CHECK(t.dims == std::vector<std::uint32_t>{3, 2, 5});
        REQUIRE(t.data.size() == 30);
        CHECK(t.data[0] == bytes[16]);
        CHECK(t.data[29] == bytes.back());
        const RawImages img = RawImages::from_idx(t);
        CHECK(img.count == 3);
        CHECK(img.image(2)[0] == bytes[16 + 20]);

        const auto lab = parse_idx(idx_labels({7, 0, 1}));
        CHECK(labels_from_idx(lab) == std::vector<std::uint8_t>{7, 0, 1});
    }

    TEST_CASE("malformed IDX buffers are rejected") {
        Rng rng(2);
        auto bytes = idx_images(2, 2, 2, rng);
        CHECK_THROWS_AS(parse_idx(bytes, kIdxLabelMagic), ParseError);
        auto truncated = bytes;
        truncated.pop_back();
        CHECK_THROWS_AS(parse_idx(truncated), ParseError);
        auto extra = bytes;
        extra.push_back(0);
        CHECK_THROWS_AS(parse_idx(extra), ParseError);
        CHECK_THROWS_AS(parse_idx(std::vector<std::uint8_t>{0, 0}), ParseError);
        // dimensions whose product overflows 64 bits
        std::vector<std::uint8_t> huge;
        put_be32(huge, 0x00000804);
        for (int i = 0; i < 4; ++i) put_be32(huge, 0xffffffffu);
        CHECK_THROWS_AS(parse_idx(huge), ParseError);
    }

    TEST_CASE("fuzzed IDX input only ever raises ParseError") {
        Rng rng(3);
        const auto base_img = idx_images(4, 3, 3, rng);
        const auto base_lab = idx_labels({0, 1, 1, 0});
        int parsed = 0, rejected = 0;
        for (int trial = 0; trial < 10000; ++trial) {
            auto bytes = rng.below(2) ? base_img : base_lab;
            switch (rng.below(4)) {
                case 0:  // flip a few bytes, biased towards the header
                    for (int k = 0; k < 3; ++k) bytes[rng.below(std::min<std::size_t>(bytes.size(), 20))] ^= rng.below(256);
                    break;
                case 1: bytes.resize(rng.below(bytes.size() + 1)); break;
                case 2:
                    for (std::uint64_t k = rng.below(16); k > 0; --k) bytes.push_back(static_cast<std::uint8_t>(rng.below(256)));
                    break;
                default:
                    bytes.resize(rng.below(40));
                    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
            }
            try {
                const IdxTensor t = parse_idx(bytes);
                std::size_t product = 1;
                for (auto d : t.dims) product *= d;
                CHECK(product == t.data.size());
                CHECK(t.data.size() <= bytes.size());
                ++parsed;
            } catch (const ParseError&) {
                ++rejected;
            }
        }
        CHECK(parsed + rejected == 10000);
        CHECK(rejected > 0);
    }

    TEST_CASE("class filter keeps order and remaps by rank") {
        Rng rng(4);
        const RawImages img = RawImages::from_idx(parse_idx(idx_images(5, 1, 2, rng)));
        const std::vector<std::uint8_t> labels{3, 7, 1, 3, 7};
        const Dataset ds = filter_classes(img, labels, {3, 7}, Split::Test);
        CHECK(ds.labels == std::vector<std::uint8_t>{0, 1, 0, 1});
        CHECK(ds.original_labels == std::vector<std::uint8_t>{3, 7, 3, 7});
        CHECK(ds.features(2, 1) == doctest::Approx(img.image(3)[1] / 255.0));
        CHECK_THROWS_AS(filter_classes(img, std::vector<std::uint8_t>{1, 2}, {1}, Split::Train), DimensionError);
    }

    TEST_CASE("power-iteration PCA agrees with a dense eigensolver") {
        Rng rng(5);
        Eigen::MatrixXd X(200, 8);
        // anisotropic cloud so the leading eigenvalues are well separated
        for (Eigen::Index r = 0; r < X.rows(); ++r)
            for (Eigen::Index c = 0; c < X.cols(); ++c) X(r, c) = rng.uniform(-1, 1) * (8.0 - c) + 0.1 * c;
        const PcaModel pca = pca_fit(X, 3);

        const Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
        const Eigen::MatrixXd cov = centered.transpose() * centered / (X.rows() - 1.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        for (int k = 0; k < 3; ++k) {
            const Eigen::VectorXd v = es.eigenvectors().col(7 - k);
            CHECK(pca.explained_variance(k) == doctest::Approx(es.eigenvalues()(7 - k)).epsilon(1e-8));
            CHECK(std::abs(std::abs(v.dot(pca.components.row(k).transpose())) - 1.0) < 1e-8);
            Eigen::Index arg;
            pca.components.row(k).cwiseAbs().maxCoeff(&arg);
            CHECK(pca.components(k, arg) > 0);
        }
        CHECK((pca.components * pca.components.transpose() - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-10);
        const Eigen::MatrixXd z = pca_transform(pca, X);
        CHECK(z.rows() == 200);
        CHECK(z.cols() == 3);
        CHECK(z.colwise().mean().norm() < 1e-10);
    }

    TEST_CASE("rank-one data has a single component") {
        Eigen::MatrixXd X(20, 4);
        Eigen::RowVectorXd dir(4);
        dir << 1, 2, 0, -2;
        for (int r = 0; r < 20; ++r) X.row(r) = (r - 9.5) * dir;
        const PcaModel pca = pca_fit(X, 2);
        CHECK(std::abs(std::abs(pca.components.row(0).dot(dir / 3.0)) - 1.0) < 1e-10);
        CHECK(pca.explained_variance(1) < 1e-10);
        CHECK_THROWS_AS(pca_fit(X, 5), ValidationError);
    }

    TEST_CASE("features scale onto [0, pi] from the training range") {
        Eigen::MatrixXd train(3, 2), test(2, 2);
        train << 0, 10, 1, 20, 2, 30;
        test << 4, 0, -2, 25;
        const ScaledPair s = scale_features(train, test);
        CHECK(s.train(0, 0) == 0.0);
        CHECK(s.train(2, 0) == doctest::Approx(std::numbers::pi));
        CHECK(s.train(1, 1) == doctest::Approx(std::numbers::pi / 2));
        CHECK(s.test(0, 0) == doctest::Approx(2 * std::numbers::pi));  // no clipping
        CHECK(s.test(1, 0) == doctest::Approx(-std::numbers::pi));
        CHECK(s.scale.min(1) == 10);
        CHECK(s.scale.max(1) == 30);
    }

    TEST_CASE("feature cache round-trip and layout") {
        Eigen::MatrixXd f(3, 2);
        f << 0.5, -1.25, 3.0, 1e-300, 7.0, 8.0;
        const std::vector<std::uint8_t> labels{1, 0, 1};
        const auto path = temp_path("cache.qrnf");
        write_feature_cache(path, f, labels);
        const FeatureCache c = read_feature_cache(path);
        CHECK(c.features == f);
        CHECK(c.labels == labels);

        const auto bytes = read_file_bytes(path);
        CHECK(bytes.size() == 4 + 4 + 8 + 8 + 6 * 8 + 3);
        CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "QRNF");
        double first;
        std::memcpy(&first, bytes.data() + 24, 8);
        CHECK(first == 0.5);
        double second;
        std::memcpy(&second, bytes.data() + 32, 8);
        CHECK(second == -1.25);  // row-major

        std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 1);
        std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(cut.data()),
                                                    static_cast<std::streamsize>(cut.size()));
        CHECK_THROWS_AS(read_feature_cache(path), ParseError);
        std::filesystem::remove(path);
        CHECK_THROWS_AS(read_feature_cache(path), IoError);
    }

    TEST_CASE("missing MNIST files raise IoError") {
        CHECK_THROWS_AS(load_mnist_binary(temp_path("no_such_dir")), IoError);
        CHECK_THROWS_AS(load_mnist_binary(""), IoError);
        CHECK(resolve_data_dir("abc") == std::filesystem::path("abc"));
    }

    TEST_CASE("real MNIST 0/1 split sizes") {
        const auto dir = resolve_data_dir("");
        if (dir.empty() || !std::filesystem::exists(dir / "train-images-idx3-ubyte")) {
            MESSAGE("MNIST directory not configured; skipping");
            return;
        }
        const MnistFiles files = load_mnist_binary(dir);
        CHECK(files.train.size() == 12665);
        CHECK(files.test.size() == 2115);
        CHECK(files.train.features.cols() == 784);
        CHECK(files.train.features.maxCoeff() <= 1.0);
    }
}
