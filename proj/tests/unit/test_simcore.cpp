#include <doctest.h>

#include <numbers>

#include "oracles.hpp"
#include "qresnet/errors.hpp"
#include "qresnet/rng.hpp"
#include "qresnet/simcore.hpp"

using namespace qresnet;

namespace {

Statevector random_state(int n, Rng& rng) {
    std::vector<Complex> amps(std::size_t{1} << n);
    for (auto& a : amps) a = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Statevector s(n, amps);
    s.normalize();
    return s;
}

Matrix random_matrix(std::size_t dim, Rng& rng) {
    Matrix m(dim);
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c) m(r, c) = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return m;
}

double max_diff(const Statevector& s, const oracle::Vec& v) {
    return (oracle::to_eigen(s) - v).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("simcore") {
    TEST_CASE("ry(pi) on qubit 0 flips the most significant bit") {
        Statevector s(2);
        apply_1q(s, ry_mat(std::numbers::pi), 0);
        CHECK(std::abs(s[2]) == doctest::Approx(1.0));
        CHECK(std::abs(s[0]) < 1e-15);
        Statevector t(2);
        apply_1q(t, ry_mat(std::numbers::pi), 1);
        CHECK(std::abs(t[1]) == doctest::Approx(1.0));
    }

    TEST_CASE("gate matrices match the textbook forms") {
        const double a = 0.37, b = -1.2, c = 2.4;
        CHECK((oracle::to_eigen(gate_matrix(GateKind::Ry, std::vector{a})) - oracle::ry(a)).norm() < 1e-15);
        CHECK((oracle::to_eigen(gate_matrix(GateKind::Rz, std::vector{a})) - oracle::rz(a)).norm() < 1e-15);
        CHECK((oracle::to_eigen(gate_matrix(GateKind::U3, std::vector{a, b, c})) - oracle::u3(a, b, c)).norm() <
              1e-15);
        CHECK((oracle::to_eigen(gate_matrix(GateKind::ZZ, std::vector{b})) - oracle::zz(b)).norm() < 1e-15);
        CHECK((oracle::to_eigen(gate_matrix(GateKind::ControlledU3, std::vector{a, b, c})) -
               oracle::controlled(oracle::u3(a, b, c)))
                  .norm() < 1e-15);
        CHECK((oracle::to_eigen(gate_matrix(GateKind::H, {})) - oracle::hadamard()).norm() < 1e-15);
        // Ry(t) = exp(-i t Y / 2)
        const oracle::Mat y = oracle::pauli('Y');
        const oracle::Mat expected =
            std::cos(a / 2) * oracle::Mat::Identity(2, 2) - oracle::C(0, 1) * std::sin(a / 2) * y;
        CHECK((oracle::ry(a) - expected).norm() < 1e-15);
    }

    TEST_CASE("kernels agree with the dense kron oracle") {
        Rng rng(11);
        for (int n = 1; n <= 5; ++n) {
            for (int trial = 0; trial < 10; ++trial) {
                const Statevector s0 = random_state(n, rng);
                const oracle::Vec v0 = oracle::to_eigen(s0);
                const int t = static_cast<int>(rng.below(n));

                const Matrix g1 = random_matrix(2, rng);
                Mat2 m2;
                for (int k = 0; k < 4; ++k) m2[k] = g1(k / 2, k % 2);
                Statevector s = s0;
                apply_1q(s, m2, t);
                CHECK(max_diff(s, oracle::embed(oracle::to_eigen(g1), {t}, n) * v0) < 1e-13);

                s = s0;
                apply_operator(s, g1, std::vector{t});
                CHECK(max_diff(s, oracle::embed(oracle::to_eigen(g1), {t}, n) * v0) < 1e-13);

                if (n < 2) continue;
                int u = static_cast<int>(rng.below(n - 1));
                if (u >= t) ++u;
                const Matrix g2 = random_matrix(4, rng);
                Mat4 m4;
                for (int k = 0; k < 16; ++k) m4[k] = g2(k / 4, k % 4);
                s = s0;
                apply_2q(s, m4, t, u);
                const oracle::Vec want2 = oracle::embed(oracle::to_eigen(g2), {t, u}, n) * v0;
                CHECK(max_diff(s, want2) < 1e-13);
                s = s0;
                apply_operator(s, g2, std::vector{t, u});
                CHECK(max_diff(s, want2) < 1e-13);

                std::array<Complex, 4> d{};
                oracle::Mat dm = oracle::Mat::Zero(4, 4);
                for (int k = 0; k < 4; ++k) dm(k, k) = d[k] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
                s = s0;
                apply_diagonal_2q(s, d, t, u);
                CHECK(max_diff(s, oracle::embed(dm, {t, u}, n) * v0) < 1e-13);

                s = s0;
                apply_controlled_1q(s, m2, t, u);
                CHECK(max_diff(s, oracle::embed(oracle::controlled(oracle::to_eigen(g1)), {t, u}, n) * v0) < 1e-13);

                if (n < 3) continue;
                int w = 0;
                while (w == t || w == u) ++w;
                const Matrix g3 = random_matrix(8, rng);
                s = s0;
                apply_operator(s, g3, std::vector{w, t, u});
                CHECK(max_diff(s, oracle::embed(oracle::to_eigen(g3), {w, t, u}, n) * v0) < 1e-13);
            }
        }
    }

    TEST_CASE("register capacity and operator arity are enforced") {
        CHECK_THROWS_AS(Statevector(0), CapacityError);
        CHECK_THROWS_AS(Statevector(kMaxQubits + 1), CapacityError);
        CHECK_NOTHROW(Statevector(3));
        CHECK_THROWS_AS(gate_matrix(GateKind::Ry, std::vector{1.0, 2.0}), ArityError);
        CHECK_THROWS_AS(gate_matrix(GateKind::U3, std::vector{1.0}), ArityError);
        CHECK_THROWS_AS(gate_matrix(GateKind::CustomMatrix, {}), NotApplicableError);
        Statevector s(2);
        CHECK_THROWS(apply_operator(s, Matrix::identity(4), std::vector{0}));
        CHECK_THROWS(apply_operator(s, Matrix::identity(2), std::vector{2}));
        CHECK_THROWS(apply_2q(s, Mat4{}, 1, 1));
    }

    TEST_CASE("observables must be Hermitian") {
        Mat2 bad{Complex(1), Complex(1), Complex(0), Complex(1)};
        CHECK_THROWS_AS(Observable({bad}), ValidationError);
        CHECK_NOTHROW(Observable({pauli_mat(Pauli::Y)}));
        CHECK(Observable::single(2, 0, Pauli::Z).is_diagonal());
        CHECK_FALSE(Observable::single(2, 1, Pauli::X).is_diagonal());
    }

    TEST_CASE("expectation agrees with <psi|O|psi> on dense matrices") {
        Rng rng(5);
        const Pauli ps[] = {Pauli::I, Pauli::X, Pauli::Y, Pauli::Z, Pauli::Proj0};
        for (int trial = 0; trial < 50; ++trial) {
            const int n = 1 + static_cast<int>(rng.below(4));
            std::vector<Pauli> word(n);
            for (auto& p : word) p = ps[rng.below(5)];
            const Observable obs = Observable::from_paulis(word);
            Statevector s = random_state(n, rng);
            // scale to check that no normalisation happens
            for (auto& a : s.amplitudes()) a *= 0.7;
            const oracle::Vec v = oracle::to_eigen(s);
            const double want = (v.adjoint() * oracle::observable_of(obs) * v)(0, 0).real();
            CHECK(expectation(s, obs) == doctest::Approx(want).epsilon(1e-12));
            CHECK((oracle::to_eigen(obs.dense()) - oracle::observable_of(obs)).norm() < 1e-15);
        }
    }

    TEST_CASE("fidelity") {
        Rng rng(9);
        const Statevector a = random_state(3, rng);
        CHECK(fidelity(a, a) == doctest::Approx(1.0));
        Statevector zero(1), one(1);
        apply_1q(one, ry_mat(std::numbers::pi), 0);
        CHECK(fidelity(zero, one) < 1e-30);
        Statevector plus(1);
        apply_1q(plus, hadamard_mat(), 0);
        CHECK(fidelity(zero, plus) == doctest::Approx(0.5));
    }

    TEST_CASE("normalize rejects the zero vector") {
        Statevector s(1, {Complex(0), Complex(0)});
        CHECK_THROWS_AS(s.normalize(), ValidationError);
    }
}
