import numpy as np
import pytest

from mflq.diagnostics import (
    hamiltonian_matrices,
    imaginary_axis_free,
    pbh_observable,
    pbh_stabilizable,
    sqrt_psd,
    stabilization_report,
)
from mflq.errors import NotPSD

from conftest import scalar_variant
from oracles import scalar_are_roots

M1_EXPECTED = np.array([[0.5, 1.0], [-0.1, -0.5]])
M2_EXPECTED = np.array([[0.3, 1.0], [-0.064, -0.3]])


class TestPBH:
    def test_scalar_benchmark_stabilizable(self, scalar_problem):
        p = scalar_problem
        assert pbh_stabilizable(p.A, p.B, p.rho).ok
        assert pbh_stabilizable(p.A + p.G, p.B, p.rho).ok

    def test_hurwitz_without_input(self):
        cert = pbh_stabilizable(np.array([[-1.0]]), np.zeros((1, 1)), 0.5)
        assert cert.ok and cert.tested == ()

    def test_marginal_uncontrollable_mode(self):
        cert = pbh_stabilizable(np.array([[0.3]]), np.zeros((1, 1)), 0.6)
        assert not cert.ok
        assert len(cert.tested) == 1

    def test_scale_invariance(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 4))
            A = rng.normal(size=(n, n))
            B = rng.normal(size=(n, 1))
            base = pbh_stabilizable(A, B, 0.7).ok
            for c in (0.5, -3.0, 10.0):
                assert pbh_stabilizable(A, c * B, 0.7).ok == base

    def test_observable_scalar_positive_weight(self):
        cert = pbh_observable(np.array([[0.8]]), sqrt_psd(np.array([[0.4]])),
                              0.6, "observable")
        assert cert.ok

    def test_zero_weight_detectable_not_observable(self):
        A = np.array([[0.1]])     # a - rho/2 = -0.2 < 0
        C = np.zeros((1, 1))
        assert not pbh_observable(A, C, 0.6, "observable").ok
        assert pbh_observable(A, C, 0.6, "detectable").ok

    def test_full_rank_output_always_observable(self, rng):
        for _ in range(5):
            A = rng.normal(size=(3, 3))
            assert pbh_observable(A, np.eye(3), 0.9, "observable").ok

    def test_sqrt_rejects_indefinite(self):
        with pytest.raises(NotPSD):
            sqrt_psd(np.array([[-0.1]]))


class TestHamiltonians:
    def test_scalar_benchmark_matrices(self, scalar_problem):
        M1, M2 = hamiltonian_matrices(scalar_problem)
        assert np.max(np.abs(M1 - M1_EXPECTED)) <= 1e-12
        assert np.max(np.abs(M2 - M2_EXPECTED)) <= 1e-12

    def test_no_coupling_collapses(self):
        p = scalar_variant(G=0.0, Gamma=0.0)
        M1, M2 = hamiltonian_matrices(p)
        assert np.array_equal(M1, M2)

    def test_benchmark_axis_free(self, scalar_problem):
        M1, M2 = hamiltonian_matrices(scalar_problem)
        free1, eigs1 = imaginary_axis_free(M1)
        free2, _ = imaginary_axis_free(M2)
        assert free1 and free2
        # Eigenvalues are +-sqrt(0.15), real.
        assert sorted(eigs1.real) == pytest.approx(
            [-np.sqrt(0.15), np.sqrt(0.15)])
        assert np.allclose(eigs1.imag, 0.0)

    def test_rotation_generator_fails(self):
        free, _ = imaginary_axis_free(np.array([[0.0, 1.0], [-1.0, 0.0]]))
        assert not free

    def test_scale_invariance(self):
        M = np.array([[0.5, 1.0], [-0.1, -0.5]])
        for c in (0.01, 1.0, 250.0):
            free, _ = imaginary_axis_free(c * M)
            assert free

    def test_scalar_sign_criterion(self, rng):
        # For n = 1 the test is exactly (a - rho/2)^2 + (b^2/r) q > 0.
        for _ in range(200):
            a = rng.uniform(-2, 2)
            b = rng.uniform(-2, 2)
            q = rng.uniform(-2, 2)
            r = rng.uniform(0.2, 2)
            rho = rng.uniform(0.1, 2)
            crit = (a - rho / 2) ** 2 + (b * b / r) * q
            if abs(crit) < 1e-6:
                continue
            M = np.array([[a - rho / 2, b * b / r], [q, -(a - rho / 2)]])
            free, _ = imaginary_axis_free(M)
            assert free == (crit > 0)


class TestReport:
    def test_scalar_benchmark(self, scalar_problem):
        rep = stabilization_report(scalar_problem)
        assert rep.case_tag == "hamiltonian"
        assert rep.verdict is True
        assert rep.abar_plus_G_abscissa == pytest.approx(-0.5873, abs=5e-4)
        assert rep.equivalence_holds

    def test_planar_benchmark_detectable(self, planar_problem):
        rep = stabilization_report(planar_problem)
        assert rep.case_tag == "detectable"
        assert rep.verdict is True
        assert rep.equivalence_holds

    def test_observable_case(self):
        p = scalar_variant(Q=0.5)
        rep = stabilization_report(p)
        assert rep.case_tag == "observable"
        assert rep.verdict is True
        assert rep.equivalence_holds

    def test_nonpositive_coupling_keeps_verdict(self, rng):
        # Scalar family with positive weight and g <= 0 under both axis
        # conditions stays uniformly stabilizing.
        count = 0
        while count < 20:
            a = rng.uniform(-1.5, 1.5)
            b = rng.uniform(0.3, 1.5)
            g = -rng.uniform(0.0, 1.0)
            q = rng.uniform(0.1, 2.0)
            gamma = rng.uniform(0.0, 0.9)
            rho = rng.uniform(0.2, 1.5)
            c1 = (a - rho / 2) ** 2 + b * b * q
            c2 = (a + g - rho / 2) ** 2 + b * b * (1 - gamma) ** 2 * q
            if c1 < 1e-2 or c2 < 1e-2:
                continue
            p = scalar_variant(A=a, B=b, G=g, Q=q, Gamma=gamma, rho=rho)
            rep = stabilization_report(p)
            assert rep.case_tag != "unclassified"
            assert rep.verdict is True
            assert rep.equivalence_holds
            count += 1

    def test_singular_regime_unclassified(self, singular_problem):
        rep = stabilization_report(singular_problem)
        assert rep.case_tag == "unclassified"
        assert rep.verdict is None
        # M2 carries the zero eigenvalue that disqualifies the axis case.
        assert rep.m1_free and not rep.m2_free

    def test_are_failure_recorded_not_raised(self):
        # No input authority and unstable shifted dynamics: the solver
        # cannot produce a stabilizing solution, the report records it.
        p = scalar_variant(A=1.0, B=0.0, Q=0.0, G=0.0, Gamma=0.0)
        rep = stabilization_report(p)
        assert rep.are_P is None and rep.are_P_failure
        assert rep.condition_ii is False and rep.condition_iii is False

    def test_report_serializes(self, scalar_problem):
        import json
        doc = stabilization_report(scalar_problem).to_dict()
        text = json.dumps(doc)
        assert "hamiltonian" in text
