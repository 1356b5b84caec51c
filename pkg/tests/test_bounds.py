import math

import numpy as np
import pytest

from l1adapt import bounds, controller, lti, plant


@pytest.fixture(scope="module")
def arm():
    spec, sets = plant.robot_arm_preset("sin")
    # the certified scenarios use the tighter effectiveness interval
    tight = plant.UncertaintySets((1.0, 5.0), sets.theta_box, sets.delta,
                                  sets.d_theta, sets.d_sigma)
    return spec, tight


@pytest.fixture(scope="module")
def integrator():
    return lti.ss_of_tf(lti.RationalTF(lti.Polynomial([1.0]),
                                       lti.Polynomial([0.0, 1.0])))


def make_cfg(spec, sets, D, gamma_c=1e4, k=60.0):
    return controller.ControllerConfig(spec.A_m, spec.b, spec.c, gamma_c, k,
                                       D, np.eye(spec.n), sets)


class TestComputeL:
    def box(self, theta_box):
        return plant.UncertaintySets((1.0, 2.0), theta_box, 1.0, 0.0, 0.0)

    def test_symmetric_box(self):
        assert bounds.compute_L(self.box([[-10, 10], [-10, 10]])) == 20.0

    def test_degenerate_box(self):
        assert bounds.compute_L(self.box([[0, 0], [0, 0]])) == 0.0

    def test_asymmetric_box(self):
        assert bounds.compute_L(self.box([[-1, 2], [-3, 1]])) == 5.0

    def test_monotone_in_box(self):
        small = self.box([[-1, 1], [-2, 2]])
        assert bounds.compute_L(small.inflated(0.3)) >= bounds.compute_L(small)


class TestL1Requirement:
    def test_robot_arm_passes_at_k60(self, arm, integrator):
        spec, sets = arm
        value, ok = bounds.check_l1_requirement(spec.A_m, spec.b, integrator,
                                                60.0, sets)
        assert ok and 0.0 < value < 1.0

    def test_robot_arm_fails_at_k10_over_k(self, arm, integrator):
        spec, sets = arm
        value, ok = bounds.check_l1_requirement(spec.A_m, spec.b, integrator,
                                                10.0 / sets.omega_l, sets,
                                                n_points=2)
        assert not ok and value > 1.0

    def test_zero_L_trivially_passes(self, arm, integrator):
        spec, _ = arm
        empty = plant.UncertaintySets((1.0, 5.0), [[0, 0], [0, 0]],
                                      10.0, 0.0, 0.0)
        assert bounds.check_l1_requirement(spec.A_m, spec.b, integrator,
                                           60.0, empty) == (0.0, True)


class TestHurwitzSweep:
    def test_zero_theta_box_always_stable(self, arm):
        spec, _ = arm
        empty = plant.UncertaintySets((0.5, 5.0), [[0, 0], [0, 0]],
                                      1.0, 0.0, 0.0)
        assert bounds.hurwitz_sweep(spec.A_m, spec.b, 60.0, empty,
                                    grid_per_dim=2)

    def test_zero_filter_gain_fails(self, arm):
        spec, sets = arm
        assert not bounds.hurwitz_sweep(spec.A_m, spec.b, 0.0, sets)

    def test_robot_arm_passes_at_k60(self, arm):
        spec, sets = arm
        assert bounds.hurwitz_sweep(spec.A_m, spec.b, 60.0, sets,
                                    grid_per_dim=3)


class TestOutputVector:
    def test_examples(self, arm):
        spec, _ = arm
        assert np.allclose(
            bounds.select_output_vector(spec.A_m, spec.b, [-1.0]), [1.0, 1.0])
        assert np.allclose(
            bounds.select_output_vector(spec.A_m, spec.b, [-2.0]), [2.0, 1.0])

    def test_unstable_zero_rejected(self, arm):
        spec, _ = arm
        with pytest.raises(ValueError):
            bounds.select_output_vector(spec.A_m, spec.b, [1.0])

    def test_uncontrollable_pair_rejected(self):
        with pytest.raises(bounds.NotControllable):
            bounds.select_output_vector(-np.eye(2), [1.0, 0.0], [-1.0])

    def test_random_pairs_minimum_phase_relative_degree_one(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            n = int(rng.integers(2, 5))
            A = rng.normal(size=(n, n))
            b = rng.normal(size=n)
            if np.linalg.matrix_rank(np.column_stack(
                    [np.linalg.matrix_power(A, i) @ b for i in range(n)])) < n:
                continue
            zeros = -rng.uniform(0.5, 3.0, size=n - 1)
            c_o = bounds.select_output_vector(A, b, zeros)
            _, M = lti.char_poly_and_adjugate(A)
            num = lti.Polynomial([float(c_o @ (Mk @ b)) for Mk in M])
            assert num.degree == n - 1
            assert np.max(num.roots().real) < 0.0
            assert np.allclose(np.sort(num.roots().real), np.sort(zeros),
                               atol=1e-6)


class TestThetaM:
    def unit_P(self):
        return lti.LyapunovPair(np.eye(2), np.eye(2))

    def test_delta_only(self):
        sets = plant.UncertaintySets((1.0, 1.0 + 1e-12), [[0, 0], [0, 0]],
                                     1.0, 0.0, 0.0)
        assert bounds.compute_theta_m(sets, self.unit_P()) == \
            pytest.approx(4.0)

    def test_omega_width_only(self):
        sets = plant.UncertaintySets((1.0, 2.0), [[0, 0], [0, 0]],
                                     1e-9, 0.0, 0.0)
        assert bounds.compute_theta_m(sets, self.unit_P()) == \
            pytest.approx(4.0)

    def test_robot_arm_term_by_term(self, arm):
        spec, sets = arm
        P = lti.lyapunov_solve(spec.A_m, np.eye(2))
        value = bounds.compute_theta_m(sets, P)
        quad = 4 * (100 + 100) + 4 * 100 + 4 * 16
        drift = 2 * (P.lambda_max_P / 1.0) * (math.sqrt(200) * 3.5
                                              + 3.2 * 10.0)
        assert value == pytest.approx(quad + drift, rel=1e-12)


class TestPerformanceBounds:
    def test_certificate_fields_and_ordering(self, arm, integrator):
        spec, sets = arm
        cfg = make_cfg(spec, sets, integrator)
        cert = bounds.compute_performance_bounds(cfg, spec.c, n_points=3)
        assert cert.l1_condition_pass and cert.passed
        assert 0.0 < cert.l1_condition_value < 1.0
        assert cert.gamma1 > 0.0 and cert.gamma2 > cert.gamma1
        assert cert.xtilde_bound == \
            pytest.approx(cert.details["xtilde_bound_lambda_min"])
        assert cert.details["gamma1_lambda_max"] < \
            cert.details["gamma1_lambda_min"]
        assert cert.hurwitz_sweep_pass is None
        assert "gamma1" in cert.report()

    def test_gamma1_square_root_law(self, arm, integrator):
        spec, sets = arm
        lo = bounds.compute_performance_bounds(
            make_cfg(spec, sets, integrator, gamma_c=1e2), spec.c, n_points=2)
        hi = bounds.compute_performance_bounds(
            make_cfg(spec, sets, integrator, gamma_c=1e4), spec.c, n_points=2)
        assert hi.gamma1 / lo.gamma1 == pytest.approx(0.1, rel=1e-9)

    def test_failed_condition_gives_infinite_gammas(self, arm, integrator):
        spec, sets = arm
        cfg = make_cfg(spec, sets, integrator, k=10.0 / sets.omega_l)
        cert = bounds.compute_performance_bounds(cfg, spec.c, n_points=2)
        assert not cert.l1_condition_pass and not cert.passed
        assert math.isinf(cert.gamma1) and math.isinf(cert.gamma2)

    def test_constant_theta_mode(self, arm, integrator):
        spec, sets = arm
        cfg = make_cfg(spec, sets, integrator)
        cert = bounds.compute_performance_bounds(
            cfg, spec.c, n_points=2, constant_theta=[2.0, 2.0],
            true_omega=1.0, grid_per_dim=2)
        assert cert.hurwitz_sweep_pass
        assert 0.0 < cert.gamma3 < cert.gamma4

    def test_constant_theta_needs_true_omega(self, arm, integrator):
        spec, sets = arm
        cfg = make_cfg(spec, sets, integrator)
        with pytest.raises(bounds.CertificateUnavailable):
            bounds.compute_performance_bounds(cfg, spec.c, n_points=2,
                                              constant_theta=[2.0, 2.0])
