import numpy as np
import pytest

from conftest import sample_reachable_points
from pkmforge.errors import Infeasible, NoConvergence, Singular
from pkmforge.kinematics import (
    GeometryParams,
    batch_transmission,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    kinematic_sample,
    leg_residuals,
    rate_matrix,
)


class TestInverseKinematics:
    def test_symmetric_origin(self, symmetric_geometry):
        rho = inverse_kinematics([0, 0, 0], symmetric_geometry)
        assert np.array_equal(rho, [-1.0, -1.0, -1.0])

    def test_positive_branch_leg_x(self):
        # 0.8^2 + 0.6^2 = 1: the x drive sits at 0.8 on the + branch
        geometry = GeometryParams([1, 1, 1], [[-3, 3]] * 3, assembly_signs=[1, 1, 1])
        rho = inverse_kinematics([0.0, 0.6, 0.0], geometry)
        assert rho[0] == pytest.approx(0.8, abs=1e-15)
        assert abs(leg_residuals([0.0, 0.6, 0.0], rho, geometry)[0]) == 0.0

    def test_out_of_reach(self, symmetric_geometry):
        with pytest.raises(Infeasible):
            inverse_kinematics([0.0, 1.1, 0.0], symmetric_geometry)

    def test_joint_limit_violation(self):
        geometry = GeometryParams([1, 1, 1], [[-0.5, 0.5]] * 3)
        with pytest.raises(Infeasible):
            inverse_kinematics([0, 0, 0], geometry)  # rho = -1 outside [-0.5, 0.5]

    def test_residuals_within_tolerance(self, symmetric_geometry, rng):
        lengths_sq = symmetric_geometry.leg_lengths**2
        for p in sample_reachable_points(symmetric_geometry, rng, 50):
            rho = inverse_kinematics(p, symmetric_geometry)
            residual = np.abs(leg_residuals(p, rho, symmetric_geometry))
            assert np.all(residual <= 1e-9 * lengths_sq)


class TestForwardKinematics:
    def test_identity_case(self, symmetric_geometry):
        p = forward_kinematics([-1, -1, -1], symmetric_geometry, [0.1, 0.1, 0.1])
        assert np.allclose(p, 0.0, atol=1e-9)

    def test_round_trip(self, symmetric_geometry, rng):
        for p in sample_reachable_points(symmetric_geometry, rng, 100):
            rho = inverse_kinematics(p, symmetric_geometry)
            seed = p + rng.uniform(-0.02, 0.02, size=3)
            recovered = forward_kinematics(rho, symmetric_geometry, seed)
            assert np.linalg.norm(recovered - p) <= 1e-8

    def test_singular_seed_raises(self, symmetric_geometry):
        # at p = 0 the residual Jacobian row of a zeroed drive vanishes
        with pytest.raises(NoConvergence):
            forward_kinematics([0.0, -1.0, -1.0], GeometryParams([1, 1, 1], [[-3, 3]] * 3), [0.0, 0.0, 0.0])

    def test_iteration_cap(self, symmetric_geometry):
        with pytest.raises(NoConvergence):
            forward_kinematics([-1, -1, -1], symmetric_geometry, [0.4, -0.3, 0.2], max_iterations=1)


class TestJacobian:
    def test_identity_at_origin(self):
        assert np.array_equal(jacobian([0, 0, 0], [-1, -0.7, -1.3]), np.eye(3))

    def test_finite_difference_agreement(self, symmetric_geometry, rng):
        # central differences of the forward map, solved to near machine
        # precision so the quotient noise stays far below the tolerance
        step = 1e-6
        points = sample_reachable_points(symmetric_geometry, rng, 100, sigma_min_floor=0.1)
        for p in points:
            rho = inverse_kinematics(p, symmetric_geometry)
            analytic = jacobian(p, rho)
            fd = np.empty((3, 3))
            for j in range(3):
                offset = np.zeros(3)
                offset[j] = step
                plus = forward_kinematics(rho + offset, symmetric_geometry, p, residual_scale=1e-15)
                minus = forward_kinematics(rho - offset, symmetric_geometry, p, residual_scale=1e-15)
                fd[:, j] = (plus - minus) / (2 * step)
            error = np.abs(fd - analytic).max() / np.abs(analytic).max()
            assert error <= 1e-6

    def test_zero_denominator_raises(self):
        with pytest.raises(Singular):
            jacobian([0.5, 0.1, 0.1], [0.5, -1.0, -1.0])

    def test_rate_matrix_entries(self):
        p = np.array([0.1, 0.2, 0.3])
        rho = np.array([-0.9, -0.8, -0.7])
        m = rate_matrix(p, rho)
        assert m[0, 1] == pytest.approx(p[1] / (p[0] - rho[0]))
        assert m[2, 0] == pytest.approx(p[0] / (p[2] - rho[2]))
        assert np.all(np.diag(m) == 1.0)


class TestKinematicSample:
    def test_isotropic_point(self, symmetric_geometry):
        sample = kinematic_sample([0, 0, 0], symmetric_geometry)
        assert np.array_equal(sample.jacobian, np.eye(3))
        assert abs(sample.cond - 1.0) <= 1e-12
        assert sample.sigma_min == sample.sigma_max == 1.0

    def test_singular_values_match_eigensolver(self, symmetric_geometry, rng):
        for p in sample_reachable_points(symmetric_geometry, rng, 100):
            sample = kinematic_sample(p, symmetric_geometry)
            eigenvalues = np.linalg.eigvalsh(sample.jacobian.T @ sample.jacobian)
            lo, hi = np.sqrt(eigenvalues[0]), np.sqrt(eigenvalues[-1])
            assert abs(sample.sigma_min - lo) <= 1e-9 * max(1.0, lo)
            assert abs(sample.sigma_max - hi) <= 1e-9 * max(1.0, hi)

    def test_cond_at_least_one_on_grid(self, symmetric_geometry):
        axis = np.linspace(-0.5, 0.5, 21)
        xs, ys, zs = np.meshgrid(axis, axis, axis, indexing="ij")
        points = np.column_stack([xs.ravel(), ys.ravel(), zs.ravel()])
        valid, cond, _, _ = batch_transmission(points, symmetric_geometry)
        assert valid.sum() > 0
        assert np.all(cond[valid] >= 1.0)

    def test_scale_invariance(self, symmetric_geometry, rng):
        scale = 3.7
        scaled_geometry = GeometryParams(
            leg_lengths=scale * symmetric_geometry.leg_lengths,
            joint_limits=scale * symmetric_geometry.joint_limits,
            assembly_signs=symmetric_geometry.assembly_signs,
        )
        for p in sample_reachable_points(symmetric_geometry, rng, 25):
            base = kinematic_sample(p, symmetric_geometry)
            scaled = kinematic_sample(scale * p, scaled_geometry)
            assert np.allclose(scaled.jacobian, base.jacobian, rtol=1e-10, atol=1e-12)
            assert scaled.cond == pytest.approx(base.cond, rel=1e-10)
            assert scaled.sigma_min == pytest.approx(base.sigma_min, rel=1e-10)
            assert scaled.sigma_max == pytest.approx(base.sigma_max, rel=1e-10)

    def test_infeasible_propagates(self, symmetric_geometry):
        with pytest.raises(Infeasible):
            kinematic_sample([0, 1.1, 0], symmetric_geometry)


class TestBatchConsistency:
    def test_batch_matches_scalar(self, symmetric_geometry, rng):
        points = sample_reachable_points(symmetric_geometry, rng, 40)
        valid, cond, sigma_min, sigma_max = batch_transmission(points, symmetric_geometry)
        assert valid.all()
        for idx, p in enumerate(points):
            sample = kinematic_sample(p, symmetric_geometry)
            assert cond[idx] == pytest.approx(sample.cond, rel=1e-12)
            assert sigma_min[idx] == pytest.approx(sample.sigma_min, rel=1e-12)
            assert sigma_max[idx] == pytest.approx(sample.sigma_max, rel=1e-12)

    def test_unreachable_rows_are_nan(self, symmetric_geometry):
        points = np.array([[0.0, 0.0, 0.0], [5.0, 5.0, 5.0]])
        valid, cond, _, _ = batch_transmission(points, symmetric_geometry)
        assert valid.tolist() == [True, False]
        assert np.isnan(cond[1])


class TestGeometryValidation:
    def test_rejects_bad_lengths(self):
        with pytest.raises(ValueError):
            GeometryParams([1, -1, 1], [[-1, 1]] * 3)

    def test_rejects_degenerate_limits(self):
        with pytest.raises(ValueError):
            GeometryParams([1, 1, 1], [[0.5, 0.5]] * 3)

    def test_rejects_bad_signs(self):
        with pytest.raises(ValueError):
            GeometryParams([1, 1, 1], [[-1, 1]] * 3, assembly_signs=[0, 1, 1])
