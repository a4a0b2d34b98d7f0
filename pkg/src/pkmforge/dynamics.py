"""Dynamic performance measures: end-effector-felt inertia and the
guaranteed acceleration radius under bounded drive forces.

The inertia felt at the tool is ``G = J^-T D J^-1`` for a joint-space
inertia ``D``; its spectral norm bounds the largest inertia any direction
sees.  The acceleration capability is the set ``{J D^-1 tau}`` over the
force box ``|tau_i| <= tau_i_max`` - a zonotope.  The radius of the largest
origin-centered ball inside it is the acceleration the drives can guarantee
in *every* direction; an optional existence reading uses the zonotope's
farthest vertex instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._spectral import sym_eigvals_3x3
from .errors import SingularJacobian
from .grid import ScalarField, ThresholdPredicate
from .kinematics import GeometryParams, batch_rate_matrices, inverse_kinematics, jacobian

DEFAULT_SAMPLE_DIRECTIONS = 2048
_SIGMA_FLOOR = 1e-10


@dataclass(frozen=True)
class InertiaModel:
    """Lumped masses: one per drive carriage plus the tool platform."""

    joint_masses: np.ndarray
    tcp_mass: float

    def __post_init__(self):
        masses = np.asarray(self.joint_masses, dtype=float)
        if masses.shape != (3,) or np.any(masses <= 0.0):
            raise ValueError(f"joint_masses must be three positive values: {masses}")
        if not self.tcp_mass > 0.0:
            raise ValueError("tcp_mass must be positive")
        object.__setattr__(self, "joint_masses", masses)


@dataclass(frozen=True)
class DynamicSpec:
    """Bounds used by the dynamic grid predicates."""

    inertia_bound: float
    min_acceleration: float
    torque_limits: np.ndarray
    acceleration_mode: str = "ball"

    def __post_init__(self):
        if not self.inertia_bound > 0.0:
            raise ValueError("inertia_bound must be positive")
        if self.min_acceleration < 0.0:
            raise ValueError("min_acceleration must be >= 0")
        limits = np.asarray(self.torque_limits, dtype=float)
        if limits.shape != (3,) or np.any(limits <= 0.0):
            raise ValueError(f"torque_limits must be three positive values: {limits}")
        if self.acceleration_mode not in ("ball", "max"):
            raise ValueError(f"acceleration_mode must be 'ball' or 'max', got {self.acceleration_mode!r}")
        object.__setattr__(self, "torque_limits", limits)


def joint_space_inertia(model: InertiaModel, jac: np.ndarray) -> np.ndarray:
    """Drive-space inertia: carriage masses plus the tool mass reflected
    through the Jacobian (D = diag(m) + m_tcp * J^T J)."""
    jac = np.asarray(jac, dtype=float)
    return np.diag(model.joint_masses) + model.tcp_mass * (jac.T @ jac)


def generalized_inertia(jac: np.ndarray, inertia: np.ndarray) -> np.ndarray:
    """Tool-felt inertia ``G = J^-T D J^-1`` (symmetric positive definite)."""
    jac = np.asarray(jac, dtype=float)
    inertia = np.asarray(inertia, dtype=float)
    sigma = np.linalg.svd(jac, compute_uv=False)
    if sigma[-1] <= _SIGMA_FLOOR:
        raise SingularJacobian(f"Jacobian singular (sigma_min {sigma[-1]:g})")
    inv_jac = np.linalg.inv(jac)
    g = inv_jac.T @ inertia @ inv_jac
    return 0.5 * (g + g.T)


def fibonacci_sphere(count: int) -> np.ndarray:
    """Deterministic, roughly uniform unit directions on the sphere."""
    indices = np.arange(count, dtype=float)
    z = 1.0 - 2.0 * (indices + 0.5) / count
    radius = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    golden = np.pi * (3.0 - np.sqrt(5.0))
    theta = golden * indices
    return np.column_stack([radius * np.cos(theta), radius * np.sin(theta), z])


def _acceleration_generators(jac, inertia, torque_limits) -> np.ndarray:
    """Columns of J D^-1 scaled by the drive force limits."""
    jac = np.asarray(jac, dtype=float)
    inertia = np.asarray(inertia, dtype=float)
    limits = np.asarray(torque_limits, dtype=float)
    sigma = np.linalg.svd(jac, compute_uv=False)
    if sigma[-1] <= _SIGMA_FLOOR:
        raise SingularJacobian(f"Jacobian singular (sigma_min {sigma[-1]:g})")
    transmission = jac @ np.linalg.inv(inertia)
    return transmission * limits[None, :]


def min_achievable_acceleration(
    jac,
    inertia,
    torque_limits,
    mode: str = "ball",
    sample_directions: int = DEFAULT_SAMPLE_DIRECTIONS,
) -> float:
    """Guaranteed (or, in 'max' mode, best-case) acceleration magnitude.

    'ball' returns the radius of the largest origin-centered ball inside the
    acceleration zonotope: the minimum over the zonotope's facet normals of
    the support function, with a deterministic sphere sample of directions
    folded in as a cross-check.  'max' returns the farthest vertex norm (the
    existence reading of the capability).
    """
    generators = _acceleration_generators(jac, inertia, torque_limits)
    g0, g1, g2 = generators[:, 0], generators[:, 1], generators[:, 2]
    if mode == "max":
        best = 0.0
        for s1 in (-1.0, 1.0):
            for s2 in (-1.0, 1.0):
                best = max(best, float(np.linalg.norm(g0 + s1 * g1 + s2 * g2)))
        return best
    if mode != "ball":
        raise ValueError(f"mode must be 'ball' or 'max', got {mode!r}")

    normals = np.stack([np.cross(g0, g1), np.cross(g0, g2), np.cross(g1, g2)])
    lengths = np.linalg.norm(normals, axis=1)
    if np.any(lengths <= 0.0):
        raise SingularJacobian("acceleration generators are coplanar")
    normals = normals / lengths[:, None]
    directions = np.vstack([normals, fibonacci_sphere(sample_directions)])
    support = np.abs(directions @ generators).sum(axis=1)
    return float(support.min())


def zonotope_support_minimum(generators: np.ndarray, directions: np.ndarray) -> float:
    """Min over the given unit directions of the zonotope support function."""
    return float(np.abs(directions @ np.asarray(generators, dtype=float)).sum(axis=1).min())


# ---------------------------------------------------------------------------
# grid fields and predicates
# ---------------------------------------------------------------------------


def _batch_dynamics(positions: np.ndarray, geometry: GeometryParams, model: InertiaModel):
    """Vectorized reachability, rate matrices and joint-space inertias."""
    valid, m = batch_rate_matrices(positions, geometry)
    # J = inv(M), so J^T J = inv(M M^T); reflected tool inertia needs it
    gram = np.einsum("nij,nkj->nik", m, m)  # M M^T
    safe = np.where(valid[:, None, None], gram, np.eye(3)[None])
    jtj = np.linalg.inv(safe)
    inertia = np.diag(model.joint_masses)[None] + model.tcp_mass * jtj
    return valid, m, inertia


def inertia_norm_field(geometry: GeometryParams, model: InertiaModel) -> ScalarField:
    """Field of the spectral norm of the tool-felt inertia."""

    def scalar(position):
        rho = inverse_kinematics(position, geometry)
        jac = jacobian(position, rho)
        g = generalized_inertia(jac, joint_space_inertia(model, jac))
        return float(sym_eigvals_3x3(g)[..., 2])

    def batch(positions):
        valid, m, inertia = _batch_dynamics(positions, geometry, model)
        # G = J^-T D J^-1 = M^T D M
        g = np.einsum("nji,njk,nkl->nil", m, inertia, m)
        top = sym_eigvals_3x3(g)[..., 2]
        return np.where(valid, top, np.nan)

    return ScalarField(scalar, batch)


def acceleration_field(
    geometry: GeometryParams,
    model: InertiaModel,
    torque_limits,
    mode: str = "ball",
) -> ScalarField:
    """Field of the achievable acceleration magnitude per node."""
    limits = np.asarray(torque_limits, dtype=float)

    def scalar(position):
        rho = inverse_kinematics(position, geometry)
        jac = jacobian(position, rho)
        inertia = joint_space_inertia(model, jac)
        return min_achievable_acceleration(jac, inertia, limits, mode=mode)

    def batch(positions):
        valid, m, inertia = _batch_dynamics(positions, geometry, model)
        # J D^-1 = (D M)^-1
        dm = np.einsum("nij,njk->nik", inertia, m)
        safe = np.where(valid[:, None, None], dm, np.eye(3)[None])
        transmission = np.linalg.inv(safe)
        generators = transmission * limits[None, None, :]
        g0, g1, g2 = generators[:, :, 0], generators[:, :, 1], generators[:, :, 2]
        if mode == "max":
            best = np.zeros(positions.shape[0])
            for s1 in (-1.0, 1.0):
                for s2 in (-1.0, 1.0):
                    best = np.maximum(best, np.linalg.norm(g0 + s1 * g1 + s2 * g2, axis=1))
            return np.where(valid, best, np.nan)
        normals = np.stack([np.cross(g0, g1), np.cross(g0, g2), np.cross(g1, g2)], axis=1)
        lengths = np.linalg.norm(normals, axis=2)
        ok = valid & np.all(lengths > 0.0, axis=1)
        normals = normals / np.where(lengths > 0.0, lengths, 1.0)[:, :, None]
        support = np.abs(np.einsum("nfi,nij->nfj", normals, generators)).sum(axis=2)
        return np.where(ok, support.min(axis=1), np.nan)

    return ScalarField(scalar, batch)


def gie_predicate(geometry: GeometryParams, model: InertiaModel, spec: DynamicSpec) -> ThresholdPredicate:
    """Feasible when reachable and the tool-felt inertia norm stays bounded."""
    return ThresholdPredicate(inertia_norm_field(geometry, model), spec.inertia_bound, "below")


def acceleration_predicate(
    geometry: GeometryParams, model: InertiaModel, spec: DynamicSpec
) -> ThresholdPredicate:
    """Feasible when reachable and the guaranteed acceleration is sufficient."""
    field = acceleration_field(geometry, model, spec.torque_limits, mode=spec.acceleration_mode)
    return ThresholdPredicate(field, spec.min_acceleration, "above")
