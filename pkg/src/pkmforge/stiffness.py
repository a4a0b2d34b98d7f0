"""Lumped-spring (virtual joint) elastostatics for parallel chains.

Each kinematic chain is described by the Jacobians of its sprung
(virtual + active) and passive joints plus a spring matrix.  Passive joints
carry no reaction, which the force/deflection system encodes through a zero
block:

    [ J_s K_s^-1 J_s^T   J_p ] [ f  ]   [ dt ]
    [      J_p^T          0  ] [ dq ] = [ 0  ]

Inverting this block system and reading off the upper-left 6x6 block gives
the chain's Cartesian stiffness; chains aggregate by plain summation.

The Orthoglide chain model declared here (one actuator spring, a 6-DOF foot
spring in drive-aligned axes, the parallelogram lumped into a single
equivalent beam spring in leg-aligned axes, and two passive revolutes at the
foot point) keeps the whole pipeline self-contained with analytic beam
springs instead of externally identified parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import EmptyInput, Infeasible, SingularStiffness, SingularSystem
from .grid import ScalarField, ThresholdPredicate
from .kinematics import (
    GeometryParams,
    batch_inverse_kinematics,
    inverse_kinematics,
)

CONDITION_LIMIT = 1e12

# wrench/twist component ordering used everywhere: (x, y, z, rx, ry, rz)
WRENCH_SIZE = 6


@dataclass(frozen=True)
class ChainModel:
    """Per-chain Jacobians and spring matrix.

    j_virtual  (6, n_s) Jacobian of the sprung (virtual + active) joints
    j_passive  (6, n_p) Jacobian of the passive joints, n_p < 6
    k_virtual  (n_s, n_s) symmetric positive-definite spring matrix
    """

    j_virtual: np.ndarray
    j_passive: np.ndarray
    k_virtual: np.ndarray

    def __post_init__(self):
        j_s = np.atleast_2d(np.asarray(self.j_virtual, dtype=float))
        j_p = np.asarray(self.j_passive, dtype=float)
        if j_p.size == 0:
            j_p = np.zeros((WRENCH_SIZE, 0))
        j_p = np.atleast_2d(j_p)
        k_s = np.atleast_2d(np.asarray(self.k_virtual, dtype=float))
        if j_s.shape[0] != WRENCH_SIZE or j_p.shape[0] != WRENCH_SIZE:
            raise ValueError("chain Jacobians must have 6 rows")
        if j_p.shape[1] >= WRENCH_SIZE:
            raise ValueError(f"passive joint count must be < 6, got {j_p.shape[1]}")
        if k_s.shape != (j_s.shape[1], j_s.shape[1]):
            raise ValueError(f"spring matrix shape {k_s.shape} does not match {j_s.shape[1]} joints")
        scale = np.abs(k_s).max()
        if scale <= 0.0 or np.abs(k_s - k_s.T).max() > 1e-10 * scale:
            raise ValueError("spring matrix must be symmetric")
        try:
            np.linalg.cholesky(k_s)
        except np.linalg.LinAlgError as exc:
            raise ValueError("spring matrix must be positive definite") from exc
        object.__setattr__(self, "j_virtual", j_s)
        object.__setattr__(self, "j_passive", j_p)
        object.__setattr__(self, "k_virtual", k_s)

    @property
    def n_passive(self) -> int:
        return self.j_passive.shape[1]


@dataclass(frozen=True)
class CartesianStiffness:
    """6x6 Cartesian stiffness, translations (x, y, z) then rotations."""

    matrix: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.matrix, dtype=float)
        if k.shape != (WRENCH_SIZE, WRENCH_SIZE):
            raise ValueError(f"stiffness must be 6x6, got {k.shape}")
        scale = max(np.abs(k).max(), 1e-300)
        if np.abs(k - k.T).max() > 1e-8 * scale:
            raise ValueError("stiffness matrix must be symmetric")
        eigenvalues = np.linalg.eigvalsh(0.5 * (k + k.T))
        if eigenvalues.min() < -1e-8 * scale:
            raise ValueError(f"stiffness matrix must be PSD (min eigenvalue {eigenvalues.min():g})")
        object.__setattr__(self, "matrix", k)

    @property
    def translational(self) -> np.ndarray:
        return self.matrix[:3, :3]


@dataclass(frozen=True)
class CrossSection:
    """Rectangular beam cross-section and material constants."""

    width: float
    height: float
    elastic_modulus: float
    shear_modulus: float

    def __post_init__(self):
        for name in ("width", "height", "elastic_modulus", "shear_modulus"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class StiffnessSpec:
    """External load and the admissible translational deflection."""

    load: np.ndarray
    deflection_limit: float

    def __post_init__(self):
        f = np.asarray(self.load, dtype=float)
        if f.shape != (WRENCH_SIZE,):
            raise ValueError(f"load must be a 6-vector, got shape {f.shape}")
        if not self.deflection_limit > 0.0:
            raise ValueError("deflection_limit must be positive")
        object.__setattr__(self, "load", f)


def chain_cartesian_stiffness(chain: ChainModel, condition_limit: float = CONDITION_LIMIT) -> CartesianStiffness:
    """Cartesian stiffness of one chain from its block force system.

    Builds the (6 + n_p) square block matrix, inverts it, and extracts the
    upper-left 6x6 block.  Raises SingularSystem when the block matrix is too
    ill-conditioned (rank-deficient sprung Jacobian or too many passive
    freedoms).
    """
    compliance = chain.j_virtual @ np.linalg.solve(chain.k_virtual, chain.j_virtual.T)
    scale = np.abs(compliance).max()
    if not np.isfinite(scale) or scale <= 0.0:
        raise SingularSystem("chain compliance is degenerate")
    n_p = chain.n_passive
    size = WRENCH_SIZE + n_p
    # equilibrate the mixed-unit block (compliance vs. bare Jacobians) so the
    # inverse stays accurate for very stiff springs
    block = np.zeros((size, size))
    block[:WRENCH_SIZE, :WRENCH_SIZE] = compliance / scale
    if n_p:
        block[:WRENCH_SIZE, WRENCH_SIZE:] = chain.j_passive
        block[WRENCH_SIZE:, :WRENCH_SIZE] = chain.j_passive.T
    if not np.all(np.isfinite(block)) or np.linalg.cond(block) > condition_limit:
        raise SingularSystem("chain force system is rank deficient or ill-conditioned")
    stiffness = np.linalg.inv(block)[:WRENCH_SIZE, :WRENCH_SIZE] / scale
    return CartesianStiffness(stiffness)


def aggregate_stiffness(chains: Sequence[CartesianStiffness]) -> CartesianStiffness:
    """Manipulator stiffness: elementwise sum over the chain matrices."""
    if len(chains) == 0:
        raise EmptyInput("need at least one chain stiffness")
    total = np.zeros((WRENCH_SIZE, WRENCH_SIZE))
    for chain in chains:
        total = total + chain.matrix
    return CartesianStiffness(total)


def deflection(stiffness: CartesianStiffness, load, condition_limit: float = CONDITION_LIMIT) -> np.ndarray:
    """Twist deflection under a wrench: solves ``K @ dt = f``."""
    f = np.asarray(load, dtype=float)
    if f.shape != (WRENCH_SIZE,):
        raise ValueError(f"load must be a 6-vector, got shape {f.shape}")
    k = stiffness.matrix
    if np.linalg.cond(k) > condition_limit:
        raise SingularStiffness("aggregated stiffness is singular under this chain set")
    return np.linalg.solve(k, f)


def beam_spring(section: CrossSection, length: float) -> np.ndarray:
    """Cantilever spring matrix of a rectangular beam, tip loaded.

    Local axes: x axial, bending about y and z, torsion about x.  Uses the
    classical tip-stiffness block (12EI/L^3, 6EI/L^2, 4EI/L) with the
    beta = 1/3 thin-strip torsion constant approximation.
    """
    if length <= 0.0:
        raise ValueError("length must be positive")
    b, h = section.width, section.height
    e_mod, g_mod = section.elastic_modulus, section.shear_modulus
    area = b * h
    i_y = b * h**3 / 12.0
    i_z = h * b**3 / 12.0
    j_t = b * h * min(b, h) ** 2 / 3.0
    length3 = length**3
    k = np.zeros((WRENCH_SIZE, WRENCH_SIZE))
    k[0, 0] = e_mod * area / length
    k[1, 1] = 12.0 * e_mod * i_z / length3
    k[1, 5] = k[5, 1] = -6.0 * e_mod * i_z / length**2
    k[5, 5] = 4.0 * e_mod * i_z / length
    k[2, 2] = 12.0 * e_mod * i_y / length3
    k[2, 4] = k[4, 2] = 6.0 * e_mod * i_y / length**2
    k[4, 4] = 4.0 * e_mod * i_y / length
    k[3, 3] = g_mod * j_t / length
    return k


def scale_cross_section(section: CrossSection, factor: float) -> CrossSection:
    """Scale width by ``factor`` and height by ``1/factor`` (area preserved)."""
    if factor <= 0.0:
        raise ValueError("scale factor must be positive")
    return replace(section, width=section.width * factor, height=section.height / factor)


# ---------------------------------------------------------------------------
# Orthoglide chain construction
# ---------------------------------------------------------------------------

_AXIS = np.eye(3)
# local frame reference per chain; cyclic so the cross product never vanishes
# while the leg stays near its drive axis
_FRAME_REF = (1, 2, 0)


def _spring_columns(frame: np.ndarray, lever: np.ndarray) -> np.ndarray:
    """Twist columns of a 6-DOF spring frame acting at lever ``r`` from the tool."""
    cols = np.zeros((WRENCH_SIZE, 6))
    cols[:3, :3] = frame
    cols[:3, 3:] = np.cross(frame.T, lever).T
    cols[3:, 3:] = frame
    return cols


@dataclass(frozen=True)
class OrthoglideStiffnessModel:
    """Pose-dependent chain builder for the three-legged Orthoglide.

    Per chain: a 1-DOF actuator spring along the drive, a 6-DOF foot spring
    in drive-aligned axes, a 6-DOF equivalent-beam spring for the
    parallelogram in leg-aligned axes (beam length = leg length), and two
    passive revolutes perpendicular to the leg.
    """

    geometry: GeometryParams
    actuator_stiffness: float
    foot_section: CrossSection
    foot_length: float
    parallelogram_section: CrossSection

    def __post_init__(self):
        if self.actuator_stiffness <= 0.0 or self.foot_length <= 0.0:
            raise ValueError("actuator_stiffness and foot_length must be positive")

    def _spring_matrix(self, leg: int) -> np.ndarray:
        k = np.zeros((13, 13))
        k[0, 0] = self.actuator_stiffness
        k[1:7, 1:7] = beam_spring(self.foot_section, self.foot_length)
        k[7:13, 7:13] = beam_spring(
            self.parallelogram_section, float(self.geometry.leg_lengths[leg])
        )
        return k

    def _leg_frames(self, p: np.ndarray, rho: np.ndarray, leg: int):
        anchor = rho[leg] * _AXIS[leg]
        lever = p - anchor
        direction = lever / self.geometry.leg_lengths[leg]
        ref = _AXIS[_FRAME_REF[leg]]
        normal1 = np.cross(direction, ref)
        norm = np.linalg.norm(normal1)
        if norm < 1e-9:
            raise Infeasible(f"leg {leg} aligned with its frame reference axis")
        normal1 /= norm
        normal2 = np.cross(direction, normal1)
        return lever, direction, normal1, normal2

    def chains(self, p) -> list[ChainModel]:
        """The three chain models at tool point ``p`` (raises Infeasible)."""
        p = np.asarray(p, dtype=float)
        rho = inverse_kinematics(p, self.geometry)
        models = []
        for leg in range(3):
            lever, direction, normal1, normal2 = self._leg_frames(p, rho, leg)
            j_virtual = np.zeros((WRENCH_SIZE, 13))
            j_virtual[:3, 0] = _AXIS[leg]
            foot_frame = np.column_stack(
                [_AXIS[leg], _AXIS[(leg + 1) % 3], _AXIS[(leg + 2) % 3]]
            )
            j_virtual[:, 1:7] = _spring_columns(foot_frame, lever)
            leg_frame = np.column_stack([direction, normal1, normal2])
            j_virtual[:, 7:13] = _spring_columns(leg_frame, lever)
            j_passive = np.zeros((WRENCH_SIZE, 2))
            j_passive[:3, 0] = np.cross(normal1, lever)
            j_passive[3:, 0] = normal1
            j_passive[:3, 1] = np.cross(normal2, lever)
            j_passive[3:, 1] = normal2
            models.append(
                ChainModel(
                    j_virtual=j_virtual,
                    j_passive=j_passive,
                    k_virtual=self._spring_matrix(leg),
                )
            )
        return models

    def __call__(self, p) -> list[ChainModel]:
        return self.chains(p)

    def cartesian_stiffness(self, p) -> CartesianStiffness:
        return aggregate_stiffness([chain_cartesian_stiffness(c) for c in self.chains(p)])

    # -- vectorized path ----------------------------------------------------

    def batch_cartesian_stiffness(self, positions: np.ndarray):
        """Aggregated stiffness over (N, 3) positions.

        Returns (valid, K) with K of shape (N, 6, 6); rows where assembly or
        inversion failed are flagged invalid.
        """
        pts = np.asarray(positions, dtype=float)
        valid, rho = batch_inverse_kinematics(pts, self.geometry)
        n = pts.shape[0]
        total = np.zeros((n, WRENCH_SIZE, WRENCH_SIZE))
        for leg in range(3):
            anchor = np.zeros((n, 3))
            anchor[:, leg] = rho[:, leg]
            lever = pts - anchor
            direction = lever / self.geometry.leg_lengths[leg]
            ref = _AXIS[_FRAME_REF[leg]]
            normal1 = np.cross(direction, ref)
            norms = np.linalg.norm(normal1, axis=1)
            valid = valid & (norms >= 1e-9)
            normal1 = normal1 / np.where(norms >= 1e-9, norms, 1.0)[:, None]
            normal2 = np.cross(direction, normal1)

            j_virtual = np.zeros((n, WRENCH_SIZE, 13))
            j_virtual[:, :3, 0] = _AXIS[leg]
            foot_axes = (_AXIS[leg], _AXIS[(leg + 1) % 3], _AXIS[(leg + 2) % 3])
            for m, axis in enumerate(foot_axes):
                j_virtual[:, :3, 1 + m] = axis
                j_virtual[:, :3, 4 + m] = np.cross(np.broadcast_to(axis, lever.shape), lever)
                j_virtual[:, 3:, 4 + m] = axis
            for m, axis in enumerate((direction, normal1, normal2)):
                j_virtual[:, :3, 7 + m] = axis
                j_virtual[:, :3, 10 + m] = np.cross(axis, lever)
                j_virtual[:, 3:, 10 + m] = axis

            j_passive = np.zeros((n, WRENCH_SIZE, 2))
            j_passive[:, :3, 0] = np.cross(normal1, lever)
            j_passive[:, 3:, 0] = normal1
            j_passive[:, :3, 1] = np.cross(normal2, lever)
            j_passive[:, 3:, 1] = normal2

            k_inv = np.linalg.inv(self._spring_matrix(leg))
            compliance = np.einsum("nij,jk,nlk->nil", j_virtual, k_inv, j_virtual)
            scale = np.abs(compliance).max(axis=(1, 2))
            valid = valid & np.isfinite(scale) & (scale > 0.0)
            safe_scale = np.where(valid, scale, 1.0)
            size = WRENCH_SIZE + 2
            block = np.zeros((n, size, size))
            block[:, :WRENCH_SIZE, :WRENCH_SIZE] = compliance / safe_scale[:, None, None]
            block[:, :WRENCH_SIZE, WRENCH_SIZE:] = j_passive
            block[:, WRENCH_SIZE:, :WRENCH_SIZE] = np.transpose(j_passive, (0, 2, 1))
            # keep invalid rows invertible so the batched inverse cannot throw
            block[~valid] = np.eye(size)
            try:
                inverse = np.linalg.inv(block)
            except np.linalg.LinAlgError:
                inverse = np.empty_like(block)
                for row in range(n):
                    try:
                        inverse[row] = np.linalg.inv(block[row])
                    except np.linalg.LinAlgError:
                        valid[row] = False
                        inverse[row] = np.eye(size)
            total += inverse[:, :WRENCH_SIZE, :WRENCH_SIZE] / safe_scale[:, None, None]
        return valid, total

    def batch_deflection(self, positions: np.ndarray, load):
        """Translational deflection norm under ``load`` over (N, 3) positions."""
        f = np.asarray(load, dtype=float)
        valid, stiffness = self.batch_cartesian_stiffness(positions)
        n = stiffness.shape[0]
        values = np.full(n, np.nan)
        if not valid.any():
            return valid, values
        k_sub = stiffness[valid]
        eigenvalues = np.linalg.eigvalsh(0.5 * (k_sub + np.transpose(k_sub, (0, 2, 1))))
        well = eigenvalues[:, 0] > eigenvalues[:, -1] / CONDITION_LIMIT
        solvable = np.where(valid)[0][well]
        if solvable.size:
            rhs = np.tile(f.reshape(1, WRENCH_SIZE, 1), (solvable.size, 1, 1))
            twists = np.linalg.solve(stiffness[solvable], rhs)[:, :, 0]
            values[solvable] = np.linalg.norm(twists[:, :3], axis=1)
        valid = np.zeros_like(valid)
        valid[solvable] = True
        return valid, values

    def batch_min_translational_stiffness(self, positions: np.ndarray):
        """Smallest eigenvalue of the translational stiffness block per node."""
        from ._spectral import sym_eigvals_3x3

        valid, stiffness = self.batch_cartesian_stiffness(positions)
        block = stiffness[:, :3, :3]
        lows = sym_eigvals_3x3(0.5 * (block + np.transpose(block, (0, 2, 1))))[..., 0]
        return valid, np.where(valid, lows, np.nan)


def deflection_field(builder, load) -> ScalarField:
    """Field of the translational deflection norm under a fixed wrench.

    ``builder`` maps a pose to the chain models; builders exposing
    ``batch_deflection`` get the vectorized sweep.
    """
    f = np.asarray(load, dtype=float)

    def scalar(position):
        chains = builder(position)
        stiffness = aggregate_stiffness([chain_cartesian_stiffness(c) for c in chains])
        twist = deflection(stiffness, f)
        return float(np.linalg.norm(twist[:3]))

    batch = None
    if hasattr(builder, "batch_deflection"):

        def batch(positions):
            _, values = builder.batch_deflection(positions, f)
            return values

    return ScalarField(scalar, batch)


def stiffness_predicate(builder, spec: StiffnessSpec, field: ScalarField | None = None) -> ThresholdPredicate:
    """Node predicate: reachable and deflection norm within the limit.

    Pass a shared ``field`` (from deflection_field) when sweeping several
    limits so the stiffness map is computed once.
    """
    if field is None:
        field = deflection_field(builder, spec.load)
    return ThresholdPredicate(field, spec.deflection_limit, feasible_when="below")


def cross_section_sweep(
    model: OrthoglideStiffnessModel,
    pose,
    load,
    scale_factors: Sequence[float],
) -> np.ndarray:
    """Deflection norm at one pose as the parallelogram section is reshaped.

    Every factor scales width by ``mu`` and height by ``1/mu``, preserving
    the section area (and so the link mass).
    """
    f = np.asarray(load, dtype=float)
    values = np.empty(len(scale_factors))
    for idx, factor in enumerate(scale_factors):
        scaled = replace(
            model,
            parallelogram_section=scale_cross_section(model.parallelogram_section, factor),
        )
        stiffness = scaled.cartesian_stiffness(pose)
        values[idx] = float(np.linalg.norm(deflection(stiffness, f)[:3]))
    return values
