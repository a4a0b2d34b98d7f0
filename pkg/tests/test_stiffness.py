import numpy as np
import pytest
from scipy.linalg import null_space

from pkmforge.errors import EmptyInput, SingularStiffness, SingularSystem
from pkmforge.grid import GridSpec, ThresholdPredicate, evaluate_mask, nested_cuboids
from pkmforge.kinematics import GeometryParams
from pkmforge.stiffness import (
    CartesianStiffness,
    ChainModel,
    CrossSection,
    OrthoglideStiffnessModel,
    StiffnessSpec,
    aggregate_stiffness,
    beam_spring,
    chain_cartesian_stiffness,
    cross_section_sweep,
    deflection,
    deflection_field,
    scale_cross_section,
    stiffness_predicate,
)

ALUMINUM = CrossSection(width=0.025, height=0.025, elastic_modulus=7e10, shear_modulus=2.6e10)


def random_chain(rng, n_virtual=12, n_passive=2):
    j_virtual = rng.normal(size=(6, n_virtual))
    seed = rng.normal(size=(n_virtual, n_virtual))
    k_virtual = seed @ seed.T + n_virtual * np.eye(n_virtual)
    j_passive = rng.normal(size=(6, n_passive))
    return ChainModel(j_virtual=j_virtual, j_passive=j_passive, k_virtual=k_virtual)


def oracle_stiffness(chain):
    """Independent constrained-compliance elimination of the passive freedoms."""
    compliance = chain.j_virtual @ np.linalg.solve(chain.k_virtual, chain.j_virtual.T)
    if chain.n_passive == 0:
        return np.linalg.inv(compliance)
    basis = null_space(chain.j_passive.T)
    return basis @ np.linalg.solve(basis.T @ compliance @ basis, basis.T)


def default_model(deflection_limit=1e-4):
    geometry = GeometryParams([1.0, 1.0, 1.0], [[-1.9, -0.1]] * 3)
    model = OrthoglideStiffnessModel(
        geometry=geometry,
        actuator_stiffness=1e8,
        foot_section=CrossSection(0.04, 0.04, 7e10, 2.6e10),
        foot_length=0.15,
        parallelogram_section=ALUMINUM,
    )
    spec = StiffnessSpec(load=[0.0, 200.0, 200.0, 0.0, 0.0, 0.0], deflection_limit=deflection_limit)
    return model, spec


class TestChainStiffness:
    def test_trivial_chain_is_exactly_scaled_identity(self):
        chain = ChainModel(np.eye(6), np.zeros((6, 0)), 4.0 * np.eye(6))
        assert np.array_equal(chain_cartesian_stiffness(chain).matrix, 4.0 * np.eye(6))

    def test_single_passive_direction_annihilated(self, rng):
        for _ in range(50):
            chain = random_chain(rng, n_passive=1)
            k = chain_cartesian_stiffness(chain).matrix
            axis = chain.j_passive[:, 0]
            assert abs(axis @ k @ axis) <= 1e-8 * np.abs(k).max()

    def test_matches_null_space_oracle(self, rng):
        for _ in range(50):
            chain = random_chain(rng)
            k = chain_cartesian_stiffness(chain).matrix
            reference = oracle_stiffness(chain)
            assert np.abs(k - reference).max() <= 1e-8 * np.abs(reference).max()

    def test_spring_scaling_homogeneity(self, rng):
        chain = random_chain(rng)
        k1 = chain_cartesian_stiffness(chain).matrix
        scaled = ChainModel(chain.j_virtual, chain.j_passive, 2.5 * chain.k_virtual)
        k2 = chain_cartesian_stiffness(scaled).matrix
        assert np.allclose(k2, 2.5 * k1, rtol=1e-10)

    def test_rank_deficient_raises(self):
        # five passive freedoms leave the block system rank deficient
        j_virtual = np.zeros((6, 6))
        j_virtual[0, 0] = 1.0
        chain = ChainModel(j_virtual + 1e-16 * np.eye(6), np.eye(6)[:, :5], np.eye(6))
        with pytest.raises(SingularSystem):
            chain_cartesian_stiffness(chain)

    def test_output_is_symmetric_psd(self, rng):
        for _ in range(20):
            chain = random_chain(rng, n_passive=rng.integers(0, 4))
            k = chain_cartesian_stiffness(chain).matrix
            assert np.abs(k - k.T).max() <= 1e-10 * np.abs(k).max()
            assert np.linalg.eigvalsh(k).min() >= -1e-10 * np.abs(k).max()


class TestAggregation:
    def test_two_identical_chains_double(self, rng):
        k = chain_cartesian_stiffness(random_chain(rng))
        total = aggregate_stiffness([k, k])
        assert np.array_equal(total.matrix, 2.0 * k.matrix)

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            aggregate_stiffness([])

    def test_permutation_invariant(self, rng):
        chains = [chain_cartesian_stiffness(random_chain(rng)) for _ in range(3)]
        forward = aggregate_stiffness(chains).matrix
        backward = aggregate_stiffness(chains[::-1]).matrix
        assert np.allclose(forward, backward, rtol=0, atol=1e-9 * np.abs(forward).max())

    def test_orthogonal_passive_chains_give_definite_sum(self):
        # each chain is soft along one passive twist; together they cover R^6
        chains = []
        for axis in range(3):
            j_passive = np.zeros((6, 1))
            j_passive[axis, 0] = 1.0
            j_passive[3 + axis, 0] = 0.5
            chains.append(
                chain_cartesian_stiffness(ChainModel(np.eye(6), j_passive, np.eye(6)))
            )
            j_passive = np.zeros((6, 1))
            j_passive[3 + axis, 0] = 1.0
            j_passive[(axis + 1) % 3, 0] = -0.5
            chains.append(
                chain_cartesian_stiffness(ChainModel(np.eye(6), j_passive, np.eye(6)))
            )
        for chain in chains:
            assert np.linalg.eigvalsh(chain.matrix).min() <= 1e-9  # each singular alone
        total = aggregate_stiffness(chains)
        assert np.linalg.eigvalsh(total.matrix).min() > 0.0

    def test_adding_a_chain_never_softens(self, rng):
        base = [chain_cartesian_stiffness(random_chain(rng)) for _ in range(2)]
        extra = chain_cartesian_stiffness(random_chain(rng))
        before = np.linalg.eigvalsh(aggregate_stiffness(base).matrix)
        after = np.linalg.eigvalsh(aggregate_stiffness(base + [extra]).matrix)
        assert np.all(after >= before - 1e-8 * np.abs(before).max())


class TestDeflection:
    def test_isotropic_stiffness(self):
        k = CartesianStiffness(5.0 * np.eye(6))
        twist = deflection(k, [10.0, 0, 0, 0, 0, 0])
        assert np.allclose(twist, [2.0, 0, 0, 0, 0, 0])

    def test_linearity(self, rng):
        seed = rng.normal(size=(6, 6))
        k = CartesianStiffness(seed @ seed.T + 6 * np.eye(6))
        f = rng.normal(size=6)
        assert np.allclose(deflection(k, 2 * f), 2 * deflection(k, f), rtol=1e-12)

    def test_residual(self, rng):
        for _ in range(20):
            seed = rng.normal(size=(6, 6))
            k = CartesianStiffness(seed @ seed.T + 6 * np.eye(6))
            f = rng.normal(size=6)
            twist = deflection(k, f)
            assert np.linalg.norm(k.matrix @ twist - f) <= 1e-9 * np.linalg.norm(f)

    def test_singular_raises(self):
        nearly_singular = np.diag([1.0, 1.0, 1.0, 1.0, 1.0, 1e-14])
        with pytest.raises(SingularStiffness):
            deflection(CartesianStiffness(nearly_singular), np.ones(6))


class TestBeamSpring:
    def test_axial_entry(self):
        k = beam_spring(ALUMINUM, 0.5)
        expected = ALUMINUM.elastic_modulus * ALUMINUM.width * ALUMINUM.height / 0.5
        assert k[0, 0] == pytest.approx(expected)

    def test_doubling_modulus_doubles_elastic_entries(self):
        k1 = beam_spring(ALUMINUM, 0.5)
        stiffer = CrossSection(ALUMINUM.width, ALUMINUM.height, 2 * ALUMINUM.elastic_modulus, ALUMINUM.shear_modulus)
        k2 = beam_spring(stiffer, 0.5)
        elastic = np.ones((6, 6), bool)
        elastic[3, 3] = False  # torsion follows the shear modulus instead
        assert np.allclose(k2[elastic], 2 * k1[elastic])
        assert k2[3, 3] == k1[3, 3]

    def test_positive_definite_reference_section(self):
        section = CrossSection(0.02, 0.02, 7e10, 2.6e10)
        eigenvalues = np.linalg.eigvalsh(beam_spring(section, 0.5))
        assert eigenvalues.min() > 0.0


class TestCrossSectionScaling:
    def test_identity(self):
        assert scale_cross_section(ALUMINUM, 1.0) == ALUMINUM

    def test_area_preserved_at_reported_optimum_region(self):
        scaled = scale_cross_section(ALUMINUM, 1.8)
        assert scaled.width * scaled.height == pytest.approx(ALUMINUM.width * ALUMINUM.height, rel=1e-15)

    def test_inverse_round_trip(self):
        scaled = scale_cross_section(scale_cross_section(ALUMINUM, 1.7), 1 / 1.7)
        assert scaled.width == pytest.approx(ALUMINUM.width, rel=1e-12)
        assert scaled.height == pytest.approx(ALUMINUM.height, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            scale_cross_section(ALUMINUM, 0.0)


class TestOrthoglideModel:
    def test_chain_shapes(self):
        model, _ = default_model()
        chains = model.chains([0.1, -0.1, 0.2])
        assert len(chains) == 3
        for chain in chains:
            assert chain.j_virtual.shape == (6, 13)
            assert chain.j_passive.shape == (6, 2)
            assert chain.k_virtual.shape == (13, 13)

    def test_aggregate_definite_at_reachable_poses(self, rng):
        model, _ = default_model()
        from conftest import sample_reachable_points

        for p in sample_reachable_points(model.geometry, rng, 10):
            total = model.cartesian_stiffness(p)
            assert np.linalg.eigvalsh(total.matrix).min() > 0.0

    def test_batch_matches_scalar(self, rng):
        model, spec = default_model()
        points = np.array([[0.0, 0.0, 0.0], [0.2, 0.1, -0.15], [0.3, -0.2, 0.25], [9.0, 0.0, 0.0]])
        valid, values = model.batch_deflection(points, spec.load)
        field = deflection_field(model, spec.load)
        for idx, p in enumerate(points):
            scalar = field(p)
            if np.isnan(scalar):
                assert not valid[idx]
            else:
                assert values[idx] == pytest.approx(scalar, rel=1e-9)

    def test_stiffer_springs_deflect_less(self):
        model, spec = default_model()
        stiffer = OrthoglideStiffnessModel(
            geometry=model.geometry,
            actuator_stiffness=model.actuator_stiffness,
            foot_section=model.foot_section,
            foot_length=model.foot_length,
            parallelogram_section=CrossSection(0.05, 0.05, 7e10, 2.6e10),
        )
        field_soft = deflection_field(model, spec.load)
        field_stiff = deflection_field(stiffer, spec.load)
        p = [0.2, 0.15, -0.1]
        assert field_stiff(p) < field_soft(p)


class TestStiffnessPredicate:
    def test_infinite_limit_reduces_to_reachability(self):
        model, _ = default_model()
        spec = GridSpec(origin=(-0.6, -0.6, -0.6), proportions=(1, 1, 1), resolution=8, dims=(11, 11, 11))
        predicate = stiffness_predicate(model, StiffnessSpec(load=[0, 200, 200, 0, 0, 0], deflection_limit=1e30))
        mask = evaluate_mask(spec, predicate)
        from pkmforge.kinematics import is_reachable

        for (i, j, k), value in np.ndenumerate(mask.data):
            assert value == is_reachable(spec.node_position((i, j, k)), model.geometry)

    def test_zero_limit_rejects_everything(self):
        model, _ = default_model()
        spec = GridSpec(origin=(-0.4, -0.4, -0.4), proportions=(1, 1, 1), resolution=8, dims=(7, 7, 7))
        tiny = StiffnessSpec(load=[0, 200.0, 200.0, 0, 0, 0], deflection_limit=1e-300)
        mask = evaluate_mask(spec, stiffness_predicate(model, tiny))
        assert not mask.data.any()

    def test_tightening_limit_shrinks_cuboid(self):
        model, base = default_model()
        spec = GridSpec(origin=(-0.5, -0.5, -0.5), proportions=(1, 1, 1), resolution=16, dims=(17, 17, 17))
        field = deflection_field(model, base.load)

        def family(limit):
            return ThresholdPredicate(field, limit, "below")

        results = nested_cuboids(spec, family, [2e-5, 4e-5, 8e-5, 1.6e-4, 3.2e-4])
        edges = [r.node_edge for r in results]
        assert edges == sorted(edges)
        assert edges[-1] > edges[0]  # the sweep actually spans the transition


class TestTypeValidation:
    def test_chain_rejects_asymmetric_spring(self, rng):
        k = np.eye(6)
        k[0, 1] = 1e-3
        with pytest.raises(ValueError):
            ChainModel(np.eye(6), np.zeros((6, 0)), k)

    def test_chain_rejects_indefinite_spring(self):
        with pytest.raises(ValueError):
            ChainModel(np.eye(6), np.zeros((6, 0)), -np.eye(6))

    def test_chain_rejects_six_passive_joints(self):
        with pytest.raises(ValueError):
            ChainModel(np.eye(6), np.eye(6), np.eye(6))

    def test_cartesian_stiffness_rejects_indefinite(self):
        with pytest.raises(ValueError):
            CartesianStiffness(np.diag([1.0, 1, 1, 1, 1, -1]))

    def test_spec_rejects_nonpositive_limit(self):
        with pytest.raises(ValueError):
            StiffnessSpec(load=np.zeros(6), deflection_limit=0.0)

    def test_cross_section_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            CrossSection(width=0.0, height=0.01, elastic_modulus=7e10, shear_modulus=2.6e10)


class TestCrossSectionStudy:
    def test_interior_optimum_exists(self):
        model, spec = default_model()
        factors = np.linspace(0.5, 3.0, 21)
        pose = [0.2, 0.25, -0.1]
        values = cross_section_sweep(model, pose, spec.load, factors)
        best = int(np.argmin(values))
        assert 0 < best < len(factors) - 1
        assert values[best] < values[0]
        assert values[best] < values[-1]
