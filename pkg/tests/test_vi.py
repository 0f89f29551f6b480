import numpy as np
import pytest
from qp_oracle import project_qp

from dasa import vi


def affine_mapping(matrix):
    matrix = np.asarray(matrix, dtype=np.float64)

    def f(x):
        return matrix @ x

    def sampler(x, rng):
        return matrix @ x

    return vi.MappingPair(f=f, sampler=sampler, dimension=matrix.shape[0])


class TestDecisionVector:
    def test_roundtrip(self):
        dv = vi.DecisionVector.from_stacked([1.0, 2.0, 3.0], [2, 1])
        assert dv.n_players == 2
        assert dv.block_sizes == (2, 1)
        assert np.array_equal(dv.stacked(), [1.0, 2.0, 3.0])

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError):
            vi.DecisionVector(())
        with pytest.raises(ValueError):
            vi.DecisionVector((np.array([1.0, np.nan]),))
        with pytest.raises(ValueError):
            vi.DecisionVector.from_stacked([1.0, 2.0], [1, 2])


class TestProjection:
    def test_box_interior_is_fixed_point(self):
        box = vi.Box(np.zeros(2), np.ones(2))
        assert np.array_equal(vi.project(box, [0.5, 0.5]), [0.5, 0.5])

    def test_box_clamps_componentwise(self):
        box = vi.Box(np.zeros(2), np.ones(2))
        assert np.array_equal(vi.project(box, [2.0, -1.0]), [1.0, 0.0])

    def test_simplex_face(self):
        poly = vi.Polyhedron(np.array([[1.0, 1.0]]), np.array([1.0]))
        got = vi.project(poly, [1.0, 1.0])
        assert np.allclose(got, [0.5, 0.5], atol=1e-9)

    def test_empty_polyhedron_rejected(self):
        with pytest.raises(ValueError):
            vi.Polyhedron(np.array([[1.0, 0.0]]), np.array([-1.0]))

    def test_nonfinite_point_rejected(self):
        box = vi.Box(np.zeros(2), np.ones(2))
        with pytest.raises(ValueError):
            vi.project(box, [np.inf, 0.0])

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        poly = vi.Polyhedron((rng.random((4, 3)) < 0.6).astype(float), rng.uniform(0.5, 2.0, 4))
        box = vi.Box(-np.ones(3), np.ones(3))
        for fset in (box, poly):
            for _ in range(50):
                p = rng.normal(scale=2.0, size=3)
                once = vi.project(fset, p)
                twice = vi.project(fset, once)
                assert np.linalg.norm(twice - once) <= 1e-12

    def test_nonexpansive(self):
        rng = np.random.default_rng(4)
        poly = vi.Polyhedron(rng.normal(size=(3, 3)), np.abs(rng.normal(size=3)))
        for _ in range(1000):
            p = rng.normal(scale=2.0, size=3)
            q = rng.normal(scale=2.0, size=3)
            dp = np.linalg.norm(vi.project(poly, p) - vi.project(poly, q))
            assert dp <= np.linalg.norm(p - q) + 5e-10

    def test_matches_qp_oracle_small(self):
        rng = np.random.default_rng(5)
        for _ in range(60):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(1, 5))
            a = rng.normal(size=(m, n))
            b = np.abs(rng.normal(size=m))
            p = rng.normal(scale=2.0, size=n)
            poly = vi.Polyhedron(a, b)
            assert np.linalg.norm(vi.project(poly, p) - project_qp(p, a, b)) <= 1e-8

    def test_zero_rows_are_vacuous(self):
        poly = vi.Polyhedron(np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([1.0, 1.0]))
        got = vi.project(poly, [1.0, 1.0])
        assert np.allclose(got, [0.5, 0.5], atol=1e-9)


class TestMappings:
    def test_affine_evaluation(self):
        mapping = affine_mapping(2.0 * np.eye(2))
        got = vi.evaluate_mapping(mapping, vi.DecisionVector.from_stacked([1.0, 2.0], [1, 1]))
        assert np.array_equal(got, [2.0, 4.0])

    def test_dimension_mismatch(self):
        mapping = affine_mapping(np.eye(2))
        with pytest.raises(ValueError):
            vi.evaluate_mapping(mapping, [1.0, 2.0, 3.0])

    def test_zero_noise_sampler_matches_mapping(self):
        mapping = affine_mapping(np.eye(3))
        rng = np.random.default_rng(0)
        x = np.array([0.3, -0.2, 1.0])
        assert np.array_equal(vi.sample_noisy_mapping(mapping, x, rng), mapping.f(x))

    def test_seeded_sampler_is_deterministic(self):
        def sampler(x, rng):
            return x + rng.normal(size=x.size)

        mapping = vi.MappingPair(f=lambda x: x, sampler=sampler, dimension=2)
        x = np.array([1.0, 2.0])
        a = vi.sample_noisy_mapping(mapping, x, np.random.default_rng(42))
        b = vi.sample_noisy_mapping(mapping, x, np.random.default_rng(42))
        assert np.array_equal(a, b)


class TestNaturalResidual:
    def box_instance(self):
        def f(x):
            return x - 1.0

        mapping = vi.MappingPair(f=f, sampler=lambda x, rng: f(x), dimension=1)
        return vi.Box(np.zeros(1), np.full(1, 2.0)), mapping

    def test_zero_at_solution(self):
        fset, mapping = self.box_instance()
        assert vi.natural_residual(fset, mapping, [1.0], 0.5) == 0.0

    def test_hand_value(self):
        fset, mapping = self.box_instance()
        assert vi.natural_residual(fset, mapping, [2.0], 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_gamma_must_be_positive(self):
        fset, mapping = self.box_instance()
        with pytest.raises(ValueError):
            vi.natural_residual(fset, mapping, [1.0], 0.0)


class TestProblemConstants:
    def test_validation(self):
        with pytest.raises(ValueError):
            vi.ProblemConstants(eta=0.0, lipschitz=1.0, nu=1.0)
        with pytest.raises(ValueError):
            vi.ProblemConstants(eta=2.0, lipschitz=1.0, nu=1.0)
        with pytest.raises(ValueError):
            vi.ProblemConstants(eta=1.0, lipschitz=1.0, nu=-1.0)
        c = vi.ProblemConstants(eta=1.0, lipschitz=1.0, nu=0.0)
        assert c.diameter is None


class TestEstimateConstants:
    def test_scalar_linear_map_exact(self):
        mapping = affine_mapping(3.0 * np.eye(2))
        box = vi.Box(np.zeros(2), np.ones(2))
        got = vi.estimate_constants(mapping, box, samples=20, rng=np.random.default_rng(1))
        assert got.eta == pytest.approx(3.0, rel=1e-12)
        assert got.lipschitz == pytest.approx(3.0, rel=1e-12)
        assert got.nu == 0.0

    def test_rotation_like_matrix(self):
        mapping = affine_mapping(np.array([[2.0, 1.0], [-1.0, 2.0]]))
        box = vi.Box(-np.ones(2), np.ones(2))
        got = vi.estimate_constants(mapping, box, samples=60, rng=np.random.default_rng(2))
        # symmetric part is 2I and B^T B = 5I, so every pair gives the limit
        assert got.eta == pytest.approx(2.0, rel=1e-9)
        assert got.lipschitz == pytest.approx(np.sqrt(5.0), rel=1e-9)

    def test_unbounded_polyhedron_rejected(self):
        mapping = affine_mapping(np.eye(2))
        poly = vi.Polyhedron(np.array([[1.0, 0.0]]), np.array([1.0]))
        with pytest.raises(vi.EstimationError):
            vi.estimate_constants(mapping, poly, samples=8, rng=np.random.default_rng(3))

    def test_non_monotone_map_raises(self):
        mapping = affine_mapping(-np.eye(2))
        box = vi.Box(np.zeros(2), np.ones(2))
        with pytest.raises(vi.EstimationError):
            vi.estimate_constants(mapping, box, samples=10, rng=np.random.default_rng(4))
        raw = vi.raw_constant_estimates(mapping, box, samples=10, rng=np.random.default_rng(4))
        assert raw.eta < 0
