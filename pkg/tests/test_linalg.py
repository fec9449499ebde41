import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density
from oqwalk.linalg import (
    DensityMatrix,
    InvalidDensityError,
    allclose,
    channel_rep,
    check_kraus_normalization,
    conj_rep,
    conjugate,
    density,
    is_psd,
    matrix_from_json,
    matrix_to_json,
    pd_inv_sqrt,
    psd_sqrt,
    unvec,
    vec,
)

seeds = st.integers(0, 2**32 - 1)
orders = st.integers(1, 4)


def _complex(rng, n, m=None):
    m = n if m is None else m
    return rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))


class TestVec:
    def test_row_major_layout(self):
        m = np.array([[1, 2], [3, 4]])
        np.testing.assert_array_equal(vec(m), [1, 2, 3, 4])

    def test_unvec_rectangular(self):
        np.testing.assert_array_equal(unvec(np.arange(6), 2, 3), np.arange(6).reshape(2, 3))

    def test_unvec_rejects_bad_length(self):
        with pytest.raises(ValueError):
            unvec(np.arange(5), 2)

    @given(seeds, orders)
    def test_roundtrip(self, seed, n):
        x = _complex(np.random.default_rng(seed), n)
        assert allclose(unvec(vec(x), n), x, 0)


class TestConjRep:
    def test_identity(self):
        assert allclose(conj_rep(np.eye(3)), np.eye(9), 0)

    def test_scalar_multiple(self):
        assert allclose(conj_rep(np.eye(2) / np.sqrt(2)), np.eye(4) / 2, 1e-15)

    def test_rejects_rectangular(self):
        with pytest.raises(ValueError):
            conj_rep(np.ones((2, 3)))

    @settings(max_examples=200)
    @given(seeds, orders)
    def test_action_matches_conjugation(self, seed, n):
        rng = np.random.default_rng(seed)
        b, x = _complex(rng, n), _complex(rng, n)
        b, x = b / np.linalg.norm(b, 2), x / np.linalg.norm(x, 2)
        got = unvec(conj_rep(b) @ vec(x), n)
        assert allclose(got, conjugate(b, x), 1e-12)

    @settings(max_examples=200)
    @given(seeds, orders)
    def test_functoriality(self, seed, n):
        rng = np.random.default_rng(seed)
        b1, b2 = _complex(rng, n), _complex(rng, n)
        b1, b2 = b1 / np.linalg.norm(b1, 2), b2 / np.linalg.norm(b2, 2)
        assert allclose(conj_rep(b1 @ b2), conj_rep(b1) @ conj_rep(b2), 1e-12)

    def test_channel_rep_sums_terms(self):
        a, b = np.diag([1.0, 0.0]), np.array([[0, 1.0], [0, 0]])
        assert allclose(channel_rep([a, b]), conj_rep(a) + conj_rep(b), 0)


class TestKrausNormalization:
    def test_accepts_isometry_split(self):
        ok, res = check_kraus_normalization([np.eye(2) / np.sqrt(2), np.eye(2) / np.sqrt(2)])
        assert ok and res < 1e-15

    def test_reports_residual(self):
        ok, res = check_kraus_normalization([np.eye(2) * 0.5])
        assert not ok
        assert res == pytest.approx(0.75)

    def test_rejects_mismatched_orders(self):
        with pytest.raises(ValueError):
            check_kraus_normalization([np.eye(2), np.eye(3)])


class TestDensityMatrix:
    def test_from_bloch(self):
        rho = DensityMatrix.from_bloch(1, 0, 0)
        assert allclose(rho.mat, [[0.5, 0.5], [0.5, 0.5]], 1e-15)
        assert rho.re12 == pytest.approx(0.5)
        assert rho.bloch() == pytest.approx((1, 0, 0))

    def test_basis(self):
        assert allclose(DensityMatrix.basis(3, 2).mat, np.diag([0, 0, 1]), 0)

    def test_pure_normalizes(self):
        rho = DensityMatrix.pure([1, 1j])
        assert np.trace(rho.mat).real == pytest.approx(1)
        assert rho.mat[0, 1] == pytest.approx(-0.5j)

    @pytest.mark.parametrize(
        "m",
        [
            [[1, 1], [0, 0]],
            [[0.6, 0], [0, 0.6]],
            [[1.5, 0], [0, -0.5]],
            [[np.nan, 0], [0, 1]],
            [[1, 0, 0], [0, 0, 0]],
        ],
    )
    def test_rejects_invalid(self, m):
        with pytest.raises(InvalidDensityError):
            DensityMatrix(np.array(m, dtype=complex))

    def test_bloch_outside_ball(self):
        with pytest.raises(InvalidDensityError):
            DensityMatrix.from_bloch(1, 1, 0)

    def test_immutable(self):
        rho = DensityMatrix.basis(2, 0)
        with pytest.raises(ValueError):
            rho.mat[0, 0] = 2

    def test_density_passthrough(self):
        rho = DensityMatrix.basis(2, 1)
        assert density(rho) is rho

    @given(seeds, orders)
    def test_random_densities_validate(self, seed, n):
        rho = random_density(np.random.default_rng(seed), n)
        assert is_psd(rho.mat)


class TestMatrixFunctions:
    @given(seeds, orders)
    def test_psd_sqrt_squares_back(self, seed, n):
        g = _complex(np.random.default_rng(seed), n)
        m = g @ g.conj().T
        r = psd_sqrt(m)
        assert allclose(r @ r, m, 1e-9 * max(1.0, np.abs(m).max()))

    def test_pd_inv_sqrt(self):
        m = np.array([[2.0, 0.5], [0.5, 1.0]])
        s = pd_inv_sqrt(m)
        assert allclose(s @ m @ s, np.eye(2), 1e-13)

    def test_pd_inv_sqrt_rejects_singular(self):
        with pytest.raises(np.linalg.LinAlgError):
            pd_inv_sqrt(np.diag([1.0, 0.0]))


class TestJson:
    def test_roundtrip(self):
        m = np.array([[1 + 2j, 0], [3, -1j]])
        assert allclose(matrix_from_json(matrix_to_json(m)), m, 0)

    def test_nested_list(self):
        assert allclose(matrix_from_json([[1, 0], [0, 1]]), np.eye(2), 0)

    def test_unknown_keys(self):
        with pytest.raises(ValueError):
            matrix_from_json({"rows": 1, "cols": 1, "re": [1], "im": [0], "extra": 1})
