"""Bijection and layout tests: round trips, Jacobians, priors."""

import numpy as np
import pytest
from scipy import stats

from flexpoint.inference import Block, Layout, simplex_forward, simplex_inverse


def test_zero_maps_to_uniform_row():
    for n in (2, 3, 5, 9):
        x, _ = simplex_forward(np.zeros(n - 1))
        assert np.allclose(np.asarray(x), np.full(n, 1.0 / n), atol=1e-14)


def test_simplex_round_trip():
    rng = np.random.default_rng(0)
    for n in (2, 3, 4, 7, 12):
        rows = rng.dirichlet(np.ones(n), size=20)
        y = simplex_inverse(rows)
        back, _ = simplex_forward(y)
        assert np.max(np.abs(np.asarray(back) - rows)) < 1e-12


def test_simplex_rows_sum_to_one_and_stay_positive():
    rng = np.random.default_rng(1)
    y = 3.0 * rng.standard_normal((50, 6))
    x, _ = simplex_forward(y)
    x = np.asarray(x)
    assert np.allclose(x.sum(axis=1), 1.0, atol=1e-12)
    assert (x > 0).all()


def test_log_jacobian_matches_numeric_determinant():
    # map y (n-1 free) to the first n-1 simplex coordinates and compare
    # the analytic log|J| with a finite-difference determinant
    rng = np.random.default_rng(2)
    n = 5
    y0 = rng.standard_normal(n - 1)
    _, log_jac = simplex_forward(y0)
    eps = 1e-6
    jac = np.zeros((n - 1, n - 1))
    for k in range(n - 1):
        e = np.zeros(n - 1)
        e[k] = eps
        xp, _ = simplex_forward(y0 + e)
        xm, _ = simplex_forward(y0 - e)
        jac[:, k] = (np.asarray(xp)[:-1] - np.asarray(xm)[:-1]) / (2 * eps)
    sign, numeric = np.linalg.slogdet(jac)
    assert sign > 0
    assert abs(numeric - float(log_jac)) < 1e-6


class TestBlock:
    def test_positive_round_trip(self):
        b = Block("scale", "positive", {"exp": 0.1}, shape=(4,))
        vals = np.array([0.2, 1.0, 3.5, 10.0])
        u = b.inverse(vals)
        nat, log_jac = b.forward(u)
        assert np.allclose(np.asarray(nat), vals, rtol=1e-14)
        assert np.isclose(float(log_jac), np.sum(np.log(vals)))

    def test_real_block_is_identity(self):
        b = Block("loc", "real", {"normal": 10.0}, shape=(3,))
        u = np.array([-1.0, 0.5, 2.0])
        nat, log_jac = b.forward(u)
        assert np.array_equal(np.asarray(nat), u)
        assert float(log_jac) == 0.0

    def test_scaled_simplex_rows_sum_to_scale(self):
        b = Block("half", "simplex", {"dirichlet": 1.0}, sizes=(4,), scale=0.5)
        u = np.random.default_rng(3).standard_normal(3)
        nat, _ = b.forward(u)
        assert np.isclose(np.asarray(nat).sum(), 0.5, atol=1e-14)
        back = b.inverse(np.asarray(nat))
        assert np.max(np.abs(back - u)) < 1e-10

    def test_size_one_rows_are_constant(self):
        b = Block("rows", "simplex", {"dirichlet": 1.0}, sizes=(1, 3, 1))
        assert b.free_dim == 2
        nat, _ = b.forward(np.array([0.3, -0.7]))
        nat = np.asarray(nat)
        assert nat[0] == 1.0 and nat[4] == 1.0
        assert np.isclose(nat[1:4].sum(), 1.0)

    def test_name_count_enforced(self):
        with pytest.raises(ValueError, match="names"):
            Block("x", "real", {"normal": 1.0}, shape=(3,), names=["only_one"])

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            Block("x", "weird", {"normal": 1.0})

    def test_normal_log_prior_matches_scipy(self):
        b = Block("loc", "real", {"normal": 2.5}, shape=(4,))
        vals = np.array([0.1, -3.0, 2.2, 0.0])
        expect = stats.norm(0, 2.5).logpdf(vals).sum()
        assert np.isclose(float(b.log_prior(vals)), expect)

    def test_exp_log_prior_matches_scipy(self):
        b = Block("scale", "positive", {"exp": 0.4}, shape=(3,))
        vals = np.array([0.5, 2.0, 7.0])
        expect = stats.expon(scale=1 / 0.4).logpdf(vals).sum()
        assert np.isclose(float(b.log_prior(vals)), expect)

    def test_dirichlet_log_prior_matches_scipy(self):
        conc = 2.5
        b = Block("rows", "simplex", {"dirichlet": conc}, sizes=(4, 3))
        rng = np.random.default_rng(4)
        r1 = rng.dirichlet(np.ones(4))
        r2 = rng.dirichlet(np.ones(3))
        vals = np.concatenate([r1, r2])
        expect = (stats.dirichlet(np.full(4, conc)).logpdf(r1)
                  + stats.dirichlet(np.full(3, conc)).logpdf(r2))
        assert np.isclose(float(b.log_prior(vals)), expect)

    def test_uniform_dirichlet_prior_is_constant(self):
        b = Block("rows", "simplex", {"dirichlet": 1.0}, sizes=(4,))
        rng = np.random.default_rng(5)
        v1 = float(b.log_prior(rng.dirichlet(np.ones(4))))
        v2 = float(b.log_prior(rng.dirichlet(np.ones(4))))
        assert v1 == v2
        assert np.isclose(v1, stats.dirichlet(np.ones(4)).logpdf(np.full(4, 0.25)))


class TestLayout:
    def _layout(self):
        return Layout([
            Block("loc", "real", {"normal": 5.0}, shape=(2,)),
            Block("scale", "positive", {"exp": 0.2}, shape=(3,)),
            Block("rows", "simplex", {"dirichlet": 1.0}, sizes=(3, 4)),
        ])

    def test_dims_and_slices(self):
        lay = self._layout()
        assert lay.free_dim == 2 + 3 + (2 + 3)
        assert lay.nat_dim == 2 + 3 + 7
        assert lay.free_slices["rows"] == slice(5, 10)
        assert lay.nat_slices["rows"] == slice(5, 12)
        assert len(lay.names) == lay.nat_dim

    def test_forward_inverse_round_trip(self):
        lay = self._layout()
        rng = np.random.default_rng(6)
        natural = {
            "loc": rng.standard_normal(2),
            "scale": rng.uniform(0.5, 3.0, 3),
            "rows": np.concatenate([rng.dirichlet(np.ones(3)),
                                    rng.dirichlet(np.ones(4))]),
        }
        u = lay.inverse(natural)
        nat, _ = lay.forward(u)
        nat = np.asarray(nat)
        assert np.max(np.abs(nat[:2] - natural["loc"])) < 1e-12
        assert np.max(np.abs(nat[2:5] - natural["scale"])) < 1e-12
        assert np.max(np.abs(nat[5:] - natural["rows"])) < 1e-12

    def test_unpack_reshapes_blocks(self):
        lay = self._layout()
        nat, _ = lay.forward(np.zeros(lay.free_dim))
        out = lay.unpack(np.asarray(nat))
        assert out["loc"].shape == (2,)
        assert out["scale"].shape == (3,)
        assert out["rows"].shape == (7,)

    def test_duplicate_block_names_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            Layout([Block("x", "real", {"normal": 1.0}),
                    Block("x", "real", {"normal": 1.0})])

    def test_log_prior_sums_blocks(self):
        lay = self._layout()
        u = np.random.default_rng(7).standard_normal(lay.free_dim)
        nat, _ = lay.forward(u)
        total = float(lay.log_prior(np.asarray(nat)))
        parts = sum(
            float(b.log_prior(np.asarray(nat)[lay.nat_slices[b.name]]))
            for b in lay.blocks
        )
        assert np.isclose(total, parts)
