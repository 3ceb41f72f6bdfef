import numpy as np
import pytest

from ttgreeks.cross import (BlackBoxTensor, TciConfig, tci_learn, sample_budget)


def separable_box(rng, dims, n_terms=1, weights=None):
    """Sum of n_terms separable factors as a vectorized black box."""
    factors = [[rng.normal(size=n) + 0.3 for n in dims] for _ in range(n_terms)]
    weights = weights if weights is not None else [1.0] * n_terms
    def fn(idx):
        out = np.zeros(idx.shape[0], dtype=complex)
        for w, fac in zip(weights, factors):
            term = np.ones(idx.shape[0])
            for col, vec in enumerate(fac):
                term = term * vec[idx[:, col]]
            out += w * term
        return out
    dense = np.zeros(dims, dtype=complex)
    for w, fac in zip(weights, factors):
        term = fac[0]
        for vec in fac[1:]:
            term = np.multiply.outer(term, vec)
        dense += w * term
    return BlackBoxTensor(dims, fn), dense


class TestLearning:
    def test_separable_recovered_exactly_with_unit_bonds(self, rng):
        f, dense = separable_box(rng, (8, 8, 8))
        tt, diag = tci_learn(f, TciConfig(tol=1e-10, max_bond=8, max_sweeps=8))
        assert tt.bond_dims == (1, 1)
        assert np.abs(tt.to_dense() - dense).max() <= 1e-12 * np.abs(dense).max()
        assert diag.converged

    def test_rank_two_bounded_bonds(self, rng):
        f, dense = separable_box(rng, (8, 8, 8), n_terms=2)
        tt, diag = tci_learn(f, TciConfig(tol=1e-10, max_bond=8, max_sweeps=8))
        assert max(tt.bond_dims) <= 2
        assert np.abs(tt.to_dense() - dense).max() <= 1e-10 * np.abs(dense).max()

    def test_lognormal_characteristic_grid(self):
        # 2-asset characteristic function sampled on a 16x16 Fourier grid
        z = np.linspace(-25, 25, 16)
        rho = np.array([[1.0, 0.5], [0.5, 1.0]])
        sig = np.array([0.2, 0.2])
        mu = np.log([100.0, 100.0]) + (0.01 - 0.5 * sig**2)
        alpha = np.array([2.5, 2.5])

        def phi(idx):
            w = -(z[idx] + 1j * alpha)
            sw = sig * w
            return np.exp(1j * (w @ mu) - 0.5 * np.einsum("nm,mk,nk->n", sw, rho, sw))

        f = BlackBoxTensor((16, 16), phi)
        tt, diag = tci_learn(f, TciConfig(tol=1e-10, max_bond=16, max_sweeps=10))
        full = np.stack(np.meshgrid(np.arange(16), np.arange(16),
                                    indexing="ij"), -1).reshape(-1, 2)
        dense = phi(full).reshape(16, 16)
        err = np.abs(tt.to_dense() - dense).max() / np.abs(dense).max()
        assert err <= 1e-8
        assert diag.converged

    def test_single_axis(self, rng):
        vals = rng.normal(size=9) + 1j * rng.normal(size=9)
        f = BlackBoxTensor((9,), lambda idx: vals[idx[:, 0]])
        tt, diag = tci_learn(f, TciConfig(tol=1e-12, max_bond=4))
        np.testing.assert_allclose(tt.to_dense(), vals, atol=1e-14)
        assert diag.converged and diag.n_samples == 9

    def test_sampled_entries_reproduced_on_low_rank_family(self, rng):
        # interpolation property: cross pivot entries come back exactly
        f, _ = separable_box(rng, (8, 8, 8), n_terms=2)
        tt, diag = tci_learn(f, TciConfig(tol=1e-10, max_bond=8, max_sweeps=8))
        keys = np.fromiter(f._cache.keys(), dtype=np.int64)
        vals = np.fromiter(f._cache.values(), dtype=np.complex128)
        idx = np.stack(np.unravel_index(keys, f.dims), axis=1)
        approx = np.array([tt.evaluate(row) for row in idx[:200]])
        assert np.abs(approx - vals[:200]).max() <= 1e-10 * diag.max_abs

    def test_monotone_improvement_with_bond_budget(self, rng):
        f_factory = lambda: separable_box(
            np.random.default_rng(5), (6, 6, 6), n_terms=3,
            weights=[1.0, 0.1, 0.01])
        errs = []
        for chi in (1, 2, 3, 4):
            f, dense = f_factory()
            tt, _ = tci_learn(f, TciConfig(tol=1e-12, max_bond=chi, max_sweeps=6))
            errs.append(np.abs(tt.to_dense() - dense).max() / np.abs(dense).max())
        assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(errs, errs[1:]))
        assert errs[-1] <= 1e-10


class TestDiagnostics:
    def test_error_estimate_covers_sampled_entries(self, rng):
        f, _ = separable_box(rng, (8, 8, 8), n_terms=2)
        cfg = TciConfig(tol=1e-10, max_bond=8, max_sweeps=8)
        tt, diag = tci_learn(f, cfg)
        keys = np.fromiter(f._cache.keys(), dtype=np.int64)
        vals = np.fromiter(f._cache.values(), dtype=np.complex128)
        idx = np.stack(np.unravel_index(keys, f.dims), axis=1)
        manual = max(abs(tt.evaluate(row) - v) for row, v in zip(idx, vals))
        manual /= diag.max_abs
        assert diag.error_estimate <= cfg.tol
        assert manual <= diag.error_estimate + 1e-12

    def test_budget_scales_with_adaptivity(self, rng):
        budget_c = 16
        f1, _ = separable_box(rng, (8, 8, 8))
        _, d1 = None, None
        tt1, diag1 = tci_learn(f1, TciConfig(tol=1e-10, max_bond=8, max_sweeps=8))
        chi1 = max(diag1.bond_dims)
        assert diag1.n_samples <= budget_c * 3 * chi1**2 * 8
        assert diag1.n_samples < 8**3  # full-grid fallback never triggered

        f4, _ = separable_box(rng, (8, 8, 8), n_terms=4)
        tt4, diag4 = tci_learn(f4, TciConfig(tol=1e-10, max_bond=8, max_sweeps=8))
        chi4 = max(diag4.bond_dims)
        assert chi4 >= 3
        assert diag4.n_samples <= budget_c * 3 * chi4**2 * 8
        # sampling effort grows with the revealed rank
        assert diag4.n_samples > diag1.n_samples

    def test_sample_budget_report(self, rng):
        f, _ = separable_box(rng, (8, 8, 8), n_terms=2)
        _, diag = tci_learn(f, TciConfig(tol=1e-10, max_bond=8))
        out = sample_budget(diag)
        assert out["n_samples"] == diag.n_samples
        assert out["chi_max"] == max(diag.bond_dims)

    def test_diagnostics_serialize(self, rng):
        import json
        f, _ = separable_box(rng, (6, 6))
        _, diag = tci_learn(f, TciConfig(tol=1e-10, max_bond=4))
        blob = json.dumps(diag.to_dict())
        assert "error_trace" in blob and "bond_dims" in blob


class TestEdgeCases:
    def test_zero_tensor_returns_zero_train_with_warning(self):
        f = BlackBoxTensor((5, 5), lambda idx: np.zeros(idx.shape[0], dtype=complex))
        tt, diag = tci_learn(f, TciConfig(tol=1e-8, max_bond=4))
        assert tt.bond_dims == (1,)
        assert np.abs(tt.to_dense()).max() == 0.0
        assert any("zero" in w for w in diag.warnings)

    def test_non_finite_sample_names_index(self):
        def fn(idx):
            out = np.ones(idx.shape[0], dtype=complex)
            out[(idx[:, 0] == 3) & (idx[:, 1] == 2)] = np.nan
            return out
        f = BlackBoxTensor((6, 6), fn)
        with pytest.raises(ValueError, match=r"\(3, 2\)"):
            tci_learn(f, TciConfig(tol=1e-8, max_bond=4))

    def test_bad_initial_pivot_rejected(self):
        f = BlackBoxTensor((4, 4), lambda idx: np.ones(idx.shape[0], dtype=complex))
        with pytest.raises(ValueError, match="pivot"):
            tci_learn(f, TciConfig(tol=1e-8, max_bond=2, initial_pivot=(5, 0)))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TciConfig(tol=0.0)
        with pytest.raises(ValueError):
            TciConfig(tol=1e-8, max_bond=0)

    def test_scalar_callable_supported(self, rng):
        g = rng.normal(size=5)
        f = BlackBoxTensor((5, 5), lambda idx: complex(g[idx[0]] * g[idx[1]]),
                           vectorized=False)
        tt, _ = tci_learn(f, TciConfig(tol=1e-10, max_bond=3))
        assert abs(tt.evaluate((2, 3)) - g[2] * g[3]) <= 1e-12

    def test_max_bond_cap_reports_unconverged(self, rng):
        f, _ = separable_box(rng, (8, 8), n_terms=4)
        _, diag = tci_learn(f, TciConfig(tol=1e-13, max_bond=2, max_sweeps=3))
        assert max(diag.bond_dims) <= 2
        assert not diag.converged
        assert diag.warnings
