import itertools

import numpy as np
import pytest

from ttgreeks.grids import chebyshev_diff_matrix, chebyshev_lobatto_axis, gauss_kronrod_axis
from ttgreeks.tensor_train import (TensorTrain, apply_matrix_to_core,
                                   elementwise_multiply, from_dense,
                                   insert_identity_cores, merge_adjacent_cores,
                                   merge_pairs_to_operator,
                                   multiply_and_sum_fused, ones_tt,
                                   rank_one_tt, read_ttg, sum_over_axes,
                                   svd_truncate, write_ttg)

from conftest import random_tt


class TestEvaluate:
    def test_all_ones_rank_one(self):
        tt = ones_tt((4, 5, 3))
        for idx in [(0, 0, 0), (3, 4, 2), (1, 2, 0)]:
            assert tt.evaluate(idx) == 1.0 + 0j

    def test_tt_svd_reproduces_dense_tensor(self, rng):
        dense = rng.normal(size=(3, 3, 3)) + 1j * rng.normal(size=(3, 3, 3))
        tt = from_dense(dense, eps=0.0)
        for idx in itertools.product(range(3), repeat=3):
            assert abs(tt.evaluate(idx) - dense[idx]) <= 1e-12

    def test_separable_product(self, rng):
        g = rng.normal(size=8)
        h = rng.normal(size=8)
        tt = rank_one_tt([g, h])
        for i, j in [(0, 0), (3, 7), (5, 2)]:
            assert abs(tt.evaluate((i, j)) - g[i] * h[j]) <= 1e-14

    def test_index_out_of_range(self):
        tt = ones_tt((4, 4))
        with pytest.raises(IndexError):
            tt.evaluate((4, 0))
        with pytest.raises(IndexError):
            tt.evaluate((0, 0, 0))

    def test_bond_mismatch_rejected(self, rng):
        good = rng.normal(size=(1, 3, 2))
        bad = rng.normal(size=(3, 3, 1))
        with pytest.raises(ValueError, match="bond mismatch"):
            TensorTrain([good, bad])

    def test_non_finite_rejected(self):
        core = np.ones((1, 2, 1), dtype=complex)
        core[0, 1, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            TensorTrain([core])


class TestSvdTruncate:
    def test_lossless_at_zero_tolerance(self, rng):
        tt = random_tt(rng, (4, 5, 4), (3, 3))
        out = svd_truncate(tt, 0.0)
        for idx in itertools.product(range(4), range(5), range(4)):
            assert abs(out.evaluate(idx) - tt.evaluate(idx)) <= 1e-12

    def test_drops_tiny_singular_value(self, rng):
        # middle bond built from known factors with singular values {1, 1e-16}
        n = 6
        u, _ = np.linalg.qr(rng.normal(size=(n, 2)))
        v, _ = np.linalg.qr(rng.normal(size=(n, 2)))
        s = np.array([1.0, 1e-16])
        left = (u * s).reshape(1, n, 2).astype(complex)
        right = v.T.reshape(2, n, 1).astype(complex)
        tt = TensorTrain([left, right])
        out = svd_truncate(tt, 1e-12)
        assert out.bond_dims == (1,)

    @pytest.mark.parametrize("eps", [1e-6, 1e-3])
    def test_relative_frobenius_bound(self, rng, eps):
        for dims, bonds in [((4, 5, 4), (3, 6)), ((3, 4, 3, 4), (2, 5, 3)),
                            ((2, 3, 2, 3, 2, 3), (2, 3, 4, 3, 2))]:
            tt = random_tt(rng, dims, bonds)
            out = svd_truncate(tt, eps)
            dense, dense_out = tt.to_dense(), out.to_dense()
            err2 = np.linalg.norm(dense - dense_out) ** 2 / np.linalg.norm(dense) ** 2
            assert err2 <= eps

    def test_bonds_never_increase(self, rng):
        tt = random_tt(rng, (3, 4, 5, 3), (4, 8, 4))
        out = svd_truncate(tt, 1e-14)
        assert all(b2 <= b1 for b1, b2 in zip(tt.bond_dims, out.bond_dims))


class TestElementwiseMultiply:
    def test_ones_times_ones(self):
        a = ones_tt((3, 4))
        out = elementwise_multiply(a, a)
        assert out.bond_dims == (1,)
        assert out.evaluate((2, 3)) == 1.0 + 0j

    def test_bonds_multiply_and_match_dense_product(self, rng):
        a = random_tt(rng, (4, 3, 5, 4), (2, 3, 2))
        b = random_tt(rng, (4, 3, 5, 4), (3, 2, 2))
        out = elementwise_multiply(a, b)
        assert out.bond_dims == (6, 6, 4)
        np.testing.assert_allclose(out.to_dense(), a.to_dense() * b.to_dense(),
                                   atol=1e-12)

    def test_scalar_homogeneity(self, rng):
        a = random_tt(rng, (4, 5), (3,))
        c = 2.5 - 0.5j
        const = TensorTrain([np.full((1, 4, 1), c), np.ones((1, 5, 1))])
        out = elementwise_multiply(a, const)
        np.testing.assert_allclose(out.to_dense(), c * a.to_dense(), atol=1e-12)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError, match="local dimensions"):
            elementwise_multiply(ones_tt((3, 4)), ones_tt((3, 5)))
        with pytest.raises(ValueError, match="core counts"):
            elementwise_multiply(ones_tt((3, 4)), ones_tt((3, 4, 2)))


class TestSumOverAxes:
    def test_ones_axis_sum_scales_by_size(self):
        tt = ones_tt((4, 7, 3))
        out = sum_over_axes(tt, [1])
        assert out.local_dims == (4, 3)
        assert abs(out.evaluate((1, 2)) - 7.0) <= 1e-14

    def test_matches_dense_partial_sum(self, rng):
        tt = random_tt(rng, (4, 5, 3), (3, 2))
        out = sum_over_axes(tt, [1])
        np.testing.assert_allclose(out.to_dense(), tt.to_dense().sum(axis=1),
                                   atol=1e-12)

    def test_sum_all_returns_scalar(self, rng):
        tt = random_tt(rng, (3, 4), (2,))
        val = sum_over_axes(tt, [0, 1])
        assert isinstance(val, complex)
        assert abs(val - tt.to_dense().sum()) <= 1e-12

    def test_weighted_sum_reproduces_nested_quadrature(self):
        # d=2 nested Gauss-Kronrod of exp(-(x^2+y^2)/2 + 0.3 x)
        ax = gauss_kronrod_axis(25, (-8.0, 8.0))
        f = np.exp(-0.5 * ax.nodes**2 + 0.3 * ax.nodes)
        g = np.exp(-0.5 * ax.nodes**2)
        tt = rank_one_tt([ax.weights * f, ax.weights * g])
        val = sum_over_axes(tt, [0, 1]).real
        nested = float(np.sum(np.outer(ax.weights * f, ax.weights * g)))
        assert abs(val - nested) <= 1e-12 * abs(nested)
        # and the quadrature itself hits the analytic Gaussian integral
        exact = 2 * np.pi * np.exp(0.045)
        assert abs(nested - exact) <= 1e-10 * exact


class TestMergeAndInsert:
    def test_merge_preserves_evaluation(self, rng):
        tt = random_tt(rng, (3, 4, 5), (2, 3))
        merged = merge_adjacent_cores(tt, 0)
        for i, j, k in itertools.product(range(3), range(4), range(5)):
            fused = i * 4 + j
            assert abs(merged.evaluate((fused, k)) - tt.evaluate((i, j, k))) <= 1e-12

    def test_pairwise_merge_halves_length_and_grows_memory(self, rng):
        n_p, d = 5, 3
        tt = random_tt(rng, (n_p,) * (2 * d), (2,) * (2 * d - 1))
        op = merge_pairs_to_operator(tt)
        assert len(op) == d
        assert all(dims == (n_p, n_p) for dims in op.local_dims)
        # memory: 2d cores of chi^2 n_p become d cores of chi^2 n_p^2
        before = sum(c.size for c in tt.cores)
        after = sum(c.size for c in op.cores)
        assert after > before
        assert after == sum(c.shape[0] * n_p * n_p * c.shape[3] for c in op.cores)

    def test_operator_evaluation_invariant(self, rng):
        tt = random_tt(rng, (3, 4, 3, 4), (2, 3, 2))
        op = merge_pairs_to_operator(tt)
        for idx in [(0, 0, 0, 0), (2, 3, 1, 2), (1, 1, 2, 3)]:
            assert abs(op.evaluate((idx[0], idx[2]), (idx[1], idx[3]))
                       - tt.evaluate(idx)) <= 1e-12

    def test_insert_identity_passthrough(self, rng):
        tt = random_tt(rng, (4, 6), (3,))
        out = insert_identity_cores(tt, [1, 1, 2, 2], [5, 5, 7, 7])
        assert out.local_dims == (4, 5, 5, 6, 7, 7)
        assert out.bond_dims == (3, 3, 3, 1, 1)  # deltas preserve bonds
        dense = out.to_dense()
        base = tt.to_dense()
        for s1, s2, t1, t2 in [(0, 0, 0, 0), (2, 4, 3, 1), (1, 3, 6, 5)]:
            np.testing.assert_allclose(dense[:, s1, s2, :, t1, t2], base,
                                       atol=1e-13)

    def test_insert_matches_dense_identity_expansion(self, rng):
        # two-core train extended to the full (j,k,l)-style layout at d=2
        tt = random_tt(rng, (3, 3), (2,))
        out = insert_identity_cores(tt, [1, 1, 2, 2], [2, 2, 2, 2])
        dense = out.to_dense()
        expect = np.broadcast_to(tt.to_dense()[:, None, None, :, None, None],
                                 dense.shape)
        np.testing.assert_allclose(dense, expect, atol=1e-13)


class TestApplyMatrix:
    def test_identity_is_noop(self, rng):
        tt = random_tt(rng, (4, 5), (2,))
        out = apply_matrix_to_core(tt, 0, np.eye(4))
        np.testing.assert_allclose(out.to_dense(), tt.to_dense(), atol=1e-14)

    def test_chebyshev_derivative_of_square(self):
        n = 16
        ax = chebyshev_lobatto_axis(n, (0.0, 2.0))
        dm = chebyshev_diff_matrix(n, (0.0, 2.0))
        tt = rank_one_tt([ax.nodes**2, np.ones(4)])
        out = apply_matrix_to_core(tt, 0, dm.entries)
        vals = np.array([out.evaluate((i, 0)).real for i in range(n)])
        np.testing.assert_allclose(vals, 2 * ax.nodes, atol=1e-10)

    def test_twice_equals_squared_matrix(self, rng):
        tt = random_tt(rng, (5, 4), (3,))
        m = rng.normal(size=(5, 5))
        twice = apply_matrix_to_core(apply_matrix_to_core(tt, 0, m), 0, m)
        once = apply_matrix_to_core(tt, 0, m @ m)
        np.testing.assert_allclose(twice.to_dense(), once.to_dense(), atol=1e-11)

    def test_bond_dims_unchanged(self, rng):
        tt = random_tt(rng, (5, 4, 6), (3, 2))
        out = apply_matrix_to_core(tt, 1, rng.normal(size=(4, 4)))
        assert out.bond_dims == tt.bond_dims

    def test_dimension_mismatch(self, rng):
        tt = random_tt(rng, (5, 4), (3,))
        with pytest.raises(ValueError, match="does not match"):
            apply_matrix_to_core(tt, 0, np.eye(4))


class TestFusedMultiplySum:
    @pytest.mark.parametrize("axes", [[0], [1], [0, 2], [0, 1, 2, 3]])
    def test_matches_unfused_composition(self, rng, axes):
        a = random_tt(rng, (5, 4, 6, 4), (2, 3, 2))
        b = random_tt(rng, (5, 4, 6, 4), (3, 2, 4))
        ref = sum_over_axes(elementwise_multiply(a, b), axes)
        out = multiply_and_sum_fused(a, b, axes)
        if isinstance(ref, complex):
            assert abs(out - ref) <= 1e-10
        else:
            np.testing.assert_allclose(out.to_dense(), ref.to_dense(), atol=1e-10)

    def test_bond_stays_at_numerical_rank(self, rng):
        a = random_tt(rng, (6, 5, 6), (2, 2))
        b = random_tt(rng, (6, 5, 6), (2, 2))
        out = multiply_and_sum_fused(a, b, [0, 2])
        ref = sum_over_axes(elementwise_multiply(a, b), [0, 2])
        assert all(x <= y for x, y in zip(out.bond_dims, ref.bond_dims))


class TestBondChainPreservation:
    def test_all_operations_keep_valid_chains(self, rng):
        tt = random_tt(rng, (4, 4, 4, 4), (3, 5, 3))

        def check(t):
            assert t.cores[0].shape[0] == 1 and t.cores[-1].shape[2] == 1
            for i in range(len(t) - 1):
                assert t.cores[i].shape[2] == t.cores[i + 1].shape[0]

        check(svd_truncate(tt, 1e-8))
        check(elementwise_multiply(tt, tt))
        check(sum_over_axes(tt, [2]))
        check(merge_adjacent_cores(tt, 1))
        check(insert_identity_cores(tt, [2], [6]))
        check(apply_matrix_to_core(tt, 3, np.eye(4)))


class TestArtifactFormat:
    def test_round_trip_bit_identical(self, rng, tmp_path):
        tt = random_tt(rng, (4, 5, 3), (3, 2))
        path = tmp_path / "t.ttg"
        write_ttg(path, tt)
        back = read_ttg(path)
        for c1, c2 in zip(tt.cores, back.cores):
            assert c1.shape == c2.shape
            assert np.array_equal(c1, c2)
        # write the reread train again: identical bytes
        path2 = tmp_path / "t2.ttg"
        write_ttg(path2, back)
        assert path.read_bytes() == path2.read_bytes()

    def test_header_layout(self, rng, tmp_path):
        tt = random_tt(rng, (2, 3), (2,))
        path = tmp_path / "t.ttg"
        write_ttg(path, tt)
        blob = path.read_bytes()
        assert blob[:4] == b"TTG1"
        assert int.from_bytes(blob[4:8], "little") == 1
        assert int.from_bytes(blob[8:12], "little") == 2
        assert int.from_bytes(blob[12:16], "little") == 1  # first chi_l
        assert int.from_bytes(blob[16:20], "little") == 2  # first local dim

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.ttg"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ValueError, match="magic"):
            read_ttg(path)
