import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfmimo.precoding import SingularChannelError, zf_precoder, zf_waterfill_precoder
from cfmimo.rates import (
    DimensionError,
    NetworkEvaluator,
    ServiceGroup,
    cellfree_sum_rate,
    log2det,
    multicell_sum_rate,
    sum_channel_correlation,
    zf_throughput,
)


def cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def eig_log2det(A):
    return float(np.sum(np.log2(np.linalg.eigvalsh(A))))


def test_log2det_matches_eigen_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        X = cn(rng, n, n + 3)
        A = X @ X.conj().T + 0.1 * np.eye(n)
        ref = eig_log2det(A)
        assert log2det(A) == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_log2det_batched():
    rng = np.random.default_rng(1)
    X = cn(rng, 5, 3, 4)
    A = X @ np.conj(np.swapaxes(X, 1, 2)) + np.eye(3)
    np.testing.assert_allclose(log2det(A), [eig_log2det(a) for a in A], rtol=1e-12)


class TestCellFree:
    def test_identity_effective_channel(self):
        rng = np.random.default_rng(2)
        G = cn(rng, 8, 4)
        P = zf_precoder(G.T)  # G^T P = I
        assert cellfree_sum_rate(G, P, 1.0, 1.0).total == pytest.approx(4.0, abs=1e-9)

    def test_zero_power(self):
        rng = np.random.default_rng(3)
        G = cn(rng, 8, 4)
        assert cellfree_sum_rate(G, zf_precoder(G.T), 0.0, 1.0).total == 0.0

    def test_random_against_eigen_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            G, P = cn(rng, 8, 4), cn(rng, 8, 4)
            E = G.T @ P
            ref = eig_log2det(np.eye(4) + 2.5 / 0.7 * E @ E.conj().T)
            assert cellfree_sum_rate(G, P, 2.5, 0.7).total == pytest.approx(ref, rel=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            cellfree_sum_rate(np.ones((8, 4)), np.ones((8, 3)), 1.0, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.0, 100.0), st.floats(0.0, 100.0), st.integers(0, 1000))
    def test_monotone_in_power(self, a, b, seed):
        rng = np.random.default_rng(seed)
        G, P = cn(rng, 6, 3), cn(rng, 6, 3)
        lo, hi = sorted((a, b))
        r_lo = cellfree_sum_rate(G, P, lo, 1.0).total
        r_hi = cellfree_sum_rate(G, P, hi, 1.0).total
        assert r_lo <= r_hi + 1e-9 and r_lo >= 0


class TestMulticell:
    def test_single_cell_identity(self):
        rng = np.random.default_rng(5)
        H = cn(rng, 4, 16)
        rep = multicell_sum_rate([[H]], [zf_precoder(H)], 1.0)
        assert rep.total == pytest.approx(4.0, abs=1e-9)

    def test_zero_coupling_reduces_to_isolated_cells(self):
        rng = np.random.default_rng(6)
        H = [[cn(rng, 2, 4) for _ in range(3)] for _ in range(3)]
        P = [cn(rng, 4, 2) for _ in range(3)]
        rep = multicell_sum_rate(H, P, 0.5, Q=0.0 * np.ones((3, 3)) + np.eye(3))
        for s in range(3):
            HP = H[s][s] @ P[s]
            ref = eig_log2det(np.eye(2) + HP @ HP.conj().T / 0.5)
            assert rep.per_cell[s] == pytest.approx(ref, rel=1e-9)
        assert rep.total == pytest.approx(sum(rep.per_cell), abs=0)

    def test_scalar_two_cell_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            h = cn(rng, 2, 2)  # h[s, l]: BS l -> user of cell s
            p = cn(rng, 2)
            q, noise = rng.uniform(0, 1), rng.uniform(0.1, 2)
            H = [[np.array([[h[s, l]]]) for l in range(2)] for s in range(2)]
            P = [np.array([[p[l]]]) for l in range(2)]
            Q = np.array([[1.0, q], [q, 1.0]])
            ref = sum(
                np.log2(1 + abs(h[s, s] * p[s]) ** 2 / (q**2 * abs(h[s, 1 - s] * p[1 - s]) ** 2 + noise))
                for s in range(2)
            )
            assert multicell_sum_rate(H, P, noise, Q).total == pytest.approx(ref, rel=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            multicell_sum_rate([[np.ones((2, 4))]], [np.ones((3, 2))], 1.0)


class TestZFThroughput:
    def test_orthonormal_rows(self):
        rng = np.random.default_rng(8)
        Q, _ = np.linalg.qr(cn(rng, 8, 8))
        for n in range(1, 6):
            for P in (0.5, 4.0, 100.0):
                assert abs(zf_throughput(Q[:n], P) - n * np.log2(P / n + 1)) < 1e-12

    def test_single_user(self):
        h = np.array([[1.0 + 1.0j, 0.5, -2.0j]])
        g = np.sum(np.abs(h) ** 2)
        assert zf_throughput(h, 3.0) == pytest.approx(np.log2(1 + 3.0 * g), rel=1e-12)

    def test_inactive_user_clamped(self):
        # gains c = (1, 1e-3): water level 2 leaves the weak user dry and it contributes 0
        H = np.diag([1.0, np.sqrt(1e-3)])
        assert zf_throughput(H, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_singular(self):
        with pytest.raises(SingularChannelError):
            zf_throughput(np.ones((2, 4)), 1.0)

    def test_waterfill_beats_equal_loading(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            n = int(rng.integers(1, 6))
            H = cn(rng, n, 8) * rng.exponential(size=(n, 1))
            P = rng.uniform(0.1, 50)
            assert zf_throughput(H, P, "equal") <= zf_throughput(H, P) + 1e-9

    def test_agrees_with_logdet_of_waterfilled_zf(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            H = cn(rng, 3, 8)
            out = zf_waterfill_precoder(H, 6.0)
            via_logdet = cellfree_sum_rate(H.T, out.P, out.rho, 1.0).total
            assert via_logdet == pytest.approx(zf_throughput(H, 6.0), rel=1e-9)


def _corr_double_loop(H):
    total = 0.0
    for u in range(H.shape[0]):
        for v in range(H.shape[0]):
            if u != v:
                total += abs(np.vdot(H[v], H[u])) / (np.linalg.norm(H[u]) * np.linalg.norm(H[v]))
    return total


class TestCorrelation:
    def test_orthogonal(self):
        assert sum_channel_correlation(np.eye(4)[:3]) == pytest.approx(0.0, abs=1e-15)

    def test_identical_rows(self):
        h = np.array([1.0, 2.0j, -1.0])
        assert sum_channel_correlation(np.vstack([h, h])) == pytest.approx(2.0)

    def test_singleton(self):
        assert sum_channel_correlation(np.ones((1, 3))) == 0.0

    def test_random_against_double_loop(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            H = cn(rng, 3, 6)
            assert sum_channel_correlation(H) == pytest.approx(_corr_double_loop(H), rel=1e-12)

    def test_zero_row(self):
        with pytest.raises(ValueError):
            sum_channel_correlation(np.array([[1.0, 0.0], [0.0, 0.0]]))

    def test_scale_and_permutation_invariance(self):
        rng = np.random.default_rng(12)
        H = cn(rng, 4, 6)
        scales = cn(rng, 4)[:, None] * 3
        base = sum_channel_correlation(H)
        assert sum_channel_correlation(H * scales) == pytest.approx(base, rel=1e-12)
        assert sum_channel_correlation(H[[2, 0, 3, 1]]) == pytest.approx(base, rel=1e-12)


@pytest.mark.parametrize("precoder", ["zf", "mmse"])
def test_batch_matches_scalar(precoder):
    rng = np.random.default_rng(13)
    H = cn(rng, 8, 12)
    ev = NetworkEvaluator(H, [ServiceGroup(np.arange(12), np.arange(8), 12.0)], precoder, 0.3).single()
    subsets = np.array(list(itertools.combinations(range(8), 3)))
    np.testing.assert_allclose(ev.batch(subsets), [ev(s) for s in subsets], rtol=1e-10)


def test_batch_marks_singular_subsets():
    rng = np.random.default_rng(14)
    H = cn(rng, 4, 6)
    H[1] = H[0]
    ev = NetworkEvaluator(H, [ServiceGroup(np.arange(6), np.arange(4), 6.0)], "zf", 1.0).single()
    vals = ev.batch(np.array([[0, 1], [0, 2]]))
    assert vals[0] == -np.inf and np.isfinite(vals[1])
    assert ev((0, 1)) == -np.inf


def test_evaluator_order_independent():
    rng = np.random.default_rng(15)
    H = cn(rng, 6, 10)
    ev = NetworkEvaluator(H, [ServiceGroup(np.arange(10), np.arange(6), 10.0)], "zf", 0.5)
    assert ev(((4, 1, 3),)) == ev(((1, 3, 4),))


def test_evaluator_multigroup_matches_multicell_sum_rate():
    rng = np.random.default_rng(16)
    H = cn(rng, 8, 8)
    groups = [ServiceGroup(np.arange(4), np.arange(4), 4.0), ServiceGroup(np.arange(4, 8), np.arange(4, 8), 4.0)]
    ev = NetworkEvaluator(H, groups, "zf", 0.2)
    sel = ((0, 2), (5, 7))
    precs = []
    for g, s in zip(groups, sel):
        Hs = H[np.ix_(s, g.tx)]
        P = zf_precoder(Hs)
        precs.append(P * np.sqrt(g.power / np.real(np.vdot(P, P))))
    H_cross = [[H[np.ix_(sel[s], groups[l].tx)] for l in range(2)] for s in range(2)]
    ref = multicell_sum_rate(H_cross, precs, 0.2).total
    assert ev(sel) == pytest.approx(ref, rel=1e-12)
