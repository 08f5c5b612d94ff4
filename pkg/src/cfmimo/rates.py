"""Sum-rate and selection-criterion computations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .flops import NULL_COUNTER, FlopCounter
from .precoding import RCOND_TOL, SingularChannelError, build_precoder, gram_inverse, waterfill


class DimensionError(ValueError):
    """Channel and precoder shapes do not agree."""


@dataclass
class RateReport:
    total: float
    per_cell: list[float] = field(default_factory=list)
    criterion_value: float | None = None


def log2det(A: np.ndarray) -> np.ndarray | float:
    """``log2 det A`` for Hermitian positive-definite ``A`` (batched over leading axes)."""
    A = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    chol = np.linalg.cholesky(A)
    diag = np.abs(np.diagonal(chol, axis1=-2, axis2=-1))
    out = 2.0 * np.sum(np.log2(diag), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def cellfree_sum_rate(G: np.ndarray, P: np.ndarray, rho_f: float, noise_var: float) -> RateReport:
    """``log2 det(I + rho_f / noise_var * G^T P P^H G^*)`` for ``G`` of shape ``M x K_s``."""
    G = np.atleast_2d(G)
    P = np.atleast_2d(P)
    if G.shape != P.shape:
        raise DimensionError(f"G {G.shape} and P {P.shape} must both be antennas x scheduled users")
    if rho_f < 0 or noise_var <= 0:
        raise ValueError("need rho_f >= 0 and noise_var > 0")
    E = G.T @ P
    n = E.shape[0]
    total = max(log2det(np.eye(n) + (rho_f / noise_var) * (E @ E.conj().T)), 0.0)
    return RateReport(total=total, per_cell=[total], criterion_value=total)


def multicell_sum_rate(
    H_cross: Sequence[Sequence[np.ndarray]],
    precoders: Sequence[np.ndarray],
    noise_var: float,
    Q: np.ndarray | float | None = None,
) -> RateReport:
    """Sum over cells of ``log2 det(I + S_s B_s^{-1})``.

    ``H_cross[s][l]`` is the channel from BS ``l`` to the scheduled users of
    cell ``s``; ``precoders[l]`` already carries BS ``l``'s transmit power.
    ``S_s`` is the useful covariance and ``B_s`` the coupled inter-cell
    interference plus noise. ``det(I + S B^{-1}) = det(S + B) / det(B)``
    keeps both arguments Hermitian.
    """
    L = len(precoders)
    if len(H_cross) != L or any(len(row) != L for row in H_cross):
        raise DimensionError("H_cross must be an L x L nested sequence")
    if Q is None:
        Q = np.ones((L, L))
    elif np.isscalar(Q):
        Q = np.full((L, L), float(Q))
    Q = np.asarray(Q)
    cov = [[None] * L for _ in range(L)]
    for s in range(L):
        n_s = H_cross[s][s].shape[0]
        for l in range(L):
            H = H_cross[s][l]
            if H.shape != (n_s, precoders[l].shape[0]):
                raise DimensionError(f"H_cross[{s}][{l}] has shape {H.shape}")
            cov[s][l] = _received_covariance(H, precoders[l])
    return _rates_from_covariances(cov, noise_var, Q)


def _received_covariance(H: np.ndarray, P: np.ndarray) -> np.ndarray:
    HP = H @ P
    return HP @ HP.conj().T


def _rates_from_covariances(cov, noise_var: float, Q: np.ndarray) -> RateReport:
    """Per-cell ``log2 det(S + B) - log2 det(B)`` from the ``cov[s][l]`` grid."""
    L = len(cov)
    per_cell = []
    for s in range(L):
        n_s = cov[s][s].shape[0]
        if n_s == 0:
            per_cell.append(0.0)
            continue
        B = noise_var * np.eye(n_s, dtype=complex)
        for l in range(L):
            if l != s:
                B = B + abs(Q[s, l]) ** 2 * cov[s][l]
        per_cell.append(max(log2det(cov[s][s] + B) - log2det(B), 0.0))
    total = float(sum(per_cell))
    return RateReport(total=total, per_cell=per_cell, criterion_value=total)


def effective_gains(H_sub: np.ndarray, counter: FlopCounter = NULL_COUNTER) -> np.ndarray:
    """``c_i = 1 / [(H H^H)^{-1}]_ii`` for the rows of ``H_sub``."""
    n, N = H_sub.shape
    counter.matmul(n, N, n)
    counter.inverse(n)
    return 1.0 / np.real(np.diag(gram_inverse(H_sub)))


def zf_throughput(
    H_sub: np.ndarray,
    total_power: float,
    loading: str = "waterfill",
    counter: FlopCounter = NULL_COUNTER,
) -> float:
    """ZF throughput of a user set under unit noise.

    With water-filling: ``sum_i [log2(mu c_i)]_+``. With ``loading='equal'``
    every user gets ``total_power / n``.
    """
    H_sub = np.atleast_2d(H_sub)
    c = effective_gains(H_sub, counter)
    n = c.size
    if loading == "waterfill":
        mu, _ = waterfill(c, total_power)
        counter.add(4 * n)
        return float(np.sum(np.maximum(np.log2(mu * c), 0.0)))
    if loading == "equal":
        return float(np.sum(np.log2(1.0 + c * total_power / n)))
    raise ValueError(f"unknown loading {loading!r}")


def sum_channel_correlation(H_sub: np.ndarray, counter: FlopCounter = NULL_COUNTER) -> float:
    """Sum over ordered pairs ``u != v`` of ``|h_u h_v^H| / (||h_u|| ||h_v||)``."""
    H_sub = np.atleast_2d(H_sub)
    n, N = H_sub.shape
    norms = np.linalg.norm(H_sub, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero-norm channel row")
    if n == 1:
        return 0.0
    counter.matmul(n, N, n)
    counter.add(2 * n * n)
    corr = np.abs(H_sub @ H_sub.conj().T) / np.outer(norms, norms)
    return float(corr.sum() - np.trace(corr))


@dataclass
class ServiceGroup:
    """Transmit antennas (columns of H) jointly serving a set of users (rows of H)."""

    tx: np.ndarray
    users: np.ndarray
    power: float


class NetworkEvaluator:
    """Sum-rate of a user selection under a given precoder and noise level.

    ``H`` is the full ``K x T`` user-by-antenna matrix. With one group the rate
    is the cell-free log-det; with several groups each precodes only its own
    selected users and the other groups' signals act as coupled interference.
    """

    def __init__(self, H, groups: Sequence[ServiceGroup], precoder: str, noise_var: float, Q=None):
        self.H = H
        self.groups = list(groups)
        self.precoder = precoder
        self.noise_var = noise_var
        L = len(self.groups)
        self.Q = np.ones((L, L)) if Q is None else np.asarray(Q)
        self._cache: dict = {}
        self._cov_cache: dict = {}

    def _precode(self, g: int, users: tuple, counter: FlopCounter):
        """Power-carrying precoder of group ``g`` for ``users``; cached across calls."""
        grp = self.groups[g]
        n, N = len(users), grp.tx.size
        if n:
            counter.matmul(n, N, n)
            counter.inverse(n)
            counter.matmul(N, n, n)
            counter.add(2 * N * n)
        key = (g, users)
        if key not in self._cache:
            if n == 0:
                self._cache[key] = np.zeros((N, 0), dtype=complex)
            else:
                H = self.H[np.ix_(users, grp.tx)]
                out = build_precoder(H, self.precoder, grp.power, self.noise_var)
                self._cache[key] = out.P * np.sqrt(out.rho)
        return self._cache[key]

    def report(self, selection, counter: FlopCounter = NULL_COUNTER) -> RateReport:
        # canonical order: the same set must always give the same float
        sel = [tuple(sorted(int(u) for u in s)) for s in selection]
        if len(sel) != len(self.groups):
            raise DimensionError("one user subset per service group is required")
        precs = [self._precode(g, sel[g], counter) for g in range(len(sel))]
        if len(sel) == 1:
            grp = self.groups[0]
            n = len(sel[0])
            if n == 0:
                return RateReport(total=0.0, per_cell=[0.0], criterion_value=0.0)
            G = self.H[np.ix_(sel[0], grp.tx)].T
            counter.matmul(n, grp.tx.size, n)
            counter.matmul(n, n, n)
            counter.det(n)
            return cellfree_sum_rate(G, precs[0], 1.0, self.noise_var)
        L = len(sel)
        cov = [[None] * L for _ in range(L)]
        for s in range(L):
            for l in range(L):
                n_s, n_l = len(sel[s]), len(sel[l])
                counter.matmul(n_s, self.groups[l].tx.size, n_l)
                counter.matmul(n_s, n_l, n_s)
                key = (s, sel[s], l, sel[l])
                if key not in self._cov_cache:
                    H = self.H[np.ix_(sel[s], self.groups[l].tx)]
                    self._cov_cache[key] = _received_covariance(H, precs[l])
                cov[s][l] = self._cov_cache[key]
            counter.det(len(sel[s]))
            counter.det(len(sel[s]))
        return _rates_from_covariances(cov, self.noise_var, self.Q)

    def __call__(self, selection, counter: FlopCounter = NULL_COUNTER) -> float:
        try:
            return self.report(selection, counter).total
        except SingularChannelError:
            return -np.inf

    def single(self) -> "SingleGroupRate":
        if len(self.groups) != 1:
            raise ValueError("single-group view requires exactly one service group")
        return SingleGroupRate(self)


class SingleGroupRate:
    """Adapter exposing a one-group evaluator as ``f(subset) -> rate``.

    Subset entries index rows of the group's local channel ``H[users][:, tx]``.
    ``batch`` evaluates many equal-size subsets at once with stacked linear
    algebra; singular subsets map to ``-inf``.
    """

    def __init__(self, evaluator: NetworkEvaluator):
        self.ev = evaluator
        grp = evaluator.groups[0]
        self.users = grp.users
        self.H_local = evaluator.H[np.ix_(grp.users, grp.tx)]

    def __call__(self, subset, counter: FlopCounter = NULL_COUNTER) -> float:
        return self.ev((tuple(int(self.users[i]) for i in subset),), counter)

    def batch(self, subsets: np.ndarray, counter: FlopCounter = NULL_COUNTER) -> np.ndarray:
        subsets = np.asarray(subsets, dtype=int)
        B, n = subsets.shape
        N = self.H_local.shape[1]
        grp = self.ev.groups[0]
        # same per-subset accounting as the scalar path
        counter.add(B * (2 * n * N * n + n**3 + 2 * N * n * n + 2 * N * n + 2 * n * N * n + 2 * n**3 + n**3))
        Hs = self.H_local[subsets]  # (B, n, N)
        HsH = np.conj(np.swapaxes(Hs, 1, 2))
        gram = Hs @ HsH
        eye = np.eye(n)
        noise = self.ev.noise_var
        out = np.full(B, -np.inf)
        if self.ev.precoder == "zf":
            ok = np.ones(B, dtype=bool)
            if n > N:
                return out
            try:
                chol = np.linalg.cholesky(gram)
            except np.linalg.LinAlgError:
                return np.array([self(s) for s in subsets])
            piv = np.abs(np.diagonal(chol, axis1=1, axis2=2)) ** 2
            scale = np.real(np.diagonal(gram, axis1=1, axis2=2)).max(axis=1)
            ok = piv.min(axis=1) > RCOND_TOL * scale
            inv_chol = np.linalg.inv(chol)
            A = np.conj(np.swapaxes(inv_chol, 1, 2)) @ inv_chol
        elif self.ev.precoder == "mmse":
            ok = np.ones(B, dtype=bool)
            A = np.linalg.inv(gram + (n * noise / grp.power) * eye)
        else:
            raise ValueError(f"unknown precoder {self.ev.precoder!r}")
        P = HsH @ A
        energy = np.sum(np.abs(P) ** 2, axis=(1, 2))
        P = P * np.sqrt(n / energy)[:, None, None]
        E = Hs @ P
        rho = grp.power / n
        M = eye + (rho / noise) * (E @ np.conj(np.swapaxes(E, 1, 2)))
        rates = np.maximum(log2det(M[ok]), 0.0) if ok.any() else np.empty(0)
        out[ok] = rates
        return out
