"""Linear precoders and downlink power loading."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularChannelError(np.linalg.LinAlgError):
    """The row-reduced channel has no right inverse (too many users or rank loss)."""


# pivot ratio below which a Gram matrix is treated as singular
RCOND_TOL = 1e-12


@dataclass
class PrecoderOutput:
    P: np.ndarray
    power_alloc: np.ndarray
    mu: float | None
    total_power: float

    @property
    def rho(self) -> float:
        """Per-user scale that turns ``P`` (trace = n) into the power budget."""
        return self.total_power / self.P.shape[1]


def gram_inverse(H: np.ndarray) -> np.ndarray:
    """``(H H^H)^{-1}`` through a Cholesky factor, rejecting rank-deficient ``H``."""
    n, N = H.shape
    if n > N:
        raise SingularChannelError(f"{n} users cannot be zero-forced with {N} antennas")
    gram = H @ H.conj().T
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularChannelError("channel Gram matrix is not positive definite") from exc
    piv = np.abs(np.diag(chol)) ** 2
    if piv.min() <= RCOND_TOL * max(np.real(np.diag(gram)).max(), np.finfo(float).tiny):
        raise SingularChannelError("channel rows are linearly dependent")
    inv_chol = np.linalg.inv(chol)
    return inv_chol.conj().T @ inv_chol


def zf_precoder(H: np.ndarray) -> np.ndarray:
    """Right pseudo-inverse ``H^H (H H^H)^{-1}`` of a ``K_s x N`` channel."""
    H = np.atleast_2d(H)
    return H.conj().T @ gram_inverse(H)


def mmse_precoder(H: np.ndarray, noise_over_power: float) -> np.ndarray:
    """Regularized channel inversion ``H^H (H H^H + a I)^{-1}`` (unnormalized)."""
    if noise_over_power <= 0:
        raise ValueError("noise_over_power must be positive")
    H = np.atleast_2d(H)
    n = H.shape[0]
    A = H @ H.conj().T + noise_over_power * np.eye(n)
    # A is Hermitian PD, so solve(A, H) = A^{-1} H and its adjoint is H^H A^{-1}
    return np.linalg.solve(A, H).conj().T


def normalize_power(P: np.ndarray, target: float | None = None) -> np.ndarray:
    """Scale ``P`` by one scalar so ``trace(P P^H)`` equals ``target`` (default: #columns)."""
    target = P.shape[1] if target is None else target
    energy = np.real(np.vdot(P, P))
    if energy <= 0:
        raise ValueError("cannot normalize an all-zero precoder")
    return P * np.sqrt(target / energy)


def waterfill(c, total_power: float, max_iter: int = 200, tol: float = 1e-12):
    """Water-filling over effective gains ``c``.

    Returns ``(mu, powers)`` with ``powers = [mu - 1/c]_+`` summing to
    ``total_power``. The water level is bracketed by bisection; once the
    active set is identified, ``mu`` is recomputed in closed form on it.
    """
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        raise ValueError("water-filling needs at least one gain")
    if np.any(c <= 0):
        raise ValueError("gains must be strictly positive")
    if total_power <= 0:
        raise ValueError("total_power must be positive")

    floors = 1.0 / c
    lo, hi = floors.min(), floors.max() + total_power
    mu = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mu = 0.5 * (lo + hi)
        resid = np.maximum(mu - floors, 0.0).sum() - total_power
        if abs(resid) <= tol:
            break
        if resid > 0:
            hi = mu
        else:
            lo = mu

    active = floors < mu
    if active.any():
        exact = (total_power + floors[active].sum()) / active.sum()
        # keep the closed form only if it reproduces the same active set
        if np.all(floors[active] < exact) and np.all(floors[~active] >= exact):
            mu = exact
    return float(mu), np.maximum(mu - floors, 0.0)


def equal_power(n_users: int, total_power: float) -> np.ndarray:
    if n_users < 1:
        raise ValueError("equal power loading needs at least one user")
    return np.full(n_users, total_power / n_users)


def zf_waterfill_precoder(H: np.ndarray, total_power: float) -> PrecoderOutput:
    """ZF beams with water-filled per-user powers (unit noise)."""
    ginv = gram_inverse(H)
    c = 1.0 / np.real(np.diag(ginv))
    mu, p = waterfill(c, total_power)
    P = H.conj().T @ ginv
    # column i of the pseudo-inverse has squared norm 1/c_i
    P = P * np.sqrt(p * c)
    n = P.shape[1]
    return PrecoderOutput(P=P * np.sqrt(n / total_power), power_alloc=p, mu=mu, total_power=total_power)


def build_precoder(H: np.ndarray, kind: str, total_power: float, noise_var: float) -> PrecoderOutput:
    """ZF or MMSE precoder normalized to ``trace(P P^H) = n``.

    The MMSE regularizer is ``n * noise_var / total_power``. Actual per-user
    transmit powers are ``rho * ||p_i||^2`` with ``rho = total_power / n``.
    """
    H = np.atleast_2d(H)
    n = H.shape[0]
    if kind == "zf":
        P = zf_precoder(H)
    elif kind == "mmse":
        P = mmse_precoder(H, n * noise_var / total_power)
    else:
        raise ValueError(f"unknown precoder {kind!r}")
    P = normalize_power(P)
    col = np.sum(np.abs(P) ** 2, axis=0)
    return PrecoderOutput(P=P, power_alloc=col * total_power / n, mu=None, total_power=total_power)
