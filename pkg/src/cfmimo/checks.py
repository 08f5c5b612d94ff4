"""Invariant checks on small random instances (the ``validate`` subcommand)."""

from __future__ import annotations

import itertools

import numpy as np

from .precoding import waterfill, zf_precoder
from .rates import log2det, zf_throughput
from .scenario import ScenarioConfig, path_loss_db
from .scheduling import (
    default_rate_evaluator,
    enhanced_greedy_schedule,
    exhaustive_schedule,
    zfs_schedule,
)


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def check_zf_residual(rng, n=50):
    worst = 0.0
    for _ in range(n):
        H = _cn(rng, 4, 8)
        worst = max(worst, np.abs(H @ zf_precoder(H) - np.eye(4)).max())
    return worst < 1e-9, f"max |HP - I| = {worst:.2e}"


def check_waterfill(rng, n=1000):
    bad = 0
    for _ in range(n):
        c = rng.exponential(size=rng.integers(1, 9)) + 1e-3
        P = rng.uniform(0.1, 100)
        mu, p = waterfill(c, P)
        on = p > 0
        ok = abs(p.sum() - P) <= 1e-9 * P
        ok &= np.allclose(p[on], mu - 1 / c[on], rtol=0, atol=1e-9 * P)
        ok &= np.all(mu <= 1 / c[~on] + 1e-12)
        bad += not ok
    return bad == 0, f"{bad}/{n} KKT failures"


def check_log2det(rng, n=200):
    worst = 0.0
    for _ in range(n):
        X = _cn(rng, 5, 7)
        A = X @ X.conj().T + np.eye(5)
        ref = np.sum(np.log2(np.linalg.eigvalsh(A)))
        worst = max(worst, abs(log2det(A) - ref) / abs(ref))
    return worst < 1e-9, f"max rel err = {worst:.2e}"


def check_orthonormal_throughput(rng, n=20):
    worst = 0.0
    for _ in range(n):
        k = int(rng.integers(1, 6))
        Q, _ = np.linalg.qr(_cn(rng, 8, 8))
        P = rng.uniform(0.5, 50)
        worst = max(worst, abs(zf_throughput(Q[:k], P) - k * np.log2(P / k + 1)))
    return worst < 1e-12, f"max abs err = {worst:.2e}"


def check_path_loss(_rng):
    cfg = ScenarioConfig()
    d = np.linspace(0.5, 600, 5000)
    pl = path_loss_db(d, cfg)
    mono = np.all(np.diff(pl) <= 1e-12)
    eps = 1e-9
    cont = all(abs(path_loss_db(b + eps, cfg) - path_loss_db(b, cfg)) < 1e-6 for b in (cfg.d0, cfg.d1))
    return bool(mono and cont), "monotone and continuous" if mono and cont else "violated"


def check_exhaustive_oracle(rng, n=50):
    bad = 0
    for _ in range(n):
        H = _cn(rng, 6, 6)
        ev = default_rate_evaluator(H, 10.0)
        res = exhaustive_schedule(H, 3, 10.0, ev)
        best = max(itertools.combinations(range(6), 3), key=lambda s: (ev(s), [-i for i in s]))
        bad += tuple(res.selected) != best
    return bad == 0, f"{bad}/{n} mismatches"


def check_dominance(rng, n=50):
    bad = checked = 0
    for _ in range(n):
        H = _cn(rng, 8, 8) * np.sqrt(rng.exponential(size=(8, 1)))
        ev = default_rate_evaluator(H, 8.0)
        z = zfs_schedule(H, 4, 8.0)
        if len(z.selected) != 4:
            continue
        e = enhanced_greedy_schedule(H, 4, 8.0, "sum_rate", ev, seed=z)
        x = exhaustive_schedule(H, 4, 8.0, ev)
        checked += 1
        bad += not (ev(x.selected) >= ev(e.selected) >= ev(z.selected))
    return bad == 0, f"{bad}/{checked} violations"


CHECKS = {
    "zf_residual": check_zf_residual,
    "waterfill_kkt": check_waterfill,
    "log2det_vs_eig": check_log2det,
    "orthonormal_zf_throughput": check_orthonormal_throughput,
    "path_loss_shape": check_path_loss,
    "exhaustive_vs_bruteforce": check_exhaustive_oracle,
    "scheduler_dominance": check_dominance,
}


def run_checks(seed: int = 0):
    rng = np.random.default_rng(seed)
    return [(name, *fn(rng)) for name, fn in CHECKS.items()]
