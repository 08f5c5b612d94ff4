"""User selection: greedy ZFS, multi-candidate enhanced greedy, exhaustive search.

Channel matrices passed to the schedulers are noise-normalized (rows divided
by the noise standard deviation), so ``total_power`` is a transmit SNR budget.
Single-matrix entry points take ``rate_evaluator(subset) -> float``; the
``*_groups`` variants schedule several independent service groups (cells or
AP clusters) and score joint selections with ``joint_evaluator(selection)``
where ``selection`` holds one local index tuple per group.
"""

from __future__ import annotations

import inspect
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .flops import NULL_COUNTER, FlopCounter
from .precoding import RCOND_TOL, SingularChannelError
from .rates import NetworkEvaluator, ServiceGroup, sum_channel_correlation, zf_throughput
from .scenario import ConfigurationError

CRITERIA = ("sum_rate", "correlation")


class CapacityError(RuntimeError):
    """Exhaustive enumeration would exceed the configured subset cap."""


@dataclass
class ScheduleResult:
    selected: tuple
    candidates: list = field(default_factory=list)  # [(set, criterion value), ...]
    excluded_trace: list = field(default_factory=list)  # [(k_ex, k_new), ...]
    flops: int = 0
    criterion: str | None = None
    value: float = float("nan")  # R_zf for ZFS, criterion value otherwise
    early_stop: bool = False

    @property
    def size(self) -> int:
        if self.selected and isinstance(self.selected[0], tuple):
            return sum(len(s) for s in self.selected)
        return len(self.selected)


def channel_powers(H: np.ndarray, counter: FlopCounter = NULL_COUNTER) -> np.ndarray:
    K, N = H.shape
    for _ in range(K):
        counter.inner(N)
    return np.sum(np.abs(H) ** 2, axis=1)


def _check_target(H: np.ndarray, K_s: int):
    K, N = H.shape
    if K_s < 1:
        raise ConfigurationError("at least one user must be scheduled")
    if K_s > N:
        raise ConfigurationError(f"cannot schedule {K_s} users on {N} antennas")
    if K_s > K:
        raise ConfigurationError(f"cannot schedule {K_s} of {K} users")


def zfs_schedule(
    H: np.ndarray, K_s: int, total_power: float, counter: FlopCounter | None = None
) -> ScheduleResult:
    """Greedy zero-forcing with selection.

    Seeds with the strongest user and repeatedly adds the user whose
    inclusion maximizes the water-filled ZF throughput. Growth stops (keeping
    the previous set) as soon as the best augmented set does not improve on
    it. Ties go to the lowest user index.
    """
    counter = FlopCounter() if counter is None else counter
    start = counter.count
    H = np.atleast_2d(H)
    _check_target(H, K_s)
    K = H.shape[0]

    powers = channel_powers(H, counter)
    selected = [int(np.argmax(powers))]
    best_rate = zf_throughput(H[selected], total_power, counter=counter)
    early = False
    while len(selected) < K_s:
        cand_rate, cand = -np.inf, None
        for k in range(K):
            if k in selected:
                continue
            try:
                r = zf_throughput(H[selected + [k]], total_power, counter=counter)
            except SingularChannelError:
                continue
            if r > cand_rate:
                cand_rate, cand = r, k
        if cand is None or cand_rate <= best_rate:
            early = True
            break
        selected.append(cand)
        best_rate = cand_rate
    return ScheduleResult(
        selected=tuple(selected),
        flops=counter.count - start,
        value=best_rate,
        early_stop=early,
    )


def swap_candidates(powers: np.ndarray, seed: Sequence[int], counter: FlopCounter = NULL_COUNTER):
    """Chain of candidate sets built by weakest-in / strongest-out swaps.

    At each stage the weakest scheduled user (by channel power) is replaced,
    in place, by the strongest user still in the remaining pool; the new user
    leaves the pool and the excluded one does not return. Produces
    ``len(pool) // 2`` sets after the seed.
    """
    K = powers.size
    current = list(seed)
    remaining = [k for k in range(K) if k not in current]
    n_extra = len(remaining) // 2
    candidates = [tuple(current)]
    trace = []
    for _ in range(n_extra):
        counter.add(len(current) + len(remaining))
        k_ex = min(current, key=lambda k: (powers[k], k))
        k_new = max(remaining, key=lambda k: (powers[k], -k))
        current[current.index(k_ex)] = k_new
        remaining.remove(k_new)
        candidates.append(tuple(current))
        trace.append((k_ex, k_new))
    return candidates, trace


def _is_singular(H_sub: np.ndarray, counter: FlopCounter) -> bool:
    n, N = H_sub.shape
    if n > N:
        return True
    counter.add(n**3 // 3)
    gram = H_sub @ H_sub.conj().T
    try:
        piv = np.abs(np.diag(np.linalg.cholesky(gram))) ** 2
    except np.linalg.LinAlgError:
        return True
    return bool(piv.min() <= RCOND_TOL * np.real(np.diag(gram)).max())


def _correlation_value(H_sub: np.ndarray, counter: FlopCounter) -> float:
    if _is_singular(H_sub, counter):
        return np.inf
    return sum_channel_correlation(H_sub, counter)


def _counting(f: Callable) -> Callable:
    """Wrap ``f`` so it can always be called as ``f(x, counter)``."""
    try:
        params = inspect.signature(f).parameters
    except (TypeError, ValueError):
        return f
    if "counter" in params or len(params) >= 2:
        return f
    return lambda x, counter=NULL_COUNTER: f(x)


def default_rate_evaluator(H: np.ndarray, total_power: float, precoder: str = "zf"):
    """Cell-free log-det rate of ``H``'s rows under unit noise."""
    K, N = H.shape
    group = ServiceGroup(tx=np.arange(N), users=np.arange(K), power=total_power)
    return NetworkEvaluator(H, [group], precoder, 1.0).single()


def enhanced_greedy_schedule(
    H: np.ndarray,
    K_s: int,
    total_power: float,
    criterion: str = "sum_rate",
    rate_evaluator: Callable | None = None,
    counter: FlopCounter | None = None,
    seed: ScheduleResult | None = None,
) -> ScheduleResult:
    """Multi-candidate greedy: ZFS seed plus swap-generated alternatives.

    Candidates are scored by ``rate_evaluator`` (maximized) or by the sum of
    pairwise normalized channel correlations (minimized). Candidates whose
    row-reduced channel is singular are never chosen. A precomputed ZFS
    ``seed`` may be supplied; its flops are included in the result.
    """
    H = np.atleast_2d(H)
    if rate_evaluator is None:
        rate_evaluator = default_rate_evaluator(H, total_power)
    rate_evaluator = _counting(rate_evaluator)
    res = enhanced_greedy_schedule_groups(
        [H],
        [K_s],
        [total_power],
        criterion,
        lambda sel, counter=NULL_COUNTER: rate_evaluator(sel[0], counter),
        counter,
        seeds=None if seed is None else [seed],
    )
    res.selected = res.selected[0]
    res.candidates = [(sets[0], v) for sets, v in res.candidates]
    res.excluded_trace = res.excluded_trace[0]
    return res


def enhanced_greedy_schedule_groups(
    H_groups: Sequence[np.ndarray],
    targets: Sequence[int],
    powers: Sequence[float],
    criterion: str,
    joint_evaluator: Callable,
    counter: FlopCounter | None = None,
    seeds: Sequence[ScheduleResult] | None = None,
) -> ScheduleResult:
    """Enhanced greedy over several groups.

    Each group builds its own swap chain from its ZFS seed. Under the rate
    criterion every combination of per-group candidates is scored jointly
    (first combination wins ties, so the all-seed combination is preferred).
    The correlation criterion is a sum of per-group terms, each computed once
    per group candidate. With a single group both reduce to scoring the chain.
    """
    joint_evaluator = _counting(joint_evaluator)
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    counter = FlopCounter() if counter is None else counter
    start = counter.count
    if seeds is None:
        seeds = [zfs_schedule(H, t, p, counter) for H, t, p in zip(H_groups, targets, powers)]
    else:
        counter.add(sum(s.flops for s in seeds))

    chains, traces = [], []
    for H, s in zip(H_groups, seeds):
        cands, trace = swap_candidates(channel_powers(H, counter), s.selected, counter)
        chains.append(cands)
        traces.append(trace)
    candidates = []
    if criterion == "correlation":
        # the summed criterion decomposes over groups: score each group candidate once
        scores = [
            [_correlation_value(H[list(c)], counter) for c in chain] for H, chain in zip(H_groups, chains)
        ]
        for idx in itertools.product(*(range(len(c)) for c in chains)):
            joint = tuple(chain[i] for chain, i in zip(chains, idx))
            candidates.append((joint, float(sum(sc[i] for sc, i in zip(scores, idx)))))
        values = np.array([v for _, v in candidates])
        best = int(np.argmin(values)) if np.isfinite(values).any() else 0
    else:
        for joint in itertools.product(*chains):
            candidates.append((joint, float(joint_evaluator(joint, counter=counter))))
        values = np.array([v for _, v in candidates])
        best = int(np.argmax(values)) if np.isfinite(values).any() else 0

    return ScheduleResult(
        selected=candidates[best][0],
        candidates=candidates,
        excluded_trace=traces,
        flops=counter.count - start,
        criterion=criterion,
        value=candidates[best][1],
        early_stop=any(s.early_stop for s in seeds),
    )


def zfs_schedule_groups(
    H_groups: Sequence[np.ndarray],
    targets: Sequence[int],
    powers: Sequence[float],
    counter: FlopCounter | None = None,
) -> tuple[ScheduleResult, list[ScheduleResult]]:
    """Independent per-group ZFS; returns the combined result and the per-group seeds."""
    counter = FlopCounter() if counter is None else counter
    start = counter.count
    seeds = [zfs_schedule(H, t, p, counter) for H, t, p in zip(H_groups, targets, powers)]
    combined = ScheduleResult(
        selected=tuple(s.selected for s in seeds),
        flops=counter.count - start,
        value=sum(s.value for s in seeds),
        early_stop=any(s.early_stop for s in seeds),
    )
    return combined, seeds


def _pick_best(subsets, values, rescore, tie_tol):
    """Maximizer of ``values`` with lexicographic tie-breaking.

    Entries within ``tie_tol`` (relative) of the maximum are re-scored with
    ``rescore`` (if given) so that the reported winner is exact under the
    scalar evaluator; remaining near-ties go to the smallest index set.
    """
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    if not finite.any():
        raise SingularChannelError("every enumerated subset is singular")
    top = values[finite].max()
    band = np.flatnonzero(finite & (values >= top - tie_tol * max(1.0, abs(top))))
    if rescore is not None:
        exact = np.array([rescore(subsets[i]) for i in band])
        top = exact.max()
        band = band[exact >= top - tie_tol * max(1.0, abs(top))]
        vals = dict(zip(band, exact[exact >= top - tie_tol * max(1.0, abs(top))]))
    else:
        vals = {i: values[i] for i in band}
    winner = min(band, key=lambda i: tuple(subsets[i]))
    return winner, float(vals[winner])


def exhaustive_schedule(
    H: np.ndarray,
    K_s: int,
    total_power: float,
    rate_evaluator: Callable | None = None,
    cap: int = 10**6,
    counter: FlopCounter | None = None,
    tie_tol: float = 1e-9,
    chunk: int = 4096,
) -> ScheduleResult:
    """Best size-``K_s`` subset by brute-force enumeration.

    Evaluators exposing ``batch(subsets)`` are called in chunks. Rates within
    ``tie_tol`` (relative) of each other are ties, won by the
    lexicographically smallest index set.
    """
    counter = FlopCounter() if counter is None else counter
    start = counter.count
    H = np.atleast_2d(H)
    K = H.shape[0]
    if not 1 <= K_s <= K:
        raise ConfigurationError(f"cannot schedule {K_s} of {K} users")
    n_sets = math.comb(K, K_s)
    if n_sets > cap:
        raise CapacityError(f"C({K},{K_s}) = {n_sets} subsets exceeds the cap of {cap}")
    if rate_evaluator is None:
        rate_evaluator = default_rate_evaluator(H, total_power)

    subsets = list(itertools.combinations(range(K), K_s))
    batch = getattr(rate_evaluator, "batch", None)
    rate_evaluator = _counting(rate_evaluator)
    if batch is not None:
        arr = np.array(subsets, dtype=int)
        values = np.concatenate(
            [batch(arr[i : i + chunk], counter) for i in range(0, n_sets, chunk)]
        )
        rescore = rate_evaluator
    else:
        values = [rate_evaluator(s, counter) for s in subsets]
        rescore = None
    winner, value = _pick_best(subsets, values, rescore, tie_tol)
    return ScheduleResult(selected=subsets[winner], flops=counter.count - start, value=value)


def exhaustive_schedule_groups(
    group_sizes: Sequence[int],
    targets: Sequence[int],
    joint_evaluator: Callable,
    cap: int = 10**6,
    counter: FlopCounter | None = None,
    tie_tol: float = 1e-9,
) -> ScheduleResult:
    """Enumerate every combination of per-group subsets of the target sizes."""
    counter = FlopCounter() if counter is None else counter
    start = counter.count
    n_sets = math.prod(math.comb(k, t) for k, t in zip(group_sizes, targets))
    if n_sets > cap:
        raise CapacityError(f"{n_sets} joint subsets exceed the cap of {cap}")
    per_group = [list(itertools.combinations(range(k), t)) for k, t in zip(group_sizes, targets)]
    joints = list(itertools.product(*per_group))
    joint_evaluator = _counting(joint_evaluator)
    values = [joint_evaluator(j, counter=counter) for j in joints]
    flat = [tuple(itertools.chain.from_iterable(j)) for j in joints]
    winner, value = _pick_best(flat, values, None, tie_tol)
    return ScheduleResult(selected=joints[winner], flops=counter.count - start, value=value)
