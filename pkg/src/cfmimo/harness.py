"""Monte Carlo SNR sweeps over both network types and all schedulers."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .flops import FlopCounter
from .precoding import SingularChannelError
from .rates import NetworkEvaluator, ServiceGroup
from .scenario import (
    ConfigurationError,
    Scenario,
    ScenarioConfig,
    generate_scenario,
    grid_cell_index,
    grid_shape,
    realize_channels,
)
from .scheduling import (
    CapacityError,
    ScheduleResult,
    enhanced_greedy_schedule_groups,
    exhaustive_schedule,
    exhaustive_schedule_groups,
    zfs_schedule_groups,
)

log = logging.getLogger(__name__)

METHODS = ("none", "zfs", "enhanced_rate", "enhanced_corr", "exhaustive")
NETWORKS = ("multicell", "cellfree")
PRECODERS = ("zf", "mmse")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    snr_points_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    n_trials: int = 100
    methods: tuple = METHODS
    networks: tuple = NETWORKS
    precoders: tuple = ("zf",)
    K_s: int | None = None  # defaults to K / 2
    clusters: int = 1
    clustering: bool = False
    master_seed: int = 0
    symbol_energy: float = 1.0
    exhaustive_cap: int = 10**6

    def __post_init__(self):
        if self.K_s is None:
            object.__setattr__(self, "K_s", self.scenario.K // 2)
        object.__setattr__(self, "snr_points_db", tuple(float(s) for s in self.snr_points_db))
        for name in ("methods", "networks", "precoders"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self):
        sc = self.scenario
        if self.n_trials < 1:
            raise ConfigurationError("n_trials must be >= 1")
        if not self.snr_points_db:
            raise ConfigurationError("snr_points_db must be non-empty")
        for name, allowed in (("methods", METHODS), ("networks", NETWORKS), ("precoders", PRECODERS)):
            values = getattr(self, name)
            if not values:
                raise ConfigurationError(f"{name} must be non-empty")
            bad = [v for v in values if v not in allowed]
            if bad:
                raise ConfigurationError(f"unknown {name}: {bad}; allowed {list(allowed)}")
        if not 1 <= self.K_s <= sc.K:
            raise ConfigurationError(f"K_s={self.K_s} must lie in [1, K={sc.K}]")
        if "multicell" in self.networks and self.multicell_target > sc.N_t:
            raise ConfigurationError(f"per-cell target exceeds N_t={sc.N_t}")
        if "cellfree" in self.networks and self.K_s > sc.M:
            raise ConfigurationError(f"K_s={self.K_s} exceeds M={sc.M}")
        if self.clusters < 1:
            raise ConfigurationError("clusters must be >= 1")
        if self.clustering:
            grid_shape(self.clusters, "square")
        if self.symbol_energy <= 0:
            raise ConfigurationError("symbol_energy must be positive")

    @property
    def multicell_target(self) -> int:
        return max(1, self.K_s // self.scenario.L)

    @property
    def cluster_target(self) -> int:
        n = self.clusters if self.clustering else 1
        return max(1, self.K_s // n)


def cluster_aps(scenario: Scenario, n_clusters: int) -> list[np.ndarray]:
    """Partition APs by the square grid cell (of ``n_clusters`` cells) containing them."""
    shape = grid_shape(n_clusters, "square")
    idx = grid_cell_index(scenario.ap_positions, scenario.area_side, shape)
    parts = [np.flatnonzero(idx == c) for c in range(n_clusters)]
    for c, part in enumerate(parts):
        if part.size == 0:
            raise ConfigurationError(f"cluster {c} contains no APs")
    return parts


@dataclass
class NetworkModel:
    """Full channel plus its service groups and per-group scheduling targets."""

    name: str
    H: np.ndarray  # (K, T)
    groups: list
    targets: list
    Q: np.ndarray

    def local_channels(self, noise_var: float) -> list[np.ndarray]:
        scale = 1.0 / math.sqrt(noise_var)
        return [self.H[np.ix_(g.users, g.tx)] * scale for g in self.groups]

    def to_global(self, selection) -> tuple:
        return tuple(tuple(int(g.users[i]) for i in sel) for g, sel in zip(self.groups, selection))


def build_networks(config: ExperimentConfig, scenario: Scenario, channels) -> dict:
    sc = config.scenario
    Ps = config.symbol_energy
    nets = {}
    if "multicell" in config.networks:
        groups = [
            ServiceGroup(channels.bs_antennas(l), scenario.users_of_cell(l), sc.N_t * Ps)
            for l in range(sc.L)
        ]
        targets = [min(config.multicell_target, g.users.size) for g in groups]
        nets["multicell"] = NetworkModel("multicell", channels.H_mc, groups, targets, channels.Q)
    if "cellfree" in config.networks:
        H = channels.G.T
        if config.clustering and config.clusters > 1:
            parts = cluster_aps(scenario, config.clusters)
            owner = grid_cell_index(scenario.user_positions, scenario.area_side, grid_shape(config.clusters))
            groups = []
            for c, aps in enumerate(parts):
                users = np.flatnonzero(owner == c)
                if users.size:
                    groups.append(ServiceGroup(aps, users, aps.size * Ps))
            targets = [min(config.cluster_target, g.users.size, g.tx.size) for g in groups]
        else:
            groups = [ServiceGroup(np.arange(sc.M), np.arange(sc.K), sc.M * Ps)]
            targets = [config.K_s]
        nets["cellfree"] = NetworkModel("cellfree", H, groups, targets, np.ones((len(groups),) * 2))
    return nets


@dataclass
class TrialRecord:
    trial: int
    network: str
    method: str
    precoder: str
    snr_db: float
    sum_rate: float
    flops: int
    set_size: int
    selection: tuple = ()


@dataclass
class SweepReport:
    rows: list  # (network, method, precoder, snr_db, mean_sum_rate, stderr, mean_flops)
    records: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    dominance_violations: list = field(default_factory=list)
    dominance_checked: int = 0

    COLUMNS = ("network", "method", "precoder", "snr_db", "mean_sum_rate", "stderr", "mean_flops")


def _joint(evaluator: NetworkEvaluator, model: NetworkModel):
    def f(selection, counter=None):
        kw = {} if counter is None else {"counter": counter}
        return evaluator(model.to_global(selection), **kw)

    return f


def _schedule(method, model, evaluator, noise_var, zfs_cache, cap):
    """Run one scheduler; returns (global selection, flops)."""
    H_loc = model.local_channels(noise_var)
    powers = [g.power for g in model.groups]
    if method == "none":
        return tuple(tuple(int(u) for u in g.users) for g in model.groups), 0
    if "zfs" not in zfs_cache:
        zfs_cache["zfs"] = zfs_schedule_groups(H_loc, model.targets, powers)
    combined, seeds = zfs_cache["zfs"]
    if method == "zfs":
        return model.to_global(combined.selected), combined.flops
    if method in ("enhanced_rate", "enhanced_corr"):
        crit = "sum_rate" if method == "enhanced_rate" else "correlation"
        res = enhanced_greedy_schedule_groups(
            H_loc, model.targets, powers, crit, _joint(evaluator, model), FlopCounter(), seeds=seeds
        )
        return model.to_global(res.selected), res.flops
    if method == "exhaustive":
        if len(model.groups) == 1:
            res = exhaustive_schedule(
                H_loc[0], model.targets[0], powers[0], evaluator.single(), cap=cap
            )
            return model.to_global((res.selected,)), res.flops
        res = exhaustive_schedule_groups(
            [g.users.size for g in model.groups], model.targets, _joint(evaluator, model), cap=cap
        )
        return model.to_global(res.selected), res.flops
    raise ValueError(f"unknown method {method!r}")


def run_trial(config: ExperimentConfig, trial: int) -> tuple[list, list]:
    """All (network, SNR, precoder, method) combinations for one drop."""
    seq = np.random.SeedSequence(config.master_seed, spawn_key=(trial,))
    rng = np.random.default_rng(seq)
    scenario = generate_scenario(config.scenario, rng)
    channels = realize_channels(scenario, config.scenario, rng)
    nets = build_networks(config, scenario, channels)
    records, warnings = [], []
    for name in config.networks:
        model = nets[name]
        for snr in config.snr_points_db:
            noise_var = config.symbol_energy / 10.0 ** (snr / 10.0)
            zfs_cache: dict = {}
            for prec in config.precoders:
                ev = NetworkEvaluator(model.H, model.groups, prec, noise_var, model.Q)
                for method in config.methods:
                    try:
                        sel, flops = _schedule(method, model, ev, noise_var, zfs_cache, config.exhaustive_cap)
                        rate = ev(sel)
                    except CapacityError as exc:
                        warnings.append(f"trial {trial} {name}/{method}: {exc}")
                        rate, flops, sel = float("nan"), 0, ()
                    except SingularChannelError as exc:
                        warnings.append(f"trial {trial} {name}/{method}: {exc}")
                        rate, flops, sel = float("nan"), 0, ()
                    records.append(
                        TrialRecord(trial, name, method, prec, snr, rate, int(flops), sum(map(len, sel)), sel)
                    )
    return records, warnings


def check_dominance(records) -> tuple[int, list]:
    """Per-trial ``exhaustive >= enhanced_rate >= zfs`` on equal-size selections."""
    index = {(r.trial, r.network, r.precoder, r.snr_db, r.method): r for r in records}
    checked, violations = 0, []
    for (t, net, prec, snr, method), r in index.items():
        if method != "zfs":
            continue
        chain = [index.get((t, net, prec, snr, m)) for m in ("exhaustive", "enhanced_rate", "zfs")]
        chain = [c for c in chain if c is not None and np.isfinite(c.sum_rate)]
        if len({c.set_size for c in chain}) != 1 or len(chain) < 2:
            continue
        checked += 1
        for hi, lo in zip(chain, chain[1:]):
            if hi.sum_rate < lo.sum_rate:
                violations.append((t, net, prec, snr, hi.method, hi.sum_rate, lo.method, lo.sum_rate))
    return checked, violations


def _order_key(row):
    net, method, prec, snr = row[:4]
    return (NETWORKS.index(net), METHODS.index(method), PRECODERS.index(prec), snr)


def aggregate(records) -> list:
    groups: dict = {}
    for r in sorted(records, key=lambda r: r.trial):
        groups.setdefault((r.network, r.method, r.precoder, r.snr_db), []).append(r)
    rows = []
    for key, recs in groups.items():
        rates = np.array([r.sum_rate for r in recs])
        flops = np.array([r.flops for r in recs], dtype=float)
        n = rates.size
        mean = float(np.mean(rates))
        stderr = float(np.std(rates, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        rows.append((*key, mean, stderr, float(np.mean(flops))))
    return sorted(rows, key=_order_key)


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> SweepReport:
    """Run every trial and reduce to per-(network, method, precoder, SNR) means.

    Trials are independent and seeded from ``master_seed`` by index, so the
    report does not depend on ``jobs``.
    """
    trials = range(config.n_trials)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(run_trial, [config] * config.n_trials, trials))
    else:
        outputs = [run_trial(config, t) for t in trials]
    records = [r for recs, _ in outputs for r in recs]
    warnings = [w for _, ws in outputs for w in ws]
    for w in warnings:
        log.warning(w)
    checked, violations = check_dominance(records)
    for v in violations:
        log.warning("dominance violated: %s", v)
    return SweepReport(
        rows=aggregate(records),
        records=records,
        warnings=warnings,
        dominance_violations=violations,
        dominance_checked=checked,
    )


def with_overrides(config: ExperimentConfig, **kwargs) -> ExperimentConfig:
    return replace(config, **kwargs)
