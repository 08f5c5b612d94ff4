"""Drop geometry and channel realizations for the cellular and cell-free arms.

Both deployments share one square coverage area ``[0, area_side]^2``. The
cellular arm splits it into ``L`` equal cells, each with an ``N_t``-antenna BS
at its center and ``K_c = K / L`` users. The cell-free arm places ``M = L N_t``
single-antenna APs uniformly at random over the whole square and serves the
same users.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a scenario or experiment configuration is inconsistent."""


@dataclass(frozen=True)
class ScenarioConfig:
    area_side: float = 400.0
    K: int = 16
    L: int = 4
    N_t: int = 16
    M: int = 64
    carrier_freq: float = 1900.0  # MHz
    h_ap: float = 15.0
    h_user: float = 1.5
    d0: float = 10.0
    d1: float = 50.0
    sigma_sh: float = 8.0  # dB
    rng_seed: int = 0
    cell_layout: str = "square"  # "square" (sqrt(L) x sqrt(L)) or "strip" (1 x L)
    coupling: float = 1.0  # scales every cross-cell term of Q
    multicell_pathloss: bool = True
    ref_distance: float = 50.0  # large-scale gains are expressed relative to PL at this distance

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.area_side <= 0:
            raise ConfigurationError("area_side must be positive")
        if min(self.K, self.L, self.N_t, self.M) < 1:
            raise ConfigurationError("K, L, N_t and M must all be >= 1")
        if self.K % self.L:
            raise ConfigurationError(f"K={self.K} is not a multiple of L={self.L}")
        if self.M != self.L * self.N_t:
            raise ConfigurationError(f"M={self.M} must equal L*N_t={self.L * self.N_t}")
        if not 0 < self.d0 < self.d1 < self.area_side:
            raise ConfigurationError("breakpoints must satisfy 0 < d0 < d1 < area_side")
        if not 0.0 <= self.coupling <= 1.0:
            raise ConfigurationError("coupling must lie in [0, 1]")
        if self.sigma_sh < 0:
            raise ConfigurationError("sigma_sh must be non-negative")
        if self.ref_distance <= 0:
            raise ConfigurationError("ref_distance must be positive")
        grid_shape(self.L, self.cell_layout)

    @property
    def K_c(self) -> int:
        return self.K // self.L


def grid_shape(n_cells: int, layout: str = "square") -> tuple[int, int]:
    """Return ``(rows, cols)`` of the tiling used for ``n_cells`` cells."""
    if layout == "strip":
        return 1, n_cells
    if layout != "square":
        raise ConfigurationError(f"unknown cell_layout {layout!r}")
    side = math.isqrt(n_cells)
    if side * side != n_cells:
        raise ConfigurationError(
            f"L={n_cells} is not a perfect square; use cell_layout='strip' for a 1xL tiling"
        )
    return side, side


def grid_cell_index(points: np.ndarray, area_side: float, shape: tuple[int, int]) -> np.ndarray:
    """Row-major index of the grid cell containing each point."""
    rows, cols = shape
    col = np.clip((points[:, 0] / (area_side / cols)).astype(int), 0, cols - 1)
    row = np.clip((points[:, 1] / (area_side / rows)).astype(int), 0, rows - 1)
    return row * cols + col


def grid_cell_bounds(index: int, area_side: float, shape: tuple[int, int]):
    """``(x_lo, x_hi, y_lo, y_hi)`` of grid cell ``index``."""
    rows, cols = shape
    w, h = area_side / cols, area_side / rows
    r, c = divmod(index, cols)
    return c * w, (c + 1) * w, r * h, (r + 1) * h


@dataclass
class Scenario:
    ap_positions: np.ndarray  # (M, 2)
    bs_positions: np.ndarray  # (L, 2)
    user_positions: np.ndarray  # (K, 2)
    cell_of_user: np.ndarray  # (K,)
    ap_distances: np.ndarray  # (M, K)
    bs_distances: np.ndarray  # (L, K)
    area_side: float
    grid: tuple[int, int]

    @property
    def distances(self) -> dict[str, np.ndarray]:
        return {"cellfree": self.ap_distances, "multicell": self.bs_distances}

    def users_of_cell(self, s: int) -> np.ndarray:
        return np.flatnonzero(self.cell_of_user == s)

    def as_text(self) -> str:
        """Structured plain-text dump used by the ``schedule`` subcommand."""
        lines = [f"area_side = {self.area_side:g}", f"grid = {self.grid[0]}x{self.grid[1]}"]
        for l, (x, y) in enumerate(self.bs_positions):
            lines.append(f"bs[{l}] = ({x:.3f}, {y:.3f})")
        for m, (x, y) in enumerate(self.ap_positions):
            lines.append(f"ap[{m}] = ({x:.3f}, {y:.3f})")
        for k, (x, y) in enumerate(self.user_positions):
            lines.append(f"user[{k}] = ({x:.3f}, {y:.3f}) cell={self.cell_of_user[k]}")
        return "\n".join(lines)


def _pairwise_distances(tx: np.ndarray, rx: np.ndarray) -> np.ndarray:
    return np.linalg.norm(tx[:, None, :] - rx[None, :, :], axis=-1)


def generate_scenario(config: ScenarioConfig, rng: np.random.Generator | None = None) -> Scenario:
    """Draw AP and user positions for one drop.

    APs are i.i.d. uniform over the square. Users are drawn uniformly inside
    each cell, ``K_c`` per cell, so that every cell holds exactly ``K_c`` users
    while the pooled positions remain uniform over the area. User indices are
    ordered by cell.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    shape = grid_shape(config.L, config.cell_layout)
    side = config.area_side

    ap_positions = rng.uniform(0.0, side, size=(config.M, 2))

    bounds = [grid_cell_bounds(l, side, shape) for l in range(config.L)]
    bs_positions = np.array([[(x0 + x1) / 2, (y0 + y1) / 2] for x0, x1, y0, y1 in bounds])

    users = []
    for x0, x1, y0, y1 in bounds:
        u = rng.uniform(size=(config.K_c, 2))
        users.append(np.column_stack([x0 + u[:, 0] * (x1 - x0), y0 + u[:, 1] * (y1 - y0)]))
    user_positions = np.vstack(users)
    cell_of_user = np.repeat(np.arange(config.L), config.K_c)

    return Scenario(
        ap_positions=ap_positions,
        bs_positions=bs_positions,
        user_positions=user_positions,
        cell_of_user=cell_of_user,
        ap_distances=_pairwise_distances(ap_positions, user_positions),
        bs_distances=_pairwise_distances(bs_positions, user_positions),
        area_side=side,
        grid=shape,
    )


def hata_offset_db(config: ScenarioConfig) -> float:
    """Frequency/height dependent constant of the three-slope model, in dB."""
    lf = math.log10(config.carrier_freq)
    return (
        46.3
        + 33.9 * lf
        - 13.82 * math.log10(config.h_ap)
        - (1.11 * lf - 0.7) * config.h_user
        + 1.56 * lf
        - 0.8
    )


def path_loss_db(d, params: ScenarioConfig):
    """Three-slope path loss (a negative dB gain) at distance ``d`` metres.

    Works elementwise on arrays. Raises ``ValueError`` for ``d <= 0``.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path loss is undefined for non-positive distances")
    D = hata_offset_db(params)
    d0, d1 = params.d0, params.d1
    far = -D - 35.0 * np.log10(np.maximum(d, d1))
    mid = -D - 10.0 * np.log10(d1**1.5 * np.clip(d, d0, d1) ** 2)
    pl = np.where(d > d1, far, mid)
    return pl if pl.ndim else float(pl)


def large_scale_coeff(pl_db, z, d, params: ScenarioConfig):
    """Linear large-scale gain: path loss times log-normal shadowing.

    Shadowing is applied only beyond the outer breakpoint ``d1``.
    """
    pl_db, z, d = np.broadcast_arrays(
        np.asarray(pl_db, float), np.asarray(z, float), np.asarray(d, float)
    )
    shadow_db = np.where(d > params.d1, params.sigma_sh * z, 0.0)
    beta = 10.0 ** ((pl_db + shadow_db) / 10.0)
    return beta if beta.ndim else float(beta)


def _cn01(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


@dataclass
class ChannelRealization:
    """One coherence interval for both arms.

    ``beta_*`` are linear large-scale gains relative to ``beta_ref`` (the
    unshadowed gain at ``ref_distance``), so SNR figures refer to a link at
    that reference distance.
    """

    beta_cf: np.ndarray  # (M, K)
    small_cf: np.ndarray  # (M, K)
    G: np.ndarray  # (M, K)
    beta_mc: np.ndarray  # (L, K), shared by the N_t antennas of a BS
    small_mc: np.ndarray  # (L*N_t, K)
    H_mc: np.ndarray  # (K, L*N_t), full user x BS-antenna matrix
    Q: np.ndarray  # (L, L)
    cell_of_user: np.ndarray
    N_t: int
    beta_ref: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return self.Q.shape[0]

    def bs_antennas(self, l: int) -> np.ndarray:
        return np.arange(l * self.N_t, (l + 1) * self.N_t)

    def cross(self, s: int, l: int) -> np.ndarray:
        """Channel from BS ``l`` to the users of cell ``s`` (K_c x N_t)."""
        users = np.flatnonzero(self.cell_of_user == s)
        return self.H_mc[np.ix_(users, self.bs_antennas(l))]

    @property
    def H_cross(self) -> list[list[np.ndarray]]:
        return [[self.cross(s, l) for l in range(self.L)] for s in range(self.L)]


def coupling_matrix(L: int, coupling: float) -> np.ndarray:
    Q = np.full((L, L), float(coupling))
    np.fill_diagonal(Q, 1.0)
    return Q


def realize_channels(
    scenario: Scenario, config: ScenarioConfig, rng: np.random.Generator
) -> ChannelRealization:
    """Draw shadowing and Rayleigh fading for one coherence interval."""
    beta_ref = 10.0 ** (path_loss_db(config.ref_distance, config) / 10.0)
    # distances can only hit 0 on a measure-zero event; anything <= d0 sits on the flat branch
    d_cf = np.maximum(scenario.ap_distances, 1e-9)
    d_mc = np.maximum(scenario.bs_distances, 1e-9)

    z_cf = rng.standard_normal(d_cf.shape)
    beta_cf = large_scale_coeff(path_loss_db(d_cf, config), z_cf, d_cf, config) / beta_ref
    small_cf = _cn01(rng, d_cf.shape)
    G = np.sqrt(beta_cf) * small_cf

    z_mc = rng.standard_normal(d_mc.shape)
    if config.multicell_pathloss:
        beta_mc = large_scale_coeff(path_loss_db(d_mc, config), z_mc, d_mc, config) / beta_ref
    else:
        beta_mc = np.ones_like(d_mc)
    small_mc = _cn01(rng, (config.L * config.N_t, config.K))
    amp = np.repeat(np.sqrt(beta_mc), config.N_t, axis=0)
    H_mc = (amp * small_mc).T

    return ChannelRealization(
        beta_cf=beta_cf,
        small_cf=small_cf,
        G=G,
        beta_mc=beta_mc,
        small_mc=small_mc,
        H_mc=H_mc,
        Q=coupling_matrix(config.L, config.coupling),
        cell_of_user=scenario.cell_of_user.copy(),
        N_t=config.N_t,
        beta_ref=beta_ref,
    )
