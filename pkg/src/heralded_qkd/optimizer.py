"""Per-loss maximisation of the key rate over the pump parameter mu."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .channel import ChannelDetectorSpec
from .protocols import DEFAULT_F_EC, Protocol, RatePoint, key_rate
from .sources import SourceKind, SourceSpec

__all__ = [
    "SearchSettings",
    "Optimum",
    "SweepRecord",
    "RATE_FLOOR",
    "golden_section_max",
    "optimize_mu",
    "sweep",
    "loss_cutoff",
    "find_loss_cutoff",
]

# rates at or below this count as "no key" when locating the loss cutoff
RATE_FLOOR = 1e-12

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchSettings:
    mu_min: float = 1e-4
    mu_max: float = 3.0
    grid_points: int = 64
    rel_tol: float = 1e-4

    def __post_init__(self):
        if not 0 < self.mu_min < self.mu_max:
            raise ValueError(f"need 0 < mu_min < mu_max, got ({self.mu_min}, {self.mu_max})")
        if self.rel_tol <= 0 or self.grid_points < 3:
            raise ValueError("rel_tol must be > 0 and grid_points >= 3")

    def grid(self) -> np.ndarray:
        return np.geomspace(self.mu_min, self.mu_max, self.grid_points)


DEFAULT_SEARCH = SearchSettings()


def golden_section_max(f: Callable[[float], float], a: float, b: float, rel_tol: float) -> tuple[float, float]:
    """Maximise ``f`` on [a, b] until the bracket is narrower than
    ``rel_tol`` times its midpoint.  Returns the best point evaluated."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best = (c, fc) if fc >= fd else (d, fd)
    while (b - a) > rel_tol * 0.5 * (a + b):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
            if fc > best[1]:
                best = (c, fc)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
            if fd > best[1]:
                best = (d, fd)
    return best


@dataclass(frozen=True)
class Optimum:
    mu_opt: float | None
    rate: float
    point: RatePoint | None
    all_zero: bool = False


def optimize_mu(
    source: SourceSpec,
    protocol: Protocol,
    channel: ChannelDetectorSpec,
    f_ec: float = DEFAULT_F_EC,
    search: SearchSettings = DEFAULT_SEARCH,
) -> Optimum:
    """Best mu for one loss point.

    A log-spaced grid is scanned first (R(mu) need not be unimodal), then
    the cell around the best grid point is refined by golden-section search.
    The result is never worse than any grid point.
    """
    if source.kind is SourceKind.IDEAL_SINGLE_PHOTON:
        point = key_rate(source, channel, protocol, f_ec)
        return Optimum(None, point.rate, point, all_zero=point.rate <= 0)

    def rate_at(mu: float) -> float:
        return key_rate(source.with_mu(mu), channel, protocol, f_ec).rate

    grid = search.grid()
    rates = np.array([rate_at(mu) for mu in grid])
    i = int(np.argmax(rates))
    if rates[i] <= 0:
        return Optimum(None, 0.0, None, all_zero=True)
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    mu_best, r_best = golden_section_max(rate_at, lo, hi, search.rel_tol)
    if r_best < rates[i]:
        mu_best, r_best = float(grid[i]), float(rates[i])
    point = key_rate(source.with_mu(mu_best), channel, protocol, f_ec)
    return Optimum(float(mu_best), point.rate, point)


@dataclass(frozen=True)
class SweepRecord:
    loss_db: float
    mu_opt: float | None
    rate: float
    gain: float | None = None
    qber: float | None = None
    delta: float | None = None
    p_click: float | None = None
    y0_l: float | None = None
    y1_l: float | None = None
    e1_u: float | None = None
    flag: str = ""


def _sweep_point(loss_db, source, protocol, channel, f_ec, search, fixed_mu) -> SweepRecord:
    try:
        if fixed_mu is None:
            opt = optimize_mu(source, protocol, channel.at_loss(loss_db), f_ec, search)
        else:
            point = key_rate(source.with_mu(fixed_mu), channel.at_loss(loss_db), protocol, f_ec)
            opt = Optimum(fixed_mu, point.rate, point, all_zero=point.rate <= 0)
    except ArithmeticError as exc:
        return SweepRecord(float(loss_db), None, 0.0, flag=f"error:{type(exc).__name__}")
    p = opt.point
    if p is None:
        return SweepRecord(float(loss_db), None, 0.0, flag="all_zero")
    flag = p.flag or ("all_zero" if opt.all_zero else "")
    return SweepRecord(
        float(loss_db), opt.mu_opt, opt.rate, p.gain, p.qber, p.delta, p.p_click, p.y0_l, p.y1_l, p.e1_u, flag
    )


def sweep(
    source: SourceSpec,
    protocol: Protocol,
    channel: ChannelDetectorSpec,
    losses: Sequence[float],
    f_ec: float = DEFAULT_F_EC,
    search: SearchSettings = DEFAULT_SEARCH,
    jobs: int = 1,
    fixed_mu: float | None = None,
) -> list[SweepRecord]:
    """Optimise every loss point independently; records come back in input order.

    With ``fixed_mu`` the rate is evaluated at that mu instead of optimised.
    """
    losses = [float(x) for x in losses]
    if not losses:
        raise ValueError("loss grid is empty")
    if any(x < 0 for x in losses):
        raise ValueError("losses must be >= 0 dB")
    work = partial(
        _sweep_point,
        source=source,
        protocol=Protocol(protocol),
        channel=channel,
        f_ec=f_ec,
        search=search,
        fixed_mu=fixed_mu,
    )
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(work, losses))
    return [work(x) for x in losses]


def loss_cutoff(records: Sequence[SweepRecord], floor: float = RATE_FLOOR) -> float | None:
    """Largest swept loss whose rate exceeds ``floor``."""
    positive = [r.loss_db for r in records if r.rate > floor]
    return max(positive) if positive else None


def find_loss_cutoff(
    source: SourceSpec,
    protocol: Protocol,
    channel: ChannelDetectorSpec,
    f_ec: float = DEFAULT_F_EC,
    search: SearchSettings = DEFAULT_SEARCH,
    max_loss: float = 60.0,
    coarse_step: float = 1.0,
    resolution: float = 0.1,
) -> float | None:
    """Maximum tolerable loss, located to ``resolution`` dB.

    A coarse sweep brackets the last positive-rate loss, the bracket is then
    swept again at ``resolution``.
    """
    coarse = np.round(np.arange(0.0, max_loss + 0.5 * coarse_step, coarse_step), 10)
    last = loss_cutoff(sweep(source, protocol, channel, coarse, f_ec, search))
    if last is None or last >= coarse[-1]:
        return last
    steps = int(round(coarse_step / resolution))
    fine = np.round(last + resolution * np.arange(1, steps), 10)
    refined = loss_cutoff(sweep(source, protocol, channel, fine, f_ec, search))
    return last if refined is None else refined
