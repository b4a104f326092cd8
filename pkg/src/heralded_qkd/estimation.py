"""Passive one-decoy bounds on Y_0, Y_1 and e_1.

Alice records for every pulse whether any heralding detector fired.  The two
resulting sub-ensembles have different, known photon statistics P^(c) and
P^(nc); their separately measured gains and QBERs bound the vacuum and
single-photon parameters of the channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .channel import DARK_ERROR, ChannelDetectorSpec, predict_observation
from .errors import DegenerateBounds, DegenerateStatistics
from .sources import Branch, PhotonStatistics, SourceSpec, pmf_conditional

__all__ = [
    "BranchObservations",
    "PassiveBounds",
    "simulate_branches",
    "y0_bounds",
    "y1_lower",
    "e1_upper",
    "estimate",
]

DENOMINATOR_FLOOR = 1e-300


@dataclass(frozen=True)
class BranchObservations:
    q_c: float
    e_c: float
    q_nc: float
    e_nc: float
    stats_c: PhotonStatistics
    stats_nc: PhotonStatistics

    def perturbed(self, q_c=1.0, e_c=1.0, q_nc=1.0, e_nc=1.0) -> "BranchObservations":
        """Copy with each observed quantity multiplied by the given factor.

        Simulated observations carry no statistical noise; this is the hook
        for robustness checks of the bounds.
        """
        return replace(
            self,
            q_c=self.q_c * q_c,
            e_c=self.e_c * e_c,
            q_nc=self.q_nc * q_nc,
            e_nc=self.e_nc * e_nc,
        )


@dataclass(frozen=True)
class PassiveBounds:
    y0_lower: float
    y0_upper: float
    y1_lower: float
    e1_upper: float | None  # None when y1_lower == 0


def simulate_branches(source: SourceSpec, channel: ChannelDetectorSpec) -> BranchObservations:
    """Noise-free branch observations predicted for the depolarising channel."""
    stats_c = pmf_conditional(source, Branch.CLICK)
    stats_nc = pmf_conditional(source, Branch.NOCLICK)
    # common truncation so both branches are compared on the same support
    n_max = max(stats_c.n_max, stats_nc.n_max)
    if stats_c.n_max != n_max:
        stats_c = pmf_conditional(source, Branch.CLICK, n_max=n_max)
    if stats_nc.n_max != n_max:
        stats_nc = pmf_conditional(source, Branch.NOCLICK, n_max=n_max)
    obs_c = predict_observation(stats_c, channel)
    obs_nc = predict_observation(stats_nc, channel)
    return BranchObservations(obs_c.gain, obs_c.qber, obs_nc.gain, obs_nc.qber, stats_c, stats_nc)


def _safe_ratio(num: float, den: float) -> float:
    return num / den if den > 0 else math.inf


def y0_bounds(obs: BranchObservations) -> tuple[float, float]:
    """Lower and upper bound on the vacuum yield Y_0."""
    pc, pnc = obs.stats_c, obs.stats_nc
    upper = min(
        _safe_ratio(obs.q_c * obs.e_c, pc[0] * DARK_ERROR),
        _safe_ratio(obs.q_nc * obs.e_nc, pnc[0] * DARK_ERROR),
    )
    den = pc[1] * pnc[0] - pnc[1] * pc[0]
    if den <= DENOMINATOR_FLOOR:
        raise DegenerateStatistics(f"P1c*P0nc - P1nc*P0c = {den:.3g}; branches not separable")
    lower = max((pc[1] * obs.q_nc - pnc[1] * obs.q_c) / den, 0.0)
    return lower, upper


def y1_lower(obs: BranchObservations, y0_upper: float) -> float:
    """Lower bound on the single-photon yield Y_1."""
    pc, pnc = obs.stats_c, obs.stats_nc
    den = pc[2] * pnc[1] - pnc[2] * pc[1]
    if den <= DENOMINATOR_FLOOR:
        raise DegenerateStatistics(f"P2c*P1nc - P2nc*P1c = {den:.3g}; branches not separable")
    vacuum_coeff = pc[2] * pnc[0] - pnc[2] * pc[0]
    vacuum = vacuum_coeff * y0_upper if vacuum_coeff else 0.0
    num = pc[2] * obs.q_nc - pnc[2] * obs.q_c - vacuum
    return max(num / den, 0.0)


def e1_upper(obs: BranchObservations, y0_lower: float, y1_lower: float) -> float:
    """Upper bound on the single-photon error rate, clamped into [0, 1/2]."""
    if not y1_lower > 0:
        raise DegenerateBounds("Y1 lower bound is zero; e1 cannot be bounded")
    pc, pnc = obs.stats_c, obs.stats_nc
    err_c = obs.q_c * obs.e_c
    err_nc = obs.q_nc * obs.e_nc
    candidates = (
        _safe_ratio(pnc[0] * err_c - pc[0] * err_nc, (pnc[0] * pc[1] - pc[0] * pnc[1]) * y1_lower),
        _safe_ratio(err_c - pc[0] * y0_lower * DARK_ERROR, pc[1] * y1_lower),
        _safe_ratio(err_nc - pnc[0] * y0_lower * DARK_ERROR, pnc[1] * y1_lower),
    )
    return min(max(min(candidates), 0.0), 0.5)


def estimate(obs: BranchObservations) -> PassiveBounds:
    lower, upper = y0_bounds(obs)
    y1 = y1_lower(obs, upper)
    e1 = e1_upper(obs, lower, y1) if y1 > 0 else None
    return PassiveBounds(lower, upper, y1, e1)
