"""Asymptotic BB84 key rates: no decoy, active decoy, passive one-decoy."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .channel import (
    ChannelDetectorSpec,
    ObservedChannel,
    predict_observation,
    predicted_error,
    predicted_yield,
)
from .errors import DegenerateBranch, DegenerateStatistics, OutOfDomain, UnsupportedSource
from .estimation import PassiveBounds, estimate, simulate_branches
from .sources import SourceKind, SourceSpec, p_noclick, pmf

__all__ = [
    "DEFAULT_F_EC",
    "Protocol",
    "RateInputs",
    "RatePoint",
    "PassiveDecoyResult",
    "binary_entropy",
    "rate_inputs",
    "rate_no_decoy",
    "rate_active_decoy",
    "passive_decoy",
    "rate_passive_decoy",
    "key_rate",
]

DEFAULT_F_EC = 1.05


class Protocol(str, Enum):
    NO_DECOY = "no_decoy"
    ACTIVE_DECOY = "active_decoy"
    PASSIVE_DECOY = "passive_decoy"


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise OutOfDomain(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class RateInputs:
    """Everything the rate formulas consume.

    ``y0``, ``y1`` and ``e1`` are either the exact channel parameters (active
    decoy) or bounds on them.
    """

    p0: float
    p1: float
    delta: float
    y0: float
    y1: float
    e1: float
    observed: ObservedChannel
    f_ec: float = DEFAULT_F_EC


def rate_inputs(source: SourceSpec, channel: ChannelDetectorSpec, f_ec: float = DEFAULT_F_EC) -> RateInputs:
    """Rate inputs with channel parameters predicted exactly for the DLC."""
    stats = pmf(source)
    observed = predict_observation(stats, channel)
    p0, p1 = stats[0], stats[1]
    multi = max(1.0 - p0 - p1, 0.0)
    delta = multi / observed.gain if observed.gain > 0 else 1.0
    return RateInputs(
        p0=p0,
        p1=p1,
        delta=min(delta, 1.0),
        y0=predicted_yield(0, channel),
        y1=predicted_yield(1, channel),
        e1=predicted_error(1, channel),
        observed=observed,
        f_ec=f_ec,
    )


def rate_no_decoy(inputs: RateInputs) -> float:
    """Key rate when every multi-photon pulse is assumed fully known to Eve."""
    q, e = inputs.observed.gain, inputs.observed.qber
    single = 1.0 - inputs.delta
    if single <= 0 or e / single >= 0.5:
        return 0.0
    rate = q * (single * (1.0 - binary_entropy(e / single)) - inputs.f_ec * binary_entropy(e))
    return max(rate, 0.0)


def rate_active_decoy(inputs: RateInputs) -> float:
    q, e = inputs.observed.gain, inputs.observed.qber
    rate = (
        inputs.p0 * inputs.y0
        + inputs.p1 * inputs.y1 * (1.0 - binary_entropy(inputs.e1))
        - q * inputs.f_ec * binary_entropy(e)
    )
    return max(rate, 0.0)


@dataclass(frozen=True)
class PassiveDecoyResult:
    rate: float
    p_click: float
    rate_click: float
    rate_noclick: float
    gain: float
    qber: float
    bounds: PassiveBounds | None
    flag: str = ""


def _branch_rate(p0, p1, bounds: PassiveBounds, gain, qber, f_ec) -> float:
    rate = p0 * bounds.y0_lower - gain * f_ec * binary_entropy(qber)
    if bounds.e1_upper is not None:
        rate += p1 * bounds.y1_lower * (1.0 - binary_entropy(bounds.e1_upper))
    return rate


def passive_decoy(source: SourceSpec, channel: ChannelDetectorSpec, f_ec: float = DEFAULT_F_EC) -> PassiveDecoyResult:
    """Passive one-decoy key rate with its intermediate quantities.

    Each branch rate is clamped at zero before weighting: a branch that
    yields no key is simply discarded.
    """
    if not source.kind.heralded:
        raise UnsupportedSource(f"passive decoy needs heralding detectors, got {source.kind.value}")
    p_nc = p_noclick(source)
    p_c = 1.0 - p_nc
    total = predict_observation(pmf(source), channel)
    try:
        obs = simulate_branches(source, channel)
        bounds = estimate(obs)
    except DegenerateBranch:
        return PassiveDecoyResult(0.0, p_c, 0.0, 0.0, total.gain, total.qber, None, "degenerate_branch")
    except DegenerateStatistics:
        return PassiveDecoyResult(0.0, p_c, 0.0, 0.0, total.gain, total.qber, None, "degenerate_statistics")
    sc, snc = obs.stats_c, obs.stats_nc
    r_c = max(_branch_rate(sc[0], sc[1], bounds, obs.q_c, obs.e_c, f_ec), 0.0)
    r_nc = max(_branch_rate(snc[0], snc[1], bounds, obs.q_nc, obs.e_nc, f_ec), 0.0)
    flag = "" if bounds.e1_upper is not None else "degenerate_bounds"
    return PassiveDecoyResult(p_c * r_c + p_nc * r_nc, p_c, r_c, r_nc, total.gain, total.qber, bounds, flag)


def rate_passive_decoy(source: SourceSpec, channel: ChannelDetectorSpec, f_ec: float = DEFAULT_F_EC) -> float:
    return passive_decoy(source, channel, f_ec).rate


@dataclass(frozen=True)
class RatePoint:
    """Key rate of one (source, channel, protocol) triple and diagnostics.

    Fields that do not apply to the protocol are ``None``.
    """

    rate: float
    gain: float
    qber: float
    delta: float | None = None
    p_click: float | None = None
    y0_l: float | None = None
    y1_l: float | None = None
    e1_u: float | None = None
    flag: str = ""


def key_rate(
    source: SourceSpec,
    channel: ChannelDetectorSpec,
    protocol: Protocol,
    f_ec: float = DEFAULT_F_EC,
) -> RatePoint:
    protocol = Protocol(protocol)
    if protocol is Protocol.PASSIVE_DECOY:
        res = passive_decoy(source, channel, f_ec)
        b = res.bounds
        return RatePoint(
            rate=res.rate,
            gain=res.gain,
            qber=res.qber,
            p_click=res.p_click,
            y0_l=b.y0_lower if b else None,
            y1_l=b.y1_lower if b else None,
            e1_u=b.e1_upper if b else None,
            flag=res.flag,
        )
    inputs = rate_inputs(source, channel, f_ec)
    obs = inputs.observed
    if protocol is Protocol.NO_DECOY:
        return RatePoint(rate_no_decoy(inputs), obs.gain, obs.qber, delta=inputs.delta)
    return RatePoint(rate_active_decoy(inputs), obs.gain, obs.qber)


def is_mu_independent(source: SourceSpec) -> bool:
    return source.kind is SourceKind.IDEAL_SINGLE_PHOTON
