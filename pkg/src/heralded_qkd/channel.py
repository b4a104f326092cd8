"""Depolarising lossy channel followed by a two-detector threshold receiver.

Every quantity is per sifted pulse; no basis-sifting factor appears.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InvalidRange, NegativeLoss, ZeroYield
from .sources import PhotonStatistics

__all__ = [
    "ChannelDetectorSpec",
    "ObservedChannel",
    "DARK_ERROR",
    "transmittance",
    "detection_prob",
    "predicted_yield",
    "predicted_error",
    "predict_observation",
]

# error probability of a dark-count event
DARK_ERROR = 0.5


def transmittance(loss_db: float) -> float:
    """t = 10**(-L/10)."""
    if loss_db < 0:
        raise NegativeLoss(f"loss must be >= 0 dB, got {loss_db}")
    return 10.0 ** (-loss_db / 10.0)


@dataclass(frozen=True)
class ChannelDetectorSpec:
    """Channel loss and visibility plus Bob's receiver.

    Defaults are typical fibre-link values: V = 0.99, t_B = 1, eta_B = 0.25,
    p_d = 2e-7.  ``exact_yield`` switches from the approximate yield
    Y_n = Y_0 + eta_n to Y_0 + eta_n - Y_0*eta_n.
    """

    loss_db: float = 0.0
    visibility: float = 0.99
    t_b: float = 1.0
    eta_b: float = 0.25
    p_dark: float = 2e-7
    exact_yield: bool = False

    def __post_init__(self):
        if not self.loss_db >= 0:
            raise NegativeLoss(f"loss must be >= 0 dB, got {self.loss_db}")
        for name in ("visibility", "t_b", "eta_b", "p_dark"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidRange(f"{name} must lie in [0, 1], got {value}")

    def at_loss(self, loss_db: float) -> "ChannelDetectorSpec":
        return replace(self, loss_db=float(loss_db))

    @property
    def t(self) -> float:
        return transmittance(self.loss_db)

    @property
    def single_photon_efficiency(self) -> float:
        """eta_B * t_B * t, the chance one photon reaches a detector and clicks."""
        return self.eta_b * self.t_b * self.t

    @property
    def y0(self) -> float:
        """Background yield, two detectors: Y_0 ~ 2 p_d."""
        return 2.0 * self.p_dark

    @property
    def e_misalignment(self) -> float:
        return (1.0 - self.visibility) / 2.0


@dataclass(frozen=True)
class ObservedChannel:
    """Gain and QBER as Alice and Bob would measure them."""

    gain: float
    qber: float

    def __post_init__(self):
        if not (math.isfinite(self.gain) and math.isfinite(self.qber)):
            raise InvalidRange("gain and qber must be finite")
        if not 0.0 <= self.gain <= 1.0:
            raise InvalidRange(f"gain must lie in [0, 1], got {self.gain}")
        if not 0.0 <= self.qber <= 0.5 + 1e-12:
            raise InvalidRange(f"qber must lie in [0, 1/2], got {self.qber}")

    @property
    def error_gain(self) -> float:
        """Q*E, the probability of an erroneous click."""
        return self.gain * self.qber


def detection_prob(n: int, spec: ChannelDetectorSpec) -> float:
    """eta_n = 1 - (1 - eta_B t_B t)**n for an n-photon pulse."""
    if n < 0:
        raise InvalidRange(f"photon number must be >= 0, got {n}")
    y = spec.single_photon_efficiency
    if y >= 1.0:
        return 0.0 if n == 0 else 1.0
    return -math.expm1(n * math.log1p(-y))


def predicted_yield(n: int, spec: ChannelDetectorSpec) -> float:
    eta_n = detection_prob(n, spec)
    if spec.exact_yield:
        return spec.y0 + eta_n - spec.y0 * eta_n
    return spec.y0 + eta_n


def predicted_error(n: int, spec: ChannelDetectorSpec) -> float:
    yn = predicted_yield(n, spec)
    if yn == 0:
        raise ZeroYield(f"yield of {n}-photon pulses is zero, error rate undefined")
    return (DARK_ERROR * spec.y0 + spec.e_misalignment * detection_prob(n, spec)) / yn


def predict_observation(stats: PhotonStatistics, spec: ChannelDetectorSpec) -> ObservedChannel:
    """Gain and QBER produced by a source with photon statistics ``stats``.

    With D = sum_n P_n eta_n the expected signal click probability,
    Q = Y_0 + D (or Y_0 + (1 - Y_0) D with the exact yield) and
    Q*E = e_0 Y_0 + e_d D.
    """
    clicks = stats.click_probability(spec.single_photon_efficiency)
    y0 = spec.y0
    gain = y0 + (1.0 - y0) * clicks if spec.exact_yield else y0 + clicks
    gain = min(gain, 1.0)
    if gain == 0:
        return ObservedChannel(0.0, 0.0)
    errors = DARK_ERROR * y0 + spec.e_misalignment * clicks
    return ObservedChannel(gain, min(errors / gain, 0.5))
