"""Photon-number statistics of the sources feeding the QKD link.

Five source kinds are modelled:

* ``WCS`` - phase-randomised attenuated laser, Poisson statistics.
* ``IDEAL_SINGLE_PHOTON`` - exactly one photon per pulse.
* ``MHPS`` - m heralded SPDC units behind a lossless m-to-1 switch with
  perfect heralding detectors.
* ``SMHPS`` - symmetric binary tree of 2-to-1 switches (m a power of two).
* ``AMHPS`` - asymmetric chain of 2-to-1 switches, crystal i pumped to
  compensate the k_i switches it traverses.

In the multiplexed architectures every switch gives priority to its left
input and routes the first HS unit to the output when no heralding detector
fires.  ``mu`` is always the mean photon number at the source output a
single unit would deliver (pump means are ``mu / gamma**k_i``).

Besides the truncated pmf, every distribution (except the ideal single photon
source) is also stored as a signed mixture of Poisson laws.  That form gives
closed-form generating functions and a certified bound on the truncated tail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy
from scipy.stats import poisson

from .errors import DegenerateBranch, InvalidM, InvalidRange, UnsupportedSource

__all__ = [
    "Branch",
    "PhotonStatistics",
    "SourceKind",
    "SourceSpec",
    "Truncation",
    "DEFAULT_TRUNCATION",
    "validate",
    "pmf",
    "p_noclick",
    "pmf_conditional",
    "weighted_survival",
    "chain_exponent",
]

# below this |1 - gamma| the chain exponent is evaluated by its series
GAMMA_SERIES_THRESHOLD = 1e-6
# branch probabilities below this make conditioning meaningless
BRANCH_FLOOR = 1e-300


class SourceKind(str, Enum):
    WCS = "wcs"
    IDEAL_SINGLE_PHOTON = "single_photon"
    MHPS = "mhps"
    SMHPS = "smhps"
    AMHPS = "amhps"

    @property
    def heralded(self) -> bool:
        """True for architectures with (imperfect) heralding detectors."""
        return self in (SourceKind.SMHPS, SourceKind.AMHPS)

    @property
    def multiplexed(self) -> bool:
        return self in (SourceKind.MHPS, SourceKind.SMHPS, SourceKind.AMHPS)


class Branch(str, Enum):
    CLICK = "click"
    NOCLICK = "noclick"


@dataclass(frozen=True)
class SourceSpec:
    """Source architecture and its design parameters.

    ``m``, ``eta`` and ``gamma`` are ignored where the architecture has no
    use for them (``m`` for WCS/single photon, ``eta``/``gamma`` for MHPS).
    """

    kind: SourceKind
    mu: float = 0.0
    m: int = 1
    eta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))

    def with_mu(self, mu: float) -> "SourceSpec":
        return replace(self, mu=float(mu))

    @property
    def depth(self) -> int:
        """Switches crossed in the symmetric tree, k = log2(m)."""
        return int(self.m).bit_length() - 1

    def switch_counts(self) -> np.ndarray:
        """Number of 2-to-1 switches between crystal i (1-based) and the output."""
        if self.kind is SourceKind.SMHPS:
            return np.full(self.m, self.depth, dtype=np.int64)
        if self.kind is SourceKind.AMHPS:
            k = np.arange(1, self.m + 1, dtype=np.int64)
            k[-1] = self.m - 1
            return k
        if self.kind is SourceKind.MHPS:
            return np.zeros(self.m, dtype=np.int64)
        raise UnsupportedSource(f"{self.kind.value} has no crystal array")

    def pump_means(self) -> np.ndarray:
        """Mean number of pairs generated per pulse in each crystal."""
        k = self.switch_counts()
        if self.kind is SourceKind.MHPS:
            return np.full(self.m, self.mu)
        with np.errstate(over="ignore"):
            return self.mu * np.power(float(self.gamma), -k.astype(float))


def validate(spec: SourceSpec) -> SourceSpec:
    """Check the architecture invariants and return ``spec`` unchanged."""
    if not math.isfinite(spec.mu) or spec.mu < 0:
        raise InvalidRange(f"mu must be finite and >= 0, got {spec.mu}")
    kind = spec.kind
    if kind.multiplexed:
        if int(spec.m) != spec.m:
            raise InvalidM(f"m must be an integer, got {spec.m}")
        minimum = 2 if kind is SourceKind.AMHPS else 1
        if spec.m < minimum:
            raise InvalidM(f"{kind.value} requires m >= {minimum}, got {spec.m}")
        if kind is SourceKind.SMHPS and spec.m & (spec.m - 1):
            raise InvalidM(f"smhps requires m to be a power of 2, got {spec.m}")
    if kind.heralded:
        if not 0.0 <= spec.eta <= 1.0:
            raise InvalidRange(f"eta must lie in [0, 1], got {spec.eta}")
        if not 0.0 < spec.gamma <= 1.0:
            raise InvalidRange(f"gamma must lie in (0, 1], got {spec.gamma}")
    return spec


@dataclass(frozen=True)
class Truncation:
    """Default truncation: n_max = max(min_n_max, ceil(mu + width*sqrt(mu))),
    doubled until the certified tail bound drops below ``tail_tol``."""

    min_n_max: int = 50
    width: float = 12.0
    tail_tol: float = 1e-12
    max_n_max: int = 1 << 20


DEFAULT_TRUNCATION = Truncation()


@dataclass(frozen=True)
class PhotonStatistics:
    """Photon-number pmf truncated at ``n_max = len(probs) - 1``.

    ``tail_mass`` bounds the probability of more than ``n_max`` photons.
    ``poisson_terms`` holds ``(weight, mean)`` pairs with
    ``P_n = sum_j weight_j * Poisson(mean_j)(n)`` exactly (weights may be
    negative but sum to one); ``None`` when no such form is kept.
    """

    probs: np.ndarray
    tail_mass: float = 0.0
    poisson_terms: tuple[tuple[float, float], ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    def __getitem__(self, n: int) -> float:
        return float(self.probs[n]) if n <= self.n_max else 0.0

    def total(self) -> float:
        return math.fsum(self.probs)

    def weighted_survival(self, x: float) -> float:
        """sum_n P_n x**n."""
        if self.poisson_terms is not None:
            return math.fsum(w * math.exp(-lam * (1.0 - x)) for w, lam in self.poisson_terms)
        return math.fsum(self.probs * np.power(float(x), np.arange(len(self.probs))))

    def click_probability(self, y: float) -> float:
        """sum_n P_n [1 - (1 - y)**n]: chance that at least one of the photons,
        each surviving independently with probability ``y``, gets through.

        Evaluated without forming ``1 - weighted_survival(1 - y)`` so that it
        stays accurate for y down to the smallest transmittances.
        """
        if self.poisson_terms is not None:
            return math.fsum(w * -math.expm1(-lam * y) for w, lam in self.poisson_terms)
        if y >= 1:
            return math.fsum(self.probs[1:])
        n = np.arange(len(self.probs))
        return math.fsum(self.probs * -np.expm1(n * math.log1p(-y)))


def chain_exponent(gamma: float, j) -> np.ndarray:
    """sum_{l=1..j} gamma**(-l) = (gamma**(-j) - 1) / (1 - gamma).

    The closed form is singular at gamma = 1; below ``GAMMA_SERIES_THRESHOLD``
    a second-order expansion in (1 - gamma) is used instead.
    """
    j = np.asarray(j, dtype=float)
    eps = 1.0 - gamma
    if abs(eps) < GAMMA_SERIES_THRESHOLD:
        return j + eps * j * (j + 1) / 2 + eps**2 * j * (j + 1) * (j + 2) / 6
    with np.errstate(over="ignore"):
        return np.expm1(-j * math.log(gamma)) / eps


def _log_poisson(n: np.ndarray, lam: float) -> np.ndarray:
    return xlogy(n, lam) - lam - gammaln(n + 1)


def _log_noclick(spec: SourceSpec) -> float:
    """log P^nc; the exponent is mu*eta times the summed pump scale factors."""
    if spec.kind is SourceKind.SMHPS:
        with np.errstate(over="ignore"):
            scale = spec.m * float(spec.gamma) ** (-spec.depth)
    else:
        scale = float(chain_exponent(spec.gamma, spec.m - 1)) + float(spec.gamma) ** (1 - spec.m)
    if spec.mu == 0 or spec.eta == 0:
        return 0.0
    return -spec.mu * spec.eta * scale


def _chain_terms(spec: SourceSpec):
    """AMHPS: log of the priority weights exp(-eta*mu*S_i), and the
    per-crystal exponent eta*mu*(gamma**-k_i - 1)."""
    i = np.arange(1, spec.m + 1)
    log_w = -spec.eta * spec.mu * chain_exponent(spec.gamma, i - 1) if spec.eta * spec.mu else np.zeros(spec.m)
    eta_mu = spec.eta * spec.mu
    if eta_mu == 0:
        return log_w, np.zeros(spec.m)
    k = spec.switch_counts().astype(float)
    with np.errstate(over="ignore"):
        excess = eta_mu * np.expm1(-k * math.log(spec.gamma))
    return log_w, excess


def _click_log_bracket(n: np.ndarray, eta: float, excess) -> np.ndarray:
    """log[1 - (1-eta)**n * exp(-excess)], broadcasting n against excess."""
    with np.errstate(divide="ignore"):
        inner = xlogy(n, 1.0 - eta) - excess
        return np.log(-np.expm1(inner))


def _require_heralded(spec: SourceSpec) -> None:
    if not spec.kind.heralded:
        raise UnsupportedSource(f"{spec.kind.value} has no heralding detectors")


def p_noclick(spec: SourceSpec) -> float:
    """Probability that none of the heralding detectors fires."""
    validate(spec)
    _require_heralded(spec)
    return math.exp(_log_noclick(spec))


def _poisson_terms(spec: SourceSpec, branch: Branch | None = None):
    """Signed Poisson-mixture form of pmf / pmf_conditional."""
    mu, eta = spec.mu, spec.eta
    kind = spec.kind
    if kind is SourceKind.WCS:
        return ((1.0, mu),)
    if kind is SourceKind.MHPS:
        amp = math.expm1(-spec.m * mu) / math.expm1(-mu) if mu > 0 else float(spec.m)
        return ((amp, mu), (math.exp(-spec.m * mu) - amp * math.exp(-mu), 0.0))
    if kind is SourceKind.IDEAL_SINGLE_PHOTON:
        return None
    nc = mu * (1.0 - eta)
    if branch is Branch.NOCLICK:
        return ((1.0, nc),)
    log_pnc = _log_noclick(spec)
    p_click = -math.expm1(log_pnc)
    if kind is SourceKind.SMHPS:
        with np.errstate(over="ignore"):
            lam = mu * float(spec.gamma) ** (-spec.depth)
        # single-crystal click probability and the no-click-in-one-crystal weight
        d = -math.expm1(-eta * lam)
        stay = math.exp(-eta * lam)
        if branch is Branch.CLICK:
            return ((1.0 / d, mu), (-stay / d, nc))
        if p_click < BRANCH_FLOOR:
            return ((1.0, nc),)
        ratio = p_click / d
        return ((ratio, mu), (math.exp(log_pnc) - ratio * stay, nc))
    log_w, excess = _chain_terms(spec)
    w = np.exp(log_w)
    # probability that crystal i alone does not herald
    stay = np.exp(-eta * spec.pump_means()) if eta * mu else np.ones(spec.m)
    sw = math.fsum(w)
    sws = math.fsum(w * stay)
    if branch is Branch.CLICK:
        return ((sw / p_click, mu), (-sws / p_click, nc))
    return ((sw, mu), (math.exp(log_pnc) - sws, nc))


def _tail_bound(terms, n_max: int) -> float:
    if terms is None:
        return 0.0
    return float(sum(abs(w) * poisson.sf(n_max, lam) for w, lam in terms if lam > 0))


def _choose_n_max(spec: SourceSpec, terms, policy: Truncation) -> int:
    if spec.kind is SourceKind.IDEAL_SINGLE_PHOTON:
        return 1
    mu = spec.mu
    n_max = max(policy.min_n_max, math.ceil(mu + policy.width * math.sqrt(mu)))
    while _tail_bound(terms, n_max) > policy.tail_tol and n_max < policy.max_n_max:
        n_max *= 2
    return n_max


def _check_branch(spec: SourceSpec, branch: Branch) -> None:
    if branch is Branch.CLICK:
        p = -math.expm1(_log_noclick(spec))
        if p < BRANCH_FLOOR:
            raise DegenerateBranch(f"click probability {p:.3g} too small to condition on")


def pmf(spec: SourceSpec, n_max: int | None = None, policy: Truncation = DEFAULT_TRUNCATION) -> PhotonStatistics:
    """Output photon-number distribution of ``spec``.

    With ``n_max=None`` the truncation point follows ``policy`` and the
    returned ``tail_mass`` is at most ``policy.tail_tol``.
    """
    validate(spec)
    terms = _poisson_terms(spec)
    if n_max is None:
        n_max = _choose_n_max(spec, terms, policy)
    n = np.arange(n_max + 1, dtype=float)
    mu, kind = spec.mu, spec.kind

    if kind is SourceKind.IDEAL_SINGLE_PHOTON:
        probs = np.zeros(n_max + 1)
        if n_max >= 1:
            probs[1] = 1.0
        return PhotonStatistics(probs, 0.0, None)

    if kind is SourceKind.WCS:
        probs = np.exp(_log_poisson(n, mu))
    elif kind is SourceKind.MHPS:
        log_amp = math.log(math.expm1(-spec.m * mu) / math.expm1(-mu)) if mu > 0 else math.log(spec.m)
        probs = np.exp(_log_poisson(n, mu) + log_amp)
        probs[0] = math.exp(-spec.m * mu)
    else:
        probs = _heralded_pmf(spec, n)
    return PhotonStatistics(probs, _tail_bound(terms, n_max), terms)


def _heralded_pmf(spec: SourceSpec, n: np.ndarray) -> np.ndarray:
    mu, eta = spec.mu, spec.eta
    log_pnc = _log_noclick(spec)
    first = np.exp(log_pnc + _log_poisson(n, mu * (1 - eta)))
    p_click = -math.expm1(log_pnc)
    if p_click < BRANCH_FLOOR:
        return first
    if spec.kind is SourceKind.SMHPS:
        with np.errstate(over="ignore"):
            excess = eta * mu * math.expm1(-spec.depth * math.log(spec.gamma))
            lam = mu * float(spec.gamma) ** (-spec.depth)
        log_ratio = math.log(p_click) - math.log(-math.expm1(-eta * lam))
        log_second = _log_poisson(n, mu) + _click_log_bracket(n, eta, excess) + log_ratio
    else:
        log_w, excess = _chain_terms(spec)
        brackets = _click_log_bracket(n[:, None], eta, excess[None, :])
        log_second = _log_poisson(n, mu) + logsumexp(log_w[None, :] + brackets, axis=1)
    return first + np.exp(log_second)


def pmf_conditional(
    spec: SourceSpec, branch: Branch, n_max: int | None = None, policy: Truncation = DEFAULT_TRUNCATION
) -> PhotonStatistics:
    """Output statistics given that at least one (CLICK) or no (NOCLICK)
    heralding detector fired.

    With no click the first unit is routed out, so both architectures give
    Poisson(mu*(1 - eta)).
    """
    validate(spec)
    _require_heralded(spec)
    branch = Branch(branch)
    _check_branch(spec, branch)
    terms = _poisson_terms(spec, branch)
    if n_max is None:
        n_max = _choose_n_max(spec, terms, policy)
    n = np.arange(n_max + 1, dtype=float)
    mu, eta = spec.mu, spec.eta

    if branch is Branch.NOCLICK:
        probs = np.exp(_log_poisson(n, mu * (1 - eta)))
    elif spec.kind is SourceKind.SMHPS:
        with np.errstate(over="ignore"):
            excess = eta * mu * math.expm1(-spec.depth * math.log(spec.gamma))
            lam = mu * float(spec.gamma) ** (-spec.depth)
        log_d = math.log(-math.expm1(-eta * lam))
        probs = np.exp(_log_poisson(n, mu) + _click_log_bracket(n, eta, excess) - log_d)
    else:
        log_w, excess = _chain_terms(spec)
        brackets = _click_log_bracket(n[:, None], eta, excess[None, :])
        log_norm = math.log(-math.expm1(_log_noclick(spec)))
        probs = np.exp(_log_poisson(n, mu) + logsumexp(log_w[None, :] + brackets, axis=1) - log_norm)
    return PhotonStatistics(probs, _tail_bound(terms, n_max), terms)


def weighted_survival(spec: SourceSpec, x: float) -> float:
    """Generating function sum_n P_n x**n of the output statistics, x in [0, 1]."""
    validate(spec)
    if not 0.0 <= x <= 1.0:
        raise InvalidRange(f"x must lie in [0, 1], got {x}")
    terms = _poisson_terms(spec)
    if terms is None:
        return float(x)
    return math.fsum(w * math.exp(-lam * (1.0 - x)) for w, lam in terms)
