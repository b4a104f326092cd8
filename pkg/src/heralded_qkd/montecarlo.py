"""Event-level simulation of the multiplexed heralded sources.

Each trial draws the pair number of every crystal, fires each heralding
detector with probability 1 - (1 - eta)**n_i, routes out the leftmost
heralded crystal (crystal 1 when none fires) and thins its signal photons
through the switches on its path.  The resulting histograms are the
brute-force check on the closed forms in :mod:`heralded_qkd.sources`.

Randomness comes from Philox4x64 streams.  Trials are processed in blocks
whose size depends only on m (see :func:`block_size`); block b uses the
stream keyed by ``SeedSequence([seed, b])``, so the result depends only on
(spec, seed, trials), never on how blocks are scheduled.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidTrials, UnsupportedSource
from .sources import SourceKind, SourceSpec, validate

__all__ = ["McResult", "block_size", "simulate", "total_variation"]

# crystal-draws held in memory per block
BLOCK_BUDGET = 1 << 23
# numpy's Poisson sampler switches method at this mean
POISSON_METHOD_SWITCH = 10.0
# beyond this pump mean per crystal numpy cannot sample reliably
MAX_PUMP_MEAN = 1e15


@dataclass(frozen=True)
class McResult:
    trials: int
    seed: int
    empirical_pmf: np.ndarray
    empirical_pmf_click: np.ndarray
    empirical_pmf_noclick: np.ndarray
    click_fraction: float
    counts_click: np.ndarray = field(repr=False)
    counts_noclick: np.ndarray = field(repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)


def block_size(spec: SourceSpec) -> int:
    return max(1 << 12, BLOCK_BUDGET // spec.m)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _simulate_block(spec: SourceSpec, pumps: np.ndarray, thin: np.ndarray, size: int, seed: int, block: int):
    rng = _block_rng(seed, block)
    m = len(pumps)
    pairs = rng.poisson(pumps[:, None], size=(m, size))
    if spec.kind is SourceKind.MHPS:
        fired = pairs > 0
    else:
        # threshold detector, each idler photon seen with probability eta
        p_fire = -np.expm1(pairs * np.log1p(-spec.eta)) if spec.eta < 1 else (pairs > 0).astype(float)
        fired = rng.random((m, size)) < p_fire
    any_fired = fired.any(axis=0)
    chosen = np.where(any_fired, fired.argmax(axis=0), 0)
    signal = pairs[chosen, np.arange(size)]
    out = rng.binomial(signal, thin[chosen])
    counts_c = np.bincount(out[any_fired])
    counts_nc = np.bincount(out[~any_fired])
    return counts_c, counts_nc


def _add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = max(len(a), len(b))
    return np.pad(a, (0, n - len(a))) + np.pad(b, (0, n - len(b)))


def simulate(spec: SourceSpec, trials: int, seed: int, workers: int = 1) -> McResult:
    """Monte Carlo histogram of the output photon number, split by whether
    any heralding detector fired."""
    validate(spec)
    if not spec.kind.multiplexed:
        raise UnsupportedSource(f"no crystal network to simulate for {spec.kind.value}")
    if int(trials) != trials or trials < 1:
        raise InvalidTrials(f"trials must be a positive integer, got {trials}")
    trials = int(trials)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF

    pumps = spec.pump_means()
    if pumps.max() > MAX_PUMP_MEAN:
        raise UnsupportedSource(f"pump mean {pumps.max():.3g} too large for event simulation")
    if spec.kind is SourceKind.MHPS:
        thin = np.ones(spec.m)
    else:
        thin = np.power(float(spec.gamma), spec.switch_counts().astype(float))

    bs = block_size(spec)
    blocks = [(b, min(bs, trials - b * bs)) for b in range(-(-trials // bs))]

    def run(job):
        b, size = job
        return _simulate_block(spec, pumps, thin, size, seed, b)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(job) for job in blocks]

    counts_c = np.zeros(1, dtype=np.int64)
    counts_nc = np.zeros(1, dtype=np.int64)
    for c, nc in parts:
        counts_c = _add(counts_c, c)
        counts_nc = _add(counts_nc, nc)
    n = max(len(counts_c), len(counts_nc))
    counts_c = np.pad(counts_c, (0, n - len(counts_c)))
    counts_nc = np.pad(counts_nc, (0, n - len(counts_nc)))

    n_c, n_nc = int(counts_c.sum()), int(counts_nc.sum())
    total = counts_c + counts_nc
    methods = sorted({"inversion" if lam < POISSON_METHOD_SWITCH else "ptrs" for lam in pumps})
    return McResult(
        trials=trials,
        seed=seed,
        empirical_pmf=total / trials,
        empirical_pmf_click=counts_c / n_c if n_c else np.zeros(n),
        empirical_pmf_noclick=counts_nc / n_nc if n_nc else np.zeros(n),
        click_fraction=n_c / trials,
        counts_click=counts_c,
        counts_noclick=counts_nc,
        diagnostics={
            "generator": "Philox4x64-10",
            "block_size": bs,
            "poisson_methods": methods,
        },
    )


def total_variation(p, q) -> float:
    """Half the L1 distance between two pmfs (shorter one zero-padded)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = max(len(p), len(q))
    return 0.5 * float(np.abs(np.pad(p, (0, n - len(p))) - np.pad(q, (0, n - len(q)))).sum())
