"""Experiment configuration files.

The format is INI-like: ``[section]`` headers, ``key = value`` lines and
``#`` comments (full-line or trailing).  Source parameters and the protocol
may be comma-separated lists; a config then describes the Cartesian family
of runs.  See ``docs/formats.md`` for the grammar.
"""
from __future__ import annotations

import configparser
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelDetectorSpec
from .errors import ConfigError, QKDModelError
from .optimizer import SearchSettings
from .protocols import DEFAULT_F_EC, Protocol
from .sources import SourceKind, SourceSpec, validate

__all__ = ["Run", "ExperimentConfig", "McSettings", "load_config", "parse_config"]

_ALLOWED = {
    "source": {"kind", "m", "eta", "gamma", "mu", "mu_min", "mu_max"},
    "channel": {"visibility", "loss_start", "loss_stop", "loss_step", "losses"},
    "receiver": {"t_b", "eta_b", "p_dark", "exact_yield"},
    "protocol": {"name", "f_ec"},
    "optimizer": {"grid_points", "rel_tol"},
    "mc": {"trials", "seed", "tv_tol", "click_tol"},
    "output": {"label", "dir", "svg"},
}
_REQUIRED_SECTIONS = ("source", "channel", "protocol")


@dataclass(frozen=True)
class McSettings:
    trials: int = 1_000_000
    seed: int = 0
    tv_tol: float = 5e-3
    click_tol: float = 3e-3


@dataclass(frozen=True)
class Run:
    """One member of a config family: a single source and protocol."""

    label: str
    source: SourceSpec
    protocol: Protocol


@dataclass(frozen=True)
class ExperimentConfig:
    label: str
    runs: tuple[Run, ...]
    channel: ChannelDetectorSpec
    losses: tuple[float, ...]
    f_ec: float = DEFAULT_F_EC
    search: SearchSettings = field(default_factory=SearchSettings)
    fixed_mu: float | None = None
    mc: McSettings = field(default_factory=McSettings)
    out_dir: Path = Path("out")
    svg: bool = False


def _split(value: str) -> list[str]:
    items = [v.strip() for v in value.split(",")]
    if not all(items):
        raise ConfigError(f"empty item in list {value!r}")
    return items


def _number(value: str, key: str, cast=float):
    try:
        if cast is int:
            as_float = float(value)
            if as_float != int(as_float):
                raise ValueError
            return int(as_float)
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: not a valid {cast.__name__}: {value!r}") from None


def _bool(value: str, key: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _fmt(x) -> str:
    return format(x, "g")


def _run_label(base: str, src: SourceSpec, protocol: Protocol) -> str:
    parts = [base, src.kind.value]
    if src.kind.multiplexed:
        parts.append(f"m{src.m}")
    if src.kind.heralded:
        parts += [f"eta{_fmt(src.eta)}", f"gamma{_fmt(src.gamma)}"]
    parts.append(protocol.value)
    return "_".join(parts)


def _losses(sec) -> tuple[float, ...]:
    if "losses" in sec:
        if any(k in sec for k in ("loss_start", "loss_stop", "loss_step")):
            raise ConfigError("give either 'losses' or loss_start/loss_stop/loss_step, not both")
        losses = [_number(v, "losses") for v in _split(sec["losses"])] if sec["losses"].strip() else []
    else:
        try:
            start = _number(sec["loss_start"], "loss_start")
            stop = _number(sec["loss_stop"], "loss_stop")
        except KeyError as exc:
            raise ConfigError(f"[channel] needs 'losses' or loss_start and loss_stop (missing {exc})") from None
        step = _number(sec.get("loss_step", "1"), "loss_step")
        if step <= 0:
            raise ConfigError("loss_step must be > 0")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        losses = [round(start + i * step, 10) for i in range(max(count, 0))]
    if not losses:
        raise ConfigError("loss grid is empty")
    if any(x < 0 for x in losses):
        raise ConfigError("losses must be >= 0 dB")
    return tuple(losses)


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), comment_prefixes=("#",), interpolation=None, empty_lines_in_values=False
    )
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    for name in parser.sections():
        if name not in _ALLOWED:
            raise ConfigError(f"unknown section [{name}]")
        unknown = set(parser[name]) - _ALLOWED[name]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    for name in _REQUIRED_SECTIONS:
        if not parser.has_section(name):
            raise ConfigError(f"missing section [{name}]")

    src = parser["source"]
    if "kind" not in src:
        raise ConfigError("[source] needs 'kind'")
    try:
        kinds = [SourceKind(k.lower()) for k in _split(src["kind"])]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ms = [_number(v, "m", int) for v in _split(src.get("m", "1"))]
    etas = [_number(v, "eta") for v in _split(src.get("eta", "1"))]
    gammas = [_number(v, "gamma") for v in _split(src.get("gamma", "1"))]
    fixed_mu = _number(src["mu"], "mu") if "mu" in src else None

    prot = parser["protocol"]
    try:
        protocols = [Protocol(p.lower()) for p in _split(prot.get("name", "no_decoy"))]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    f_ec = _number(prot.get("f_ec", str(DEFAULT_F_EC)), "f_ec")
    if f_ec < 1:
        raise ConfigError("f_ec must be >= 1")

    out = parser["output"] if parser.has_section("output") else {}
    label = out.get("label", "run")

    runs = []
    seen = set()
    for kind, m, eta, gamma, protocol in itertools.product(kinds, ms, etas, gammas, protocols):
        spec = SourceSpec(kind, fixed_mu if fixed_mu is not None else 0.0, m, eta, gamma)
        try:
            validate(spec)
        except QKDModelError as exc:
            raise ConfigError(f"invalid source: {exc}") from None
        if protocol is Protocol.PASSIVE_DECOY and not kind.heralded:
            raise ConfigError(f"passive decoy requires a heralded source (smhps/amhps), got {kind.value}")
        run = Run(_run_label(label, spec, protocol), spec, protocol)
        if run.label not in seen:
            seen.add(run.label)
            runs.append(run)

    ch = parser["channel"]
    rx = parser["receiver"] if parser.has_section("receiver") else {}
    try:
        channel = ChannelDetectorSpec(
            visibility=_number(ch.get("visibility", "0.99"), "visibility"),
            t_b=_number(rx.get("t_b", "1"), "t_b"),
            eta_b=_number(rx.get("eta_b", "0.25"), "eta_b"),
            p_dark=_number(rx.get("p_dark", "2e-7"), "p_dark"),
            exact_yield=_bool(rx.get("exact_yield", "false"), "exact_yield"),
        )
    except QKDModelError as exc:
        raise ConfigError(str(exc)) from None

    opt = parser["optimizer"] if parser.has_section("optimizer") else {}
    try:
        search = SearchSettings(
            mu_min=_number(src.get("mu_min", "1e-4"), "mu_min"),
            mu_max=_number(src.get("mu_max", "3"), "mu_max"),
            grid_points=_number(opt.get("grid_points", "64"), "grid_points", int),
            rel_tol=_number(opt.get("rel_tol", "1e-4"), "rel_tol"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    mc_sec = parser["mc"] if parser.has_section("mc") else {}
    mc = McSettings(
        trials=_number(mc_sec.get("trials", "1000000"), "trials", int),
        seed=_number(mc_sec.get("seed", "0"), "seed", int),
        tv_tol=_number(mc_sec.get("tv_tol", "5e-3"), "tv_tol"),
        click_tol=_number(mc_sec.get("click_tol", "3e-3"), "click_tol"),
    )

    return ExperimentConfig(
        label=label,
        runs=tuple(runs),
        channel=channel,
        losses=_losses(ch),
        f_ec=f_ec,
        search=search,
        fixed_mu=fixed_mu,
        mc=mc,
        out_dir=Path(out.get("dir", "out")),
        svg=_bool(out.get("svg", "false"), "svg"),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
