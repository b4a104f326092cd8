"""Key-rate models for multiplexed heralded single-photon sources in BB84."""
from .channel import ChannelDetectorSpec, ObservedChannel, predict_observation
from .errors import (
    ConfigError,
    DegenerateBounds,
    DegenerateBranch,
    DegenerateStatistics,
    GridMismatch,
    InvalidM,
    InvalidRange,
    InvalidTrials,
    NegativeLoss,
    OutOfDomain,
    QKDModelError,
    UnsupportedSource,
    ZeroYield,
)
from .estimation import BranchObservations, PassiveBounds, estimate, simulate_branches
from .montecarlo import McResult, simulate, total_variation
from .optimizer import Optimum, SearchSettings, SweepRecord, find_loss_cutoff, optimize_mu, sweep
from .protocols import Protocol, binary_entropy, key_rate
from .sources import (
    Branch,
    PhotonStatistics,
    SourceKind,
    SourceSpec,
    p_noclick,
    pmf,
    pmf_conditional,
    validate,
    weighted_survival,
)

__version__ = "0.1.0"
