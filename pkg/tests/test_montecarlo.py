import numpy as np
import pytest
from scipy.stats import poisson

from heralded_qkd.errors import InvalidTrials, UnsupportedSource
from heralded_qkd.montecarlo import block_size, simulate, total_variation
from heralded_qkd.sources import SourceKind, SourceSpec, pmf

S, A, M = SourceKind.SMHPS, SourceKind.AMHPS, SourceKind.MHPS


def test_total_variation():
    assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert total_variation([1.0], [0.0, 1.0]) == 1.0
    assert total_variation([0.2, 0.8], [0.4, 0.5, 0.1]) == pytest.approx(0.3)


@pytest.mark.parametrize("trials", [0, -5, 2.5])
def test_invalid_trials(trials):
    with pytest.raises(InvalidTrials):
        simulate(SourceSpec(S, 0.1, 4, 0.7, 0.5), trials, seed=1)


def test_unsupported_kind():
    with pytest.raises(UnsupportedSource):
        simulate(SourceSpec(SourceKind.WCS, 0.1), 10, seed=1)


@pytest.mark.parametrize("mu,m", [(0.3, 4), (0.1, 8)])
def test_ideal_tree_matches_mhps(mu, m):
    res = simulate(SourceSpec(S, mu, m, 1.0, 1.0), 1_000_000, seed=11)
    assert total_variation(res.empirical_pmf, pmf(SourceSpec(M, mu, m)).probs) < 5e-3


def test_determinism_and_parallelism():
    spec = SourceSpec(A, 0.3, 8, 0.7, 0.5)
    a = simulate(spec, 50_000, seed=42)
    b = simulate(spec, 50_000, seed=42, workers=3)
    c = simulate(spec, 50_000, seed=43)
    for x, y in ((a.counts_click, b.counts_click), (a.counts_noclick, b.counts_noclick), (a.empirical_pmf, b.empirical_pmf)):
        np.testing.assert_array_equal(x, y)
    assert a.click_fraction == b.click_fraction
    assert not np.array_equal(a.counts_click, c.counts_click)


def test_block_layout_depends_only_on_m():
    assert block_size(SourceSpec(A, 0.1, 2, 0.7, 0.5)) == block_size(SourceSpec(A, 5.0, 2, 0.1, 0.9))
    assert block_size(SourceSpec(A, 0.1, 4096, 0.7, 0.5)) >= 4096


@pytest.mark.parametrize(
    "spec,trials",
    [(SourceSpec(S, 0.1, 4, 0.3, 0.5), 1_700_000), (SourceSpec(A, 0.1, 4, 0.3, 0.5), 2_000_000)],
)
def test_noclick_branch_is_poisson(spec, trials):
    res = simulate(spec, trials, seed=7)
    n_nc = int(res.counts_noclick.sum())
    assert n_nc >= 1_000_000
    ref = poisson.pmf(np.arange(60), spec.mu * (1 - spec.eta))
    assert total_variation(res.empirical_pmf_noclick, ref) < 5e-3


def test_bookkeeping():
    res = simulate(SourceSpec(S, 0.5, 8, 0.6, 0.7), 200_000, seed=3)
    cf = res.click_fraction
    np.testing.assert_allclose(cf * res.empirical_pmf_click + (1 - cf) * res.empirical_pmf_noclick, res.empirical_pmf, rtol=0, atol=1e-15)
    for p in (res.empirical_pmf, res.empirical_pmf_click, res.empirical_pmf_noclick):
        assert abs(p.sum() - 1) <= 1e-12
    assert 0 <= cf <= 1
    assert int(res.counts_click.sum() + res.counts_noclick.sum()) == res.trials


def test_diagnostics_record_sampler():
    res = simulate(SourceSpec(A, 0.5, 8, 0.7, 0.5), 5_000, seed=1)
    # pump means run from 1 to 64, straddling the sampler switch at 10
    assert res.diagnostics["poisson_methods"] == ["inversion", "ptrs"]
    assert res.diagnostics["generator"].startswith("Philox")


def test_oversized_pump_rejected():
    with pytest.raises(UnsupportedSource):
        simulate(SourceSpec(A, 1.0, 128, 0.7, 0.5), 10, seed=1)
