"""Independent reference values, frozen into the test suite.

Nothing here imports heralded_qkd.  Run with ``python3 tests/oracles/compute_oracles.py``;
needs mpmath.  The printed numbers are pasted into the tests as literals.
"""
import numpy as np
from mpmath import mp, mpf, exp, log, factorial, fsum

mp.dps = 40

V, ETA_B, PD, FEC = mpf("0.99"), mpf("0.25"), mpf("2e-7"), mpf("1.05")
Y0 = 2 * PD
ED = (1 - V) / 2


def h(x):
    x = mpf(x)
    if x in (0, 1):
        return mpf(0)
    return -x * log(x, 2) - (1 - x) * log(1 - x, 2)


def eta_sys(loss_db):
    return ETA_B * mpf(10) ** (-mpf(loss_db) / 10)


def smhps_pmf(mu, m, eta, gamma, n):
    """Output statistics of the symmetric tree, written out term by term."""
    mu, eta, gamma = mpf(mu), mpf(eta), mpf(gamma)
    k = int(np.log2(m))
    lam = mu / gamma**k  # pump per crystal
    p_nc = exp(-eta * lam) ** m
    first = ((1 - eta) * mu) ** n / factorial(n) * exp(-(1 - eta) * mu) * p_nc
    pois = exp(-mu) * mu**n / factorial(n)
    bracket = 1 - (1 - eta) ** n * exp(-eta * mu * (gamma ** (-k) - 1))
    # (1 - P^nc) * click-branch pmf; click-branch denominator is per crystal
    click = (1 - p_nc) * pois * bracket / (1 - exp(-eta * lam))
    return first + click


def channel_qe(pmf_terms, loss_db):
    es = eta_sys(loss_db)
    d = fsum(p * (1 - (1 - es) ** n) for n, p in enumerate(pmf_terms))
    q = Y0 + d
    return q, (Y0 / 2 + ED * d) / q


def wcs_active(mu, loss_db):
    mu = mpf(mu)
    es = eta_sys(loss_db)
    p0, p1 = exp(-mu), mu * exp(-mu)
    y1 = Y0 + es
    e1 = (Y0 / 2 + ED * es) / y1
    d = 1 - exp(-mu * es)
    q = Y0 + d
    e = (Y0 / 2 + ED * d) / q
    return p0 * Y0 + p1 * y1 * (1 - h(e1)) - q * FEC * h(e)


def wcs_no_decoy_grid(mus, loss_db):
    """Vectorised float64 no-decoy rate for the attenuated laser."""
    es = 0.25 * 10 ** (-loss_db / 10)
    y0, ed = 4e-7, 0.005
    d = -np.expm1(-mus * es)
    q = y0 + d
    e = (0.5 * y0 + ed * d) / q
    multi = 1 - np.exp(-mus) * (1 + mus)
    delta = multi / q
    single = 1 - delta

    def hv(x):
        x = np.clip(x, 1e-300, 1 - 1e-16)
        return -x * np.log2(x) - (1 - x) * np.log2(1 - x)

    with np.errstate(invalid="ignore", divide="ignore"):
        r = q * (single * (1 - hv(e / single)) - 1.05 * hv(e))
    r[(single <= 0) | (e / single >= 0.5)] = 0
    return np.maximum(r, 0)


if __name__ == "__main__":
    print("h(0.11) =", mp.nstr(h(mpf("0.11")), 17))
    print("wcs active mu=0.5 L=20 =", mp.nstr(wcs_active("0.5", 20), 17))
    terms = [smhps_pmf("0.3", 4, "0.7", "0.5", n) for n in range(120)]
    print("smhps(0.3,4,0.7,0.5) mass =", mp.nstr(fsum(terms), 17))
    q, e = channel_qe(terms, 10)
    print("smhps L=10 Q =", mp.nstr(q, 17), " E =", mp.nstr(e, 17))
    terms = [smhps_pmf("0.1", 4, "0.7", "0.5", n) for n in range(6)]
    print("smhps(0.1,4,0.7,0.5) P0..P5 =", [mp.nstr(t, 17) for t in terms])
    mus = np.geomspace(1e-4, 3, 100_000)
    r = wcs_no_decoy_grid(mus, 0.0)
    i = int(np.argmax(r))
    print(f"wcs no-decoy L=0 dense max: mu={mus[i]!r} rate={r[i]!r}")
