"""Haar-random unitaries drawn from counter-based substreams.

Sample ``k`` of a stream with seed ``s`` is generated from its own
``SeedSequence(s, spawn_key=(k,))``, so any subset of samples can be produced
in any order, or on any worker, and come out bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, exp, lgamma, pi, sqrt

import numpy as np
from scipy import stats

from .errors import DomainError

RECOMMENDED_MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class HaarStream:
    """Seed plus a sample-index offset; sample k uses substream counter + k."""

    seed: int
    counter: int = 0

    def generator(self, k: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.counter + int(k),))
        return np.random.Generator(np.random.PCG64(ss))


def ginibre(d: int, rng: np.random.Generator) -> np.ndarray:
    """d x d matrix of standard complex normals (variance 1/2 per real part)."""
    z = rng.standard_normal((2, d, d))
    return (z[0] + 1j * z[1]) / np.sqrt(2.0)


def _qr_phase_fixed(z: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[..., None, :]


def haar_unitary(d: int, stream: HaarStream, k: int) -> np.ndarray:
    if d < 1:
        raise DomainError(f"d must be positive, got {d}")
    return _qr_phase_fixed(ginibre(d, stream.generator(k)))


def haar_batch(d: int, stream: HaarStream, start: int, count: int) -> np.ndarray:
    """Samples ``start .. start+count-1`` stacked into a ``(count, d, d)`` array."""
    if d < 1:
        raise DomainError(f"d must be positive, got {d}")
    z = np.empty((count, d, d), dtype=complex)
    for i in range(count):
        z[i] = ginibre(d, stream.generator(start + i))
    return _qr_phase_fixed(z)


def unfixed_qr_batch(d: int, stream: HaarStream, start: int, count: int) -> np.ndarray:
    """Q factors of the same Ginibre draws without the phase correction (not Haar)."""
    z = np.empty((count, d, d), dtype=complex)
    for i in range(count):
        z[i] = ginibre(d, stream.generator(start + i))
    return np.linalg.qr(z)[0]


def element_modulus_mean(d: int) -> float:
    """Haar average of |U_jk| for a d x d unitary.

    Evaluated as sqrt(pi) Gamma(d) / (2 Gamma(d + 1/2)) and cross-checked
    against the binomial form 4^(d-1) / ((2d-1) C(2d-2, d-1)).
    """
    if d < 2:
        raise DomainError(f"d must be at least 2, got {d}")
    gamma_form = exp(0.5 * np.log(pi) + lgamma(d) - lgamma(d + 0.5)) / 2.0
    # exact integer arithmetic before the final division
    num, den = 4 ** (d - 1), (2 * d - 1) * comb(2 * d - 2, d - 1)
    binom_form = num / den
    if abs(gamma_form - binom_form) > 1e-12 * max(1.0, binom_form):
        raise ArithmeticError(f"closed forms disagree at d={d}: {gamma_form} vs {binom_form}")
    return binom_form


def element_modulus_cdf(r, d: int):
    """P(|U_jk| <= r) = 1 - (1 - r^2)^(d-1)."""
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    return 1.0 - (1.0 - r**2) ** (d - 1)


@dataclass(frozen=True)
class DensityCheck:
    statistic: float
    critical: float
    passed: bool
    n: int
    bins: int = 20


def chi_square_moduli(r: np.ndarray, d: int, bins: int = 20, level: float = 0.999) -> DensityCheck:
    edges = np.linspace(0.0, 1.0, bins + 1)
    observed, _ = np.histogram(r, bins=edges)
    expected = len(r) * np.diff(element_modulus_cdf(edges, d))
    stat = float(np.sum((observed - expected) ** 2 / expected))
    crit = float(stats.chi2.ppf(level, bins - 1))
    return DensityCheck(stat, crit, stat <= crit, len(r), bins)


def element_density_check(d: int, n: int, stream: HaarStream, sampler=haar_batch) -> DensityCheck:
    """Chi-square test of the |U_11| histogram against (d-1)(1-r^2)^(d-2) 2r."""
    if d < 2:
        raise DomainError(f"d must be at least 2, got {d}")
    u = sampler(d, stream, 0, n)
    return chi_square_moduli(np.abs(u[:, 0, 0]), d)


def modulus_mean_zscore(d: int, n: int, stream: HaarStream) -> tuple[float, float, float]:
    """Empirical mean of |U_11|, its standard error, and the z-score against the exact mean."""
    r = np.abs(haar_batch(d, stream, 0, n)[:, 0, 0])
    mean = float(r.mean())
    se = float(r.std(ddof=1) / sqrt(n))
    return mean, se, (mean - element_modulus_mean(d)) / se


def trace_moduli(us: np.ndarray) -> np.ndarray:
    return np.abs(np.trace(us, axis1=-2, axis2=-1))


def left_invariance_check(d: int, n: int, stream: HaarStream, w: np.ndarray, level: float = 0.999,
                          sampler=haar_batch) -> tuple[float, bool]:
    """Two-sample KS test of |tr(W U)| against |tr(U)| on disjoint sample ranges.

    Returns the p-value and whether the samples are compatible at ``level``.
    """
    a = trace_moduli(np.asarray(w) @ sampler(d, stream, 0, n))
    b = trace_moduli(haar_batch(d, stream, n, n))
    p = float(stats.ks_2samp(a, b).pvalue)
    return p, p > 1.0 - level
