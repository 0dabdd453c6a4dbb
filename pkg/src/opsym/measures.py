"""Fidelity-based entanglement quantifiers.

``M(U)`` is the best overlap achievable between ``U`` acting on side A and any
unitary acting on side B.  Its minimum over U gives the minimum fidelity and
its Haar average gives the symmetry of entanglement.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import lgamma, log, pi, sqrt
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, NotUnitary, OptimizerFailure, SingularExpansion
from .haar import HaarStream, element_modulus_mean, haar_batch
from .statecore import (
    DensityMatrix,
    PureState,
    SchmidtDecomposition,
    as_bipartition,
    bipartition_density,
    bipartition_matrix,
    mixture,
    schmidt_decompose,
)

UNITARY_TOL = 1e-9
# Fixed chunking keeps Monte Carlo output independent of the worker count.
CHUNK = 2048


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    std_error: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")
        if not 0.0 <= self.value <= 1.0 + 5 * self.std_error + 1e-12:
            raise ValueError(f"estimate {self.value} outside [0, 1]")


@dataclass(frozen=True)
class OptimizerConfig:
    n_restarts: int = 16
    max_iters: int = 20_000
    f_tol: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if min(self.n_restarts, self.max_iters) <= 0 or self.f_tol <= 0 or self.seed < 0:
            raise ValueError("optimizer settings must be positive")


def trace_norm(x: np.ndarray) -> np.ndarray:
    """Sum of singular values; works on stacks of matrices."""
    return np.linalg.svd(x, compute_uv=False).sum(axis=-1)


def _check_unitary(u: np.ndarray, d: int) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (d, d):
        raise NotUnitary(f"expected a {d}x{d} unitary, got shape {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(d))) > UNITARY_TOL:
        raise NotUnitary("operator is not unitary")
    return u


def _padded_sigma(sd: SchmidtDecomposition) -> np.ndarray:
    s = np.zeros(sd.d_a)
    k = min(sd.d_a, len(sd.sigma))
    s[:k] = sd.sigma[:k]
    return s


def unitary_fidelity(u: np.ndarray, v: np.ndarray, state: PureState, bp) -> float:
    """|<psi| U^dag x V |psi>|."""
    c = bipartition_matrix(state, bp)
    return float(abs(np.vdot(c, np.asarray(u).conj().T @ c @ np.asarray(v).T)))


def max_fidelity_unitary(u: np.ndarray, sd: SchmidtDecomposition) -> tuple[float, np.ndarray]:
    """Value of M(U) and a unitary V on side B attaining it.

    ``u`` is given in the computational basis of side A.  The optimum is the
    inverse of the unitary part of Sigma U* Sigma on the Schmidt support, and
    the identity elsewhere.
    """
    u = _check_unitary(u, sd.d_a)
    if sd.d_a > sd.d_b:
        raise DomainError("side A must not be larger than side B")
    u_t = sd.left.conj().T @ u @ sd.left
    sig = _padded_sigma(sd)
    value = float(trace_norm(sig[:, None] * u_t * sig[None, :]))

    r = max(sd.rank, 1)
    s_r = sig[:r]
    x = s_r[:, None] * u_t[:r, :r].conj() * s_r[None, :]
    p, _, qh = np.linalg.svd(x)
    v_t = np.eye(sd.d_b, dtype=complex)
    v_t[:r, :r] = qh.conj().T @ p.conj().T
    v = sd.right.T @ v_t @ sd.right.conj()
    return value, v


def _pair_matrix(rho: DensityMatrix, split) -> tuple[np.ndarray, int, int]:
    """Matrix M with Tr_A[(U^dag x 1) rho] = (conj(U).ravel() @ M).reshape(d_b, d_b)."""
    bp = as_bipartition(rho.dims, split)
    r4 = bipartition_density(rho, bp)
    m = np.transpose(r4, (0, 2, 1, 3)).reshape(bp.d_a * bp.d_a, bp.d_b * bp.d_b)
    return m, bp.d_a, bp.d_b


def inner_max_mixed(u: np.ndarray, rho: DensityMatrix, split) -> float:
    """max over unitaries V on side B of |Tr[(U^dag x V) rho]|.

    Equal to the trace norm of Tr_A[(U^dag x 1) rho].
    """
    m, d_a, d_b = _pair_matrix(rho, split)
    u = _check_unitary(u, d_a)
    return float(trace_norm((u.conj().reshape(-1) @ m).reshape(d_b, d_b)))


def min_fidelity_pure(sd: SchmidtDecomposition) -> float:
    """Closed-form minimum fidelity: sum_i sigma_i sigma_{d+1-i} over side A."""
    if sd.d_a > sd.d_b:
        raise DomainError("side A must not be larger than side B")
    d = sd.d_a
    if sd.rank <= d / 2:
        return 0.0
    s = _padded_sigma(sd)
    s[sd.rank :] = 0.0
    return float(np.dot(s, s[::-1]))


def _hermitian_from_params(theta: np.ndarray, d: int) -> np.ndarray:
    h = np.zeros((d, d), dtype=complex)
    iu = np.triu_indices(d, 1)
    n_off = len(iu[0])
    h[iu] = theta[d : d + n_off] + 1j * theta[d + n_off :]
    h = h + h.conj().T
    h[np.diag_indices(d)] = theta[:d]
    return h


def unitary_from_params(theta: np.ndarray, d: int) -> np.ndarray:
    """exp(iH) for the Hermitian H spanned by d^2 real parameters."""
    w, vecs = np.linalg.eigh(_hermitian_from_params(np.asarray(theta, float), d))
    return (vecs * np.exp(1j * w)) @ vecs.conj().T


def min_fidelity_numeric(rho: DensityMatrix, split, cfg: OptimizerConfig = OptimizerConfig()) -> float:
    """Best-found minimum over U of :func:`inner_max_mixed` (an upper bound on m).

    Nelder-Mead over the exponential-map parameters, restarted from
    ``cfg.n_restarts`` random points; the best run is polished by restarting the
    simplex at its end point until it stops improving.
    """
    m, d_a, d_b = _pair_matrix(rho, split)

    def objective(theta):
        u = unitary_from_params(theta, d_a)
        return float(trace_norm((u.conj().reshape(-1) @ m).reshape(d_b, d_b)))

    rng = np.random.default_rng(cfg.seed)
    opts = {"maxiter": cfg.max_iters, "maxfev": 2 * cfg.max_iters,
            "xatol": 1e-7, "fatol": cfg.f_tol, "adaptive": True}
    best = None
    converged = False
    for _ in range(cfg.n_restarts):
        res = minimize(objective, rng.uniform(-pi, pi, d_a * d_a), method="Nelder-Mead", options=opts)
        converged |= bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    # a fresh simplex at the end point escapes premature collapse
    for _ in range(20):
        again = minimize(objective, best.x, method="Nelder-Mead", options=opts)
        if again.fun > best.fun - cfg.f_tol:
            break
        best = again
    if not converged:
        raise OptimizerFailure(
            f"no restart converged within {cfg.max_iters} iterations", best=float(best.fun)
        )
    return float(best.fun)


def _as_density(rho) -> DensityMatrix:
    return rho.projector() if isinstance(rho, PureState) else rho


def _payload(rho, split):
    if isinstance(rho, PureState):
        sd = schmidt_decompose(rho, split)
        if sd.d_a > sd.d_b:
            raise DomainError("side A must not be larger than side B")
        return sd.d_a, ("pure", sd.left, _padded_sigma(sd))
    m, d_a, _ = _pair_matrix(rho, split)
    return d_a, ("mixed", m)


def _fidelity_chunk(payloads: list, d_a: int, seed: int, start: int, count: int) -> np.ndarray:
    us = haar_batch(d_a, HaarStream(seed), start, count)
    out = np.empty((len(payloads), count))
    for i, p in enumerate(payloads):
        if p[0] == "pure":
            _, left, sig = p
            ut = left.conj().T @ us @ left
            out[i] = trace_norm(sig[:, None] * ut * sig[None, :])
        else:
            m = p[1]
            d_b = int(round(sqrt(m.shape[1])))
            out[i] = trace_norm((us.conj().reshape(count, -1) @ m).reshape(count, d_b, d_b))
    return out


def fidelity_samples_many(states: Sequence, split, n_samples: int, seed: int, workers: int = 1) -> np.ndarray:
    """M(U_k) for every state against one shared Haar stream, shape (len(states), n).

    Pure states take the Schmidt route Tr|Sigma Y^dag U Y Sigma|, density
    matrices the partial-trace route; both give the same number per sample.
    All states must have the same side-A dimension.
    """
    d_a = None
    payloads = []
    for rho in states:
        d, p = _payload(rho, split)
        if d_a is not None and d != d_a:
            raise DomainError("all states must share the side-A dimension")
        d_a = d
        payloads.append(p)
    starts = range(0, n_samples, CHUNK)
    jobs = [(payloads, d_a, seed, s, min(CHUNK, n_samples - s)) for s in starts]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_fidelity_chunk, *zip(*jobs)))
    else:
        parts = [_fidelity_chunk(*j) for j in jobs]
    return np.concatenate(parts, axis=1)


def fidelity_samples(rho, split, n_samples: int, seed: int, workers: int = 1) -> np.ndarray:
    """Per-sample values of M(U_k) for the Haar stream ``seed``, k = 0..n-1."""
    return fidelity_samples_many([rho], split, n_samples, seed, workers)[0]


def _estimate(vals: np.ndarray, seed: int) -> MeasureEstimate:
    n = len(vals)
    return MeasureEstimate(float(vals.mean()), float(vals.std(ddof=1) / sqrt(n)), n, seed)


def symmetry_of_entanglement(rho, split, n_samples: int, seed: int, workers: int = 1) -> MeasureEstimate:
    """Monte Carlo estimate of the Haar average of M(U) over unitaries on side A."""
    if n_samples < 100:
        raise DomainError("symmetry_of_entanglement needs at least 100 samples")
    return _estimate(fidelity_samples(rho, split, n_samples, seed, workers), seed)


def symmetry_sweep(states: Sequence, split, n_samples: int, seed: int, workers: int = 1) -> list[MeasureEstimate]:
    """Estimates for several states from common Haar samples."""
    if n_samples < 100:
        raise DomainError("symmetry_of_entanglement needs at least 100 samples")
    vals = fidelity_samples_many(states, split, n_samples, seed, workers)
    return [_estimate(v, seed) for v in vals]


def separable_baseline(d: int) -> float:
    """Symmetry of entanglement of a product state with a d-level side A."""
    return element_modulus_mean(d)


def normalized_symmetry(e_value: float, d: int) -> float:
    """Affine rescaling sending separable states to 0 and maximal entanglement to 1.

    Same as [2 G(d+1/2) E - sqrt(pi) G(d)] / [2 G(d+1/2) - sqrt(pi) G(d)].
    """
    if d < 2:
        raise DomainError(f"d must be at least 2, got {d}")
    b = separable_baseline(d)
    return (e_value - b) / (1.0 - b)


def normalized_symmetry_gamma(e_value: float, d: int) -> float:
    """The Gamma-function form of :func:`normalized_symmetry`, kept for cross-checks."""
    g1 = 2.0 * np.exp(lgamma(d + 0.5))
    g0 = sqrt(pi) * np.exp(lgamma(d))
    return (g1 * e_value - g0) / (g1 - g0)


def normalized_estimate(est: MeasureEstimate, d: int) -> tuple[float, float]:
    """Normalized value and its standard error."""
    b = separable_baseline(d)
    return normalized_symmetry(est.value, d), est.std_error / (1.0 - b)


def entanglement_entropy(sd: SchmidtDecomposition) -> float:
    """Von Neumann entropy of either reduced state, in nats."""
    p = sd.sigma**2
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def negativity_pure(sd: SchmidtDecomposition) -> float:
    return float(np.sum(sd.sigma) ** 2 - 1.0)


def entropy_normalized(sd: SchmidtDecomposition) -> float:
    return entanglement_entropy(sd) / log(min(sd.d_a, sd.d_b))


def negativity_normalized(sd: SchmidtDecomposition) -> float:
    return negativity_pure(sd) / (min(sd.d_a, sd.d_b) - 1)


def negativity(rho: DensityMatrix, split) -> float:
    """Tr|rho^{T_A}| - 1; reduces to (sum sigma)^2 - 1 on pure states."""
    bp = as_bipartition(rho.dims, split)
    r4 = bipartition_density(rho, bp)
    pt = np.transpose(r4, (2, 1, 0, 3)).reshape(rho.dim, rho.dim)
    return float(np.sum(np.abs(np.linalg.eigvalsh(pt))) - 1.0)


def perturbative_M(u: np.ndarray, eps: float) -> float:
    """First-order expansion of M(U) for Schmidt coefficients (sqrt(1-eps), sqrt(eps), 0, ...).

    |U11| + sqrt(eps) (|U22 - U12 U21/U11| + Re[U11* U12 U21 / U11] / |U11|),
    built from the small-eps eigenvalues of Sigma U Sigma.  Only the leading
    2x2 block of ``u`` is used.
    """
    u = np.asarray(u, dtype=complex)
    u11, u12, u21, u22 = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
    if abs(u11) <= 1e-8:
        raise SingularExpansion(f"|U11| = {abs(u11):.3g} is too small for the expansion")
    a = abs(u11)
    bracket = abs(u22 - u12 * u21 / u11) + (np.conj(u11) * u12 * u21 / u11).real / a
    return float(a + sqrt(eps) * bracket)


def first_order_M(u: np.ndarray, eps: float) -> float:
    """Expansion of the singular values of Sigma U Sigma, valid to O(eps).

    Uses Tr|A|^2 = ||A||_F^2 + 2|det A| on the leading 2x2 block B, which gives
    |U11| + eps (|U12|^2 + |U21|^2 + 2|det B| - 2|U11|^2) / (2|U11|).
    """
    u = np.asarray(u, dtype=complex)
    a = abs(u[0, 0])
    if a <= 1e-8:
        raise SingularExpansion(f"|U11| = {a:.3g} is too small for the expansion")
    det = abs(u[0, 0] * u[1, 1] - u[0, 1] * u[1, 0])
    num = abs(u[0, 1]) ** 2 + abs(u[1, 0]) ** 2 + 2 * det - 2 * a**2
    return float(a + eps * num / (2 * a))


@dataclass(frozen=True)
class ConvexityResult:
    mixture_value: float
    average_value: float
    slack: float

    @property
    def holds(self) -> bool:
        return self.mixture_value <= self.average_value + self.slack

    def __bool__(self) -> bool:
        return self.holds


def convexity_check(
    rho_list: Sequence[DensityMatrix],
    weights: Sequence[float],
    measure: Literal["m", "es"],
    split,
    cfg: OptimizerConfig = OptimizerConfig(),
    n_samples: int = 20_000,
    seed: int = 0,
) -> ConvexityResult:
    """Compare measure(sum p_i rho_i) with sum p_i measure(rho_i).

    The E_S side uses one Haar stream for every state, so the per-sample
    triangle inequality carries over to the estimates.
    """
    rho_list = [_as_density(r) for r in rho_list]
    w = np.asarray(weights, dtype=float)
    mixed = mixture(rho_list, w)
    if measure == "m":
        lhs = min_fidelity_numeric(mixed, split, cfg)
        rhs = float(sum(p * min_fidelity_numeric(r, split, cfg) for p, r in zip(w, rho_list) if p > 0))
        return ConvexityResult(lhs, rhs, 1e-5)
    if measure == "es":
        est = symmetry_of_entanglement(mixed, split, n_samples, seed)
        parts = [symmetry_of_entanglement(r, split, n_samples, seed) for r in rho_list]
        rhs = float(sum(p * e.value for p, e in zip(w, parts)))
        se = sqrt(est.std_error**2 + sum((p * e.std_error) ** 2 for p, e in zip(w, parts)))
        return ConvexityResult(est.value, rhs, 3 * se)
    raise ValueError(f"unknown measure {measure!r}")
