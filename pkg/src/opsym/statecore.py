"""States, bipartitions and Schmidt decompositions.

Amplitudes are stored flat in row-major order over the subsystems, so the
amplitude of ``|i0 i1 ... i{n-1}>`` lives at ``np.ravel_multi_index((i0, ...),
dims)``.  When a state is split into two sides, each side enumerates its own
subsystems in ascending original index, also row-major.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    InvalidBipartition,
    InvalidSubsystem,
    NotNormalized,
    NotPositive,
    ZeroVector,
)

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
DEFAULT_RANK_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.flags.writeable = False
    return a


def _check_dims(dims: Iterable[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise DimensionMismatch("dims must list at least one subsystem")
    if any(d < 1 for d in dims):
        raise DimensionMismatch(f"subsystem dimensions must be positive, got {dims}")
    return dims


@dataclass(frozen=True)
class PureState:
    """Unit vector over the tensor product of ``dims``.

    ``normalization`` records the factor that was applied to the raw
    amplitudes by :func:`make_pure_state` (1.0 when none was needed).
    """

    dims: tuple[int, ...]
    amplitudes: np.ndarray
    normalization: float = 1.0

    def __post_init__(self):
        dims = _check_dims(self.dims)
        amps = _readonly(np.asarray(self.amplitudes).reshape(-1))
        if amps.size != prod(dims):
            raise DimensionMismatch(
                f"{amps.size} amplitudes do not match dims {dims} (expected {prod(dims)})"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise NotNormalized(f"state norm is {norm!r}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def projector(self) -> DensityMatrix:
        return DensityMatrix(self.dims, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    dims: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        m = _readonly(self.matrix)
        n = prod(dims)
        if m.shape != (n, n):
            raise DimensionMismatch(f"matrix shape {m.shape} does not match dims {dims}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise NotPositive("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise NotNormalized(f"density matrix trace is {tr!r}")
        lo = np.linalg.eigvalsh(m)[0]
        if lo < -PSD_TOL:
            raise NotPositive(f"density matrix has eigenvalue {lo!r}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in descending order."""
        return np.linalg.eigvalsh(self.matrix)[::-1]

    def is_pure(self, tol: float = 1e-10) -> bool:
        return abs(np.real(np.trace(self.matrix @ self.matrix)) - 1.0) < tol


@dataclass(frozen=True)
class Bipartition:
    """Split of the subsystems ``range(len(dims))`` into side A and side B."""

    dims: tuple[int, ...]
    side_a: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        side_a = tuple(sorted(set(int(i) for i in self.side_a)))
        n = len(dims)
        if not side_a:
            raise InvalidBipartition("side A must be nonempty")
        if any(i < 0 or i >= n for i in side_a):
            raise InvalidBipartition(f"side A {side_a} out of range for {n} subsystems")
        if len(side_a) == n:
            raise InvalidBipartition("side A must be a proper subset of the subsystems")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "side_a", side_a)

    @property
    def side_b(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.dims)) if i not in self.side_a)

    @property
    def d_a(self) -> int:
        return prod(self.dims[i] for i in self.side_a)

    @property
    def d_b(self) -> int:
        return prod(self.dims[i] for i in self.side_b)

    def complement(self) -> Bipartition:
        return Bipartition(self.dims, self.side_b)


def as_bipartition(dims: Sequence[int], bp: Bipartition | Iterable[int]) -> Bipartition:
    """Accept either a :class:`Bipartition` or the index list of side A."""
    if isinstance(bp, Bipartition):
        if bp.dims != tuple(dims):
            raise InvalidBipartition(f"bipartition dims {bp.dims} do not match {tuple(dims)}")
        return bp
    return Bipartition(tuple(dims), tuple(bp))


@dataclass(frozen=True)
class SchmidtDecomposition:
    """Coefficient matrix factored as ``C = Y @ Sigma @ Z``.

    ``sigma`` has length ``min(d_a, d_b)`` and is sorted descending; ``left``
    (Y) is ``d_a x d_a`` and ``right`` (Z) is ``d_b x d_b``.  Note Z is applied
    without adjoint, so the Schmidt vectors of side B are the rows of Z.
    """

    sigma: np.ndarray
    left: np.ndarray
    right: np.ndarray
    rank: int
    bipartition: Bipartition
    rank_tol: float = DEFAULT_RANK_TOL

    @property
    def d_a(self) -> int:
        return self.left.shape[0]

    @property
    def d_b(self) -> int:
        return self.right.shape[0]

    @property
    def small_side_is_a(self) -> bool:
        return self.d_a <= self.d_b

    def sigma_matrix(self) -> np.ndarray:
        """The rectangular ``d_a x d_b`` diagonal matrix of coefficients."""
        s = np.zeros((self.d_a, self.d_b))
        k = len(self.sigma)
        s[:k, :k] = np.diag(self.sigma)
        return s

    def reconstruct(self) -> np.ndarray:
        return self.left @ self.sigma_matrix() @ self.right


def make_pure_state(
    amplitudes,
    dims: Sequence[int],
    *,
    auto_normalize: bool = True,
    slack: float = 1e-6,
) -> PureState:
    """Build a :class:`PureState`, normalizing the amplitudes if needed.

    With ``auto_normalize=False`` only deviations of the norm from one that are
    within ``slack`` are silently corrected.
    """
    dims = _check_dims(dims)
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if amps.size != prod(dims):
        raise DimensionMismatch(
            f"{amps.size} amplitudes do not match dims {dims} (expected {prod(dims)})"
        )
    norm = float(np.linalg.norm(amps))
    if norm < 1e-300:
        raise ZeroVector("cannot normalize the zero vector")
    factor = 1.0
    if abs(norm - 1.0) > NORM_TOL:
        if not auto_normalize and abs(norm - 1.0) > slack:
            raise NotNormalized(f"norm {norm!r} deviates from 1 by more than {slack}")
        factor = 1.0 / norm
        amps = amps * factor
    return PureState(dims, amps, normalization=factor)


def _permute_to_sides(tensor: np.ndarray, bp: Bipartition) -> np.ndarray:
    return np.transpose(tensor, bp.side_a + bp.side_b)


def bipartition_matrix(state: PureState, bp) -> np.ndarray:
    """Coefficient matrix ``C[j, k]`` with j indexing side A and k side B."""
    bp = as_bipartition(state.dims, bp)
    c = _permute_to_sides(state.tensor(), bp)
    return np.ascontiguousarray(c.reshape(bp.d_a, bp.d_b))


def state_from_bipartition_matrix(c: np.ndarray, bp: Bipartition) -> np.ndarray:
    """Inverse of :func:`bipartition_matrix`: flat amplitudes in original order."""
    shape = [bp.dims[i] for i in bp.side_a + bp.side_b]
    t = np.asarray(c).reshape(shape)
    t = np.transpose(t, np.argsort(bp.side_a + bp.side_b))
    return t.reshape(-1)


def _fix_column_phases(vectors: np.ndarray) -> np.ndarray:
    """Phase of each column so its first largest-modulus entry becomes real positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    lead = vectors[idx, np.arange(vectors.shape[1])]
    mag = np.abs(lead)
    return np.where(mag > 0, lead / np.where(mag > 0, mag, 1.0), 1.0)


def schmidt_decompose(state: PureState, bp, rank_tol: float = DEFAULT_RANK_TOL) -> SchmidtDecomposition:
    bp = as_bipartition(state.dims, bp)
    c = bipartition_matrix(state, bp)
    y, s, z = np.linalg.svd(c, full_matrices=True)
    phases = _fix_column_phases(y)
    y = y * phases.conj()
    k = min(y.shape[1], z.shape[0])
    z[:k] = z[:k] * phases[:k, None]
    rank = int(np.count_nonzero(s > rank_tol * s[0]))
    return SchmidtDecomposition(
        sigma=s, left=y, right=z, rank=rank, bipartition=bp, rank_tol=rank_tol
    )


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    keep = tuple(sorted(set(int(i) for i in keep)))
    n = len(rho.dims)
    if not keep or any(i < 0 or i >= n for i in keep):
        raise InvalidSubsystem(f"cannot keep subsystems {keep} of {n}")
    if len(keep) == n:
        return rho
    gone = tuple(i for i in range(n) if i not in keep)
    dk = prod(rho.dims[i] for i in keep)
    dg = prod(rho.dims[i] for i in gone)
    t = rho.matrix.reshape(rho.dims + rho.dims)
    order = keep + gone
    t = np.transpose(t, order + tuple(i + n for i in order)).reshape(dk, dg, dk, dg)
    reduced = np.einsum("ajbj->ab", t)
    reduced = 0.5 * (reduced + reduced.conj().T)
    return DensityMatrix(tuple(rho.dims[i] for i in keep), reduced)


def bipartition_density(rho: DensityMatrix, bp) -> np.ndarray:
    """``rho`` as a ``(d_a, d_b, d_a, d_b)`` tensor in side-A/side-B order."""
    bp = as_bipartition(rho.dims, bp)
    n = len(rho.dims)
    order = bp.side_a + bp.side_b
    t = rho.matrix.reshape(rho.dims + rho.dims)
    t = np.transpose(t, order + tuple(i + n for i in order))
    return t.reshape(bp.d_a, bp.d_b, bp.d_a, bp.d_b)


def purify(rho: DensityMatrix) -> PureState:
    """Purification with an appended ancilla of dimension ``rho.dim``.

    Unused ancilla levels carry zero amplitude.
    """
    w, v = np.linalg.eigh(rho.matrix)
    w, v = w[::-1], v[:, ::-1]
    if w[-1] < -PSD_TOL:
        raise NotPositive(f"density matrix has eigenvalue {w[-1]!r}")
    v = v * _fix_column_phases(v).conj()
    amps = v * np.sqrt(np.clip(w, 0.0, None))
    amps = amps / np.linalg.norm(amps)
    return PureState(rho.dims + (rho.dim,), amps.reshape(-1))


def _diagonal_state(sigma: Sequence[float], d: int) -> PureState:
    amps = np.zeros(d * d, dtype=complex)
    for i, s in enumerate(sigma):
        amps[i * d + i] = s
    return PureState((d, d), amps / np.linalg.norm(amps))


def fig1_state(x: float) -> PureState:
    """Two ququarts with Schmidt coefficients sqrt(1-x/4-x^2/4-x^3/4), sqrt(x)/2, x/2, x^1.5/2."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x}")
    s0 = np.sqrt(max(1.0 - x / 4 - x**2 / 4 - x**3 / 4, 0.0))
    return _diagonal_state([s0, 0.5 * np.sqrt(x), 0.5 * x, 0.5 * x**1.5], 4)


def fig2_state(eps: float, d: int) -> PureState:
    """sqrt(1-eps)|00> + sqrt(eps)|11> inside two d-level systems."""
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"eps must lie in [0, 1], got {eps}")
    if d < 2:
        raise DomainError(f"d must be at least 2, got {d}")
    return _diagonal_state([np.sqrt(1.0 - eps), np.sqrt(eps)], d)


def max_entangled(d: int) -> PureState:
    if d < 2:
        raise DomainError(f"d must be at least 2, got {d}")
    return _diagonal_state([1.0] * d, d)


def random_pure(dims: Sequence[int], seed: int) -> PureState:
    """Uniformly random pure state from a normalized complex Gaussian vector."""
    dims = _check_dims(dims)
    rng = np.random.default_rng(seed)
    n = prod(dims)
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return PureState(dims, z / np.linalg.norm(z))


def mixture(states: Sequence[DensityMatrix], weights: Sequence[float]) -> DensityMatrix:
    weights = np.asarray(weights, dtype=float)
    if len(states) != len(weights) or np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
        raise DomainError("weights must be nonnegative, sum to 1 and match the states")
    dims = states[0].dims
    if any(r.dims != dims for r in states):
        raise DimensionMismatch("all mixed states must share dims")
    m = sum(w * r.matrix for w, r in zip(weights, states))
    return DensityMatrix(dims, m)
