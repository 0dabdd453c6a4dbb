"""Related operators and related quantum channels on fully entangled states.

For a state with coefficient matrix ``C`` (side A rows, side B columns) the
operator ``U`` on A and ``V`` on B act identically on the state exactly when
``U @ C == C @ V.T``.  All arithmetic here works in that matrix picture.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NonSquare, NotFullyEntangled, WrongOrientation
from .haar import _qr_phase_fixed
from .statecore import (
    PureState,
    SchmidtDecomposition,
    as_bipartition,
    bipartition_matrix,
    state_from_bipartition_matrix,
)

CP_TOL = 1e-9


@dataclass(frozen=True)
class KrausMap:
    in_dim: int
    out_dim: int
    ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.ops)
        if not ops:
            raise DimensionMismatch("a Kraus map needs at least one operator")
        for k in ops:
            if k.shape != (self.out_dim, self.in_dim):
                raise DimensionMismatch(
                    f"Kraus operator of shape {k.shape}, expected {(self.out_dim, self.in_dim)}"
                )
            k.flags.writeable = False
        object.__setattr__(self, "ops", ops)

    @classmethod
    def from_ops(cls, ops: Sequence[np.ndarray]) -> KrausMap:
        ops = [np.asarray(k, dtype=complex) for k in ops]
        out_dim, in_dim = ops[0].shape
        return cls(in_dim, out_dim, tuple(ops))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.ops)


@dataclass(frozen=True)
class SymmetryReport:
    residual: float
    related_is_cp: bool
    related_is_tp: bool
    related_is_unital: bool
    choi_min_eigenvalue: float
    related: KrausMap | None = None


def is_fully_entangled(sd: SchmidtDecomposition) -> bool:
    """Schmidt rank equals the smaller side's dimension.

    Building related operators also needs side A to be the smaller side; check
    ``sd.small_side_is_a`` for that.
    """
    return sd.rank == min(sd.d_a, sd.d_b)


def is_maximally_entangled(sd: SchmidtDecomposition, tol: float = 1e-10) -> bool:
    if sd.d_a != sd.d_b:
        return False
    return bool(np.max(np.abs(sd.sigma - 1.0 / np.sqrt(sd.d_a))) < tol)


def _require_related(sd: SchmidtDecomposition):
    if sd.d_a > sd.d_b:
        raise WrongOrientation(
            f"side A (dim {sd.d_a}) is larger than side B (dim {sd.d_b}); "
            "its actions cannot in general be replicated"
        )
    if sd.rank < sd.d_a:
        raise NotFullyEntangled(f"not fully entangled: Schmidt rank {sd.rank} < {sd.d_a}")


def right_inverse(sd: SchmidtDecomposition) -> np.ndarray:
    """``d_b x d_a`` matrix with 1/sigma_i on the diagonal, so Sigma @ it = 1."""
    _require_related(sd)
    inv = np.zeros((sd.d_b, sd.d_a))
    inv[: sd.d_a, : sd.d_a] = np.diag(1.0 / sd.sigma[: sd.d_a])
    return inv


def related_operator(u: np.ndarray, sd: SchmidtDecomposition) -> np.ndarray:
    """Operator V on side B with (U x 1)|psi> = (1 x V)|psi>.

    Computed as ``Z.T (Sigma_R^-1 Y^dag U Y Sigma).T Z*``; when d_a < d_b the
    part of V outside the Schmidt support is set to zero.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (sd.d_a, sd.d_a):
        raise DimensionMismatch(f"operator shape {u.shape} does not act on side A (dim {sd.d_a})")
    sigma_r_inv = right_inverse(sd)
    y, z = sd.left, sd.right
    u_schmidt = y.conj().T @ u @ y
    v_schmidt = (sigma_r_inv @ u_schmidt @ sd.sigma_matrix()).T
    return z.T @ v_schmidt @ z.conj()


def verify_related(u: np.ndarray, v: np.ndarray, state: PureState, bp) -> float:
    """Euclidean norm of (U x 1)|psi> - (1 x V)|psi>."""
    bp = as_bipartition(state.dims, bp)
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != (bp.d_a, bp.d_a) or v.shape != (bp.d_b, bp.d_b):
        raise DimensionMismatch(
            f"operators {u.shape}, {v.shape} do not fit sides of dims {bp.d_a}, {bp.d_b}"
        )
    c = bipartition_matrix(state, bp)
    return float(np.linalg.norm(u @ c - c @ v.T))


def schmidt_residual(u: np.ndarray, v: np.ndarray, sd: SchmidtDecomposition) -> float:
    """Frobenius norm of U~ Sigma - Sigma V~^T with both operators in the Schmidt basis."""
    y, z = sd.left, sd.right
    u_t = y.conj().T @ np.asarray(u) @ y
    v_t = z.conj() @ np.asarray(v) @ z.T
    s = sd.sigma_matrix()
    return float(np.linalg.norm(u_t @ s - s @ v_t.T))


def related_kraus(kmap: KrausMap, sd: SchmidtDecomposition) -> KrausMap:
    if kmap.in_dim != sd.d_a or kmap.out_dim != sd.d_a:
        raise DimensionMismatch(
            f"Kraus map {kmap.out_dim}x{kmap.in_dim} does not act on side A (dim {sd.d_a})"
        )
    _require_related(sd)
    return KrausMap(sd.d_b, sd.d_b, tuple(related_operator(k, sd) for k in kmap.ops))


def channel_residual(kmap: KrausMap, related: KrausMap, state: PureState, bp) -> float:
    """Max-entry gap between the two sides of the Kraus equivalence on |psi><psi|."""
    bp = as_bipartition(state.dims, bp)
    c = bipartition_matrix(state, bp)
    lhs = np.zeros((c.size, c.size), dtype=complex)
    rhs = np.zeros_like(lhs)
    for k in kmap.ops:
        w = (k @ c).reshape(-1)
        lhs += np.outer(w, w.conj())
    for j in related.ops:
        w = (c @ j.T).reshape(-1)
        rhs += np.outer(w, w.conj())
    return float(np.max(np.abs(lhs - rhs)))


def _require_square(kmap: KrausMap):
    if kmap.in_dim != kmap.out_dim:
        raise NonSquare(f"Kraus operators are {kmap.out_dim}x{kmap.in_dim}")


def choi_matrix(kmap: KrausMap) -> np.ndarray:
    """Unnormalized Choi matrix sum_ij |i><j| x E(|i><j|) (trace d for TP maps)."""
    _require_square(kmap)
    # vec(K) stacks K|i> for each i, so the Choi matrix is sum_l vec(K_l) vec(K_l)^dag
    vecs = np.stack([k.T.reshape(-1) for k in kmap.ops])
    return vecs.T @ vecs.conj()


def choi_min_eigenvalue(kmap: KrausMap) -> float:
    return float(np.linalg.eigvalsh(choi_matrix(kmap))[0])


def is_cp(kmap: KrausMap, tol: float = CP_TOL) -> bool:
    return choi_min_eigenvalue(kmap) >= -tol


def is_tp(kmap: KrausMap, tol: float = CP_TOL) -> bool:
    _require_square(kmap)
    s = sum(k.conj().T @ k for k in kmap.ops)
    return bool(np.max(np.abs(s - np.eye(kmap.in_dim))) < tol)


def is_unital(kmap: KrausMap, tol: float = CP_TOL) -> bool:
    _require_square(kmap)
    s = sum(k @ k.conj().T for k in kmap.ops)
    return bool(np.max(np.abs(s - np.eye(kmap.out_dim))) < tol)


def tp_deviation(kmap: KrausMap) -> float:
    s = sum(k.conj().T @ k for k in kmap.ops)
    return float(np.max(np.abs(s - np.eye(kmap.in_dim))))


def analyze_related_map(kmap: KrausMap, sd: SchmidtDecomposition, state: PureState | None = None) -> SymmetryReport:
    """Related map of ``kmap`` plus its CP / TP / unital diagnostics.

    ``state`` is only needed for the residual; without it the state is
    rebuilt from the decomposition.
    """
    related = related_kraus(kmap, sd)
    if state is None:
        bp = sd.bipartition
        state = PureState(bp.dims, state_from_bipartition_matrix(sd.reconstruct(), bp))
    residual = channel_residual(kmap, related, state, sd.bipartition)
    lo = choi_min_eigenvalue(related)
    return SymmetryReport(
        residual=residual,
        related_is_cp=lo >= -CP_TOL,
        related_is_tp=is_tp(related),
        related_is_unital=is_unital(related),
        choi_min_eigenvalue=lo,
        related=related,
    )


# Common channels, mostly for tests and the CLI.


def amplitude_damping(gamma: float) -> KrausMap:
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]])
    k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]])
    return KrausMap.from_ops([k0, k1])


def dephasing(p: float = 0.5) -> KrausMap:
    return KrausMap.from_ops([np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * np.diag([1.0, -1.0])])


def generalized_paulis(d: int) -> list[np.ndarray]:
    """The d^2 clock-and-shift operators X^a Z^b."""
    omega = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(omega ** np.arange(d))
    return [
        np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
        for a in range(d)
        for b in range(d)
    ]


def depolarizing(d: int, p: float = 1.0) -> KrausMap:
    """p = 1 is the fully depolarizing channel."""
    paulis = generalized_paulis(d)
    ops = [np.sqrt(1 - p + p / d**2) * paulis[0]]
    ops += [np.sqrt(p / d**2) * g for g in paulis[1:]]
    return KrausMap.from_ops(ops)


def random_cptp(d: int, n_ops: int, rng: np.random.Generator) -> KrausMap:
    """Random CPTP map from an isometry (stacked Kraus operators)."""
    z = rng.standard_normal((n_ops * d, d)) + 1j * rng.standard_normal((n_ops * d, d))
    q, _ = np.linalg.qr(z)
    return KrausMap.from_ops([q[i * d : (i + 1) * d] for i in range(n_ops)])


def random_unital_cptp(d: int, n_ops: int, rng: np.random.Generator) -> KrausMap:
    """Random mixture of unitaries, which is both TP and unital."""
    w = rng.dirichlet(np.ones(n_ops))
    z = rng.standard_normal((n_ops, d, d)) + 1j * rng.standard_normal((n_ops, d, d))
    us = _qr_phase_fixed(z)
    return KrausMap.from_ops([np.sqrt(p) * u for p, u in zip(w, us)])
