"""Dense complex linear algebra on the truncated atom (x) cavity space.

Conventions used throughout the package:

* tensor ordering is atom factor first, cavity Fock space second;
* the cavity mode is truncated at ``fock_cutoff`` photons (dimension N+1),
  so the composite space has dimension D = 2 (N + 1);
* all matrices are dense complex128 ndarrays, made read-only after
  construction so operator sets can be shared freely between workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

# Guard against runaway Fock cutoffs: the Liouvillian of the largest shipped
# configuration is 400 x 400, so anything near this limit is a usage error.
MAX_TENSOR_DIM = 16384

# Singular-pivot threshold (relative to the largest matrix entry) and the
# relative residual bound guaranteed by solve().
PIVOT_RTOL = 1e-14
RESIDUAL_RTOL = 1e-10


class SingularMatrixError(np.linalg.LinAlgError):
    """Elimination met a pivot smaller than PIVOT_RTOL * max|A|."""


def as_complex_matrix(m) -> np.ndarray:
    """Validate and coerce input to a finite complex 2-d array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def tensor(a, b) -> np.ndarray:
    """Kronecker product, C[i*nB+k, j*mB+l] = A[i,j] * B[k,l]."""
    a = as_complex_matrix(a)
    b = as_complex_matrix(b)
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows > MAX_TENSOR_DIM or cols > MAX_TENSOR_DIM:
        raise ValueError(
            f"tensor product dimension {rows}x{cols} exceeds limit {MAX_TENSOR_DIM}"
        )
    # one broadcast multiply; much cheaper than np.kron's generic path
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(rows, cols)


_LU_BLOCK = 48


def lu_factor(a: np.ndarray):
    """LU factorization with partial pivoting (blocked right-looking).

    Returns (lu, perm) where lu packs the unit-lower and upper factors and
    perm is the row permutation applied to the input. Raises
    SingularMatrixError when a pivot falls below PIVOT_RTOL * max|A|.
    """
    a = as_complex_matrix(a)
    n, m = a.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {n}x{m}")
    lu = a.copy()
    perm = np.arange(n)
    scale = np.abs(a).max()
    if scale == 0.0:
        raise SingularMatrixError("zero matrix")
    threshold = PIVOT_RTOL * scale
    for k0 in range(0, n, _LU_BLOCK):
        k1 = min(k0 + _LU_BLOCK, n)
        # panel factorization: rank-1 updates confined to the panel columns
        for k in range(k0, k1):
            p = k + int(np.argmax(np.abs(lu[k:, k])))
            if abs(lu[p, k]) < threshold:
                raise SingularMatrixError(
                    f"pivot {abs(lu[p, k]):.3e} below threshold "
                    f"{threshold:.3e} at column {k}"
                )
            if p != k:
                lu[[k, p]] = lu[[p, k]]
                perm[[k, p]] = perm[[p, k]]
            if k < n - 1:
                lu[k + 1:, k] /= lu[k, k]
                if k + 1 < k1:
                    lu[k + 1:, k + 1:k1] -= np.outer(lu[k + 1:, k],
                                                     lu[k, k + 1:k1])
        if k1 >= n:
            break
        # U block-row: unit-lower triangular solve against the panel
        for i in range(k0 + 1, k1):
            lu[i, k1:] -= lu[i, k0:i] @ lu[k0:i, k1:]
        # trailing update with a single matrix product
        lu[k1:, k1:] -= lu[k1:, k0:k1] @ lu[k0:k1, k1:]
    return lu, perm


def lu_solve(factor, b: np.ndarray) -> np.ndarray:
    """Solve A x = b from an lu_factor() result; b may be a vector or matrix."""
    lu, perm = factor
    n = lu.shape[0]
    b = np.asarray(b, dtype=complex)
    vector = b.ndim == 1
    x = b.reshape(n, -1)[perm].copy()
    for i in range(1, n):                      # forward, unit lower triangle
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):             # backward
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x.ravel() if vector else x


def solve_linear(a, b) -> np.ndarray:
    """Solve A x = b by pivoted elimination with one refinement pass.

    Guarantees ||A x - b|| <= RESIDUAL_RTOL * (||A||_F ||x|| + ||b||) and
    raises SingularMatrixError otherwise.
    """
    a = as_complex_matrix(a)
    b = np.asarray(b, dtype=complex)
    if b.ndim != 1 or b.size != a.shape[0]:
        raise ValueError(f"rhs of length {b.size} does not match {a.shape}")
    factor = lu_factor(a)
    x = lu_solve(factor, b)
    x += lu_solve(factor, b - a @ x)
    residual = np.linalg.norm(a @ x - b)
    bound = RESIDUAL_RTOL * (
        np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(b)
    )
    if residual > bound:
        raise SingularMatrixError(
            f"residual {residual:.3e} exceeds bound {bound:.3e}; "
            "system is numerically singular"
        )
    return x


# Pade order-13 coefficients and the matching 1-norm threshold for the
# scaling-and-squaring exponential (Higham 2005).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Pade-13 kernel."""
    a = as_complex_matrix(a)
    n = a.shape[0]
    if n != a.shape[1]:
        raise ValueError("expm needs a square matrix")
    norm = np.linalg.norm(a, 1)
    if norm == 0.0:
        return np.eye(n, dtype=complex)
    squarings = 0
    if norm > _THETA13:
        squarings = max(0, int(math.ceil(math.log2(norm / _THETA13))))
    a_scaled = a / (2.0 ** squarings)
    eye = np.eye(n, dtype=complex)
    b = _PADE13
    a2 = a_scaled @ a_scaled
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a_scaled @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
    )
    result = lu_solve(lu_factor(v - u), u + v)
    for _ in range(squarings):
        result = result @ result
    return result


@dataclass(frozen=True)
class HilbertSpec:
    """Truncation of the atom (x) cavity space: N+1 Fock levels, 2 atom levels."""

    fock_cutoff: int
    atom_dim: int = 2

    def __post_init__(self):
        if self.fock_cutoff < 1:
            raise ValueError("fock_cutoff must be >= 1")
        if self.atom_dim != 2:
            raise ValueError("only two-level atoms are supported")

    @property
    def dim(self) -> int:
        return self.atom_dim * (self.fock_cutoff + 1)


def _frozen(m: np.ndarray) -> np.ndarray:
    m.flags.writeable = False
    return m


@dataclass(frozen=True)
class OperatorSet:
    """Composite-space operators; all arrays are read-only."""

    spec: HilbertSpec
    a: np.ndarray = field(repr=False)
    a_dag: np.ndarray = field(repr=False)
    sigma_minus: np.ndarray = field(repr=False)
    sigma_plus: np.ndarray = field(repr=False)
    n_op: np.ndarray = field(repr=False)
    pe_op: np.ndarray = field(repr=False)
    identity: np.ndarray = field(repr=False)


@lru_cache(maxsize=8)
def build_operators(spec: HilbertSpec) -> OperatorSet:
    """Annihilation, lowering and number operators on the composite space.

    Atom factor comes first in every tensor product; <n-1|a|n> = sqrt(n).
    Results are cached: the arrays are read-only, so sharing them is safe.
    """
    n_fock = spec.fock_cutoff + 1
    a_cav = np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), 1).astype(complex)
    sm_atom = np.array([[0, 1], [0, 0]], dtype=complex)   # |g><e|
    eye_atom = np.eye(2, dtype=complex)
    eye_cav = np.eye(n_fock, dtype=complex)

    a = tensor(eye_atom, a_cav)
    sm = tensor(sm_atom, eye_cav)
    a_dag = dagger(a)
    sp = dagger(sm)
    return OperatorSet(
        spec=spec,
        a=_frozen(a),
        a_dag=_frozen(a_dag),
        sigma_minus=_frozen(sm),
        sigma_plus=_frozen(sp),
        n_op=_frozen(a_dag @ a),
        pe_op=_frozen(sp @ sm),
        identity=_frozen(np.eye(spec.dim, dtype=complex)),
    )
