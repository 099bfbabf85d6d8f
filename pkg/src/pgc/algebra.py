"""Finite-dimensional von Neumann algebras as multi-matrix algebras.

An algebra is a finite direct sum of full complex matrix blocks together with
a faithful tracial state tau.  The trace is stored through the weight of a
minimal projection per block, so tau(x) = sum_i w_i * Tr(x_i) and the unit
has trace one.  Elements are kept block-dense; at desk scale (total GNS
dimension below ~64) everything downstream is O(d^3)-cheap.

The GNS space L^2(M) is realized concretely: coordinates are the matrix
entries scaled by sqrt(w_i) per block, which makes <xOmega, yOmega> =
tau(y* x) exact, and left/right multiplication become Kronecker products
blockwise.  The modular conjugation J acts as entrywise conjugation followed
by the within-block transpose permutation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _linalg as la
from .errors import (
    DimensionMismatch,
    EmptyAlgebra,
    NonNormalizedTrace,
    NotAnAlgebra,
    NotNormal,
    OwnerMismatch,
)

__all__ = [
    "MultiMatrixAlgebra",
    "AlgebraElement",
    "GnsRepresentation",
    "make_algebra",
    "range_projection",
    "polar_decomposition",
    "spectral_decomposition",
    "commutant",
    "center_and_factor",
]


@dataclass(frozen=True)
class MultiMatrixAlgebra:
    """A direct sum of matrix blocks with a tracial state.

    blocks: tuple of (label, size); trace_weights: trace of a minimal
    projection in each block, or None while the trace is still undetermined
    (it can be fixed later from Markov data).
    """

    blocks: tuple
    trace_weights: tuple | None = None

    def __post_init__(self):
        if not self.blocks:
            raise EmptyAlgebra("an algebra needs at least one block")
        object.__setattr__(self, "blocks", tuple((str(l), int(n)) for l, n in self.blocks))
        for label, n in self.blocks:
            if n < 1:
                raise DimensionMismatch(f"block {label!r} has size {n}")
        if self.trace_weights is not None:
            w = tuple(float(x) for x in self.trace_weights)
            object.__setattr__(self, "trace_weights", w)
            if len(w) != len(self.blocks):
                raise NonNormalizedTrace("one weight per block required")
            if any(x <= 0 for x in w):
                raise NonNormalizedTrace("trace weights must be positive")
            total = sum(x * n for x, (_, n) in zip(w, self.blocks))
            if abs(total - 1.0) > 1e-12:
                raise NonNormalizedTrace(f"tau(1) = {total!r} != 1")

    # -- structure ---------------------------------------------------------

    @property
    def sizes(self) -> tuple:
        return tuple(n for _, n in self.blocks)

    @property
    def nblocks(self) -> int:
        return len(self.blocks)

    @property
    def dim(self) -> int:
        """Linear dimension sum n_i^2 (= dim of the GNS space)."""
        return sum(n * n for n in self.sizes)

    @property
    def total_size(self) -> int:
        """Size of the block-diagonal matrix picture, sum n_i."""
        return sum(self.sizes)

    def with_weights(self, weights) -> "MultiMatrixAlgebra":
        return MultiMatrixAlgebra(self.blocks, tuple(weights))

    def _require_weights(self):
        if self.trace_weights is None:
            raise NonNormalizedTrace("trace weights not set; build Markov data first")

    # -- element constructors ----------------------------------------------

    def element(self, data: Sequence[np.ndarray]) -> "AlgebraElement":
        return AlgebraElement(self, data)

    def zero(self) -> "AlgebraElement":
        return self.element([np.zeros((n, n), dtype=complex) for n in self.sizes])

    def unit(self) -> "AlgebraElement":
        return self.element([np.eye(n, dtype=complex) for n in self.sizes])

    def from_scalars(self, scalars) -> "AlgebraElement":
        """Central element with scalar value per block."""
        return self.element([c * np.eye(n, dtype=complex)
                             for c, n in zip(scalars, self.sizes)])

    def block_unit(self, i: int) -> "AlgebraElement":
        """The minimal central projection of block i."""
        data = [np.zeros((n, n), dtype=complex) for n in self.sizes]
        data[i] = np.eye(self.sizes[i], dtype=complex)
        return self.element(data)

    def matrix_units(self):
        """Matrix-unit basis, block-ordered then row-major; deterministic."""
        out = []
        for i, n in enumerate(self.sizes):
            for j in range(n):
                for k in range(n):
                    data = [np.zeros((m, m), dtype=complex) for m in self.sizes]
                    data[i][j, k] = 1.0
                    out.append(self.element(data))
        return out

    def random_element(self, rng: np.random.Generator) -> "AlgebraElement":
        return self.element([
            (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
            for n in self.sizes])

    def random_hermitian(self, rng: np.random.Generator) -> "AlgebraElement":
        x = self.random_element(rng)
        return 0.5 * (x + x.H)

    def random_psd(self, rng: np.random.Generator) -> "AlgebraElement":
        x = self.random_element(rng)
        return x @ x.H

    def random_projection(self, rng: np.random.Generator) -> "AlgebraElement":
        """Spectral projection of a random hermitian onto a random eigenvalue cut."""
        h = self.random_hermitian(rng)
        data = []
        for n, blk in zip(self.sizes, h.data):
            w, v = np.linalg.eigh(blk)
            k = int(rng.integers(0, n + 1))
            data.append((v[:, :k] @ v[:, :k].conj().T) if k else np.zeros((n, n), complex))
        return self.element(data)


def make_algebra(blocks, trace_weights=None) -> MultiMatrixAlgebra:
    """Validated multi-matrix algebra; weights may be deferred to Markov data."""
    return MultiMatrixAlgebra(tuple(blocks),
                              None if trace_weights is None else tuple(trace_weights))


class AlgebraElement:
    """One element: a complex square matrix per block of the owner algebra."""

    __slots__ = ("owner", "data")

    def __init__(self, owner: MultiMatrixAlgebra, data):
        if len(data) != owner.nblocks:
            raise DimensionMismatch("one matrix per block required")
        mats = []
        for (label, n), m in zip(owner.blocks, data):
            m = np.asarray(m, dtype=complex)
            if m.shape != (n, n):
                raise DimensionMismatch(f"block {label!r}: shape {m.shape} != ({n}, {n})")
            m = m.copy()
            m.setflags(write=False)
            mats.append(m)
        self.owner = owner
        self.data = tuple(mats)

    # -- *-algebra operations ------------------------------------------------

    def _check(self, other: "AlgebraElement"):
        if self.owner is not other.owner and self.owner != other.owner:
            raise OwnerMismatch("elements belong to different algebras")

    def __add__(self, other):
        self._check(other)
        return AlgebraElement(self.owner, [a + b for a, b in zip(self.data, other.data)])

    def __sub__(self, other):
        self._check(other)
        return AlgebraElement(self.owner, [a - b for a, b in zip(self.data, other.data)])

    def __neg__(self):
        return AlgebraElement(self.owner, [-a for a in self.data])

    def __mul__(self, scalar):
        return AlgebraElement(self.owner, [scalar * a for a in self.data])

    __rmul__ = __mul__

    def __matmul__(self, other):
        self._check(other)
        return AlgebraElement(self.owner, [a @ b for a, b in zip(self.data, other.data)])

    @property
    def H(self) -> "AlgebraElement":
        return AlgebraElement(self.owner, [a.conj().T for a in self.data])

    def trace(self) -> complex:
        self.owner._require_weights()
        return complex(sum(w * np.trace(a)
                           for w, a in zip(self.owner.trace_weights, self.data)))

    def inner(self, other: "AlgebraElement") -> complex:
        """tau(other* self), the GNS inner product <self, other>."""
        self._check(other)
        return (other.H @ self).trace()

    def norm(self, p) -> float:
        """p-norm for p in {1, 2, 'inf'}: tau(|x|), tau(x*x)^(1/2), sup singular value."""
        if p == 2:
            return float(np.sqrt(max(self.inner(self).real, 0.0)))
        if p == 1:
            self.owner._require_weights()
            return float(sum(w * np.linalg.svd(a, compute_uv=False).sum()
                             for w, a in zip(self.owner.trace_weights, self.data)))
        if p in ("inf", np.inf):
            return float(max(np.linalg.norm(a, 2) for a in self.data))
        raise ValueError(f"unsupported p-norm {p!r}")

    # -- predicates ----------------------------------------------------------

    def hermitian_defect(self) -> float:
        return float(max(np.linalg.norm(a - a.conj().T) for a in self.data))

    def min_eig(self) -> float:
        """Smallest eigenvalue of the hermitian part across blocks."""
        return float(min(np.linalg.eigvalsh(la.herm(a))[0] for a in self.data))

    def is_projection(self, tol: float = 1e-9) -> bool:
        d = max(float(np.linalg.norm(a @ a - a)) for a in self.data)
        return self.hermitian_defect() <= tol and d <= tol

    def normality_defect(self) -> float:
        return float(max(np.linalg.norm(a @ a.conj().T - a.conj().T @ a)
                         for a in self.data))

    def blockdiag(self) -> np.ndarray:
        """The element as one block-diagonal matrix of size total_size."""
        d = self.owner.total_size
        out = np.zeros((d, d), dtype=complex)
        at = 0
        for a in self.data:
            n = a.shape[0]
            out[at:at + n, at:at + n] = a
            at += n
        return out

    def __repr__(self):
        labels = ",".join(l for l, _ in self.owner.blocks)
        return f"AlgebraElement(blocks=[{labels}], norm2={self.norm(2):.4g})"


# ---------------------------------------------------------------------------
# elementwise numerical toolkit
# ---------------------------------------------------------------------------

def range_projection(x: AlgebraElement, tol_rank: float = 1e-10) -> AlgebraElement:
    """Projection p with p x = x; rank thresholded against the global largest
    singular value across blocks."""
    smax = 0.0
    for a in x.data:
        s = np.linalg.svd(a, compute_uv=False)
        if s.size:
            smax = max(smax, float(s[0]))
    if smax == 0.0:
        return x.owner.zero()
    data = []
    for a in x.data:
        u, s, _ = np.linalg.svd(a)
        q = u[:, s > tol_rank * smax]
        p = q @ q.conj().T
        w, v = np.linalg.eigh(la.herm(p))
        data.append((v * np.round(w.clip(0.0, 1.0))) @ v.conj().T)
    return x.owner.element(data)


def polar_decomposition(x: AlgebraElement, rtol: float = 1e-12):
    """x = v |x| with v a partial isometry, v*v the support of |x|.

    The singular-value cutoff is relative to the largest singular value
    across all blocks.
    """
    smax = max(float(np.linalg.svd(a, compute_uv=False)[0]) for a in x.data)
    cutoff = rtol * smax
    vs, ps = [], []
    for a in x.data:
        u, s, vh = np.linalg.svd(a)
        keep = s > cutoff
        vs.append(u[:, keep] @ vh[keep, :])
        ps.append(la.herm(vh.conj().T @ np.diag(s).astype(complex) @ vh))
    return x.owner.element(vs), x.owner.element(ps)


def spectral_decomposition(x: AlgebraElement, tol_normal: float = 1e-10):
    """Eigenpairs of a normal element, blockwise.

    Returns a list per block of (eigenvalues, orthonormal eigenvector
    columns).  Raises NotNormal when x*x - xx* is not negligible.
    """
    if x.normality_defect() > tol_normal * max(x.norm("inf"), 1.0):
        raise NotNormal("spectral branch requires a normal element")
    import scipy.linalg as sla

    out = []
    for a in x.data:
        if np.linalg.norm(a - a.conj().T) <= 1e-12 * max(np.linalg.norm(a), 1.0):
            w, v = np.linalg.eigh(la.herm(a))
            out.append((w.astype(complex), v))
        else:
            # normal but not hermitian: the complex Schur form is diagonal,
            # so the Schur vectors are an orthonormal eigenbasis
            t, q = sla.schur(a, output="complex")[:2]
            out.append((np.diag(t).copy(), q))
    return out


def commutant(generators, dim: int, rtol: float = 1e-10):
    """Hermitian HS-orthonormal basis of the commutant of a set of operators."""
    return la.commutant_basis(generators, dim, rtol=rtol)


def center_and_factor(basis, tol: float = 1e-10):
    """Center of the algebra spanned by basis, and whether it is a factor.

    basis is a list of square matrices spanning a set closed under products
    and adjoints (checked; NotAnAlgebra otherwise).  The center is returned
    as matrices inside the span.
    """
    basis = [np.asarray(b, dtype=complex) for b in basis]
    if not basis:
        raise NotAnAlgebra("empty basis")
    dim = basis[0].shape[0]
    span = np.array([b.reshape(-1) for b in basis]).T
    q = la.onb_columns(span)
    proj = q @ q.conj().T
    scale = max(max(la.frob(b) for b in basis), 1e-300)

    def in_span(m):
        v = m.reshape(-1)
        return la.frob(v - proj @ v) <= tol * max(la.frob(v), scale)

    for a in basis:
        if not in_span(a.conj().T):
            raise NotAnAlgebra("basis not closed under adjoints")
        for b in basis:
            if not in_span(a @ b):
                raise NotAnAlgebra("basis not closed under products")

    # center = commutant of the basis intersected with the span
    rows = []
    for g in basis:
        k = np.kron(g, np.eye(dim)) - np.kron(np.eye(dim), g.T)
        rows.append((k @ q) / max(la.frob(g), 1e-300))
    coeffs = la.nullspace_abs(np.concatenate(rows, axis=0), atol=1e-10)
    center = [(q @ coeffs[:, k]).reshape(dim, dim) for k in range(coeffs.shape[1])]
    return center, len(center) == 1


# ---------------------------------------------------------------------------
# GNS representation
# ---------------------------------------------------------------------------

class GnsRepresentation:
    """L^2 of a multi-matrix algebra under its tracial state.

    Coordinates: block-ordered, row-major entries scaled by sqrt(w_i).  In
    these coordinates left multiplication by a is blockwise a_i otimes I and
    right multiplication is I otimes a_i^T; the modular conjugation is
    conjugate-then-transpose within each block.
    """

    def __init__(self, algebra: MultiMatrixAlgebra):
        algebra._require_weights()
        self.algebra = algebra
        self.dim = algebra.dim
        self._offsets = []
        at = 0
        for n in algebra.sizes:
            self._offsets.append(at)
            at += n * n
        # transpose permutation for J
        perm = np.arange(self.dim)
        for off, n in zip(self._offsets, algebra.sizes):
            idx = np.arange(n * n).reshape(n, n)
            perm[off:off + n * n] = off + idx.T.reshape(-1)
        self._jperm = perm
        self.omega = self.vec(algebra.unit())

    def vec(self, x: AlgebraElement) -> np.ndarray:
        if x.owner != self.algebra:
            raise OwnerMismatch("element of a different algebra")
        parts = [np.sqrt(w) * a.reshape(-1)
                 for w, a in zip(self.algebra.trace_weights, x.data)]
        return np.concatenate(parts)

    def action_matrix(self, fn) -> np.ndarray:
        """Matrix, in the orthonormal GNS coordinates, of a linear map on the
        algebra given pointwise (fn takes and returns AlgebraElements)."""
        weights = np.concatenate([
            np.full(n * n, w) for w, n in
            zip(self.algebra.trace_weights, self.algebra.sizes)])
        cols = np.array([self.vec(fn(b)) for b in self.algebra.matrix_units()]).T
        return cols / np.sqrt(weights)[None, :]

    def unvec(self, v: np.ndarray) -> AlgebraElement:
        if v.shape != (self.dim,):
            raise DimensionMismatch(f"vector length {v.shape} != ({self.dim},)")
        data = []
        for w, n, off in zip(self.algebra.trace_weights, self.algebra.sizes,
                             self._offsets):
            data.append(v[off:off + n * n].reshape(n, n) / np.sqrt(w))
        return self.algebra.element(data)

    def left(self, x: AlgebraElement) -> np.ndarray:
        """Matrix of left multiplication by x on the GNS coordinates."""
        blocks = [_kron_id_right(a, n) for a, n in zip(x.data, self.algebra.sizes)]
        return _blockdiag(blocks)

    def right(self, x: AlgebraElement) -> np.ndarray:
        """Matrix of right multiplication by x."""
        blocks = [_kron_id_left(a.T, n) for a, n in zip(x.data, self.algebra.sizes)]
        return _blockdiag(blocks)

    def conjugation(self, v: np.ndarray) -> np.ndarray:
        """The antilinear J: x Omega -> x* Omega, as an action on coordinates."""
        return np.conj(v)[self._jperm]

    def conjugate_matrix(self, a: np.ndarray) -> np.ndarray:
        """J a J for a linear operator a on the GNS space (again linear)."""
        p = np.eye(self.dim)[self._jperm]
        return p @ np.conj(a) @ p


def _kron_id_right(a: np.ndarray, n: int) -> np.ndarray:
    """kron(a, eye(n)) without the generic-kron overhead."""
    m = a.shape[0]
    out = np.zeros((m, n, m, n), dtype=complex)
    for r in range(n):
        out[:, r, :, r] = a
    return out.reshape(m * n, m * n)


def _kron_id_left(a: np.ndarray, n: int) -> np.ndarray:
    """kron(eye(n), a) without the generic-kron overhead."""
    m = a.shape[0]
    out = np.zeros((n, m, n, m), dtype=complex)
    for r in range(n):
        out[r, :, r, :] = a
    return out.reshape(m * n, m * n)


def _blockdiag(blocks):
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=complex)
    at = 0
    for b in blocks:
        k = b.shape[0]
        out[at:at + k, at:at + k] = b
        at += k
    return out
