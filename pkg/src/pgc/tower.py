"""Jones basic construction for finite inclusions of multi-matrix algebras.

The inclusion N in M is given by a unital *-homomorphism assembled from an
inclusion matrix (multiplicity of N-block i inside M-block j).  The tower is
realized on two concrete Hilbert spaces:

  level 0:  L^2(M), dimension d.  M acts on the left, e1 projects onto the
            embedded copy of L^2(N), and M1 = <M, e1> is computed as the
            commutant of the right N-action.
  level 1:  L^2(M1), dimension D1 = dim M1.  It is embedded isometrically in
            the Hilbert-Schmidt space over L^2(M) via X -> vec(X rho^{1/2}),
            rho being the density of the Markov trace on M1.  Left and right
            multiplications by M1 compress to D1 x D1 matrices, e2 projects
            onto the copy of L^2(M), and elements of M' cap M2 live here.

The Markov trace is the lambda-extension: tau1 restricted to M equals tau and
the expectation of e1 onto M is the scalar 1/index.  Its density on L^2(M) is
assembled from the central supports of N; the analogous density one level up
uses the central supports of M.  Both are verified at build time, not
assumed.

Fourier multipliers of bimodule maps are constructed by least squares on the
spanning family { x e1 y Omega1 } of L^2(M1); rotation formulas are
demoted to cross-checks elsewhere.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from . import _linalg as la
from .algebra import AlgebraElement, GnsRepresentation, MultiMatrixAlgebra
from .errors import (
    BasisConstructionFailed,
    DimensionMismatch,
    DisconnectedDiagram,
    ExceedsDeskScale,
    LevelMismatch,
    NotPositive,
    SpanningSetDeficient,
    TraceNotMarkov,
    ZeroRow,
)

__all__ = [
    "Embedding",
    "UnitalInclusion",
    "JonesTower",
    "markov_data",
    "basic_construction",
    "pp_basis",
    "pp_inequality_check",
    "relative_commutant",
    "conditional_expectation",
]

DEFAULT_MAX_GNS1_DIM = 4096


# ---------------------------------------------------------------------------
# embeddings and Markov data
# ---------------------------------------------------------------------------

class Embedding:
    """Unital *-homomorphism N -> M in canonical block-assembly form.

    For M-block j the image is blockdiag of each N-block i repeated
    multiplicities[i, j] times (i ascending, copies contiguous), optionally
    conjugated by a unitary per M-block.
    """

    def __init__(self, algebra_n: MultiMatrixAlgebra, algebra_m: MultiMatrixAlgebra,
                 multiplicities, unitaries=None):
        lam = np.asarray(multiplicities, dtype=int)
        if lam.shape != (algebra_n.nblocks, algebra_m.nblocks):
            raise DimensionMismatch("inclusion matrix shape mismatch")
        if (lam < 0).any():
            raise DimensionMismatch("multiplicities must be nonnegative")
        if lam.sum(axis=1).min() == 0 or lam.sum(axis=0).min() == 0:
            raise ZeroRow("inclusion matrix has a zero row or column")
        for j, mj in enumerate(algebra_m.sizes):
            need = int(sum(lam[i, j] * n for i, n in enumerate(algebra_n.sizes)))
            if need != mj:
                raise DimensionMismatch(
                    f"M-block {j}: assembled size {need} != {mj} (embedding not unital)")
        self.N = algebra_n
        self.M = algebra_m
        self.matrix = lam
        if unitaries is not None:
            unitaries = [np.asarray(u, dtype=complex) for u in unitaries]
            for u, mj in zip(unitaries, algebra_m.sizes):
                if u.shape != (mj, mj):
                    raise DimensionMismatch("embedding unitary of wrong size")
                if la.frob(u @ la.dagger(u) - np.eye(mj)) > 1e-10:
                    raise DimensionMismatch("embedding conjugator is not unitary")
        self.unitaries = unitaries

    def rebind(self, algebra_n, algebra_m) -> "Embedding":
        """Same assembly over (re)weighted copies of the algebras."""
        return Embedding(algebra_n, algebra_m, self.matrix, self.unitaries)

    def apply(self, x: AlgebraElement) -> AlgebraElement:
        if x.owner != self.N:
            raise LevelMismatch("element does not belong to N")
        data = []
        for j, mj in enumerate(self.M.sizes):
            blk = np.zeros((mj, mj), dtype=complex)
            at = 0
            for i, ni in enumerate(self.N.sizes):
                for _ in range(self.matrix[i, j]):
                    blk[at:at + ni, at:at + ni] = x.data[i]
                    at += ni
            if self.unitaries is not None:
                u = self.unitaries[j]
                blk = u @ blk @ la.dagger(u)
            data.append(blk)
        return self.M.element(data)

    @staticmethod
    def named(name: str, algebra_n, algebra_m) -> "Embedding":
        """The named embeddings: 'equal', 'scalars_in_full', 'diagonal_in_full'."""
        nn, nm = algebra_n.nblocks, algebra_m.nblocks
        if name == "equal":
            if algebra_n.sizes != algebra_m.sizes:
                raise DimensionMismatch("'equal' needs identical block lists")
            lam = np.eye(nn, dtype=int)
        elif name == "scalars_in_full":
            if algebra_n.sizes != (1,) or nm != 1:
                raise DimensionMismatch("'scalars_in_full' needs N = C and one M-block")
            lam = np.array([[algebra_m.sizes[0]]])
        elif name == "diagonal_in_full":
            if any(n != 1 for n in algebra_n.sizes) or nm != 1 \
                    or nn != algebra_m.sizes[0]:
                raise DimensionMismatch(
                    "'diagonal_in_full' needs N = C^n inside one M_n block")
            lam = np.ones((nn, 1), dtype=int)
        else:
            raise DimensionMismatch(f"unknown named embedding {name!r}")
        return Embedding(algebra_n, algebra_m, lam)


def markov_data(multiplicities, sizes_n, sizes_m):
    """Markov trace weights and index from the inclusion matrix.

    The index is the largest eigenvalue of Lambda^T Lambda; the M-side
    weights are its Perron eigenvector normalized to a state and the N-side
    weights follow by trace compatibility.  Needs a connected Bratteli
    diagram, otherwise the Markov trace is not unique.
    """
    lam = np.asarray(multiplicities, dtype=float)
    if lam.size == 0:
        raise ZeroRow("empty inclusion matrix")
    if lam.sum(axis=1).min() == 0 or lam.sum(axis=0).min() == 0:
        raise ZeroRow("inclusion matrix has a zero row or column")
    if not _connected(lam):
        raise DisconnectedDiagram(
            "Bratteli diagram is disconnected; supply trace weights explicitly")
    gram = lam.T @ lam
    w, v = np.linalg.eigh(gram)
    mu = float(w[-1])
    perron = v[:, -1]
    if perron.sum() < 0:
        perron = -perron
    if perron.min() <= 1e-12 * perron.max():
        raise DisconnectedDiagram("Perron vector not strictly positive")
    weights_m = perron / float(perron @ np.asarray(sizes_m, dtype=float))
    weights_n = lam @ weights_m
    return tuple(weights_n), tuple(weights_m), 1.0 / mu, mu


def _connected(lam) -> bool:
    nn, nm = lam.shape
    seen_n, seen_m = {0}, set()
    frontier = [("n", 0)]
    while frontier:
        kind, k = frontier.pop()
        if kind == "n":
            for j in range(nm):
                if lam[k, j] > 0 and j not in seen_m:
                    seen_m.add(j)
                    frontier.append(("m", j))
        else:
            for i in range(nn):
                if lam[i, k] > 0 and i not in seen_n:
                    seen_n.add(i)
                    frontier.append(("n", i))
    return len(seen_n) == nn and len(seen_m) == nm


class UnitalInclusion:
    """A unital inclusion with compatible traces on both algebras.

    With weights_m omitted the Markov trace is constructed; with explicit
    weights the lambda-extension condition is tested and recorded in
    .markov (the eigen-relation of the weight vector), so downstream code
    can refuse the phase-group pipeline on non-Markov data.
    """

    def __init__(self, embedding: Embedding, weights_m=None):
        lam = embedding.matrix
        if weights_m is None:
            wn, wm, lam_c, mu = markov_data(lam, embedding.N.sizes, embedding.M.sizes)
            self.markov = True
        else:
            wm = tuple(float(x) for x in weights_m)
            wn = tuple(float(x) for x in (lam @ np.asarray(wm)))
            img = lam.T @ (lam @ np.asarray(wm))
            ratios = img / np.asarray(wm)
            mu = float(ratios.mean())
            self.markov = bool(np.max(np.abs(ratios - mu)) <= 1e-9 * max(mu, 1.0))
            lam_c = 1.0 / mu if self.markov else None
        self.N = embedding.N.with_weights(wn)
        self.M = embedding.M.with_weights(wm)
        self.embedding = embedding.rebind(self.N, self.M)
        self.matrix = lam
        self.index = mu if self.markov else None
        self.pp_constant = lam_c

    def embed(self, x: AlgebraElement) -> AlgebraElement:
        return self.embedding.apply(x)

    def validate(self) -> float:
        """Residual of the *-homomorphism and trace-compatibility checks."""
        worst = (self.embed(self.N.unit()) - self.M.unit()).norm(2)
        units = self.N.matrix_units()
        for a in units:
            ea = self.embed(a)
            worst = max(worst, (self.embed(a.H) - ea.H).norm(2))
            worst = max(worst, abs(ea.trace() - a.trace()))
            for b in units:
                worst = max(worst, (self.embed(a @ b) - ea @ self.embed(b)).norm(2))
        return float(worst)


# ---------------------------------------------------------------------------
# the tower
# ---------------------------------------------------------------------------

class JonesTower:
    """Two iterations of the basic construction over a Markov inclusion.

    Everything at level 0 is computed eagerly; the Pimsner-Popa basis, the
    level-2 relative commutant frame and the spanning-set pseudo-inverse are
    cached on first use.  Instances are immutable and safe to share between
    threads.
    """

    def __init__(self, inclusion: UnitalInclusion, max_dim: int = DEFAULT_MAX_GNS1_DIM,
                 force: bool = False):
        if not inclusion.markov:
            raise TraceNotMarkov(
                "trace on M is not a lambda-extension (weights are not an "
                "eigenvector of Lambda^T Lambda); phase-group pipelines must refuse")
        self.inclusion = inclusion
        self.N = inclusion.N
        self.M = inclusion.M
        self.index = float(inclusion.index)
        self.pp_constant = 1.0 / self.index
        self.delta = float(np.sqrt(self.index))

        sizes_m = np.asarray(self.M.sizes)
        k_sizes = inclusion.matrix @ sizes_m
        self.level1_block_sizes = tuple(int(k) for k in k_sizes)
        self.dim_gns1 = int(sum(k * k for k in k_sizes))
        if self.dim_gns1 > max_dim and not force:
            raise ExceedsDeskScale(
                f"dim L^2(M1) = {self.dim_gns1} exceeds the desk-scale cap "
                f"{max_dim}; raise PGC_MAX_DIM or pass force")

        self.gns = GnsRepresentation(self.M)
        self.d = self.gns.dim
        self._build_level0()
        self._build_level1()

    # -- level 0: L^2(M), e1, E_N, M1, tau1 ----------------------------------

    def _build_level0(self):
        gns, incl = self.gns, self.inclusion
        n_units = [incl.embed(b) for b in self.N.matrix_units()]
        self._embedded_n_units = n_units

        # e1: orthogonal projection onto the embedded L^2(N)
        cols = np.array([gns.vec(u) for u in n_units]).T
        q = la.onb_columns(cols)
        self.e1 = q @ la.dagger(q)

        # tau-orthonormal frame of embed(N), for E_N, plus the inverse of embed
        gram = la.dagger(cols) @ cols
        w, v = np.linalg.eigh(la.herm(gram))
        tf = v / np.sqrt(w)
        self._en_frame = cols @ tf
        self._embed_pinv = np.linalg.pinv(cols)

        # Markov trace density on M1, from the central supports of N
        rho = np.zeros((self.d, self.d), dtype=complex)
        for i, ni in enumerate(self.N.sizes):
            zi = incl.embed(self.N.block_unit(i))
            rho += (self.pp_constant * self.N.trace_weights[i] / ni) * gns.right(zi)
        self.rho1 = la.herm(rho)
        self.rho1_sqrt = la.psd_sqrt(self.rho1)
        self.rho1_sqrt_inv = np.linalg.inv(self.rho1_sqrt)
        self.rho1_inv = np.linalg.inv(self.rho1)

        # M1 = commutant of the right N-action, tau1-orthonormalized
        rgens = [gns.right(u) for u in n_units]
        self.m1_basis = self._orthonormalize_tau1(la.commutant_basis(rgens, self.d))
        if len(self.m1_basis) != self.dim_gns1:
            raise DimensionMismatch(
                f"dim M1 = {len(self.m1_basis)} != expected {self.dim_gns1}")

        # left action of M, tau1-orthonormalized, for E_M
        m_units = self.M.matrix_units()
        self._m_units = m_units
        lmats = [gns.left(b) for b in m_units]
        self._m_left = lmats
        stack = np.array([(l @ self.rho1_sqrt).reshape(-1) for l in lmats])
        gram = np.conj(stack) @ stack.T
        w, v = np.linalg.eigh(la.herm(gram))
        tf = v / np.sqrt(w)
        self._em_cols = stack.T @ tf            # columns vec(frame_t rho^{1/2})
        self._em_unit_tf = tf                   # frame -> matrix-unit coefficients

        # the lambda-extension gate: E_M(e1) must be the scalar pp_constant
        markov_defect = (self.expect_onto_m(self.e1)
                         - self.pp_constant * self.M.unit()).norm("inf")
        self.markov_residual = float(markov_defect)
        if markov_defect > 1e-9:
            raise TraceNotMarkov(
                f"E_M(e1) deviates from lambda*1 by {markov_defect:.2e}")

        # N' cap M1 (the plus two-box space), tau1-orthonormal
        lgens = [gns.left(u) for u in n_units]
        self.plus_basis = self._orthonormalize_tau1(
            la.commutant_basis(lgens + rgens, self.d))

        # N' cap M, blockwise commutant inside M
        self._n_prime_m = self._relative_commutant_in_m(n_units)

    def _orthonormalize_tau1(self, mats):
        if not mats:
            return []
        stack = np.array([(m @ self.rho1_sqrt).reshape(-1) for m in mats])
        gram = np.conj(stack) @ stack.T
        w, v = np.linalg.eigh(la.herm(gram))
        tf = v / np.sqrt(w)
        combo = np.tensordot(tf.T, np.array(mats), axes=(1, 0))
        return [combo[t] for t in range(combo.shape[0])]

    def _relative_commutant_in_m(self, n_units):
        out = []
        for j, mj in enumerate(self.M.sizes):
            gens = [u.data[j] for u in n_units]
            for b in la.commutant_basis(gens, mj):
                data = [np.zeros((m, m), dtype=complex) for m in self.M.sizes]
                data[j] = b / np.sqrt(self.M.trace_weights[j])
                out.append(self.M.element(data))
        return out

    # -- traces and expectations ----------------------------------------------

    def tau1(self, x: np.ndarray) -> complex:
        """The Markov trace on M1 (operators on L^2(M))."""
        return complex(np.trace(self.rho1 @ x))

    def tr2_plus(self, x: np.ndarray) -> complex:
        """Unnormalized two-box trace on N' cap M1: tr2(1) = index, tr2(e1) = 1."""
        return self.index * self.tau1(x)

    def expect_onto_n(self, x: AlgebraElement) -> AlgebraElement:
        """E_N as an element of M (image inside the embedded copy of N)."""
        v = self.gns.vec(x)
        return self.gns.unvec(self._en_frame @ (la.dagger(self._en_frame) @ v))

    def expect_onto_n_as_n(self, x: AlgebraElement) -> AlgebraElement:
        """E_N with the result written in the coordinates of N."""
        coeff = self._embed_pinv @ self.gns.vec(self.expect_onto_n(x))
        data = []
        at = 0
        for n in self.N.sizes:
            data.append(coeff[at:at + n * n].reshape(n, n))
            at += n * n
        return self.N.element(data)

    def expect_onto_m(self, x: np.ndarray) -> AlgebraElement:
        """E_M: M1 -> M, the tau1-orthogonal projection onto the left action."""
        coeffs = la.dagger(self._em_cols) @ (x @ self.rho1_sqrt).reshape(-1)
        unit_coeffs = self._em_unit_tf @ coeffs
        data, at = [], 0
        for n in self.M.sizes:
            data.append(unit_coeffs[at:at + n * n].reshape(n, n))
            at += n * n
        return self.M.element(data)

    # -- level 1: L^2(M1), e2, tau2, multipliers ------------------------------

    def _build_level1(self):
        d = self.d
        v_cols = np.array([(f @ self.rho1_sqrt).reshape(-1) for f in self.m1_basis]).T
        self.V = v_cols                                # d^2 x D1, HS-isometry
        self._v3 = v_cols.reshape(d, d, self.dim_gns1)
        self.omega1 = la.dagger(self.V) @ self.rho1_sqrt.reshape(-1)

        # e2: projection onto the embedded L^2(M)
        cols = np.array([self.psi(l) for l in self._m_left]).T
        q = la.onb_columns(cols)
        self.e2 = q @ la.dagger(q)

        # tau2 density from the central supports of M
        dd = np.zeros((self.dim_gns1, self.dim_gns1), dtype=complex)
        for j, mj in enumerate(self.M.sizes):
            zj = self.gns.left(self.M.block_unit(j))
            dd += (self.pp_constant * self.M.trace_weights[j] / mj) * self.lift_right(zj)
        self.rho2 = la.herm(dd)

        # spanning family x e1 y Omega1 and its pseudo-inverse
        self._x3 = np.array(self._m_left)              # (nm, d, d)
        self._y3_rho = np.einsum("tbc,cd->tbd", self._x3, self.rho1_sqrt)
        self._span = self._spanning_matrix(self.e1)
        self._span_pinv = np.linalg.pinv(self._span)
        self.e1_level2 = self.lift_left(self.e1)

    def psi(self, x: np.ndarray) -> np.ndarray:
        """Coordinates of an element of M1 as a vector of L^2(M1)."""
        return la.dagger(self.V) @ (x @ self.rho1_sqrt).reshape(-1)

    def unpsi(self, v: np.ndarray) -> np.ndarray:
        """The element of M1 with the given L^2(M1) coordinates."""
        return (self.V @ v).reshape(self.d, self.d) @ self.rho1_sqrt_inv

    def lift_left(self, a: np.ndarray) -> np.ndarray:
        """Left multiplication by a (an element of M1) on L^2(M1)."""
        d, p = self.d, self.dim_gns1
        av = (a @ self._v3.reshape(d, d * p)).reshape(d * d, p)
        return la.dagger(self.V) @ av

    def lift_right(self, b: np.ndarray) -> np.ndarray:
        """Right multiplication by b (an element of M1) on L^2(M1)."""
        d, p = self.d, self.dim_gns1
        # (I otimes b^T) vec: contract the middle index of V3 with b
        vb = self._v3.transpose(0, 2, 1).reshape(d * p, d) @ b
        vb = vb.reshape(d, p, d).transpose(0, 2, 1).reshape(d * d, p)
        return la.dagger(self.V) @ vb

    @cached_property
    def m_lifts(self):
        """Left and right lifts of the matrix-unit basis of M, for membership checks."""
        lefts = [self.lift_left(l) for l in self._m_left]
        rights = [self.lift_right(l) for l in self._m_left]
        return lefts, rights

    def tau2(self, w: np.ndarray) -> complex:
        return complex(np.trace(self.rho2 @ w))

    def tr2_minus(self, w: np.ndarray) -> complex:
        return self.index * self.tau2(w)

    def expect_onto_m1(self, w: np.ndarray) -> np.ndarray:
        """E_{M1}: operators on L^2(M1) -> M1, the tau2-orthogonal projection."""
        k = self.V @ (w @ self.rho2) @ la.dagger(self.V)
        k3 = k.reshape(self.d, self.d, self.d, self.d)
        pt = np.einsum("rqpq->rp", k3)
        proj = (self.V @ (la.dagger(self.V) @ pt.reshape(-1))).reshape(self.d, self.d)
        return proj @ self.rho1_inv

    def expect_onto_m_level2(self, w: np.ndarray) -> AlgebraElement:
        """E_M applied to an operator on L^2(M1), landing in M."""
        return self.expect_onto_m(self.expect_onto_m1(w))

    def _spanning_matrix(self, mid: np.ndarray) -> np.ndarray:
        """Columns psi(x_s @ mid @ y_t) over the matrix-unit families of M."""
        nm, d = self._x3.shape[0], self.d
        r3 = (mid @ self._y3_rho.transpose(1, 0, 2).reshape(d, nm * d))             .reshape(d, nm, d).transpose(1, 0, 2)
        # (s a b) x (t b c) -> (s t a c) through one BLAS product
        left = self._x3.reshape(nm * d, d)
        right = r3.transpose(1, 0, 2).reshape(d, nm * d)
        cols = (left @ right).reshape(nm, d, nm, d).transpose(0, 2, 1, 3)
        cols = cols.reshape(nm * nm, d * d)
        return (cols @ np.conj(self.V)).T

    def multiplier_from_action(self, action: np.ndarray, rtol: float = 1e-9):
        """Fourier multiplier of the bimodule map with the given action matrix.

        Solves the defining relation on the spanning set of L^2(M1) by least
        squares and certifies the residual.  Returns (multiplier, residual).
        """
        z = np.zeros((self.d, self.d), dtype=complex)
        for eta in self.pimsner_popa_basis:
            img = self.gns.unvec(action @ self.gns.vec(eta))
            z += la.dagger(self.gns.left(eta)) @ self.e1 @ self.gns.left(img)
        z *= self.delta
        t = self._spanning_matrix(z)
        hat = t @ self._span_pinv
        resid = la.frob(hat @ self._span - t) / max(la.frob(t), 1e-300)
        if resid > rtol:
            raise SpanningSetDeficient(
                f"multiplier relation residual {resid:.2e} (broken tower?)")
        return hat, float(resid)

    @cached_property
    def pimsner_popa_basis(self):
        return pp_basis(self)

    # -- minus-side two-box space ---------------------------------------------

    @cached_property
    def rho2_sqrt(self):
        return la.psd_sqrt(self.rho2)

    @cached_property
    def minus_preframe(self):
        """Images of the plus basis under the multiplier map (spans M' cap M2)."""
        return [self.multiplier_from_action(b)[0] for b in self.plus_basis]

    @cached_property
    def _minus_stack(self):
        """Rows vec(G_s rho2^{1/2}) of the preframe, for tau2 inner products."""
        return np.array([(g @ self.rho2_sqrt).reshape(-1)
                         for g in self.minus_preframe])

    @cached_property
    def _minus_gram_inv(self):
        stack = self._minus_stack
        gram = la.herm(np.conj(stack) @ stack.T)
        w, _ = np.linalg.eigh(gram)
        if w[0] <= 1e-12 * w[-1]:
            raise SpanningSetDeficient("multiplier map degenerate on the plus basis")
        return np.linalg.inv(gram)

    @cached_property
    def minus_frame(self):
        """tau2-orthonormal basis of M' cap M2."""
        stack = self._minus_stack
        gram = la.herm(np.conj(stack) @ stack.T)
        w, v = np.linalg.eigh(gram)
        if w[0] <= 1e-12 * w[-1]:
            raise SpanningSetDeficient("multiplier map degenerate on the plus basis")
        tf = v / np.sqrt(w)
        combo = np.tensordot(tf.T, np.array(self.minus_preframe), axes=(1, 0))
        return [combo[t] for t in range(combo.shape[0])]

    def minus_coords(self, w: np.ndarray):
        """Coefficients of w against the preframe, plus the off-space residual."""
        target = (w @ self.rho2_sqrt).reshape(-1)
        beta = np.conj(self._minus_stack) @ target
        coeff = self._minus_gram_inv @ beta
        recon = self._minus_stack.T @ coeff
        num = np.linalg.norm(recon - target)
        den = max(np.linalg.norm(target), 1e-300)
        return coeff, float(num / den)

    def dim_two_box(self, side: str) -> int:
        """Commutant dimension from bimodule multiplicities, independent of
        any basis computation."""
        if side == "plus":
            total = 0
            for i, ni in enumerate(self.N.sizes):
                li = self.gns.left(self.inclusion.embed(self.N.block_unit(i)))
                for i2, ni2 in enumerate(self.N.sizes):
                    ri = self.gns.right(self.inclusion.embed(self.N.block_unit(i2)))
                    nu = np.trace(li @ ri).real / (ni * ni2)
                    total += int(round(nu)) ** 2
            return total
        if side == "minus":
            total = 0
            for j, mj in enumerate(self.M.sizes):
                lj = self.lift_left(self.gns.left(self.M.block_unit(j)))
                for j2, mj2 in enumerate(self.M.sizes):
                    rj = self.lift_right(self.gns.left(self.M.block_unit(j2)))
                    nu = np.trace(lj @ rj).real / (mj * mj2)
                    total += int(round(nu)) ** 2
            return total
        raise LevelMismatch(f"unknown side {side!r}")

    def membership_residual_minus(self, w: np.ndarray) -> float:
        """Commutation residual of w with both M-actions on L^2(M1)."""
        lefts, rights = self.m_lifts
        worst = 0.0
        scale = max(la.frob(w), 1e-300)
        for lift in (*lefts, *rights):
            worst = max(worst, la.frob(w @ lift - lift @ w)
                        / (scale * max(la.frob(lift), 1e-300)))
        return worst

    def membership_residual_plus(self, x: np.ndarray) -> float:
        """Commutation residual of x with both N-actions on L^2(M)."""
        worst = 0.0
        scale = max(la.frob(x), 1e-300)
        for u in self._embedded_n_units:
            for act in (self.gns.left(u), self.gns.right(u)):
                nrm = max(la.frob(act), 1e-300)
                worst = max(worst, la.frob(x @ act - act @ x) / (scale * nrm))
        return worst

    @cached_property
    def _plus_stack(self):
        return np.array([(b @ self.rho1_sqrt).reshape(-1) for b in self.plus_basis])

    def project_plus(self, x: np.ndarray) -> np.ndarray:
        """tau1-orthogonal projection of an operator on L^2(M) onto N' cap M1."""
        coeff = np.conj(self._plus_stack) @ (x @ self.rho1_sqrt).reshape(-1)
        return np.tensordot(coeff, np.array(self.plus_basis), axes=(0, 0))


def basic_construction(inclusion: UnitalInclusion, max_dim: int = DEFAULT_MAX_GNS1_DIM,
                       force: bool = False) -> JonesTower:
    """Run the basic construction twice over a Markov inclusion."""
    return JonesTower(inclusion, max_dim=max_dim, force=force)


# ---------------------------------------------------------------------------
# Pimsner-Popa bases and the inequality
# ---------------------------------------------------------------------------

def pp_basis(tower: JonesTower, tol: float = 1e-9):
    """Deterministic Pimsner-Popa basis by Gram-Schmidt in the N-valued
    inner product E_N(x y*), swept over the matrix units of M.

    Each pivot is normalized through the pseudo-inverse square root of its
    self-pairing, which makes the pairing of the result a projection in N;
    the reconstruction identity is then verified on a basis of M.
    """
    etas = []
    for b in tower.M.matrix_units():
        r = b
        for eta in etas:
            r = r - tower.expect_onto_n(r @ eta.H) @ eta
        g = tower.expect_onto_n(r @ r.H)
        top = g.norm("inf")
        if top <= 1e-18:
            continue
        s_data = []
        for blk in g.data:
            w, v = np.linalg.eigh(la.herm(blk))
            inv = np.where(w > tol * top, 1.0 / np.sqrt(np.clip(w, 1e-300, None)), 0.0)
            s_data.append((v * inv) @ la.dagger(v))
        eta = tower.M.element(s_data) @ r
        if tower.expect_onto_n(eta @ eta.H).norm("inf") > 1e-12:
            etas.append(eta)
    worst = 0.0
    for b in tower.M.matrix_units():
        recon = sum((tower.expect_onto_n(b @ eta.H) @ eta for eta in etas),
                    start=tower.M.zero())
        worst = max(worst, (recon - b).norm(2))
    if worst > 1e-8:
        raise BasisConstructionFailed(
            f"Pimsner-Popa reconstruction residual {worst:.2e}")
    return etas


def pp_inequality_check(tower: JonesTower, x: AlgebraElement) -> float:
    """Smallest eigenvalue of E_N(x) - x/index for positive x."""
    scale = max(x.norm("inf"), 1.0)
    if x.min_eig() < -1e-12 * scale or x.hermitian_defect() > 1e-10 * scale:
        raise NotPositive("input is not positive semidefinite")
    gap = tower.expect_onto_n(x) - tower.pp_constant * x
    return gap.min_eig()


def relative_commutant(tower: JonesTower, which: str):
    """Orthonormal bases of N' cap M, N' cap M1 or M' cap M2."""
    if which in ("N_M", "n_m"):
        return list(tower._n_prime_m)
    if which in ("N_M1", "plus"):
        return list(tower.plus_basis)
    if which in ("M_M2", "minus"):
        return list(tower.minus_frame)
    raise LevelMismatch(f"unknown relative commutant {which!r}")


def conditional_expectation(tower: JonesTower, x, target: str):
    """Trace-preserving conditional expectation onto a lower tower level.

    x is an AlgebraElement of M for targets 'N'/'N_as_N', or an operator
    matrix on L^2(M) (an element of M1) for target 'M', or an operator on
    L^2(M1) for target 'M1'.
    """
    if target in ("N", "n"):
        if not isinstance(x, AlgebraElement):
            x = tower.expect_onto_m(x)
        return tower.expect_onto_n(x)
    if target == "N_as_N":
        if not isinstance(x, AlgebraElement):
            x = tower.expect_onto_m(x)
        return tower.expect_onto_n_as_n(x)
    if target in ("M", "m"):
        if isinstance(x, AlgebraElement):
            raise LevelMismatch("element already lives in M")
        return tower.expect_onto_m(x)
    if target in ("M1", "m1"):
        return tower.expect_onto_m1(x)
    raise LevelMismatch(f"unknown target level {target!r}")
