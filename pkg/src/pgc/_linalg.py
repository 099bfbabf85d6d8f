"""Dense numerical kernels shared by every module.

All operators are plain complex ndarrays. Conventions used throughout:

  * vec is row-major (numpy reshape order), so vec(A X) = (A otimes I) vec(X)
    and vec(X B) = (I otimes B^T) vec(X).
  * Subspaces of C^n are handled as matrices whose columns are an orthonormal
    basis; the distance between two subspaces is the operator norm of the
    difference of their orthogonal projectors.
  * Riesz projections of non-normal matrices come from a complex Schur form
    with the selected eigenvalue cluster rotated to the leading block and the
    off-diagonal coupling removed by a Sylvester solve.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, GroupFitFailed


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def herm(a: np.ndarray) -> np.ndarray:
    """Hermitian part."""
    return 0.5 * (a + dagger(a))


def frob(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def opnorm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2)) if a.size else 0.0


def onb_columns(vs: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of the column span, rank-truncated by SVD."""
    if vs.size == 0:
        return vs.reshape(vs.shape[0], 0)
    u, s, _ = np.linalg.svd(vs, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return vs[:, :0]
    return u[:, s > rtol * s[0]]


def nullspace(a: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of ker(a), threshold relative to the top
    singular value."""
    if a.shape[0] == 0:
        return np.eye(a.shape[1], dtype=complex)
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    tol = rtol * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol))
    return dagger(vh)[:, rank:]


def nullspace_abs(a: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    """Nullspace with an absolute singular-value cutoff.

    For constraint matrices already normalized to O(1) nonzero rows; unlike
    the relative threshold this does not mistake an all-noise matrix for a
    rank-one one.
    """
    if a.shape[0] == 0:
        return np.eye(a.shape[1], dtype=complex)
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > atol))
    return dagger(vh)[:, rank:]


def subspace_projector(vs: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    q = onb_columns(vs, rtol)
    return q @ dagger(q)


def subspace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Operator-norm distance between the spans of the columns of a and b."""
    return opnorm(subspace_projector(a) - subspace_projector(b))


def hausdorff_distance(xs, ys) -> float:
    """Hausdorff distance between two finite sets of complex numbers."""
    xs = np.asarray(list(xs), dtype=complex)
    ys = np.asarray(list(ys), dtype=complex)
    if xs.size == 0 and ys.size == 0:
        return 0.0
    if xs.size == 0 or ys.size == 0:
        return np.inf
    d = np.abs(xs[:, None] - ys[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# ---------------------------------------------------------------------------
# positivity helpers
# ---------------------------------------------------------------------------

def min_eig_herm(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(herm(a))[0])


def psd_sqrt(a: np.ndarray, clip: float = 0.0) -> np.ndarray:
    w, v = np.linalg.eigh(herm(a))
    w = np.sqrt(np.clip(w, clip, None))
    return (v * w) @ dagger(v)


def clip_psd(a: np.ndarray) -> np.ndarray:
    """Nearest (in Frobenius norm) positive semidefinite matrix to herm(a)."""
    w, v = np.linalg.eigh(herm(a))
    return (v * np.clip(w, 0.0, None)) @ dagger(v)


def polar(a: np.ndarray, rtol: float = 1e-12):
    """Polar decomposition a = v @ p with v a partial isometry, p = |a| psd.

    v has the same rank as a (singular directions below rtol*smax dropped),
    so v @ v.conj().T is the range projection of a.
    """
    u, s, vh = np.linalg.svd(a)
    smax = s[0] if s.size else 0.0
    keep = s > rtol * smax if smax > 0 else s > 0
    v = u[:, keep] @ vh[keep, :]
    p = dagger(vh) @ np.diag(s).astype(complex) @ vh
    return v, herm(p)


def range_projection_matrix(a: np.ndarray, tol_rank: float = 1e-10) -> np.ndarray:
    """Orthogonal projection onto the column range of a.

    Rank threshold is relative to the largest singular value; the result is
    polished to an exact hermitian idempotent by rounding its spectrum.
    """
    u, s, _ = np.linalg.svd(a)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros_like(a)
    q = u[:, s > tol_rank * s[0]]
    p = q @ dagger(q)
    # re-symmetrize and round through the spectral decomposition
    w, v = np.linalg.eigh(herm(p))
    return (v * np.round(w.clip(0.0, 1.0))) @ dagger(v)


def join_projections(ps, tol_rank: float = 1e-10) -> np.ndarray:
    """Range projection of the sum: the lattice join of projections."""
    return range_projection_matrix(sum(ps), tol_rank)


# ---------------------------------------------------------------------------
# commutants
# ---------------------------------------------------------------------------

def _hermitian_generators(gens):
    out = []
    for g in gens:
        out.append(herm(g))
        out.append(0.5j * (dagger(g) - g))
    return out


def _cluster_starts(values: np.ndarray, gap: float):
    order = np.argsort(values)
    starts = [0]
    for k in range(1, len(values)):
        if values[order[k]] - values[order[k - 1]] > gap:
            starts.append(k)
    return order, starts + [len(values)]

def _real_onb(vs: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis, over the reals, of the real span of complex columns."""
    re = np.concatenate([vs.real, vs.imag], axis=0)
    u, s, _ = np.linalg.svd(re, full_matrices=False)
    keep = s > rtol * s[0] if s.size and s[0] > 0 else slice(0, 0)
    q = u[:, keep]
    n = vs.shape[0]
    return q[:n] + 1j * q[n:]


def commutant_basis(gens, dim: int, rtol: float = 1e-10):
    """Hermitian HS-orthonormal basis of {X : [X, g] = 0 for all g}.

    A generic hermitian combination of the generators is diagonalized and X
    is restricted to its eigenvalue blocks; a few further generic
    combinations cut the coefficient space through small SVD nullspaces
    (two generic elements generate the algebra, so this almost always
    terminates immediately); the exact commutation check against every
    generator gates the result, with a deterministic per-generator fallback.
    Same nullspace as the stacked commutator map, computed blockwise.  The
    output is hermitian matrices, which form a complex basis because the
    commutant is a *-closed subspace.
    """
    gens = [np.asarray(g, dtype=complex) for g in gens]
    for g in gens:
        if g.shape != (dim, dim):
            raise DimensionMismatch(f"generator shape {g.shape} != ({dim}, {dim})")
    hgens = [g / max(frob(g), 1e-300) for g in _hermitian_generators(gens)
             if frob(g) > 1e-14]

    def worst_residual(vecs):
        stack = vecs.T.reshape(-1, dim, dim)
        norms = np.maximum(np.linalg.norm(stack, axis=(1, 2)), 1e-300)
        worst = 0.0
        for g in hgens:
            diff = np.matmul(g[None, :, :], stack) - np.matmul(stack, g[None, :, :])
            worst = max(worst, float(
                (np.linalg.norm(diff, axis=(1, 2)) / norms).max()))
        return worst

    def cut(vecs, g):
        kmat = np.kron(g, np.eye(dim)) - np.kron(np.eye(dim), g.T)
        return vecs @ nullspace_abs(kmat @ vecs, atol=1e-10)

    if not hgens:
        basis_vecs = np.eye(dim * dim, dtype=complex)
    else:
        rng = np.random.default_rng(0x9E3779B9)
        mix = sum(rng.standard_normal() * g for g in hgens)
        w, u = np.linalg.eigh(mix)
        gap = 1e-8 * max(1.0, float(np.abs(w).max()))
        order, starts = _cluster_starts(w, gap)
        cols = []
        for k in range(len(starts) - 1):
            idx = order[starts[k]:starts[k + 1]]
            blk = u[:, idx]
            for aa in range(len(idx)):
                for bb in range(len(idx)):
                    cols.append(np.outer(blk[:, aa], blk[:, bb].conj()).reshape(-1))
        basis_vecs = np.array(cols, dtype=complex).T  # dim^2 x p
        for _ in range(4):
            if basis_vecs.shape[1] == 0 or worst_residual(basis_vecs) <= 1e-9:
                break
            basis_vecs = cut(basis_vecs,
                             sum(rng.standard_normal() * g for g in hgens))
        if basis_vecs.shape[1] and worst_residual(basis_vecs) > 1e-9:
            for g in hgens:
                basis_vecs = cut(basis_vecs, g)
                if basis_vecs.shape[1] == 0:
                    break
            if basis_vecs.shape[1] and worst_residual(basis_vecs) > 1e-9:
                raise DimensionMismatch("commutant verification failed")

    # hermitian real-orthonormal basis of the *-closed space
    p = basis_vecs.shape[1]
    if p == 0:
        return []
    mats = [basis_vecs[:, k].reshape(dim, dim) for k in range(p)]
    cand = []
    for m in mats:
        cand.append(herm(m).reshape(-1))
        cand.append(herm(1j * m).reshape(-1))
    hb = _real_onb(np.array(cand).T)
    out = [hb[:, k].reshape(dim, dim) for k in range(hb.shape[1])]
    if len(out) != p:
        raise DimensionMismatch(
            f"hermitian basis size {len(out)} != commutant dimension {p}")
    return out


def commutant_basis_stacked(gens, dim: int, rtol: float = 1e-10):
    """Reference commutant via one stacked-SVD nullspace. O(dim^6); tests only."""
    gens = [np.asarray(g, dtype=complex) for g in gens]
    rows = []
    eye = np.eye(dim)
    for g in gens:
        scale = max(frob(g), 1e-300)
        rows.append((np.kron(g, eye) - np.kron(eye, g.T)) / scale)
    if not rows:
        stacked = np.zeros((0, dim * dim))
    else:
        stacked = np.concatenate(rows, axis=0)
    ns = nullspace(stacked, rtol)
    return [ns[:, k].reshape(dim, dim) for k in range(ns.shape[1])]


# ---------------------------------------------------------------------------
# spectral projections
# ---------------------------------------------------------------------------

def riesz_projection(a: np.ndarray, select, cluster_tol: float = 1e-7) -> np.ndarray:
    """Spectral (Riesz) projection of a onto the eigenvalues where select(z) holds.

    select receives a complex eigenvalue and must be constant on numerical
    clusters of radius cluster_tol; the projection is exact at finite
    dimension (Schur reordering plus a Sylvester solve), no contour
    integration involved.
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    t, q, sdim = sla.schur(a, output="complex", sort=lambda z: bool(select(z)))
    if sdim == 0:
        return np.zeros_like(a)
    if sdim == n:
        return np.eye(n, dtype=complex)
    a11 = t[:sdim, :sdim]
    a22 = t[sdim:, sdim:]
    b = t[:sdim, sdim:]
    # gap safety: selected and unselected clusters may not touch
    gap = np.abs(np.diag(a11)[:, None] - np.diag(a22)[None, :]).min()
    if gap < cluster_tol:
        raise ValueError(f"eigenvalue clusters not separated (gap {gap:.2e})")
    r = sla.solve_sylvester(a11, -a22, b)
    p = np.zeros((n, n), dtype=complex)
    p[:sdim, :sdim] = np.eye(sdim)
    p[:sdim, sdim:] = r
    return q @ p @ dagger(q)


def cesaro_mean(a: np.ndarray, n: int = 1000) -> np.ndarray:
    """(1/n) * sum_{k=1..n} a^k, by repeated multiplication."""
    acc = np.zeros_like(a)
    pk = np.eye(a.shape[0], dtype=complex)
    for _ in range(n):
        pk = pk @ a
        acc += pk
    return acc / n


def cesaro_mean_richardson(a: np.ndarray, n: int) -> np.ndarray:
    """Richardson-extrapolated truncated Cesaro mean, 2 C_{2n} - C_n.

    When n is a multiple of the peripheral group order the non-fixed
    peripheral phases cancel exactly and the extrapolation removes the O(1/n)
    interior term, leaving an O(rho^n / n) error for interior spectral radius
    rho; roundoff does not amplify.
    """
    dim = a.shape[0]
    acc = np.zeros_like(a)
    pk = np.eye(dim, dtype=complex)
    for _ in range(n):
        pk = pk @ a
        acc = acc + pk
    c_n = acc / n
    for _ in range(n):
        pk = pk @ a
        acc = acc + pk
    c_2n = acc / (2 * n)
    return 2.0 * c_2n - c_n


def peripheral_values(eigs: np.ndarray, radius: float, tol_phase: float = 1e-8,
                      cluster_tol: float = 1e-7):
    """Cluster representatives of the eigenvalues with |z| within tol of radius."""
    per = [z for z in eigs if abs(abs(z) - radius) <= tol_phase * max(radius, 1.0)]
    reps: list[complex] = []
    for z in sorted(per, key=lambda w: (np.angle(w), abs(w))):
        if all(abs(z - r) > cluster_tol for r in reps):
            reps.append(complex(z))
    return reps


def fit_cyclic_group(values, max_order: int, tol: float = 1e-7) -> int:
    """Smallest m <= max_order with every value an m-th root of unity and the
    value set equal to the full group of m-th roots."""
    vals = [complex(v) for v in values]
    if not vals:
        raise GroupFitFailed("no peripheral eigenvalues")
    for m in range(1, max_order + 1):
        roots = np.exp(2j * np.pi * np.arange(m) / m)
        if all(min(abs(v - r) for r in roots) <= tol for v in vals):
            if len(vals) != m:
                raise GroupFitFailed(
                    f"peripheral set has {len(vals)} points but fits order {m}: "
                    "not closed under multiplication")
            if all(min(abs(v - r) for v in vals) <= tol for r in roots):
                return m
            raise GroupFitFailed(f"peripheral set is a strict subset of the {m}-th roots")
    raise GroupFitFailed(f"no cyclic group of order <= {max_order} fits")
