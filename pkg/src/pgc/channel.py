"""Bimodule maps on M in four synchronized representations.

A channel is stored as (i) its action matrix on the GNS coordinates of M,
(ii) the implementing element of N' cap M1 (whose operator matrix equals the
action matrix; membership in the relative commutant is exactly
bimodularity), (iii) its Fourier multiplier in M' cap M2 obtained from the
spanning-set least squares, and optionally (iv) a Kraus family.  The
conversion formulas between these are verified, not assumed: the induced-map
formula through E_M, the sandwich reconstruction through e1, e2 and the
multiplier, and the agreement of the multiplier with the calibrated Fourier
transform.

Complete positivity is decided twice, by the positivity of the multiplier
and by the Choi matrix of the action; a disagreement is a fatal internal
error rather than an instance property.
"""

from __future__ import annotations

import numpy as np

from . import _linalg as la
from . import qfa
from .algebra import AlgebraElement
from .errors import (
    DoesNotPreserveM,
    NotBimodular,
    NotCP,
    OracleDisagreement,
    SingularUnit,
    TowerMismatch,
)
from .qfa import TwoBoxElement
from .tower import JonesTower

__all__ = [
    "BimoduleChannel",
    "channel_from_action",
    "channel_from_kraus",
    "channel_from_y",
    "y_from_channel",
    "fourier_multiplier",
    "is_cp",
    "choi_matrix",
    "channel_compose",
    "channel_adjoint",
    "channel_convolve",
    "unitalize",
    "pp_dominance",
    "hermitian_part_channel",
    "identity_channel",
    "expectation_channel",
    "random_bimodule_channel",
    "random_cp_channel",
    "kraus_from_choi",
]

BIMODULARITY_TOL = 1e-8


class BimoduleChannel:
    """One bimodule map with all representations synchronized."""

    __slots__ = ("tower", "action", "two_box", "multiplier", "kraus",
                 "bimodularity_residual", "two_box_residual", "multiplier_residual",
                 "is_cp", "cp_margin", "is_unital", "is_trace_preserving")

    def __init__(self, tower: JonesTower, action: np.ndarray, kraus=None,
                 cp_by_construction: bool = False):
        action = np.asarray(action, dtype=complex)
        if action.shape != (tower.d, tower.d):
            raise NotBimodular(f"action matrix shape {action.shape} != GNS size")
        self.tower = tower
        self.action = action

        scale = max(la.frob(action), 1e-300)
        resid = tower.membership_residual_plus(action)
        self.bimodularity_residual = float(resid)
        if resid > BIMODULARITY_TOL:
            raise NotBimodular(
                f"bimodularity residual {resid:.2e} exceeds {BIMODULARITY_TOL}")

        projected = tower.project_plus(action)
        self.two_box_residual = float(la.frob(projected - action) / scale)
        self.two_box = TwoBoxElement(tower, "plus", projected, verify=False)

        hat, hat_resid = tower.multiplier_from_action(action)
        self.multiplier = TwoBoxElement(tower, "minus", hat, verify=False)
        self.multiplier_residual = float(hat_resid)

        self.kraus = kraus
        omega = tower.gns.omega
        self.is_unital = bool(la.frob(action @ omega - omega) <= 1e-10 * scale)
        self.is_trace_preserving = bool(
            la.frob(la.dagger(action) @ omega - omega) <= 1e-10 * scale)

        flag, margin = _decide_cp(self)
        if cp_by_construction and not flag:
            raise OracleDisagreement(
                "channel built from a Kraus family failed the positivity oracles")
        self.is_cp = flag
        self.cp_margin = margin

    # -- the map itself --------------------------------------------------------

    def apply(self, x: AlgebraElement) -> AlgebraElement:
        return self.tower.gns.unvec(self.action @ self.tower.gns.vec(x))

    def apply_matrix(self, x: np.ndarray) -> np.ndarray:
        return self.action @ x

    def unit_image(self) -> AlgebraElement:
        return self.apply(self.tower.M.unit())

    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvals(self.action)

    def is_hermitian_preserving(self, tol: float = 1e-9) -> bool:
        conj = self.tower.gns.conjugate_matrix(self.action)
        return la.frob(conj - self.action) <= tol * max(la.frob(self.action), 1.0)

    def verify_representations(self, samples=None, rng=None) -> dict:
        """Residuals of the three action formulas against the stored action.

        Checks the induced-map formula (index * E_M(y x e1)) and the sandwich
        formula (index^{3/2} * E_M(e2 e1 multiplier x e1 e2)) on a basis of M
        or on the supplied number of random sample elements.
        """
        tw = self.tower
        if samples is None:
            elems = tw.M.matrix_units()
        else:
            rng = rng or np.random.default_rng(0)
            elems = [tw.M.random_element(rng) for _ in range(samples)]
        y, hat = self.two_box.matrix, self.multiplier.matrix
        e1l2, e2 = tw.e1_level2, tw.e2
        worst_theta, worst_sandwich = 0.0, 0.0
        for b in elems:
            img = self.apply(b)
            theta = tw.index * tw.expect_onto_m(y @ tw.gns.left(b) @ tw.e1)
            worst_theta = max(worst_theta, (theta - img).norm(2))
            mid = e2 @ e1l2 @ hat @ tw.lift_left(tw.gns.left(b)) @ e1l2 @ e2
            sandwich = tw.index ** 1.5 * tw.expect_onto_m_level2(mid)
            worst_sandwich = max(worst_sandwich, (sandwich - img).norm(2))
        ftrans = qfa.fourier(self.two_box)
        fourier_gap = la.frob(self.multiplier.matrix - self.tower.index * ftrans.matrix)
        return {
            "induced_map": float(worst_theta),
            "sandwich": float(worst_sandwich),
            "multiplier_vs_fourier": float(fourier_gap),
            "two_box_relation": self.two_box_residual,
            "multiplier_relation": self.multiplier_residual,
        }

    def __repr__(self):
        return (f"BimoduleChannel(cp={self.is_cp}, unital={self.is_unital}, "
                f"trace_preserving={self.is_trace_preserving})")


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def channel_from_action(tower: JonesTower, action: np.ndarray,
                        kraus=None, cp_by_construction=False) -> BimoduleChannel:
    return BimoduleChannel(tower, action, kraus=kraus,
                           cp_by_construction=cp_by_construction)


def channel_from_kraus(tower: JonesTower, operators, level: str = "M") -> BimoduleChannel:
    """x -> sum K x K* from a Kraus family.

    level 'M': the K are elements of M (per-block data or AlgebraElements).
    level 'gns': the K are operators on L^2(M); the map must then still send
    M into M, which is checked and enforced (DoesNotPreserveM otherwise).
    """
    gns = tower.gns
    if level == "M":
        ops = [k if isinstance(k, AlgebraElement) else tower.M.element(k)
               for k in operators]
        action = sum(gns.left(k) @ gns.right(k.H) for k in ops)
        return BimoduleChannel(tower, action, kraus=ops, cp_by_construction=True)
    if level == "gns":
        ops = [np.asarray(k, dtype=complex) for k in operators]
        worst = 0.0

        def act(b):
            nonlocal worst
            y = sum(k @ gns.left(b) @ la.dagger(k) for k in ops)
            img = tower.expect_onto_m(y)
            worst = max(worst, la.frob(gns.left(img) - y))
            return img

        action = gns.action_matrix(act)
        if worst > 1e-8:
            raise DoesNotPreserveM(
                f"Kraus family does not map M into M (residual {worst:.2e})")
        return BimoduleChannel(tower, action, kraus=ops, cp_by_construction=True)
    raise DoesNotPreserveM(f"unknown Kraus level {level!r}")


def channel_from_y(tower: JonesTower, y, verify_tol: float = 1e-9) -> BimoduleChannel:
    """The bimodule map induced by an element of N' cap M1, through the
    conditional-expectation formula; its action matrix is certified to agree
    with the inducing element."""
    ymat = y.matrix if isinstance(y, TwoBoxElement) else np.asarray(y, dtype=complex)
    if isinstance(y, TwoBoxElement) and y.side != "plus":
        raise TowerMismatch("inducing element must be on the plus side")
    gns = tower.gns
    action = gns.action_matrix(
        lambda b: tower.index * tower.expect_onto_m(ymat @ gns.left(b) @ tower.e1))
    gap = la.frob(action - ymat) / max(la.frob(ymat), 1e-300)
    if gap > verify_tol:
        raise OracleDisagreement(
            f"induced-map action disagrees with the inducing element ({gap:.2e})")
    return BimoduleChannel(tower, action)


def identity_channel(tower: JonesTower) -> BimoduleChannel:
    return BimoduleChannel(tower, np.eye(tower.d, dtype=complex))


def expectation_channel(tower: JonesTower) -> BimoduleChannel:
    """The conditional expectation onto N as a channel (induced by e1)."""
    return channel_from_y(tower, TwoBoxElement(tower, "plus", tower.e1, verify=False))


def y_from_channel(channel: BimoduleChannel) -> TwoBoxElement:
    return channel.two_box


def fourier_multiplier(channel: BimoduleChannel) -> TwoBoxElement:
    return channel.multiplier


# ---------------------------------------------------------------------------
# complete positivity
# ---------------------------------------------------------------------------

def choi_matrix(channel: BimoduleChannel) -> np.ndarray:
    """Choi matrix of the action extended to the block-diagonal compression
    of the full matrix algebra over M; positivity is equivalent to complete
    positivity of the channel."""
    tw = channel.tower
    sizes = tw.M.sizes
    d_total = tw.M.total_size
    offs = np.cumsum([0] + list(sizes))
    choi = np.zeros((d_total * d_total, d_total * d_total), dtype=complex)
    for s in range(d_total):
        for t in range(d_total):
            blk = None
            for j, (o, n) in enumerate(zip(offs[:-1], sizes)):
                if o <= s < o + n and o <= t < o + n:
                    blk = (j, s - o, t - o)
                    break
            if blk is None:
                continue
            j, a, b = blk
            data = [np.zeros((n, n), dtype=complex) for n in sizes]
            data[j][a, b] = 1.0
            img = channel.apply(tw.M.element(data)).blockdiag()
            choi[s * d_total:(s + 1) * d_total, t * d_total:(t + 1) * d_total] += img
    return choi


def _decide_cp(channel: BimoduleChannel):
    hat = channel.multiplier.matrix
    hat_scale = max(la.opnorm(hat), 1e-300)
    herm_defect = la.frob(hat - la.dagger(hat)) / max(la.frob(hat), 1e-300)
    hat_margin = la.min_eig_herm(hat) / hat_scale
    hat_flag = herm_defect <= 1e-8 and hat_margin >= -1e-9

    choi = choi_matrix(channel)
    choi_scale = max(la.opnorm(choi), 1e-300)
    choi_defect = la.frob(choi - la.dagger(choi)) / max(la.frob(choi), 1e-300)
    choi_margin = la.min_eig_herm(choi) / choi_scale
    choi_flag = choi_defect <= 1e-8 and choi_margin >= -1e-9

    if hat_flag != choi_flag:
        raise OracleDisagreement(
            f"multiplier positivity ({hat_flag}, margin {hat_margin:.2e}) and "
            f"Choi positivity ({choi_flag}, margin {choi_margin:.2e}) disagree")
    return hat_flag, float(min(hat_margin, choi_margin))


def is_cp(channel: BimoduleChannel):
    """(flag, margin): positivity of the multiplier, cross-validated against
    the Choi oracle at construction."""
    return channel.is_cp, channel.cp_margin


def kraus_from_choi(channel: BimoduleChannel, tol: float = 1e-10):
    """Kraus factors from the spectral decomposition of the Choi matrix.

    Literal only when the symmetry algebra is trivial (N = C), where the
    multiplier data reduces to the Choi matrix; refused otherwise.
    """
    tw = channel.tower
    if tw.N.sizes != (1,):
        raise NotCP("Kraus extraction is only canonical over a trivial N")
    if not channel.is_cp:
        raise NotCP("channel is not completely positive")
    choi = choi_matrix(channel)
    w, v = np.linalg.eigh(la.herm(choi))
    d_total = tw.M.total_size
    ops = []
    for k in range(len(w)):
        if w[k] > tol * max(w[-1], 1e-300):
            mat = np.sqrt(w[k]) * v[:, k].reshape(d_total, d_total)
            ops.append(tw.M.element(_split_blocks(mat, tw.M.sizes)))
    return ops


def _split_blocks(mat, sizes):
    out, at = [], 0
    for n in sizes:
        out.append(mat[at:at + n, at:at + n])
        at += n
    return out


# ---------------------------------------------------------------------------
# calculus
# ---------------------------------------------------------------------------

def _same_tower(a: BimoduleChannel, b: BimoduleChannel):
    if a.tower is not b.tower:
        raise TowerMismatch("channels live over different towers")


def channel_compose(a: BimoduleChannel, b: BimoduleChannel) -> BimoduleChannel:
    """a after b; the inducing elements multiply."""
    _same_tower(a, b)
    return BimoduleChannel(a.tower, a.action @ b.action)


def channel_adjoint(a: BimoduleChannel) -> BimoduleChannel:
    """The trace adjoint; induced by the adjoint element."""
    return BimoduleChannel(a.tower, la.dagger(a.action))


def channel_convolve(a: BimoduleChannel, b: BimoduleChannel) -> BimoduleChannel:
    """The convolution channel, induced by the convolution of the elements."""
    _same_tower(a, b)
    conv = qfa.convolve(a.two_box, b.two_box)
    return BimoduleChannel(a.tower, conv.matrix)


def channel_add(a: BimoduleChannel, b: BimoduleChannel) -> BimoduleChannel:
    _same_tower(a, b)
    return BimoduleChannel(a.tower, a.action + b.action)


def channel_scale(c, a: BimoduleChannel) -> BimoduleChannel:
    return BimoduleChannel(a.tower, c * a.action)


def unitalize(a: BimoduleChannel, tol: float = 1e-8) -> BimoduleChannel:
    """Conjugate by the inverse square root of the unit image.

    The unit image lies in N' cap M (bimodularity), so the result is again
    bimodular, and it is unital and completely positive whenever the input
    was completely positive."""
    tw = a.tower
    img = a.unit_image()
    if img.min_eig() <= tol:
        raise SingularUnit(
            f"unit image has smallest eigenvalue {img.min_eig():.2e}")
    inv_sqrt = []
    for blk in img.data:
        w, v = np.linalg.eigh(la.herm(blk))
        inv_sqrt.append((v / np.sqrt(w)) @ la.dagger(v))
    s = tw.M.element(inv_sqrt)
    action = tw.gns.left(s) @ tw.gns.right(s) @ a.action
    return BimoduleChannel(tw, action, kraus=None)


def hermitian_part_channel(a: BimoduleChannel) -> BimoduleChannel:
    """The hermiticity-preserving part (average with the conjugated map)."""
    conj = a.tower.gns.conjugate_matrix(a.action)
    return BimoduleChannel(a.tower, 0.5 * (a.action + conj))


# ---------------------------------------------------------------------------
# the dominance bound
# ---------------------------------------------------------------------------

def pp_dominance(a: BimoduleChannel):
    """The dominance constant of a completely positive bimodule map.

    c is the operator norm of the block matrix of channel values on the
    products of Pimsner-Popa elements; the multiplier is then dominated by
    c times the multiplier of E_N, and its norm by sqrt(index) * c.
    Returns (c, residuals)."""
    if not a.is_cp:
        raise NotCP("dominance bound needs a completely positive channel")
    tw = a.tower
    etas = tw.pimsner_popa_basis
    m = len(etas)
    d_total = tw.M.total_size
    # block (j, k) holds the channel value on eta_j eta_k*, the arrangement
    # under which the matrix is CP-positive and the identity channel attains
    # the index (the block matrix is then the channel applied to a Gram dyad)
    big = np.zeros((m * d_total, m * d_total), dtype=complex)
    for j in range(m):
        for k in range(m):
            img = a.apply(etas[j] @ etas[k].H).blockdiag()
            big[j * d_total:(j + 1) * d_total, k * d_total:(k + 1) * d_total] = img
    c = la.opnorm(big)

    hat = a.multiplier.matrix
    dom = c * np.sqrt(tw.index) * np.eye(tw.dim_gns1) - hat
    dom_margin = la.min_eig_herm(dom) / max(c * np.sqrt(tw.index), 1e-300)
    norm_gap = la.opnorm(hat) - np.sqrt(tw.index) * c
    residuals = {
        "transform_dominance_margin": float(dom_margin),
        "norm_bound_gap": float(norm_gap),
    }
    return float(c), residuals


# ---------------------------------------------------------------------------
# random channels
# ---------------------------------------------------------------------------

def random_bimodule_channel(tower: JonesTower, rng) -> BimoduleChannel:
    """A random bounded bimodule map (not necessarily positive)."""
    return BimoduleChannel(tower, qfa.random_plus_element(tower, rng).matrix)


def random_cp_channel(tower: JonesTower, rng, unital: bool = True) -> BimoduleChannel:
    """A random completely positive bimodule map from a transform-positive
    element, optionally normalized to a unital channel."""
    y = qfa.random_f_positive(tower, rng)
    ch = BimoduleChannel(tower, y.matrix)
    if unital:
        ch = unitalize(ch)
    return ch
