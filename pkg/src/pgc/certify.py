"""The analysis pipeline: instance -> tower -> channel -> certificate.

Certificates are deterministic given the instance file and seed: no
timestamps, canonical key order, shortest round-trip float formatting, and
every random draw flows from the instance seed through named PCG64 streams.
Skipped checks always carry a machine-readable reason; failing residuals are
recorded, never silently clamped.
"""

from __future__ import annotations

import hashlib

import numpy as np

from . import __version__
from . import _linalg as la
from . import qfa
from .algebra import make_algebra
from .channel import (
    BimoduleChannel,
    channel_from_action,
    channel_from_kraus,
    expectation_channel,
    random_cp_channel,
)
from .errors import GroupFitFailed, NotFPositive, NotNormalized, SchemaError
from .instances import (
    InstanceSpec,
    canonical_json,
    decode_matrix,
    encode_complex,
    encode_matrix,
    instance_to_json,
)
from .spectral import certify_phase_group, channel_spectrum
from .tower import DEFAULT_MAX_GNS1_DIM, Embedding, UnitalInclusion, basic_construction

__all__ = ["Certificate", "build_tower", "build_channel", "run_analyze",
           "run_qfa_check"]


class Certificate:
    """Certification output with byte-stable canonical serialization."""

    def __init__(self, payload: dict):
        self.payload = payload

    def to_json(self) -> str:
        return canonical_json(self.payload)

    def to_text(self) -> str:
        p = self.payload
        lines = [f"pgc certificate (tool {p['tool_version']}, schema "
                 f"{p['schema_version']})",
                 f"instance digest: {p['instance_digest']}",
                 f"index: {p.get('index')!r}   markov: {p['flags']['markov']}"]
        fl = p["flags"]
        lines.append(f"flags: cp={fl['cp']} unital={fl['unital']} "
                     f"trace_preserving={fl['trace_preserving']} "
                     f"bimodular={fl['bimodular']}")
        if "phase_group" in p:
            pg = p["phase_group"]
            lines.append(f"phase group: order {pg['order']}")
        if "relative_irreducibility" in p:
            ri = p["relative_irreducibility"]
            lines.append(f"relative irreducible: {ri['flag']} ({ri['mode']})")
        if "fixed_algebra" in p:
            fx = p["fixed_algebra"]
            lines.append(f"fixed algebra: dim {fx['dimension']} "
                         f"factor={fx['is_factor']} equals_N={fx['equals_N']}")
        lines.append("verdicts:")
        for k in sorted(p.get("verdicts", {})):
            v = p["verdicts"][k]
            reason = p.get("skipped", {}).get(k)
            lines.append(f"  {k}: {v}" + (f" ({reason})" if reason else ""))
        lines.append("residuals:")
        for k in sorted(p.get("residuals", {})):
            lines.append(f"  {k}: {p['residuals'][k]:.3e}")
        return "\n".join(lines)

    @property
    def all_passed(self) -> bool:
        return all(v in ("pass", "skipped")
                   for v in self.payload.get("verdicts", {}).values())


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def build_inclusion(spec: InstanceSpec) -> UnitalInclusion:
    algebra_n = make_algebra(spec.algebra_n)
    algebra_m = make_algebra(spec.algebra_m)
    if isinstance(spec.embedding, str):
        emb = Embedding.named(spec.embedding, algebra_n, algebra_m)
    else:
        unitaries = spec.embedding.get("unitaries")
        if unitaries is not None:
            unitaries = [decode_matrix(u, "embedding.unitaries") for u in unitaries]
        emb = Embedding(algebra_n, algebra_m, spec.embedding["multiplicities"],
                        unitaries)
    weights = None if spec.trace == "markov" else spec.trace["weights_M"]
    return UnitalInclusion(emb, weights_m=weights)


def build_tower(spec: InstanceSpec, max_dim: int = DEFAULT_MAX_GNS1_DIM,
                force: bool = False):
    return basic_construction(build_inclusion(spec), max_dim=max_dim, force=force)


def build_channel(spec: InstanceSpec, tower) -> BimoduleChannel:
    chan = spec.channel
    if chan["type"] == "kraus":
        level = chan.get("level", "M")
        ops = []
        for op in chan["operators"]:
            if level == "M":
                ops.append([decode_matrix(blk, "channel.operators")
                            for blk in op])
            else:
                ops.append(decode_matrix(op, "channel.operators"))
        return channel_from_kraus(tower, ops, level=level)
    if chan["type"] == "y_element":
        mat = decode_matrix(chan["matrix"], "channel.matrix")
        return channel_from_action(tower, mat)
    if chan["type"] == "generator":
        return _generator_channel(chan["name"], chan.get("params", {}),
                                  tower, spec.seed)
    raise SchemaError([("channel.type", f"unknown type {chan['type']!r}")])


def _generator_channel(name, params, tower, seed) -> BimoduleChannel:
    if name == "expectation_mix":
        t = float(params.get("t", 0.5))
        action = (1.0 - t) * np.eye(tower.d) + t * tower.e1
        return channel_from_action(tower, action)
    if name == "scalars_in_full":
        return expectation_channel(tower)
    if name == "random_cpb":
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(seed, spawn_key=(1,))))
        return random_cp_channel(tower, rng)
    raise SchemaError([("channel.name", f"generator {name!r} has no channel rule")])


# ---------------------------------------------------------------------------
# the pipeline
# ---------------------------------------------------------------------------

def run_analyze(spec: InstanceSpec, seed: int | None = None,
                max_dim: int = DEFAULT_MAX_GNS1_DIM, force: bool = False,
                representation_samples: int | None = 6) -> Certificate:
    """Full certification of one instance.

    Pipeline order: tower, channel, spectral program, transform
    cross-checks.  Instance rejections raise; theorem failures are recorded
    as failing verdicts in the returned certificate.
    """
    seed = spec.seed if seed is None else seed
    digest = hashlib.sha256(instance_to_json(spec).encode()).hexdigest()

    incl = build_inclusion(spec)
    if not incl.markov:
        return _analyze_non_markov(spec, incl, digest, seed)

    tower = basic_construction(incl, max_dim=max_dim, force=force)
    channel = build_channel(spec, tower)
    report = channel_spectrum(channel, tol_phase=spec.tolerances["phase"])

    payload = {
        "schema_version": spec.schema_version,
        "tool_version": __version__,
        "instance_digest": digest,
        "seed": seed,
        "tolerances": spec.tolerances,
        "index": tower.index,
        "pp_constant": tower.pp_constant,
        "flags": {
            "cp": channel.is_cp,
            "unital": channel.is_unital,
            "trace_preserving": channel.is_trace_preserving,
            "bimodular": channel.bimodularity_residual < 1e-8,
            "markov": True,
        },
        "spectrum": {
            "action": [encode_complex(z) for z in report.action_eigenvalues],
            "element": [encode_complex(z) for z in report.element_eigenvalues],
            "radius": report.radius,
            "peripheral": [encode_complex(z) for z in report.peripheral],
        },
        "residuals": {
            "bimodularity": channel.bimodularity_residual,
            "two_box_relation": channel.two_box_residual,
            "multiplier_relation": channel.multiplier_residual,
            "spectrum_route_gap": report.route_gap,
            "markov_gate": tower.markov_residual,
            "cp_margin": channel.cp_margin,
        },
        "verdicts": {},
        "skipped": {},
    }

    reps = channel.verify_representations(samples=representation_samples,
                                          rng=np.random.default_rng(seed))
    payload["residuals"].update({f"representation_{k}": v for k, v in reps.items()})
    payload["verdicts"]["representation_coherence"] = (
        "pass" if max(reps["induced_map"], reps["sandwich"]) < 1e-9 else "fail")
    payload["verdicts"]["multiplier_vs_fourier"] = (
        "pass" if reps["multiplier_vs_fourier"] < 1e-8 *
        max(la.opnorm(channel.multiplier.matrix), 1.0) else "fail")

    # unitality bridge through the transform trace
    bridge = abs(tower.tr2_minus(qfa.fourier(channel.two_box).matrix).real
                 - tower.delta)
    payload["residuals"]["unitality_bridge"] = float(bridge)
    if channel.is_unital:
        payload["verdicts"]["unitality_bridge"] = (
            "pass" if bridge < 1e-8 * max(tower.delta, 1.0) else "fail")
    else:
        payload["verdicts"]["unitality_bridge"] = (
            "pass" if bridge > 1e-8 * max(tower.delta, 1.0) else "fail")

    if channel.is_cp and channel.is_unital:
        cert = certify_phase_group(channel, seed=seed,
                                   tol_phase=spec.tolerances["phase"])
        payload["phase_group"] = {
            "order": cert.order,
            "generator_phase": encode_complex(cert.generator_phase),
            "eigenvalues": [encode_complex(z) for z in cert.eigenvalues],
            "eigenspace_dims": cert.eigenspace_dims,
        }
        payload["relative_irreducibility"] = {
            "flag": cert.relative_irreducible,
            "mode": cert.irreducibility_mode,
        }
        payload["fixed_algebra"] = {
            "dimension": cert.fixed_dimension,
            "is_factor": cert.fixed_is_factor,
            "equals_N": cert.fixed_equals_n,
        }
        payload["unitaries"] = {
            key: [encode_matrix(blk) for blk in u.data]
            for key, u in sorted(cert.unitaries.items())}
        payload["residuals"].update(cert.residuals)
        payload["verdicts"].update(cert.verdicts)
        payload["skipped"].update(cert.skipped)
        engine = _qfa_engine_section(tower, channel)
        payload["qfa_engine"] = engine["section"]
        if engine["verdict"] is not None:
            payload["verdicts"]["qfa_peripheral_engine"] = engine["verdict"]
        if engine["reason"] is not None:
            payload["skipped"]["qfa_peripheral_engine"] = engine["reason"]
        if engine["residuals"]:
            payload["residuals"].update(
                {f"qfa_{k}": v for k, v in engine["residuals"].items()})
    else:
        reason = ("channel is not completely positive" if not channel.is_cp
                  else "channel is not unital")
        for clause in ("phase_group", "relative_irreducibility", "fixed_algebra"):
            payload["skipped"][clause] = reason

    return Certificate(payload)


def _qfa_engine_section(tower, channel):
    """Peripheral engine on the implementing element when its hypotheses
    hold; skipped with the precise reason otherwise."""
    try:
        dec = qfa.peripheral_decomposition(channel.two_box)
    except (NotFPositive, NotNormalized, GroupFitFailed) as exc:
        return {"section": {"skipped": str(exc)}, "verdict": None,
                "reason": str(exc), "residuals": {}}
    section = {
        "order": dec.order,
        "eigenvalues": [encode_complex(z) for z in dec.eigenvalues],
        "checks": dec.checks,
    }
    return {"section": section,
            "verdict": "pass" if dec.passed else "fail",
            "reason": None, "residuals": dec.residuals}


def _analyze_non_markov(spec, incl, digest, seed):
    """Downgraded pipeline on a lambda-extension failure: GNS-level spectral
    analysis and Choi positivity only, no transform structure."""
    from .algebra import GnsRepresentation

    gns = GnsRepresentation(incl.M)
    chan = spec.channel
    if chan["type"] == "kraus" and chan.get("level", "M") == "M":
        ops = [[decode_matrix(blk, "channel.operators") for blk in op]
               for op in chan["operators"]]
        action = sum(gns.left(incl.M.element(k)) @ gns.right(incl.M.element(k).H)
                     for k in ops)
    elif chan["type"] == "y_element":
        action = decode_matrix(chan["matrix"], "channel.matrix")
    else:
        raise SchemaError([("channel",
                            "generator channels need a Markov trace")])
    # bimodularity over the embedded N
    worst = 0.0
    scale = max(la.frob(action), 1e-300)
    for b in incl.N.matrix_units():
        u = incl.embed(b)
        for act in (gns.left(u), gns.right(u)):
            worst = max(worst, la.frob(action @ act - act @ action)
                        / (scale * max(la.frob(act), 1e-300)))
    ev = np.linalg.eigvals(action)
    payload = {
        "schema_version": spec.schema_version,
        "tool_version": __version__,
        "instance_digest": digest,
        "seed": seed,
        "tolerances": spec.tolerances,
        "index": None,
        "pp_constant": None,
        "flags": {"cp": None, "unital": bool(
            la.frob(action @ gns.omega - gns.omega) < 1e-10 * scale),
            "trace_preserving": bool(
                la.frob(la.dagger(action) @ gns.omega - gns.omega) < 1e-10 * scale),
            "bimodular": worst < 1e-8, "markov": False},
        "spectrum": {
            "action": [encode_complex(z) for z in sorted(
                map(complex, ev), key=lambda z: (round(z.real, 12),
                                                 round(z.imag, 12)))],
            "radius": float(np.abs(ev).max()) if ev.size else 0.0,
        },
        "residuals": {"bimodularity": float(worst)},
        "verdicts": {},
        "skipped": {"phase_group": "trace is not a lambda-extension "
                                   "(spectral analysis only)"},
    }
    return Certificate(payload)


def run_qfa_check(spec: InstanceSpec, max_dim: int = DEFAULT_MAX_GNS1_DIM,
                  force: bool = False) -> dict:
    """The peripheral engine alone, on the implementing element of the
    instance channel."""
    tower = build_tower(spec, max_dim=max_dim, force=force)
    channel = build_channel(spec, tower)
    dec = qfa.peripheral_decomposition(channel.two_box)
    return {
        "order": dec.order,
        "eigenvalues": [encode_complex(z) for z in dec.eigenvalues],
        "checks": dec.checks,
        "residuals": dec.residuals,
        "passed": dec.passed,
    }
