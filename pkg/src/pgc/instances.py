"""Instance files and generator families.

An instance is a JSON document describing the two algebras, the embedding,
the trace mode, the channel and the tolerances.  Complex numbers are [re, im]
pairs and matrices are row-major nested arrays, so instances are portable and
diff-friendly.  Generated instances carry their analytic ground truth in an
`expected` block, which the self-test compares against certification output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BadParams, SchemaError, UnknownGenerator

__all__ = [
    "InstanceSpec",
    "DEFAULT_TOLERANCES",
    "parse_instance",
    "instance_to_json",
    "generate",
    "GENERATOR_FAMILIES",
]

SCHEMA_VERSION = 1

DEFAULT_TOLERANCES = {
    "rank": 1e-10,
    "phase": 1e-8,
    "cp": 1e-9,
    "residual": 1e-8,
}


@dataclass
class InstanceSpec:
    algebra_n: list                     # [(label, size), ...]
    algebra_m: list
    embedding: object                   # name or {"multiplicities": ..., "unitaries": ...}
    trace: object                       # "markov" or {"weights_M": [...]}
    channel: dict
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = 0
    expected: dict | None = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        out = {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "algebra_N": {"blocks": [[l, n] for l, n in self.algebra_n]},
            "algebra_M": {"blocks": [[l, n] for l, n in self.algebra_m]},
            "embedding": self.embedding,
            "trace": self.trace,
            "channel": self.channel,
            "tolerances": self.tolerances,
        }
        if self.expected is not None:
            out["expected"] = self.expected
        return out


# ---------------------------------------------------------------------------
# (de)serialization of numbers and matrices
# ---------------------------------------------------------------------------

def encode_complex(z: complex):
    return [float(np.real(z)), float(np.imag(z))]


def encode_matrix(m) -> list:
    m = np.asarray(m)
    return [[encode_complex(z) for z in row] for row in m]


def decode_complex(v, path: str) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if (isinstance(v, (list, tuple)) and len(v) == 2
            and all(isinstance(x, (int, float)) for x in v)):
        return complex(v[0], v[1])
    raise SchemaError([(path, f"not a complex number: {v!r}")])


def decode_matrix(v, path: str) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise SchemaError([(path, "matrix must be a nested list")])
    ncols = len(v[0])
    if any(len(r) != ncols for r in v):
        raise SchemaError([(path, "ragged matrix rows")])
    return np.array([[decode_complex(z, f"{path}[{i}][{j}]")
                      for j, z in enumerate(row)] for i, row in enumerate(v)])


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _blocks(node, path: str):
    if not isinstance(node, dict) or "blocks" not in node:
        raise SchemaError([(path, "expected an object with a 'blocks' field")])
    blocks = node["blocks"]
    if not isinstance(blocks, list) or not blocks:
        raise SchemaError([(f"{path}.blocks", "expected a nonempty list")])
    out = []
    for k, b in enumerate(blocks):
        if (not isinstance(b, (list, tuple)) or len(b) != 2
                or not isinstance(b[0], str) or not isinstance(b[1], int)
                or b[1] < 1):
            raise SchemaError([(f"{path}.blocks[{k}]",
                                "expected [label, positive size]")])
        out.append((b[0], b[1]))
    return out


def parse_instance(source) -> InstanceSpec:
    """Parse and validate an instance from JSON text, a dict, or a path."""
    if isinstance(source, dict):
        doc = source
    else:
        text = source
        if isinstance(source, str) and "\n" not in source and source.endswith(".json"):
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError([("", f"invalid JSON: {exc}")]) from exc

    issues = []
    if not isinstance(doc, dict):
        raise SchemaError([("", "instance must be a JSON object")])
    for key in ("algebra_N", "algebra_M", "embedding", "trace", "channel"):
        if key not in doc:
            issues.append((key, "missing required field"))
    if issues:
        raise SchemaError(issues)

    algebra_n = _blocks(doc["algebra_N"], "algebra_N")
    algebra_m = _blocks(doc["algebra_M"], "algebra_M")

    emb = doc["embedding"]
    if isinstance(emb, str):
        if emb not in ("equal", "scalars_in_full", "diagonal_in_full"):
            raise SchemaError([("embedding", f"unknown named embedding {emb!r}")])
    elif isinstance(emb, dict):
        if "multiplicities" not in emb:
            raise SchemaError([("embedding", "explicit embedding needs multiplicities")])
        mult = emb["multiplicities"]
        if (not isinstance(mult, list)
                or any(not isinstance(r, list) for r in mult)
                or any(not isinstance(x, int) or x < 0 for r in mult for x in r)):
            raise SchemaError([("embedding.multiplicities",
                                "expected a nonnegative integer matrix")])
        if "unitaries" in emb and emb["unitaries"] is not None:
            for j, u in enumerate(emb["unitaries"]):
                decode_matrix(u, f"embedding.unitaries[{j}]")
    else:
        raise SchemaError([("embedding", "expected a name or an object")])

    trace = doc["trace"]
    if trace != "markov":
        if not isinstance(trace, dict) or "weights_M" not in trace:
            raise SchemaError([("trace", "expected 'markov' or {'weights_M': [...]}")])
        if (not isinstance(trace["weights_M"], list)
                or any(not isinstance(x, (int, float)) or x <= 0
                       for x in trace["weights_M"])):
            raise SchemaError([("trace.weights_M", "expected positive reals")])

    chan = doc["channel"]
    if not isinstance(chan, dict) or "type" not in chan:
        raise SchemaError([("channel", "expected an object with a 'type'")])
    ctype = chan["type"]
    if ctype == "kraus":
        if "operators" not in chan or not isinstance(chan["operators"], list) \
                or not chan["operators"]:
            raise SchemaError([("channel.operators", "expected a nonempty list")])
        level = chan.get("level", "M")
        if level not in ("M", "gns"):
            raise SchemaError([("channel.level", f"unknown level {level!r}")])
        for k, op in enumerate(chan["operators"]):
            if level == "M":
                if not isinstance(op, list):
                    raise SchemaError([(f"channel.operators[{k}]",
                                        "expected one matrix per block")])
                for j, blk in enumerate(op):
                    decode_matrix(blk, f"channel.operators[{k}][{j}]")
            else:
                decode_matrix(op, f"channel.operators[{k}]")
    elif ctype == "y_element":
        if "matrix" not in chan:
            raise SchemaError([("channel.matrix", "missing inducing element")])
        decode_matrix(chan["matrix"], "channel.matrix")
    elif ctype == "generator":
        if "name" not in chan:
            raise SchemaError([("channel.name", "missing generator name")])
        if chan["name"] not in GENERATOR_FAMILIES:
            raise UnknownGenerator(f"unknown generator family {chan['name']!r}")
    else:
        raise SchemaError([("channel.type", f"unknown channel type {ctype!r}")])

    tol = dict(DEFAULT_TOLERANCES)
    if "tolerances" in doc:
        if not isinstance(doc["tolerances"], dict):
            raise SchemaError([("tolerances", "expected an object")])
        for k, v in doc["tolerances"].items():
            if k not in DEFAULT_TOLERANCES:
                raise SchemaError([(f"tolerances.{k}", "unknown tolerance")])
            if not isinstance(v, (int, float)) or v <= 0:
                raise SchemaError([(f"tolerances.{k}", "expected a positive real")])
            tol[k] = float(v)

    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise SchemaError([("seed", "expected an integer")])

    return InstanceSpec(
        algebra_n=algebra_n, algebra_m=algebra_m, embedding=emb, trace=trace,
        channel=chan, tolerances=tol, seed=seed,
        expected=doc.get("expected"),
        schema_version=doc.get("schema_version", SCHEMA_VERSION))


def instance_to_json(spec: InstanceSpec) -> str:
    return canonical_json(spec.to_dict())


def canonical_json(doc) -> str:
    """Canonical serialization: sorted keys, no whitespace variance, floats
    in the shortest round-trip form."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


# ---------------------------------------------------------------------------
# generator families
# ---------------------------------------------------------------------------

def _diag_blocks(n):
    return [[f"d{i}", 1] for i in range(n)]


def _ad_unitary(params, seed):
    n = int(params.get("n", 3))
    if n < 2:
        raise BadParams("ad_unitary needs n >= 2 for a nontrivial phase group")
    phases = [np.exp(2j * np.pi * k / n) for k in range(n)]
    op = [encode_matrix(np.diag(phases))]
    return InstanceSpec(
        algebra_n=[tuple(b) for b in _diag_blocks(n)], algebra_m=[("m", n)],
        embedding="diagonal_in_full", trace="markov",
        channel={"type": "kraus", "level": "M", "operators": [op]},
        seed=seed,
        expected={"phase_group_order": n, "fixed_dimension": n,
                  "fixed_equals_n": True, "relative_irreducible": True,
                  "is_cp": True, "is_unital": True})


def _expectation_mix(params, seed):
    t = float(params.get("t", 0.5))
    n = int(params.get("n", 3))
    if not 0.0 < t <= 1.0:
        raise BadParams("expectation_mix needs 0 < t <= 1")
    if n < 2:
        raise BadParams("expectation_mix needs n >= 2")
    return InstanceSpec(
        algebra_n=[tuple(b) for b in _diag_blocks(n)], algebra_m=[("m", n)],
        embedding="diagonal_in_full", trace="markov",
        channel={"type": "generator", "name": "expectation_mix",
                 "params": {"t": t, "n": n}},
        seed=seed,
        expected={"phase_group_order": 1, "fixed_dimension": n,
                  "fixed_equals_n": True, "relative_irreducible": True,
                  "is_cp": True, "is_unital": True})


def _shift_conjugation(params, seed):
    n = int(params.get("n", 3))
    if n < 2:
        raise BadParams("shift_conjugation needs n >= 2")
    shift = np.roll(np.eye(n), 1, axis=0)
    return InstanceSpec(
        algebra_n=[("c", 1)], algebra_m=[("m", n)],
        embedding="scalars_in_full", trace="markov",
        channel={"type": "kraus", "level": "M",
                 "operators": [[encode_matrix(shift)]]},
        seed=seed,
        expected={"phase_group_order": n, "fixed_dimension": n,
                  "fixed_is_factor": False, "relative_irreducible": False,
                  "is_cp": True, "is_unital": True,
                  "unitaries_skipped": True})


def _clock_shift_mix(params, seed):
    n = int(params.get("n", 3))
    if n < 2:
        raise BadParams("clock_shift_mix needs n >= 2")
    shift = np.roll(np.eye(n), 1, axis=0) / np.sqrt(2)
    clock = np.diag([np.exp(2j * np.pi * k / n) for k in range(n)]) / np.sqrt(2)
    return InstanceSpec(
        algebra_n=[("c", 1)], algebra_m=[("m", n)],
        embedding="scalars_in_full", trace="markov",
        channel={"type": "kraus", "level": "M",
                 "operators": [[encode_matrix(shift)], [encode_matrix(clock)]]},
        seed=seed,
        expected={"phase_group_order": n, "fixed_dimension": 1,
                  "fixed_is_factor": True, "fixed_equals_n": True,
                  "relative_irreducible": True, "is_cp": True,
                  "is_unital": True, "eigenspaces_one_dimensional": True})


def _scalars_in_full(params, seed):
    n = int(params.get("n", 2))
    if n < 2:
        raise BadParams("scalars_in_full needs n >= 2")
    return InstanceSpec(
        algebra_n=[("c", 1)], algebra_m=[("m", n)],
        embedding="scalars_in_full", trace="markov",
        channel={"type": "generator", "name": "scalars_in_full",
                 "params": {"n": n}},
        seed=seed,
        expected={"phase_group_order": 1, "fixed_dimension": 1,
                  "fixed_equals_n": True, "relative_irreducible": True,
                  "is_cp": True, "is_unital": True})


def _random_cpb(params, seed):
    n = int(params.get("n", 3))
    family = params.get("inclusion", "diagonal_in_full")
    if family not in ("diagonal_in_full", "scalars_in_full"):
        raise BadParams(f"unknown inclusion family {family!r}")
    if n < 2:
        raise BadParams("random_cpb needs n >= 2")
    if family == "diagonal_in_full":
        blocks_n = [tuple(b) for b in _diag_blocks(n)]
    else:
        blocks_n = [("c", 1)]
    return InstanceSpec(
        algebra_n=blocks_n, algebra_m=[("m", n)],
        embedding=family, trace="markov",
        channel={"type": "generator", "name": "random_cpb",
                 "params": {"n": n, "inclusion": family}},
        seed=seed,
        expected={"is_cp": True, "is_unital": True})


GENERATOR_FAMILIES = {
    "ad_unitary": _ad_unitary,
    "expectation_mix": _expectation_mix,
    "shift_conjugation": _shift_conjugation,
    "clock_shift_mix": _clock_shift_mix,
    "scalars_in_full": _scalars_in_full,
    "random_cpb": _random_cpb,
}


def generate(name: str, params: dict | None = None, seed: int = 0) -> InstanceSpec:
    """Instance of a built-in family, with its analytic ground truth."""
    if name not in GENERATOR_FAMILIES:
        raise UnknownGenerator(f"unknown generator family {name!r}")
    return GENERATOR_FAMILIES[name](params or {}, seed)
