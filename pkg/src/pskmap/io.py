"""JSON algebra files and report emission; the only module that touches disk.

Schema:
    {
      "n": 2,
      "brackets": [[i, j, k, c], ...],        # [e_i, e_j] = sum c e_k, i < j
      "labels": ["a1", ...],                  # optional
      "candidate": {                          # optional
        "Sa": [[i, j, k, value], ...],        # sorted triples only
        "Sb": [[i, j, k, value], ...],
        "kappa": [[index, value], ...]
      }
    }

For parameter scans a bracket constant may be the string "c", "-c" or
"<float>*c"; such files describe a one-parameter family.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .forms import Form
from .intrinsic import PSKCandidate, SymTensor3
from .lie import AdaptedBasis, LieAlgebra

SCHEMA_VERSION = 1


class ParseError(Exception):
    """Malformed algebra file."""


@dataclass
class AlgebraFile:
    L: LieAlgebra
    B: AdaptedBasis
    candidate: PSKCandidate | None = None
    labels: list = field(default_factory=list)


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ParseError(msg)


def parse_algebra(obj: dict, allow_parameter: bool = False) -> AlgebraFile:
    _check(isinstance(obj, dict), "top level must be an object")
    _check("n" in obj, "missing field 'n'")
    n = obj["n"]
    _check(isinstance(n, int) and n >= 1, "'n' must be a positive integer")
    dim = 2 * n
    entries = []
    for row in obj.get("brackets", []):
        _check(isinstance(row, (list, tuple)) and len(row) == 4,
               f"bracket row {row!r} must be [i, j, k, c]")
        i, j, k, c = row
        _check(all(isinstance(x, int) for x in (i, j, k)),
               f"bracket indices must be integers in {row!r}")
        _check(1 <= i < j <= dim and 1 <= k <= dim,
               f"bracket indices out of range in {row!r}")
        if isinstance(c, str):
            _check(allow_parameter, f"parametric constant {c!r} in a non-template file")
            continue
        _check(isinstance(c, (int, float)), f"bad bracket constant {c!r}")
        entries.append((i, j, k, float(c)))
    L = LieAlgebra.from_brackets(dim, entries)
    B = AdaptedBasis(n)
    cand = None
    if obj.get("candidate") is not None:
        cand = _parse_candidate(obj["candidate"], n)
    labels = list(obj.get("labels", []))
    return AlgebraFile(L=L, B=B, candidate=cand, labels=labels)


def _parse_candidate(obj: dict, n: int) -> PSKCandidate:
    _check(isinstance(obj, dict), "'candidate' must be an object")

    def tensor(name: str) -> SymTensor3:
        rows = obj.get(name, [])
        triples = []
        for row in rows:
            _check(isinstance(row, (list, tuple)) and len(row) == 4,
                   f"{name} row {row!r} must be [i, j, k, value]")
            i, j, k, v = row
            _check(all(isinstance(x, int) for x in (i, j, k)),
                   f"{name} indices must be integers")
            _check(1 <= i <= j <= k <= n,
                   f"{name} triple {row!r} must be sorted and within 1..{n}")
            triples.append((i, j, k, float(v)))
        return SymTensor3.from_triples(n, triples)

    kappa_rows = obj.get("kappa", [])
    coeffs = {}
    for row in kappa_rows:
        _check(isinstance(row, (list, tuple)) and len(row) == 2,
               f"kappa row {row!r} must be [index, value]")
        idx, v = row
        _check(isinstance(idx, int) and 1 <= idx <= 2 * n,
               f"kappa index {idx!r} out of range")
        coeffs[(idx,)] = float(v)
    return PSKCandidate(tensor("Sa"), tensor("Sb"), Form(2 * n, 1, coeffs))


def parse_template(obj: dict):
    """One-parameter family from a file whose bracket constants may be
    '<mult>*c', 'c' or '-c'.  Returns (family(c) -> (L, B), AlgebraFile)."""
    base = parse_algebra(obj, allow_parameter=True)
    n = base.B.n
    dim = 2 * n
    fixed, param = [], []
    for row in obj.get("brackets", []):
        i, j, k, c = row
        if isinstance(c, str):
            param.append((i, j, k, _parse_multiplier(c)))
        else:
            fixed.append((i, j, k, float(c)))
    _check(bool(param), "template file has no parametric bracket constant")

    def family(c: float):
        rows = fixed + [(i, j, k, m * c) for (i, j, k, m) in param]
        return LieAlgebra.from_brackets(dim, rows), AdaptedBasis(n)

    return family, base


def _parse_multiplier(token: str) -> float:
    text = token.strip()
    _check(text.endswith("c"), f"parametric constant {token!r} must end in 'c'")
    head = text[:-1].rstrip("*").strip()
    if head in ("", "+"):
        return 1.0
    if head == "-":
        return -1.0
    try:
        return float(head)
    except ValueError:
        raise ParseError(f"cannot parse multiplier in {token!r}") from None


def algebra_to_dict(L: LieAlgebra, B: AdaptedBasis, labels=None,
                    candidate: PSKCandidate | None = None) -> dict:
    out = {
        "n": B.n,
        "brackets": [[i, j, k, c] for (i, j, k, c) in L.brackets],
    }
    if labels:
        out["labels"] = list(labels)
    if candidate is not None:
        out["candidate"] = {
            "Sa": [[i, j, k, v] for (i, j, k), v in sorted(candidate.Sa.data.items())],
            "Sb": [[i, j, k, v] for (i, j, k), v in sorted(candidate.Sb.data.items())],
            "kappa": [[key[0], v] for key, v in sorted(candidate.kappa.coeffs.items())],
        }
    return out


def load_algebra_file(path: str) -> AlgebraFile:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_algebra(obj)


def load_template_file(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_template(obj)


def save_algebra_file(path: str, L: LieAlgebra, B: AdaptedBasis, labels=None,
                      candidate: PSKCandidate | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(algebra_to_dict(L, B, labels, candidate), fh, indent=2)
        fh.write("\n")


@dataclass
class Report:
    """Envelope for every CLI result; floats round-trip at full precision."""

    command: str
    status: str
    results: dict
    seed: int | None = None
    schema_version: int = SCHEMA_VERSION
    tool: str = "pskmap"

    def to_json(self) -> str:
        from . import __version__

        payload = {
            "schema_version": self.schema_version,
            "tool": self.tool,
            "version": __version__,
            "command": self.command,
            "status": self.status,
            "results": self.results,
        }
        if self.seed is not None:
            payload["seed"] = self.seed
        return json.dumps(payload, indent=2, default=_json_default)


def _json_default(value):
    import numpy as np

    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"cannot serialize {type(value)}")
