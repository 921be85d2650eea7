"""Self-describing coefficient files (JSON) and the plain-text export."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import ORDERING_VERSION, MonomialBasis, Symmetry
from .errors import CoefficientFileError
from .lm import ParameterPack

FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class CoefficientFile:
    problem: dict
    basis: dict
    coefficients: list
    scalars: dict
    eps1: list | None = None
    eps2: list | None = None
    free: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        out = {
            "format_version": self.format_version,
            "manifold": {"name": self.problem["manifold"], "class_param": self.scalars.get("class_param")},
            "problem": self.problem,
            "basis": self.basis,
            "coefficients": [float(v) for v in self.coefficients],
            "scalars": {k: float(v) for k, v in self.scalars.items()},
            "free": list(self.free),
            "metrics": self.metrics,
            "report": self.report,
            "provenance": self.provenance,
        }
        if self.eps1 is not None:
            out["eps1"] = [float(v) for v in self.eps1]
            out["eps2"] = [float(v) for v in self.eps2]
        return out

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientFile":
        try:
            version = d["format_version"]
            basis = d["basis"]
        except (KeyError, TypeError) as exc:
            raise CoefficientFileError(f"missing field {exc}") from exc
        if version != FORMAT_VERSION:
            raise CoefficientFileError(f"unsupported format version {version}")
        if basis.get("ordering_version") != ORDERING_VERSION:
            raise CoefficientFileError(f"basis ordering version {basis.get('ordering_version')} is not {ORDERING_VERSION}")
        try:
            f = cls(
                problem=d["problem"],
                basis=basis,
                coefficients=list(d["coefficients"]),
                scalars=dict(d["scalars"]),
                eps1=d.get("eps1"),
                eps2=d.get("eps2"),
                free=list(d.get("free", [])),
                metrics=d.get("metrics", {}),
                report=d.get("report", {}),
                provenance=d.get("provenance", {}),
                format_version=version,
            )
        except KeyError as exc:
            raise CoefficientFileError(f"missing field {exc}") from exc
        if len(f.coefficients) != len(f.monomial_basis()):
            raise CoefficientFileError("coefficient count does not match the basis")
        return f

    def monomial_basis(self) -> MonomialBasis:
        try:
            return MonomialBasis(int(self.basis["degree"]), Symmetry(self.basis["symmetry"]), int(self.basis.get("min_degree", 2)))
        except (KeyError, ValueError) as exc:
            raise CoefficientFileError(f"bad basis descriptor: {exc}") from exc

    def pack(self, free=None) -> ParameterPack:
        return ParameterPack(
            np.array(self.coefficients, dtype=float),
            dict(self.scalars),
            None if self.eps1 is None else np.array(self.eps1),
            None if self.eps2 is None else np.array(self.eps2),
            tuple(self.free if free is None else free),
        )


def save(cf: CoefficientFile, path) -> None:
    atomic_write(path, cf.to_json())


def load(path) -> CoefficientFile:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CoefficientFileError(f"cannot read {path}: {exc}") from exc
    return CoefficientFile.from_dict(d)


def export_text(coeffs) -> str:
    """One coefficient per line in basis order."""
    return "".join(f"{float(v)!r}\n" for v in coeffs)
