"""JSON round-tripping for the library's value types.

Every document carries a ``"type"`` tag.  Arrays become nested lists, complex
arrays become ``[re, im]`` pairs and sign functions become hex bitstrings.
"""
from __future__ import annotations

import dataclasses
import json
from typing import Any

import numpy as np

from .coplanar import EigenRecord, OptimizerConfig
from .core import (
    AngleConfig,
    BellSpec,
    CoefficientTensor,
    PolarConfig,
    SignAssignment,
    SignedCoefficients,
)
from .errors import ShapeError
from .harness import CampaignConfig, CampaignSummary, TrialRecord
from .lhv import LhvResult
from .statevector import QuantumState
from .wernerwolf import SignFunction


def _list(a) -> list:
    return np.asarray(a).tolist()


def to_dict(obj: Any) -> dict:
    if isinstance(obj, CoefficientTensor):
        return {"type": "CoefficientTensor", "n": obj.n, "r": obj.r, "values": _list(obj.values)}
    if isinstance(obj, SignedCoefficients):
        return {"type": "SignedCoefficients", "n": obj.n, "r": obj.r, "values": _list(obj.values)}
    if isinstance(obj, SignAssignment):
        return {"type": "SignAssignment", "seed": obj.seed, "signs": _list(obj.signs)}
    if isinstance(obj, BellSpec):
        return {"type": "BellSpec", "n": obj.n, "r": obj.r, "coeffs": _list(obj.values)}
    if isinstance(obj, AngleConfig):
        return {"type": "AngleConfig", "angles": _list(obj.angles)}
    if isinstance(obj, PolarConfig):
        return {"type": "PolarConfig", "thetas": _list(obj.thetas), "phis": _list(obj.phis)}
    if isinstance(obj, SignFunction):
        return {"type": "SignFunction", "n": obj.n, "bits": obj.to_hex()}
    if isinstance(obj, QuantumState):
        return {"type": "QuantumState", "amplitudes": obj.to_pairs()}
    if isinstance(obj, OptimizerConfig):
        return {"type": "OptimizerConfig", **obj.to_dict()}
    if isinstance(obj, CampaignConfig):
        return {"type": "CampaignConfig", **obj.to_dict()}
    if isinstance(obj, EigenRecord):
        return {"type": "EigenRecord", "omega": list(obj.omega), "magnitude": obj.magnitude, "phase": obj.phase}
    if isinstance(obj, LhvResult):
        return {"type": "LhvResult", "value": obj.value, "argmax": _list(obj.argmax), "exact": obj.exact}
    if isinstance(obj, (TrialRecord, CampaignSummary)):
        return {"type": type(obj).__name__, **dataclasses.asdict(obj)}
    raise TypeError(f"no JSON form for {type(obj).__name__}")


def from_dict(d: dict) -> Any:
    d = dict(d)
    kind = d.pop("type", None)
    if kind == "CoefficientTensor":
        return CoefficientTensor(np.array(d["values"]), d["n"], d["r"])
    if kind == "SignedCoefficients":
        return SignedCoefficients(np.array(d["values"]), d["n"], d["r"])
    if kind == "SignAssignment":
        return SignAssignment(np.array(d["signs"]), d["seed"])
    if kind == "BellSpec":
        return BellSpec.from_values(d["coeffs"], d["n"], d["r"])
    if kind == "AngleConfig":
        return AngleConfig(np.array(d["angles"]))
    if kind == "PolarConfig":
        return PolarConfig(np.array(d["thetas"]), np.array(d["phis"]))
    if kind == "SignFunction":
        return SignFunction.from_hex(d["bits"], d["n"])
    if kind == "QuantumState":
        return QuantumState.from_pairs(d["amplitudes"])
    if kind == "OptimizerConfig":
        return OptimizerConfig.from_dict(d)
    if kind == "CampaignConfig":
        return CampaignConfig.from_dict(d)
    if kind == "EigenRecord":
        return EigenRecord(tuple(d["omega"]), d["magnitude"], d["phase"])
    if kind == "LhvResult":
        return LhvResult(d["value"], np.array(d["argmax"], dtype=np.int8), d["exact"])
    if kind == "TrialRecord":
        return TrialRecord(**d)
    if kind == "CampaignSummary":
        return CampaignSummary(**d)
    raise ShapeError(f"unknown document type {kind!r}")


def dumps(obj: Any) -> str:
    return json.dumps(to_dict(obj), sort_keys=True)


def loads(text: str) -> Any:
    return from_dict(json.loads(text))
