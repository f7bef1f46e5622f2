"""JSON round trip for model specifications (schema in docs/model_schema.md)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, ParseError
from .jumprate import JumpRate
from .kernels import (ExpPolyKernel, GeneralKernel, NetworkKernel, PeriodicKernel,
                      TrigExpPolyKernel)
from .model import ModelSpec, PeriodicBaseline, TrigBaseline
from .network import NetworkSpec

SCHEMA_VERSION = 1


def _with_network(out: dict, kernel) -> dict:
    if kernel.network is not None:
        out["network"] = kernel.network.to_dict()
    return out


def _network(data: dict):
    net = data.get("network")
    return None if net is None else NetworkSpec.from_dict(net)


def kernel_to_dict(kernel: PeriodicKernel) -> dict:
    if isinstance(kernel, GeneralKernel):
        return {"kind": "general", "phi": kernel.phi.tolist()}
    if isinstance(kernel, NetworkKernel):
        return {"kind": "network", "alpha": kernel.alpha.tolist(),
                "beta": kernel.beta.tolist(), "network": kernel.network.to_dict()}
    if isinstance(kernel, ExpPolyKernel):
        return _with_network({"kind": "exppoly", "tau": kernel.tau, "family": kernel.family,
                              "G": kernel.G.tolist()}, kernel)
    if isinstance(kernel, TrigExpPolyKernel):
        return _with_network({"kind": "trig_exppoly", "period": kernel.period,
                              "tau": kernel.tau, "family": kernel.family,
                              "const": kernel.const.tolist(), "sin": kernel.sin.tolist(),
                              "cos": kernel.cos.tolist()}, kernel)
    raise ConfigurationError(f"cannot serialise kernel of type {type(kernel).__name__}")


def kernel_from_dict(data: dict) -> PeriodicKernel:
    kind = data.get("kind")
    try:
        if kind == "general":
            return GeneralKernel(np.asarray(data["phi"], dtype=float))
        if kind == "network":
            return NetworkKernel(data["alpha"], data["beta"],
                                 NetworkSpec.from_dict(data["network"]))
        if kind == "exppoly":
            return ExpPolyKernel(np.asarray(data["G"], dtype=float), data["tau"],
                                 data.get("family", "odd"), _network(data))
        if kind == "trig_exppoly":
            return TrigExpPolyKernel(data["period"], data["tau"], data["const"],
                                     data["sin"], data["cos"], data.get("family", "odd"),
                                     _network(data))
    except KeyError as exc:
        raise ParseError(f"kernel of kind {kind!r} lacks field {exc}") from None
    raise ParseError(f"unknown kernel kind {kind!r}")


def baseline_from_dict(data: dict):
    kind = data.get("kind", "periodic")
    if kind == "periodic":
        return PeriodicBaseline(data["values"], bool(data.get("shared", False)))
    if kind == "trig":
        return TrigBaseline(data["period"], data["const"], data["sin"], data["cos"])
    raise ParseError(f"unknown baseline kind {kind!r}")


def model_to_dict(spec: ModelSpec) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "d": spec.d,
        "period": spec.period,
        "periodicity": spec.periodicity,
        "jump_rate": spec.jump_rate.to_dict(),
        "baseline": spec.baseline.to_dict(),
        "kernel": kernel_to_dict(spec.kernel),
    }


def model_from_dict(data: dict) -> ModelSpec:
    if not isinstance(data, dict):
        raise ParseError("model document must be a JSON object")
    try:
        return ModelSpec(
            d=int(data["d"]),
            period=data["period"],
            baseline=baseline_from_dict(data["baseline"]),
            kernel=kernel_from_dict(data["kernel"]),
            jump_rate=JumpRate.from_dict(data.get("jump_rate", {"kind": "identity"})),
            periodicity=data.get("periodicity", "I"),
        )
    except KeyError as exc:
        raise ParseError(f"model document lacks field {exc}") from None


def dumps_model(spec: ModelSpec) -> str:
    return json.dumps(model_to_dict(spec), indent=2)


def loads_model(text: str) -> ModelSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    return model_from_dict(data)


def save_model(spec: ModelSpec, path) -> None:
    Path(path).write_text(dumps_model(spec), encoding="utf-8")


def load_model(path) -> ModelSpec:
    return loads_model(Path(path).read_text(encoding="utf-8"))
