"""JSON formats for chains, models, trajectories and reports.

Fractions are always written as ``"p/q"`` strings. Reports are dumped
with sorted keys and carry no timestamps, so equal inputs produce equal
bytes.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from . import __version__
from .chains import (
    ChainError,
    StochasticMatrix,
    derive_adapted_matrix,
    fmt_fraction,
    hitting_law,
    hitting_to_json,
    matrix_from_json,
    matrix_to_json,
    to_fraction,
)
from .model import (
    CONDITIONED,
    AdaptedFamily,
    IndependentChains,
    M2CPModel,
    ModelError,
    TargetChain,
    build_from_adapted,
    sync_product,
)
from .trajectory import DistributedSystem, Trajectory

MODEL_FORMAT = "m2cp-model"


class FormatError(ValueError):
    """A file does not follow the expected JSON layout."""


def _law_to_json(law: Mapping) -> dict:
    return {k: fmt_fraction(to_fraction(v)) for k, v in law.items()}


def _law_from_json(data) -> dict:
    if not isinstance(data, Mapping):
        raise FormatError("a law must be an object mapping states to fractions")
    return {str(k): to_fraction(v) for k, v in data.items()}


def model_to_json(model) -> dict:
    if isinstance(model, IndependentChains):
        return {
            "format": MODEL_FORMAT,
            "kind": "open",
            "m1": matrix_to_json(model.m1),
            "m2": matrix_to_json(model.m2),
        }
    family = []
    for y in model.q0:
        for site in (1, 2):
            chain = model.family[site, y]
            entry = {"site": site, "target": y, "matrix": matrix_to_json(chain.matrix)}
            if chain.departures:
                entry["departures"] = {c: _law_to_json(row) for c, row in chain.departures.items()}
            family.append(entry)
    out = {
        "format": MODEL_FORMAT,
        "kind": "closed",
        "system": {"s1": list(model.system.s1), "s2": list(model.system.s2)},
        "x0": [list(a) for a in model.x0],
        "sync_matrix": matrix_to_json(model.sync_matrix),
        "family": family,
        "initial_sync_laws": [
            {"state": list(a), "law": _law_to_json(law)} for a, law in model.initial_sync_laws.items()
        ],
    }
    meta = model.metadata
    if meta:
        derivation = {k: v for k, v in meta.items() if k not in ("hitting", "chains")}
        if "hitting" in meta:
            derivation["hitting"] = {str(site): hitting_to_json(h) for site, h in meta["hitting"].items()}
        if "chains" in meta:
            derivation["chains"] = {str(site): matrix_to_json(m) for site, m in meta["chains"].items()}
        out["derivation"] = derivation
    return out


def model_from_json(data: Mapping) -> M2CPModel | IndependentChains:
    if not isinstance(data, Mapping):
        raise FormatError("model file must hold a JSON object")
    kind = data.get("kind", "closed")
    try:
        if kind == "open":
            return IndependentChains.from_chains(matrix_from_json(data["m1"]), matrix_from_json(data["m2"]))
        if kind == "product":
            return sync_product(
                matrix_from_json(data["m1"]), matrix_from_json(data["m2"]), data.get("family", CONDITIONED)
            )
        system = DistributedSystem(tuple(data["system"]["s1"]), tuple(data["system"]["s2"]))
        x0 = data.get("x0", "auto")
        sync = matrix_from_json(data["sync_matrix"])
        chains = {}
        for entry in data["family"]:
            site = int(entry["site"])
            y = str(entry["target"])
            deps = {c: _law_from_json(row) for c, row in entry.get("departures", {}).items()}
            chains[site, y] = TargetChain(site, y, matrix_from_json(entry["matrix"]), deps)
        laws = {tuple(e["state"]): _law_from_json(e["law"]) for e in data.get("initial_sync_laws", [])}
        q0 = tuple(sorted({y for _, y in chains}, key=list(system.q).index))
        meta = dict(data.get("derivation", {}))
        meta.pop("hitting", None)
        if "chains" in meta:
            meta["chains"] = {int(k): matrix_from_json(v) for k, v in meta["chains"].items()}
            # recomputed rather than parsed, so it always matches the chains
            meta["hitting"] = {k: hitting_law(m, system.q) for k, m in meta["chains"].items()}
    except (KeyError, TypeError) as exc:
        raise FormatError(f"model file is missing field {exc}") from None
    return build_from_adapted(system, x0, sync, AdaptedFamily(q0, chains), laws, meta)


def derivation_report(m1: StochasticMatrix, m2: StochasticMatrix, family: str = CONDITIONED) -> dict:
    """Every intermediate object of the construction from two raw chains."""
    model = sync_product(m1, m2, family)
    q = model.system.q
    out: dict[str, Any] = {
        "shared_states": list(q),
        "hitting": {},
        "renormalized": {},
        "sync_matrix": matrix_to_json(model.sync_matrix),
    }
    for site, m in ((1, m1), (2, m2)):
        out["hitting"][str(site)] = hitting_to_json(hitting_law(m, q))
        out["renormalized"][str(site)] = {y: matrix_to_json(derive_adapted_matrix(m, y, q)) for y in q}
    out["family"] = family
    return out


def trajectory_from_json(data: Mapping, system: DistributedSystem | None = None) -> tuple[Trajectory, tuple | None]:
    """Parse ``{"system": {...}, "trajectory": [w1, w2], "start": [x, z]}``."""
    try:
        if system is None:
            system = DistributedSystem(tuple(data["system"]["s1"]), tuple(data["system"]["s2"]))
        w1, w2 = data["trajectory"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"trajectory file is malformed: {exc}") from None
    start = tuple(data["start"]) if "start" in data else None
    return Trajectory(tuple(w1), tuple(w2), system), start


def read_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def report(payload: Mapping, config: Mapping) -> dict:
    return {"tool": "m2cp", "version": __version__, "config": dict(config), **payload}


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


# -- bundled fixtures -----------------------------------------------------------

FIXTURES = ("two-site", "toy", "transient", "adversarial")


def fixture_path(name: str, filename: str = "model.json") -> Path:
    return Path(str(resources.files("m2cp") / "data" / name / filename))


def load_fixture(name: str):
    """Model of a bundled fixture; ``transient`` and ``toy`` are adapted families."""
    if name not in FIXTURES:
        raise FormatError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    data = read_json(fixture_path(name))
    if name == "adversarial":
        data = read_json(fixture_path(data["model"]))
    return model_from_json(data)


def adversarial_sampler():
    """The committed coupled sampler and the start state it is tested from."""
    from .simulation import CoupledSampler

    cfg = read_json(fixture_path("adversarial"))
    model = model_from_json(read_json(fixture_path(cfg["model"])))
    return CoupledSampler(model, max_redraws=int(cfg["max_redraws"])), tuple(cfg["start"])


def raw_chains(model) -> tuple[StochasticMatrix, StochasticMatrix]:
    """The two raw chains a synchronization product was built from."""
    chains = getattr(model, "metadata", {}).get("chains")
    if not chains:
        raise ModelError("model does not record the raw chains it was derived from")
    return chains[1], chains[2]


def load_matrix(path) -> StochasticMatrix:
    try:
        return matrix_from_json(read_json(path))
    except ChainError as exc:
        raise ChainError(f"{path}: {exc}") from None


__all__ = [
    "FormatError",
    "ModelError",
    "derivation_report",
    "dumps",
    "adversarial_sampler",
    "fixture_path",
    "load_fixture",
    "load_matrix",
    "model_from_json",
    "model_to_json",
    "read_json",
    "report",
    "trajectory_from_json",
]
