"""Scenario files and their execution.

A scenario is a flat ``key=value`` text file describing one action. Relative
paths are resolved against the scenario file's directory. Example::

    action=verify
    generator=orthonormal
    dim=4
    probes=100
    seed=0

Exit statuses: 0 all checks passed, 1 a check failed, 2 input error,
3 a theorem hypothesis does not hold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import constructions as cons
from .decomp import (
    ApproximativeDecomposition,
    BoundPair,
    UnsupportedNormError,
    canonical_json,
    make_probes,
    optimal_bounds_l2,
    verify_bessel,
    verify_k_atomic,
    verify_xd_frame,
)
from .generators import generate_example
from .imaging import ImageDemoConfig, PGMError, demo_image
from .io import FormatError, load_decomposition, read_matrix, write_decomposition
from .linalg import LinearOperator, ModelSpace, NormTag

__all__ = ["Scenario", "ScenarioResult", "parse_scenario", "read_scenario", "run_scenario",
           "BUILDERS", "EXIT_OK", "EXIT_FAILED", "EXIT_INPUT", "EXIT_HYPOTHESIS"]

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_HYPOTHESIS = 0, 1, 2, 3

ACTIONS = ("verify", "bounds", "equivalences", "demo-image")
BUILDERS = ("lift_by_k", "pullback_functionals", "compose_left", "compose_right",
            "refit_via_pseudo", "pullback_invertible", "dualize", "k_from_frame_data",
            "from_finite_rank")


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    action: str
    params: dict = field(default_factory=dict)
    name: str = ""
    base_dir: Path = field(default_factory=Path)

    def get(self, key: str, default=None):
        return self.params.get(key, default)

    def path(self, key: str) -> Path:
        value = self.params.get(key)
        if value is None:
            raise ScenarioError(f"missing '{key}'")
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def number(self, key: str, default, kind=float):
        raw = self.params.get(key)
        if raw is None:
            return default
        try:
            return kind(raw)
        except ValueError:
            raise ScenarioError(f"'{key}' must be a {kind.__name__}, got {raw!r}") from None


@dataclass
class ScenarioResult:
    report: dict
    status: int

    def to_json(self) -> str:
        return canonical_json(self.report)


def parse_scenario(text: str, base_dir=".") -> Scenario:
    params = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        params[key] = value
    action = params.pop("action", None)
    if action is None:
        raise ScenarioError("scenario has no action")
    name = params.pop("name", "")
    params.setdefault("seed", "0")
    return Scenario(action, params, name, Path(base_dir))


def read_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), path.parent)


def _operator(spec: str, space: ModelSpace, s: Scenario) -> LinearOperator:
    """An operator given as ``identity``, ``scaled-identity:c``,
    ``diag:a,b,...`` or a matrix file."""
    if spec == "identity":
        return LinearOperator.identity(space)
    if spec.startswith("scaled-identity:"):
        return LinearOperator(space, space, float(spec.split(":", 1)[1]) * np.eye(space.dim))
    if spec.startswith("diag:"):
        vals = [float(v) for v in spec[5:].split(",")]
        if len(vals) != space.dim:
            raise ScenarioError(f"diag operator needs {space.dim} entries")
        return LinearOperator(space, space, np.diag(vals))
    p = Path(spec)
    M = read_matrix(p if p.is_absolute() else s.base_dir / p)
    if M.shape != (space.dim, space.dim):
        raise ScenarioError(f"operator {spec} must be {space.dim}x{space.dim}, got {M.shape}")
    return LinearOperator(space, space, M)


def _claimed(s: Scenario) -> BoundPair | None:
    raw = s.get("claimed")
    if not raw or raw == "none":
        return None
    parts = raw.split(",")
    if len(parts) != 2:
        raise ScenarioError("claimed must be 'a,b'")
    return BoundPair(float(parts[0]), float(parts[1]))


def _decomposition(s: Scenario) -> ApproximativeDecomposition:
    if s.get("generator"):
        d = generate_example(s.get("generator"), s.number("dim", 2, int), s.number("seed", 0, int))
        claimed = _claimed(s)
        return d if claimed is None and "claimed" not in s.params else d.replace(claimed=claimed)
    norm = NormTag.parse(s.get("norm", "l2"))
    return load_decomposition(s.path("atoms"), s.path("functionals"), s.path("operator"),
                              norm, s.get("xd", "row-lp:2"), _claimed(s))


def _verify(s: Scenario, d: ApproximativeDecomposition) -> ScenarioResult:
    tol = s.number("tol", 1e-8)
    probes = make_probes(d.ambient, s.number("probes", 1000, int), s.number("seed", 0, int))
    mode = s.get("mode", "k-atomic")
    if mode == "k-atomic":
        rep = verify_k_atomic(d, probes, tol)
    elif mode == "xd-frame":
        rep = verify_xd_frame(d.functionals, d.xd_tag, probes, tol, d.claimed)
    elif mode == "bessel":
        upper = verify_bessel(d.functionals, d.xd_tag, probes)
        return ScenarioResult({"empirical_upper": upper, "probes_used": len(probes),
                               "seed": probes.seed}, EXIT_OK)
    else:
        raise ScenarioError(f"unknown mode {mode!r}")
    return ScenarioResult(rep.to_dict(), EXIT_OK if rep.passed else EXIT_FAILED)


def _construct(s: Scenario, builder: str) -> ScenarioResult:
    if builder not in BUILDERS:
        raise ScenarioError(f"unknown builder {builder!r}; choose from {', '.join(BUILDERS)}")
    d = _decomposition(s)
    amb = d.ambient
    if builder in ("lift_by_k", "pullback_functionals"):
        out = getattr(cons, builder)(d, _operator(s.get("k", "identity"), amb, s))
    elif builder in ("compose_left", "compose_right"):
        out = getattr(cons, builder)(d, _operator(s.get("t", "identity"), amb, s))
    elif builder == "refit_via_pseudo":
        out = cons.refit_via_pseudo(d)
    elif builder == "pullback_invertible":
        out = cons.pullback_invertible(d)
    elif builder == "dualize":
        out = cons.dualize(d)
    elif builder == "k_from_frame_data":
        _, out = cons.k_from_frame_data(d.functionals, d.atoms, d.xd_tag)
    else:
        ops = tuple(_operator(spec, amb, s) for spec in s.get("ops", "").split())
        out = cons.from_finite_rank(cons.FiniteRankSequence(ops, d.k))
    if s.get("out"):
        write_decomposition(s.path("out"), out, name=builder)
    verified = _verify(s, out)
    report = {
        "builder": builder,
        "claimed": None if out.claimed is None else [out.claimed.a, out.claimed.b],
        "notes": {k: v for k, v in sorted(out.notes.items())},
        "report": verified.report,
    }
    return ScenarioResult(report, verified.status)


def _bounds(s: Scenario) -> ScenarioResult:
    d = _decomposition(s)
    level = s.get("level")
    eb = optimal_bounds_l2(d, None if level in (None, "all") else int(level))
    report = {
        "lower": eb.lower if math.isfinite(eb.lower) else None,
        "upper": eb.upper,
        "frame_lower": eb.frame_lower if math.isfinite(eb.lower) else None,
        "frame_upper": eb.frame_upper,
        "exact": eb.exact,
        "level": level or "all",
    }
    return ScenarioResult(report, EXIT_OK)


def _equivalences(s: Scenario) -> ScenarioResult:
    d = _decomposition(s)
    strict = s.get("strict", "true").lower() != "false"
    rep = cons.check_equivalences(d.atoms, d.functionals, s.number("tol", 1e-8), strict=strict)
    return ScenarioResult(rep.to_dict(), EXIT_OK if rep.consistent else EXIT_FAILED)


def _demo(s: Scenario) -> ScenarioResult:
    cfg = ImageDemoConfig(
        input=str(s.path("in")),
        output=str(s.path("out")) if s.get("out") else None,
        block=s.number("block", 8, int),
        operator=s.get("operator", "identity"),
        frame=s.get("frame", "orthonormal-dct"),
    )
    metrics = demo_image(cfg)
    return ScenarioResult(metrics, EXIT_OK if metrics["max_abs_error"] <= 1e-8 else EXIT_FAILED)


def run_scenario(s: Scenario) -> ScenarioResult:
    """Execute ``s``; library errors are mapped onto exit statuses."""
    try:
        if s.action == "verify":
            return _verify(s, _decomposition(s))
        if s.action.startswith("construct:"):
            return _construct(s, s.action.split(":", 1)[1])
        if s.action == "bounds":
            return _bounds(s)
        if s.action == "equivalences":
            return _equivalences(s)
        if s.action == "demo-image":
            return _demo(s)
        raise ScenarioError(f"unknown action {s.action!r}")
    except cons.HypothesisError as exc:
        return ScenarioResult({"error": "hypothesis", "message": str(exc)}, EXIT_HYPOTHESIS)
    except UnsupportedNormError as exc:
        return ScenarioResult({"error": "unsupported", "message": str(exc)}, EXIT_INPUT)
    except (ScenarioError, FormatError, PGMError, OSError, ValueError) as exc:
        return ScenarioResult({"error": "input", "message": str(exc)}, EXIT_INPUT)
