"""Plain-text exchange formats.

Matrix: first line ``rows cols``, then ``rows`` lines of whitespace-separated
decimals. Triangular array: first line ``num_levels ambient_dim``, then per
level a line ``m_n`` followed by ``m_n`` lines of ``ambient_dim`` decimals.
Blank lines and lines starting with ``#`` are ignored.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .decomp import ApproximativeDecomposition, BoundPair
from .linalg import LinearOperator, ModelSpace, NormTag
from .seqspace import AtomFamily, TriangularArray, XdSpaceTag

__all__ = [
    "FormatError",
    "format_matrix",
    "parse_matrix",
    "read_matrix",
    "write_matrix",
    "format_array",
    "parse_array",
    "read_array",
    "write_array",
    "write_decomposition",
    "read_decomposition",
]


class FormatError(ValueError):
    pass


def _lines(text: str) -> list:
    out = []
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def _floats(line: str, count: int, where: str) -> list:
    parts = line.split()
    if len(parts) != count:
        raise FormatError(f"{where}: expected {count} values, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


def _header(line: str, where: str) -> tuple:
    parts = line.split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise FormatError(f"{where}: header must be two non-negative integers, got {line!r}")
    return int(parts[0]), int(parts[1])


def _fmt(v: float) -> str:
    # repr round-trips a double exactly
    return repr(float(v))


def format_matrix(m) -> str:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    rows = [f"{m.shape[0]} {m.shape[1]}"]
    rows += [" ".join(_fmt(v) for v in row) for row in m]
    return "\n".join(rows) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    lines = _lines(text)
    if not lines:
        raise FormatError("empty matrix file")
    r, c = _header(lines[0], "matrix")
    if len(lines) - 1 != r:
        raise FormatError(f"matrix: expected {r} rows, got {len(lines) - 1}")
    data = [_floats(line, c, f"matrix row {i + 1}") for i, line in enumerate(lines[1:])]
    return np.array(data, dtype=float).reshape(r, c)


def read_matrix(path) -> np.ndarray:
    return parse_matrix(Path(path).read_text())


def write_matrix(path, m):
    Path(path).write_text(format_matrix(m))


def format_array(H: TriangularArray) -> str:
    out = [f"{H.num_levels} {H.ambient.dim}"]
    for lv in H.levels:
        out.append(str(lv.shape[0]))
        out += [" ".join(_fmt(v) for v in row) for row in lv]
    return "\n".join(out) + "\n"


def parse_array(text: str, norm: NormTag | None = None) -> TriangularArray:
    lines = _lines(text)
    if not lines:
        raise FormatError("empty triangular array file")
    num_levels, dim = _header(lines[0], "triangular array")
    if dim < 1:
        raise FormatError("triangular array: ambient_dim must be positive")
    pos, levels = 1, []
    for n in range(1, num_levels + 1):
        if pos >= len(lines) or not lines[pos].isdigit():
            raise FormatError(f"level {n}: missing size line")
        m = int(lines[pos])
        pos += 1
        if pos + m > len(lines):
            raise FormatError(f"level {n}: expected {m} functionals")
        rows = [_floats(lines[pos + i], dim, f"level {n} functional {i + 1}") for i in range(m)]
        pos += m
        levels.append(np.array(rows, dtype=float).reshape(m, dim))
    if pos != len(lines):
        raise FormatError("triangular array: trailing content after last level")
    return TriangularArray(tuple(levels), ModelSpace(dim, norm or NormTag.lp(2.0)))


def read_array(path, norm: NormTag | None = None) -> TriangularArray:
    return parse_array(Path(path).read_text(), norm)


def write_array(path, H: TriangularArray):
    Path(path).write_text(format_array(H))


def write_decomposition(out_dir, d: ApproximativeDecomposition, name: str = "") -> dict:
    """Write atoms.txt, functionals.txt, operator.txt and meta.json.

    Atoms are stored one per row. meta.json carries the norm, X_d tag and
    claimed bounds so the directory can be read back without extra flags.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "atoms.txt", d.atoms.vectors)
    write_array(out / "functionals.txt", d.functionals)
    write_matrix(out / "operator.txt", d.k.entries)
    meta = {
        "name": name,
        "dim": d.ambient.dim,
        "norm": d.ambient.norm.label,
        "xd": d.xd_tag.label,
        "claimed": None if d.claimed is None else [d.claimed.a, d.claimed.b],
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    (out / "xd_tag.txt").write_text(d.xd_tag.label + "\n")
    return meta


def load_decomposition(atoms_path, functionals_path, operator_path, norm: NormTag,
                       xd: str, claimed: BoundPair | None = None) -> ApproximativeDecomposition:
    H = read_array(functionals_path, norm)
    amb = H.ambient
    X = read_matrix(atoms_path)
    if X.shape[1] != amb.dim:
        raise FormatError(f"atoms have {X.shape[1]} columns, functionals live in dim {amb.dim}")
    atoms = AtomFamily(X, amb)
    K = read_matrix(operator_path)
    if K.shape != (amb.dim, amb.dim):
        raise FormatError(f"operator must be {amb.dim}x{amb.dim}, got {K.shape}")
    return ApproximativeDecomposition(atoms, H, LinearOperator(amb, amb, K),
                                      XdSpaceTag.parse(xd, atoms), claimed)


def read_decomposition(directory) -> ApproximativeDecomposition:
    """Inverse of :func:`write_decomposition`."""
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text())
    claimed = BoundPair(*meta["claimed"]) if meta.get("claimed") else None
    return load_decomposition(directory / "atoms.txt", directory / "functionals.txt",
                              directory / "operator.txt", NormTag.parse(meta["norm"]),
                              meta["xd"], claimed)
