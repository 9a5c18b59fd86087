"""Plain-text input/output: matrix files, grid-data files, problem configs,
and the CSV/report writers.

Matrix file format: line 1 is `sym <2n>` or `herm <n>`; each following line
is one row of whitespace-separated decimals.  For `herm`, every entry is a
`re,im` pair (comma, no space).  All floating-point output is printed with 17
significant digits so repeated runs are byte-comparable.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError
from .matrixcore import MAX_DIM, HermitianMatrix, as_symmetric, embed


def fmt(x) -> str:
    return format(float(x), ".17g")


def parse_matrix_text(text: str) -> np.ndarray:
    """Parse a matrix file into the 2n x 2n symmetric representation.

    Hermitian input is embedded.  Raises ParseError with a row diagnostic on
    malformed content and ValueError on dimension/shape validation failures.
    """
    lines = [ln for ln in (raw.strip() for raw in text.splitlines())
             if ln and not ln.startswith("#")]
    if not lines:
        raise ParseError("empty matrix file")
    head = lines[0].split()
    if len(head) != 2 or head[0] not in ("sym", "herm"):
        raise ParseError(f"line 1: expected 'sym <2n>' or 'herm <n>', got {lines[0]!r}")
    try:
        size = int(head[1])
    except ValueError:
        raise ParseError(f"line 1: bad dimension {head[1]!r}")
    kind = head[0]
    rows_expected = size
    if len(lines) - 1 != rows_expected:
        raise ParseError(f"expected {rows_expected} rows, got {len(lines) - 1}")
    if kind == "sym":
        if size % 2 != 0:
            raise ValueError(f"sym dimension must be even, got {size}")
        if size > MAX_DIM:
            raise ValueError(f"dimension {size} exceeds the supported maximum {MAX_DIM}")
        M = np.zeros((size, size))
        for r, ln in enumerate(lines[1:], start=1):
            parts = ln.split()
            if len(parts) != size:
                raise ParseError(f"row {r}: expected {size} entries")
            for c, tok in enumerate(parts):
                try:
                    M[r - 1, c] = float(tok)
                except ValueError:
                    raise ParseError(f"row {r}, column {c + 1}: bad number {tok!r}")
        return as_symmetric(M)
    # herm
    if 2 * size > MAX_DIM:
        raise ValueError(f"n={size} exceeds the supported maximum {MAX_DIM // 2}")
    A = np.zeros((size, size))
    B = np.zeros((size, size))
    for r, ln in enumerate(lines[1:], start=1):
        parts = ln.split()
        if len(parts) != size:
            raise ParseError(f"row {r}: expected {size} entries")
        for c, tok in enumerate(parts):
            pieces = tok.split(",")
            if len(pieces) != 2:
                raise ParseError(f"row {r}, column {c + 1}: expected 're,im', got {tok!r}")
            try:
                A[r - 1, c] = float(pieces[0])
                B[r - 1, c] = float(pieces[1])
            except ValueError:
                raise ParseError(f"row {r}, column {c + 1}: bad number {tok!r}")
    return embed(HermitianMatrix(A, B))


def load_matrix(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_matrix_text(fh.read())


def format_matrix_text(M) -> str:
    """Symmetric matrix in the `sym` file format (counterexample dumps)."""
    M = as_symmetric(M)
    lines = [f"sym {M.shape[0]}"]
    for row in M:
        lines.append(" ".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_grid_values(text: str, expected: int) -> np.ndarray:
    """Grid-data file: one value per line, lexicographic point order."""
    vals = []
    for i, raw in enumerate(text.splitlines(), start=1):
        ln = raw.strip()
        if not ln or ln.startswith("#"):
            continue
        try:
            vals.append(float(ln))
        except ValueError:
            raise ParseError(f"line {i}: bad number {ln!r}")
    if len(vals) != expected:
        raise ParseError(f"expected {expected} grid values, got {len(vals)}")
    return np.array(vals)


def parse_config(text: str) -> dict:
    """Flat `key = value` config with `#` comments."""
    out = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        ln = raw.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise ParseError(f"line {i}: expected 'key = value', got {raw.strip()!r}")
        key, _, val = ln.partition("=")
        key = key.strip()
        val = val.strip()
        if not key or not val:
            raise ParseError(f"line {i}: expected 'key = value', got {raw.strip()!r}")
        if key in out:
            raise ParseError(f"line {i}: duplicate key {key!r}")
        out[key] = val
    return out


class ConfigView:
    """Typed accessors over a parsed config; missing keys raise ParseError
    naming the key."""

    def __init__(self, raw: dict, known: set):
        unknown = set(raw) - known
        if unknown:
            raise ParseError(f"unknown config keys: {', '.join(sorted(unknown))}")
        self.raw = raw

    def has(self, key: str) -> bool:
        return key in self.raw

    def get_str(self, key: str, default: str | None = None) -> str:
        if key not in self.raw:
            if default is not None:
                return default
            raise ParseError(f"missing config key {key!r}")
        return self.raw[key]

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self.raw and default is not None:
            return default
        tok = self.get_str(key)
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"config key {key!r}: bad integer {tok!r}")

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self.raw and default is not None:
            return default
        tok = self.get_str(key)
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"config key {key!r}: bad number {tok!r}")

    def get_floats(self, key: str) -> list:
        tok = self.get_str(key)
        try:
            return [float(p) for p in tok.split(",")]
        except ValueError:
            raise ParseError(f"config key {key!r}: bad number list {tok!r}")

    def get_ints(self, key: str) -> list:
        tok = self.get_str(key)
        try:
            return [int(p) for p in tok.split(",")]
        except ValueError:
            raise ParseError(f"config key {key!r}: bad integer list {tok!r}")


def field_csv(field) -> str:
    """Solution/residual field as CSV: point coordinates + value per row,
    lexicographic point order."""
    grid = field.grid
    d = grid.dim
    header = ",".join([f"x{a}" for a in range(d)] + ["value"])
    lines = [header]
    axes = [grid.axis_coords(a) for a in range(d)]
    for idx in np.ndindex(grid.shape):
        coords = [axes[a][i] for a, i in enumerate(idx)]
        lines.append(",".join(fmt(c) for c in coords) + "," + fmt(field.values[idx]))
    return "\n".join(lines) + "\n"


def report_text(report) -> str:
    """SolveReport as key-value text (wall time goes to stderr, not here,
    to keep artifacts byte-deterministic)."""
    lines = [
        f"iterations = {report.iterations}",
        f"converged = {'true' if report.converged else 'false'}",
        f"final_residual = {fmt(report.final_residual)}",
        "residual_history = " + ",".join(fmt(r) for r in report.residual_history),
        f"linear_solver = {report.linear_solver}",
    ]
    return "\n".join(lines) + "\n"


def convergence_csv(rows) -> str:
    lines = ["points_per_axis,h,max_error,observed_order"]
    for row in rows:
        order = "" if row.observed_order is None else fmt(row.observed_order)
        lines.append(f"{row.points_per_axis},{fmt(row.h)},{fmt(row.max_error)},{order}")
    return "\n".join(lines) + "\n"
