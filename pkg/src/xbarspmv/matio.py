"""Sparse matrix data model, Matrix Market I/O, synthetic generators, and the
reference SpMV that every simulated result is checked against.

Matrices are coordinate-form with 0-based indices, entries sorted
lexicographically by (row, col), no duplicate coordinates, finite float64
values.  Matrix Market files use 1-based indices; the conversion happens at
the parse/write boundary and nowhere else.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SparseMatrix",
    "SynthSpec",
    "MatrixMarketError",
    "parse_matrix_market",
    "write_matrix_market",
    "read_vector",
    "write_vector",
    "generate",
    "reference_spmv",
    "with_values",
]


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """m x n sparse matrix in coordinate form.

    ``rows``/``cols``/``values`` are parallel 1-D arrays sorted by
    (row, col).  Instances are treated as immutable; operations that need a
    variant (e.g. new values on the same pattern) build a new instance.
    """

    m: int
    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rows", np.ascontiguousarray(self.rows, dtype=np.int64))
        object.__setattr__(self, "cols", np.ascontiguousarray(self.cols, dtype=np.int64))
        object.__setattr__(self, "values", np.ascontiguousarray(self.values, dtype=np.float64))
        if self.m < 0 or self.n < 0:
            raise ValueError("negative matrix dimension")
        if not (self.rows.ndim == self.cols.ndim == self.values.ndim == 1):
            raise ValueError("entry arrays must be 1-D")
        if not (self.rows.size == self.cols.size == self.values.size):
            raise ValueError("entry arrays must have equal length")
        if self.rows.size:
            if self.rows.min() < 0 or self.rows.max() >= self.m:
                raise ValueError("row index out of range")
            if self.cols.min() < 0 or self.cols.max() >= self.n:
                raise ValueError("column index out of range")
            key = self.rows * self.n + self.cols
            if not np.all(np.diff(key) > 0):
                raise ValueError("entries must be sorted by (row, col) with no duplicates")
            if not np.all(np.isfinite(self.values)):
                raise ValueError("matrix values must be finite")

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def density(self) -> float:
        cells = self.m * self.n
        return self.nnz / cells if cells else 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.m == other.m
            and self.n == other.n
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.values, other.values)
        )

    @classmethod
    def from_entries(cls, m, n, entries) -> "SparseMatrix":
        """Build from an iterable of (row, col, value), sorting as needed."""
        ent = sorted((int(r), int(c), float(v)) for r, c, v in entries)
        if ent:
            r, c, v = map(np.asarray, zip(*ent))
        else:
            r = c = v = np.empty(0)
        return cls(m, n, r, c, v)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=np.float64)
        r, c = np.nonzero(a)
        return cls(a.shape[0], a.shape[1], r, c, a[r, c])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.m, self.n))
        out[self.rows, self.cols] = self.values
        return out


def with_values(mat: SparseMatrix, values) -> SparseMatrix:
    """Same nonzero pattern, new values (schedules depend on the pattern only)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != mat.values.shape:
        raise ValueError("value array does not match nonzero count")
    return SparseMatrix(mat.m, mat.n, mat.rows, mat.cols, values)


class MatrixMarketError(ValueError):
    """Malformed Matrix Market input; carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(message + suffix)


_FIELDS = ("real", "integer", "pattern")
_SYMMETRIES = ("general", "symmetric")


def _as_lines(source):
    if isinstance(source, bytes):
        source = source.decode("ascii", errors="replace")
    if isinstance(source, str):
        return source.splitlines()
    if hasattr(source, "read"):
        data = source.read()
        return _as_lines(data)
    raise TypeError("expected str, bytes, or file-like source")


def parse_matrix_market(source) -> SparseMatrix:
    """Parse Matrix Market coordinate format (real/integer/pattern,
    general/symmetric).

    1-based file indices become 0-based; symmetric off-diagonal entries are
    mirrored; pattern entries get value 1.0; explicit zeros are dropped.
    Errors report the 1-based line number.
    """
    lines = _as_lines(source)
    if not lines:
        raise MatrixMarketError("empty input", 1)
    banner = lines[0].split()
    if (
        len(banner) != 5
        or banner[0].lower() != "%%matrixmarket"
        or banner[1].lower() != "matrix"
    ):
        raise MatrixMarketError("malformed MatrixMarket banner", 1)
    if banner[2].lower() != "coordinate":
        raise MatrixMarketError(f"unsupported format {banner[2]!r} (coordinate only)", 1)
    field = banner[3].lower()
    symmetry = banner[4].lower()
    if field not in _FIELDS:
        raise MatrixMarketError(f"unsupported field {banner[3]!r}", 1)
    if symmetry not in _SYMMETRIES:
        raise MatrixMarketError(f"unsupported symmetry {banner[4]!r}", 1)

    # locate the size line, skipping comments and blanks
    idx = 1
    while idx < len(lines) and (not lines[idx].strip() or lines[idx].lstrip().startswith("%")):
        idx += 1
    if idx >= len(lines):
        raise MatrixMarketError("missing size line", len(lines))
    parts = lines[idx].split()
    if len(parts) != 3:
        raise MatrixMarketError("size line must be 'm n nnz'", idx + 1)
    try:
        m, n, declared = (int(p) for p in parts)
    except ValueError:
        raise MatrixMarketError("size line must hold three integers", idx + 1) from None
    if m < 0 or n < 0 or declared < 0:
        raise MatrixMarketError("negative size fields", idx + 1)

    want_value = field != "pattern"
    ent_rows = np.empty(declared, dtype=np.int64)
    ent_cols = np.empty(declared, dtype=np.int64)
    ent_vals = np.empty(declared, dtype=np.float64)
    ent_line = np.empty(declared, dtype=np.int64)
    count = 0
    for lineno in range(idx + 1, len(lines)):
        text = lines[lineno].strip()
        if not text or text.startswith("%"):
            continue
        if count >= declared:
            raise MatrixMarketError("more entries than declared in size line", lineno + 1)
        parts = text.split()
        if len(parts) != (3 if want_value else 2):
            raise MatrixMarketError("malformed entry line", lineno + 1)
        try:
            r = int(parts[0])
            c = int(parts[1])
            v = float(int(parts[2])) if field == "integer" else (
                float(parts[2]) if want_value else 1.0
            )
        except ValueError:
            raise MatrixMarketError("malformed entry line", lineno + 1) from None
        if not (1 <= r <= m) or not (1 <= c <= n):
            raise MatrixMarketError(f"index ({r}, {c}) outside declared {m} x {n} bounds", lineno + 1)
        if not math.isfinite(v):
            raise MatrixMarketError("non-finite value", lineno + 1)
        ent_rows[count] = r - 1
        ent_cols[count] = c - 1
        ent_vals[count] = v
        ent_line[count] = lineno + 1
        count += 1
    if count != declared:
        raise MatrixMarketError(
            f"declared {declared} entries but found {count}", len(lines)
        )

    # duplicate detection on stored coordinates (before any mirroring)
    key = ent_rows * max(n, 1) + ent_cols
    order = np.argsort(key, kind="stable")
    dup = np.nonzero(np.diff(key[order]) == 0)[0]
    if dup.size:
        bad = order[dup[0] + 1]
        r, c = ent_rows[bad] + 1, ent_cols[bad] + 1
        raise MatrixMarketError(f"duplicate coordinate ({r}, {c})", int(ent_line[bad]))

    if symmetry == "symmetric":
        if m != n:
            raise MatrixMarketError("symmetric matrix must be square", idx + 1)
        off = ent_rows != ent_cols
        mirror_key = ent_cols[off] * max(n, 1) + ent_rows[off]
        clash = np.isin(mirror_key, key)
        if clash.any():
            bad = np.nonzero(off)[0][np.nonzero(clash)[0][0]]
            r, c = ent_rows[bad] + 1, ent_cols[bad] + 1
            raise MatrixMarketError(
                f"duplicate coordinate ({c}, {r}) produced by symmetric mirror of ({r}, {c})",
                int(ent_line[bad]),
            )
        mr, mc, mv = ent_cols[off], ent_rows[off], ent_vals[off]
        ent_rows = np.concatenate([ent_rows, mr])
        ent_cols = np.concatenate([ent_cols, mc])
        ent_vals = np.concatenate([ent_vals, mv])

    keep = ent_vals != 0.0  # explicit zeros are not nonzeros; drop them
    ent_rows, ent_cols, ent_vals = ent_rows[keep], ent_cols[keep], ent_vals[keep]
    order = np.lexsort((ent_cols, ent_rows))
    return SparseMatrix(m, n, ent_rows[order], ent_cols[order], ent_vals[order])


def write_matrix_market(mat: SparseMatrix) -> str:
    """Serialize to Matrix Market coordinate/real/general; round-trips exactly
    through :func:`parse_matrix_market`."""
    out = io.StringIO()
    out.write("%%MatrixMarket matrix coordinate real general\n")
    out.write(f"{mat.m} {mat.n} {mat.nnz}\n")
    for r, c, v in zip(mat.rows, mat.cols, mat.values):
        out.write(f"{r + 1} {c + 1} {float(v)!r}\n")
    return out.getvalue()


def read_vector(source) -> np.ndarray:
    """Read a dense vector stored one value per line."""
    lines = _as_lines(source)
    vals = []
    for lineno, text in enumerate(lines, start=1):
        text = text.strip()
        if not text or text.startswith("%"):
            continue
        try:
            v = float(text)
        except ValueError:
            raise MatrixMarketError("malformed vector entry", lineno) from None
        if not math.isfinite(v):
            raise MatrixMarketError("non-finite vector entry", lineno)
        vals.append(v)
    return np.asarray(vals, dtype=np.float64)


def write_vector(v) -> str:
    v = np.asarray(v, dtype=np.float64)
    return "".join(f"{float(x)!r}\n" for x in v)


_DISTS = ("uniform", "power-law", "k-regular")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic square sparse matrix.

    Exactly one of ``density`` (uniform, power-law) or ``degree`` (k-regular)
    applies.  Generation is deterministic for a fixed seed.
    """

    dist: str
    n: int
    density: float | None = None
    degree: int | None = None
    seed: int = 0
    zipf_exponent: float = 2.0

    def __post_init__(self):
        if self.dist not in _DISTS:
            raise ValueError(f"unknown distribution {self.dist!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.dist == "k-regular":
            if self.degree is None or self.density is not None:
                raise ValueError("k-regular takes degree, not density")
            if not (0 <= self.degree <= self.n):
                raise ValueError(f"degree {self.degree} incompatible with n={self.n}")
        else:
            if self.density is None or self.degree is not None:
                raise ValueError(f"{self.dist} takes density, not degree")
            if not (0.0 < self.density <= 1.0):
                raise ValueError("density must be in (0, 1]")
        if self.zipf_exponent <= 1.0:
            raise ValueError("zipf exponent must be > 1")


def _bernoulli_positions(rng, total, p):
    """Indices of successes of a Bernoulli(p) process over ``total`` cells,
    sampled by geometric gap skipping (exact distribution, O(successes))."""
    if p >= 1.0:
        return np.arange(total, dtype=np.int64)
    mean = total * p
    chunk = max(int(mean + 6.0 * math.sqrt(mean * (1.0 - p))) + 16, 1024)
    parts = []
    pos = -1
    while pos < total:
        gaps = rng.geometric(p, chunk).astype(np.int64)
        run = pos + np.cumsum(gaps)
        parts.append(run)
        pos = int(run[-1])
    cat = np.concatenate(parts)
    return cat[cat < total]


def _distinct_columns(rng, n, k):
    cols = rng.choice(n, size=k, replace=False)
    cols.sort()
    return cols


def generate(spec: SynthSpec) -> SparseMatrix:
    """Generate a synthetic matrix; values are uniform on (0, 1].

    uniform    - every cell independently nonzero with probability ``density``.
    k-regular  - exactly ``degree`` nonzeros per row, distinct uniform columns.
    power-law  - row degrees from a capped Zipf law (default exponent 2.0)
                 rescaled so the expected total nnz is about density * n**2.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    if spec.dist == "uniform":
        pos = _bernoulli_positions(rng, n * n, spec.density)
        rows, cols = np.divmod(pos, n)
    elif spec.dist == "k-regular":
        k = spec.degree
        rows = np.repeat(np.arange(n, dtype=np.int64), k)
        cols = (
            np.concatenate([_distinct_columns(rng, n, k) for _ in range(n)])
            if k
            else np.empty(0, dtype=np.int64)
        )
    else:  # power-law
        raw = np.minimum(rng.zipf(spec.zipf_exponent, size=n), n).astype(np.float64)
        target = spec.density * n * n
        degrees = np.minimum(np.rint(raw * (target / raw.sum())), n).astype(np.int64)
        rows = np.repeat(np.arange(n, dtype=np.int64), degrees)
        cols = (
            np.concatenate([_distinct_columns(rng, n, int(k)) for k in degrees if k])
            if degrees.sum()
            else np.empty(0, dtype=np.int64)
        )
    values = 1.0 - rng.random(rows.size)
    return SparseMatrix(n, n, rows, cols, values)


def reference_spmv(mat: SparseMatrix, v) -> np.ndarray:
    """Ground-truth y = M v with per-row accumulation in ascending column
    order; the oracle every simulated datapath is compared against."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (mat.n,):
        raise ValueError(f"vector length {v.shape} does not match n={mat.n}")
    y = np.zeros(mat.m)
    if mat.nnz:
        prod = mat.values * v[mat.cols]
        present, starts = np.unique(mat.rows, return_index=True)
        y[present] = np.add.reduceat(prod, starts)
    return y
