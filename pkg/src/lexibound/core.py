"""Shared domain types: loss matrices, behavioral deduplication, seeded RNG streams.

All other modules build on the types here. Matrices are immutable after
construction and safe to share across concurrent tasks; every stochastic
operation takes an explicit :class:`RngStream`, so there is no global RNG
state anywhere in the package.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path

import numpy as np

__all__ = [
    "LossKind",
    "MatrixError",
    "KindMismatchError",
    "ErrorMatrix",
    "DedupProfile",
    "RandomSource",
    "RngStream",
    "deduplicate",
    "identity_profile",
    "exact_fraction",
    "read_matrix_csv",
    "write_matrix_csv",
]

# Largest integer magnitude exactly representable in a float64 cell.
_MAX_EXACT_INT = float(2**53)


class LossKind(Enum):
    """How loss values compare: exact equality vs. a tolerance at use sites."""

    DISCRETE = "discrete"
    REAL = "real"


class MatrixError(ValueError):
    """Malformed loss matrix: bad shape, non-finite cells, or parse failure."""


class KindMismatchError(MatrixError):
    """An operation received the wrong LossKind (e.g. real losses where
    discrete ones are required; binarize real losses first)."""


def exact_fraction(value) -> Fraction:
    """Read a threshold/grid parameter as an exact rational.

    Floats go through their shortest round-trip decimal (``str``), so 0.05
    means exactly 1/20 rather than the nearest binary float. Strings and
    Fractions pass through unchanged in value.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(str(value))


@dataclass(frozen=True, eq=False)
class ErrorMatrix:
    """N x C table of per-case losses for a population.

    Entries are stored as float64 regardless of kind; DISCRETE matrices must
    contain exactly representable integers (validated on construction). The
    array is frozen (read-only) after construction.
    """

    losses: np.ndarray
    kind: LossKind = LossKind.DISCRETE
    individual_labels: tuple[str, ...] | None = None
    case_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.asarray(self.losses, dtype=np.float64)
        if arr.ndim != 2:
            raise MatrixError(f"losses must be 2-dimensional, got shape {arr.shape}")
        n, c = arr.shape
        if n < 1 or c < 1:
            raise MatrixError(f"matrix must be at least 1x1, got {n}x{c}")
        if not np.isfinite(arr).all():
            raise MatrixError("losses contain NaN or infinite entries")
        if self.kind is LossKind.DISCRETE:
            if not (arr == np.trunc(arr)).all():
                raise MatrixError("discrete matrix contains non-integer entries")
            if np.abs(arr).max() > _MAX_EXACT_INT:
                raise MatrixError("discrete entries exceed exact float64 integer range")
        # Copy, canonicalise -0.0 to 0.0 (keeps row byte-signatures unique),
        # and freeze.
        arr = arr + 0.0
        arr.flags.writeable = False
        object.__setattr__(self, "losses", arr)
        if self.individual_labels is not None:
            labels = tuple(self.individual_labels)
            if len(labels) != n:
                raise MatrixError(f"{len(labels)} individual labels for {n} rows")
            object.__setattr__(self, "individual_labels", labels)
        if self.case_labels is not None:
            labels = tuple(self.case_labels)
            if len(labels) != c:
                raise MatrixError(f"{len(labels)} case labels for {c} columns")
            object.__setattr__(self, "case_labels", labels)

    @property
    def n_individuals(self) -> int:
        return self.losses.shape[0]

    @property
    def n_cases(self) -> int:
        return self.losses.shape[1]

    def row_bytes(self, i: int) -> bytes:
        """Canonical byte signature of row i (valid dedup key for DISCRETE)."""
        return self.losses[i].tobytes()

    def require_kind(self, kind: LossKind, operation: str) -> None:
        if self.kind is not kind:
            hint = " (binarize real-valued losses first)" if kind is LossKind.DISCRETE else ""
            raise KindMismatchError(
                f"{operation} requires {kind.value} losses, got {self.kind.value}{hint}"
            )

    def __eq__(self, other) -> bool:
        if not isinstance(other, ErrorMatrix):
            return NotImplemented
        return (
            self.kind is other.kind
            and self.losses.shape == other.losses.shape
            and self.losses.tobytes() == other.losses.tobytes()
            and self.individual_labels == other.individual_labels
            and self.case_labels == other.case_labels
        )

    def __repr__(self) -> str:
        return f"ErrorMatrix({self.n_individuals}x{self.n_cases}, {self.kind.value})"


@dataclass(frozen=True, eq=False)
class DedupProfile:
    """Unique behavioral rows plus the clone groups behind each row.

    ``groups[u]`` lists the original individual indices (ascending) whose loss
    vector equals row ``u`` of ``unique``. Groups partition the original
    population.
    """

    unique: ErrorMatrix
    groups: tuple[tuple[int, ...], ...]
    _rows: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.groups) != self.unique.n_individuals:
            raise MatrixError(
                f"{len(self.groups)} groups for {self.unique.n_individuals} unique rows"
            )
        groups = tuple(tuple(g) for g in self.groups)
        seen: set[int] = set()
        for g in groups:
            if not g:
                raise MatrixError("empty clone group")
            if list(g) != sorted(g):
                raise MatrixError("clone group indices must be ascending")
            if seen.intersection(g):
                raise MatrixError("clone groups overlap")
            seen.update(g)
        if seen != set(range(len(seen))):
            raise MatrixError("clone groups do not partition 0..N-1")
        if self.unique.kind is LossKind.DISCRETE:
            signatures = {self.unique.row_bytes(i) for i in range(self.unique.n_individuals)}
            if len(signatures) != self.unique.n_individuals:
                raise MatrixError("unique matrix contains duplicate rows")
        object.__setattr__(self, "groups", groups)
        # Plain-list row view for the selection inner loop (numpy row access
        # is an order of magnitude slower at small pool sizes).
        object.__setattr__(self, "_rows", self.unique.losses.tolist())

    @property
    def n_unique(self) -> int:
        return self.unique.n_individuals

    @property
    def n_original(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def n_cases(self) -> int:
        return self.unique.n_cases

    def expand_rows(self) -> np.ndarray:
        """Reconstruct the original N x C loss table from unique rows + groups."""
        out = np.empty((self.n_original, self.n_cases), dtype=np.float64)
        for u, group in enumerate(self.groups):
            for i in group:
                out[i] = self.unique.losses[u]
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, DedupProfile):
            return NotImplemented
        return self.unique == other.unique and self.groups == other.groups


def deduplicate(matrix: ErrorMatrix) -> DedupProfile:
    """Collapse behavioral clones: one row per distinct loss vector.

    Unique rows keep first-occurrence order; each group lists the original
    indices sharing that behavior, ascending. Rejects REAL matrices: tolerance
    equality is not transitive, so real losses must be binarized first.
    """
    matrix.require_kind(LossKind.DISCRETE, "deduplicate")
    index_of: dict[bytes, int] = {}
    order: list[int] = []
    groups: list[list[int]] = []
    for i in range(matrix.n_individuals):
        key = matrix.row_bytes(i)
        u = index_of.get(key)
        if u is None:
            index_of[key] = len(order)
            order.append(i)
            groups.append([i])
        else:
            groups[u].append(i)
    labels = None
    if matrix.individual_labels is not None:
        labels = tuple(matrix.individual_labels[i] for i in order)
    unique = ErrorMatrix(
        matrix.losses[order],
        kind=matrix.kind,
        individual_labels=labels,
        case_labels=matrix.case_labels,
    )
    return DedupProfile(unique=unique, groups=tuple(tuple(g) for g in groups))


def identity_profile(matrix: ErrorMatrix) -> DedupProfile:
    """Wrap a matrix as a profile where every row is its own behavior.

    Intended for REAL matrices (where exact dedup is undefined) and for
    duplicate-free DISCRETE ones; a DISCRETE matrix with duplicate rows is
    rejected, since that would break the profile's uniqueness invariant.
    """
    groups = tuple((i,) for i in range(matrix.n_individuals))
    return DedupProfile(unique=matrix, groups=groups)


# ---------------------------------------------------------------------------
# Deterministic randomness
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """splitmix64 finalizer; bijective on 64-bit ints."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RandomSource:
    """Mutable splitmix64 generator; one instance per selection event/trial.

    Pure 64-bit integer arithmetic, so sequences are bit-identical across
    platforms and Python versions. Construction is O(1), which matters when
    millions of independent trial streams are spawned.
    """

    __slots__ = ("_state",)

    def __init__(self, state: int):
        self._state = state & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix64(self._state)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n); unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError(f"randbelow bound must be positive, got {n}")
        limit = ((1 << 64) // n) * n
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0**-53


@dataclass(frozen=True)
class RngStream:
    """Addressable deterministic random stream.

    The same ``(master_seed, stream_index)`` pair yields an identical value
    sequence on every run and in any number of concurrent tasks. Substreams
    derived from distinct indices of the same parent are guaranteed distinct
    (the index map is injective per parent).
    """

    master_seed: int
    stream_index: int = 0

    def source(self) -> RandomSource:
        state = _mix64(_mix64(self.master_seed & _MASK64) ^ (self.stream_index & _MASK64))
        return RandomSource(state)

    def substream(self, index: int) -> "RngStream":
        child = _mix64(_mix64(self.stream_index & _MASK64) ^ (index & _MASK64))
        return RngStream(self.master_seed, child)


# ---------------------------------------------------------------------------
# CSV interchange format
# ---------------------------------------------------------------------------
#
# One matrix per file: an optional first header row (case_0,case_1,...), then
# one row of decimal numbers per individual. A sidecar descriptor at
# <file>.json may declare {"kind": "discrete"|"real"}; without it, the kind
# defaults to discrete when every cell parses as an integer literal.


def _is_int_literal(cell: str) -> bool:
    try:
        int(cell)
        return True
    except ValueError:
        return False


def _is_float_literal(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _sidecar_kind(path: Path) -> LossKind | None:
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        return None
    try:
        descriptor = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise MatrixError(f"{sidecar}: invalid JSON descriptor: {exc}") from exc
    kind = descriptor.get("kind")
    if kind not in ("discrete", "real"):
        raise MatrixError(f"{sidecar}: descriptor kind must be 'discrete' or 'real', got {kind!r}")
    return LossKind(kind)


def read_matrix_csv(path: str | Path) -> ErrorMatrix:
    """Parse a loss matrix from CSV (with optional sidecar kind descriptor).

    Raises :class:`MatrixError` naming the offending 1-based line on ragged
    or non-numeric rows.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MatrixError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise MatrixError(f"{path}: empty file")

    case_labels = None
    start_line = 1
    first = [cell.strip() for cell in rows[0]]
    if not all(_is_float_literal(cell) for cell in first):
        case_labels = tuple(first)
        start_line = 2
        rows = rows[1:]
        if not rows:
            raise MatrixError(f"{path}: header but no data rows")

    width = len(rows[0])
    data: list[list[float]] = []
    all_int = True
    for offset, row in enumerate(rows):
        lineno = start_line + offset
        cells = [cell.strip() for cell in row]
        if len(cells) != width:
            raise MatrixError(f"{path}: line {lineno}: expected {width} cells, got {len(cells)}")
        parsed: list[float] = []
        for col, cell in enumerate(cells):
            if not _is_float_literal(cell):
                raise MatrixError(f"{path}: line {lineno}: cell {col + 1} is not a number: {cell!r}")
            if all_int and not _is_int_literal(cell):
                all_int = False
            parsed.append(float(cell))
        data.append(parsed)
    if case_labels is not None and len(case_labels) != width:
        raise MatrixError(f"{path}: header has {len(case_labels)} labels for {width} columns")

    kind = _sidecar_kind(path)
    if kind is None:
        kind = LossKind.DISCRETE if all_int else LossKind.REAL
    try:
        return ErrorMatrix(np.array(data, dtype=np.float64), kind=kind, case_labels=case_labels)
    except MatrixError as exc:
        raise MatrixError(f"{path}: {exc}") from exc


def write_matrix_csv(
    matrix: ErrorMatrix,
    path: str | Path,
    header: bool = True,
    write_descriptor: bool = False,
) -> None:
    """Write a matrix in the CSV interchange format (byte-stable output).

    Discrete entries are written as bare integers, real ones via repr (exact
    round-trip). ``write_descriptor`` adds the <file>.json kind sidecar.
    """
    path = Path(path)
    lines: list[str] = []
    if header:
        labels = matrix.case_labels or tuple(f"case_{c}" for c in range(matrix.n_cases))
        lines.append(",".join(labels))
    discrete = matrix.kind is LossKind.DISCRETE
    for row in matrix.losses:
        if discrete:
            lines.append(",".join(str(int(v)) for v in row))
        else:
            lines.append(",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
    if write_descriptor:
        Path(str(path) + ".json").write_text(json.dumps({"kind": matrix.kind.value}) + "\n")
