"""Bounded (mixed-)integer programs: data model, random generator, checks, file format.

Problems have the form ``min c@x  s.t.  A x <= b,  lb <= x <= ub``, with
``x_j`` integral wherever ``int_mask[j] == 1``.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
FEAS_TOL = 1e-7
INT_TOL = 1e-6
BOX = (-20, 20)
COEF_RANGE = (-10, 10)
WITNESS_RANGE = (1, 10)
SLACK_RANGE = (1, 10)
MAX_RESAMPLES = 10_000


class Kind(enum.Enum):
    IP = "IP"
    MIP = "MIP"


class RejectionLimitExceeded(RuntimeError):
    pass


class InstanceFormatError(ValueError):
    """Malformed instance file; message names the offending line or field."""


@dataclass(frozen=True, eq=False)
class MipInstance:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    int_mask: np.ndarray
    lower_bound: int = BOX[0]
    upper_bound: int = BOX[1]
    seed: int = 0
    kind: Kind = Kind.IP
    witness: np.ndarray | None = None

    def __post_init__(self):
        A = np.array(self.A, dtype=np.int64, ndmin=2)
        m, n = A.shape
        b = np.array(self.b, dtype=np.int64).reshape(-1)
        c = np.array(self.c, dtype=np.int64).reshape(-1)
        mask = np.array(self.int_mask, dtype=np.int8).reshape(-1)
        if b.size != m or c.size != n or mask.size != n:
            raise ValueError(f"inconsistent shapes: A {A.shape}, b {b.size}, c {c.size}, mask {mask.size}")
        if not np.all((mask == 0) | (mask == 1)):
            raise ValueError("int_mask entries must be 0 or 1")
        if self.lower_bound > self.upper_bound:
            raise ValueError("lower_bound exceeds upper_bound")
        kind = Kind(self.kind)
        if kind is Kind.IP and not np.all(mask == 1):
            raise ValueError("IP instances must mark every variable integral")
        for arr in (A, b, c, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "int_mask", mask)
        object.__setattr__(self, "kind", kind)
        if self.witness is not None:
            w = np.array(self.witness, dtype=np.int64).reshape(-1)
            if w.size != n:
                raise ValueError("witness length must equal n")
            w.setflags(write=False)
            object.__setattr__(self, "witness", w)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def lower(self) -> np.ndarray:
        return np.full(self.n, float(self.lower_bound))

    @property
    def upper(self) -> np.ndarray:
        return np.full(self.n, float(self.upper_bound))

    def __eq__(self, other):
        if not isinstance(other, MipInstance):
            return NotImplemented
        return dumps(self) == dumps(other)

    def __hash__(self):
        return hash(dumps(self))

    def digest(self) -> str:
        """Content hash of the serialized instance."""
        return hashlib.sha256(dumps(self).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class FeasibilityReport:
    constraint_violation: float
    integrality_violation: float
    feasible: bool


def generate(seed: int, n: int, m: int, kind: Kind | str = Kind.IP) -> MipInstance:
    """Draw a random instance with integer data.

    ``A`` and ``c`` are uniform on [-10, 10]; a witness ``xi`` uniform on
    [1, 10]^n and slack ``eps`` uniform on [1, 10]^m give ``b = A xi + eps``,
    so ``xi`` is always strictly feasible.  Whole draws are rejected until
    ``b`` has a negative entry (the origin is then infeasible).
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    kind = Kind(kind)
    rng = np.random.default_rng(seed)
    lo, hi = COEF_RANGE
    for _ in range(MAX_RESAMPLES):
        A = rng.integers(lo, hi + 1, size=(m, n))
        xi = rng.integers(WITNESS_RANGE[0], WITNESS_RANGE[1] + 1, size=n)
        eps = rng.integers(SLACK_RANGE[0], SLACK_RANGE[1] + 1, size=m)
        b = A @ xi + eps
        if kind is Kind.IP:
            mask = np.ones(n, dtype=np.int8)
        else:
            mask = rng.integers(0, 2, size=n)
            while not mask.any():
                mask = rng.integers(0, 2, size=n)
        c = rng.integers(lo, hi + 1, size=n)
        if np.any(b < 0):
            return MipInstance(A, b, c, mask, BOX[0], BOX[1], int(seed), kind, xi)
    raise RejectionLimitExceeded(
        f"no instance with a negative right-hand side after {MAX_RESAMPLES} draws (n={n}, m={m})"
    )


def constraint_violation(inst: MipInstance, x) -> float:
    """Sum of the positive parts of ``A x - b``."""
    r = inst.A @ np.asarray(x, dtype=float) - inst.b
    return float(np.sum(np.maximum(r, 0.0)))


def check(inst: MipInstance, x) -> FeasibilityReport:
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise ValueError(f"expected a point of length {inst.n}, got shape {x.shape}")
    cv = constraint_violation(inst, x)
    masked = x[inst.int_mask.astype(bool)]
    iv = float(np.max(np.abs(masked - round_half_away(masked)), initial=0.0))
    return FeasibilityReport(cv, iv, cv <= FEAS_TOL and iv <= INT_TOL)


def round_half_away(x):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def round_partial(x, int_mask) -> np.ndarray:
    """Round the masked coordinates to the nearest integer (ties away from zero)."""
    x = np.asarray(x, dtype=float)
    mask = np.asarray(int_mask).astype(bool)
    if x.shape != mask.shape:
        raise ValueError("x and int_mask lengths differ")
    out = x.copy()
    out[mask] = round_half_away(x[mask])
    return out


# -- file format --------------------------------------------------------------

_FIELDS = ("version", "kind", "n", "m", "A", "b", "c", "int_mask", "lb", "ub", "seed", "witness")


def _ints(v) -> str:
    return " ".join(str(int(t)) for t in v)


def dumps(inst: MipInstance) -> str:
    lines = [
        f"version: {FORMAT_VERSION}",
        f"kind: {inst.kind.value}",
        f"n: {inst.n}",
        f"m: {inst.m}",
        "A: " + " | ".join(_ints(row) for row in inst.A),
        f"b: {_ints(inst.b)}",
        f"c: {_ints(inst.c)}",
        f"int_mask: {_ints(inst.int_mask)}",
        f"lb: {inst.lower_bound}",
        f"ub: {inst.upper_bound}",
        f"seed: {inst.seed}",
        "witness: " + (_ints(inst.witness) if inst.witness is not None else "none"),
    ]
    return "\n".join(lines) + "\n"


def loads(text: str) -> MipInstance:
    raw: dict[str, tuple[int, str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep:
            raise InstanceFormatError(f"line {lineno}: expected 'field: value'")
        if key not in _FIELDS:
            raise InstanceFormatError(f"line {lineno}: unknown field '{key}'")
        if key in raw:
            raise InstanceFormatError(f"line {lineno}: duplicate field '{key}'")
        raw[key] = (lineno, value.strip())
    for key in _FIELDS:
        if key not in raw:
            raise InstanceFormatError(f"missing field '{key}'")

    def ints(key):
        lineno, value = raw[key]
        try:
            return [int(t) for t in value.split()]
        except ValueError:
            raise InstanceFormatError(f"line {lineno}: field '{key}' must hold integers") from None

    def scalar(key):
        vals = ints(key)
        if len(vals) != 1:
            raise InstanceFormatError(f"line {raw[key][0]}: field '{key}' must be a single integer")
        return vals[0]

    version = scalar("version")
    if version != FORMAT_VERSION:
        raise InstanceFormatError(f"unsupported version {version} (expected {FORMAT_VERSION})")
    n, m = scalar("n"), scalar("m")
    a_line, a_text = raw["A"]
    rows = [r.split() for r in a_text.split("|")]
    try:
        A = [[int(t) for t in r] for r in rows]
    except ValueError:
        raise InstanceFormatError(f"line {a_line}: field 'A' must hold integers") from None
    if len(A) != m or any(len(r) != n for r in A):
        raise InstanceFormatError(f"line {a_line}: field 'A' must be {m} rows of {n} integers")
    b, c, mask = ints("b"), ints("c"), ints("int_mask")
    for key, vals, size in (("b", b, m), ("c", c, n), ("int_mask", mask, n)):
        if len(vals) != size:
            raise InstanceFormatError(f"line {raw[key][0]}: field '{key}' needs {size} entries, got {len(vals)}")
    w_line, w_text = raw["witness"]
    witness = None if w_text == "none" else ints("witness")
    if witness is not None and len(witness) != n:
        raise InstanceFormatError(f"line {w_line}: field 'witness' needs {n} entries")
    k_line, k_text = raw["kind"]
    try:
        kind = Kind(k_text)
    except ValueError:
        raise InstanceFormatError(f"line {k_line}: field 'kind' must be IP or MIP") from None
    try:
        return MipInstance(A, b, c, mask, scalar("lb"), scalar("ub"), scalar("seed"), kind, witness)
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from None


def save(inst: MipInstance, path) -> None:
    Path(path).write_text(dumps(inst))


def load(path) -> MipInstance:
    return loads(Path(path).read_text())


def relaxation(inst: MipInstance):
    """The continuous relaxation as an LP over the instance box."""
    from .lp import DenseLp

    return DenseLp(inst.c, inst.A, inst.b, inst.lower, inst.upper)
