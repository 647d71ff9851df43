"""Deterministic point-set generation in the unit hypercube.

Three generator kinds share one index-addressable interface:

* ``pseudo``  -- SplitMix64 pseudo-random stream mapped to [0, 1) doubles.
* ``halton``  -- radical-inverse sequence, coordinate j in the j-th prime
  base, optionally scrambled with the reverse-radix digit permutation.
* ``sobol``   -- Gray-code ordered binary digital sequence built from the
  bundled Joe-Kuo D(6) direction numbers (dimensions up to 1111),
  optionally scrambled with a random linear lower-triangular bit matrix
  plus digital shift.

Skip/leap decimation is uniform across kinds: row i of a generated matrix
is the point at effective index ``skip + i * (leap + 1)``, i.e. "leap 100"
keeps every 101st point of the underlying sequence. For the pseudo kind
decimation has no statistical effect (a decimated pseudo-random stream is
still pseudo-random) but it is applied all the same so that the index
arithmetic is identical for every kind.

All point generation is pure and random-access: ``point_at(i, spec)``
equals row i of any batch containing it, bitwise. The pseudo stream is
random-access too because the SplitMix64 state after k draws is just
``seed + k * GAMMA (mod 2^64)``, so parallel generation by rows cannot
depend on scheduling.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigurationError

MAX_DIMENSION = 1111
MAX_INDEX = 1 << 52  # effective sequence indices must stay below this

SEQUENCE_KINDS = ("pseudo", "halton", "sobol")
SCRAMBLE_KINDS = ("none", "digit_permutation", "linear_matrix")

SOBOL_BITS = 52  # direction integers carry 52 bits so values are exact doubles

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_U64_GAMMA = np.uint64(_GAMMA)


@dataclass(frozen=True)
class SequenceSpec:
    """Complete description of a point sequence.

    ``seed`` feeds the pseudo stream and the Sobol' linear scramble; the
    Halton digit permutation is a pure function of each base and ignores it.
    """

    kind: str
    dimension: int
    skip: int = 0
    leap: int = 0
    scramble: str = "none"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in SEQUENCE_KINDS:
            raise ConfigurationError(
                f"unknown sequence kind {self.kind!r}; expected one of {SEQUENCE_KINDS}"
            )
        if self.scramble not in SCRAMBLE_KINDS:
            raise ConfigurationError(
                f"unknown scramble {self.scramble!r}; expected one of {SCRAMBLE_KINDS}"
            )
        if self.dimension < 1:
            raise ConfigurationError("dimension must be >= 1")
        if self.dimension > MAX_DIMENSION:
            raise ConfigurationError(
                f"dimension {self.dimension} exceeds the {MAX_DIMENSION}-dimension "
                "limit of the bundled prime and direction-number tables"
            )
        if self.skip < 0 or self.leap < 0:
            raise ConfigurationError("skip and leap must be non-negative")
        if not 0 <= self.seed < (1 << 64):
            raise ConfigurationError("seed must fit in 64 unsigned bits")
        if self.kind == "halton" and self.scramble == "linear_matrix":
            raise ConfigurationError(
                "linear_matrix scrambling applies to sobol only; "
                "halton uses digit_permutation"
            )
        if self.kind == "sobol" and self.scramble == "digit_permutation":
            raise ConfigurationError(
                "digit_permutation scrambling applies to halton only; "
                "sobol uses linear_matrix"
            )
        if self.kind == "pseudo" and self.scramble != "none":
            raise ConfigurationError("the pseudo kind does not support scrambling")

    def effective_index(self, i: int) -> int:
        return self.skip + i * (self.leap + 1)


@dataclass(frozen=True)
class UnitPointMatrix:
    """N x d sample matrix in [0, 1)^d with generator provenance."""

    values: np.ndarray
    spec: SequenceSpec
    index_origin: int

    @property
    def n_points(self) -> int:
        return self.values.shape[0]

    @property
    def dimension(self) -> int:
        return self.values.shape[1]


# --------------------------------------------------------------------------
# SplitMix64 pseudo stream
# --------------------------------------------------------------------------

def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def pseudo_uniform_stream(seed: int) -> Iterator[float]:
    """Infinite SplitMix64 stream of doubles in [0, 1).

    Each 64-bit output word is mapped to [0, 1) by its top 53 bits, so every
    value is an exact multiple of 2^-53. SplitMix64 has period 2^64 and
    passes BigCrush; its state advances by a fixed constant, which is what
    makes the stream O(1)-skippable (see `_pseudo_block`).
    """
    state = seed & _MASK64
    while True:
        state = (state + _GAMMA) & _MASK64
        yield (_mix64(state) >> 11) * 2.0**-53


def _pseudo_block(seed: int, start: int, count: int) -> np.ndarray:
    """Draws ``start .. start+count-1`` of the stream, vectorized.

    Bitwise identical to consuming `pseudo_uniform_stream`: draw k comes
    from state ``seed + (k+1) * GAMMA`` pushed through the SplitMix64 mixer.
    """
    k = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + k * _U64_GAMMA
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


# --------------------------------------------------------------------------
# Primes and radical inverses (Halton)
# --------------------------------------------------------------------------

@lru_cache(maxsize=1)
def _primes() -> tuple[int, ...]:
    """First MAX_DIMENSION primes (sieve; the 1111th prime is 8933)."""
    limit = 9000
    sieve = np.ones(limit, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(limit**0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    primes = tuple(int(p) for p in np.nonzero(sieve)[0][:MAX_DIMENSION])
    assert len(primes) == MAX_DIMENSION
    return primes


def prime_for_dimension(j: int) -> int:
    """Base used by Halton coordinate ``j`` (0-based): the (j+1)-th prime."""
    if not 0 <= j < MAX_DIMENSION:
        raise ConfigurationError(
            f"coordinate {j} exceeds the {MAX_DIMENSION}-entry prime table"
        )
    return _primes()[j]


def _radical_inverse_many(
    indices: np.ndarray, base: int, permutation: Sequence[int] | None = None
) -> np.ndarray:
    """Radical inverses of an int64 index array in the given base.

    Accumulates with a Horner recurrence from the most significant digit so
    the rounding error stays below 2^-50; exact for base 2. The optional
    digit permutation is applied to every digit before reflection (leading
    zeros are invisible because any valid permutation fixes 0).
    """
    if base < 2:
        raise ValueError(f"radical inverse base must be >= 2, got {base}")
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and int(indices.min()) < 0:
        raise ValueError("sequence indices must be non-negative")
    if indices.size and int(indices.max()) >= MAX_INDEX:
        raise ValueError(f"sequence indices must be below 2^52, got {indices.max()}")
    perm = None
    if permutation is not None:
        perm = np.asarray(permutation, dtype=np.int64)
        if perm.shape != (base,) or perm[0] != 0:
            raise ValueError("digit permutation must have length base and fix 0")
    n_digits = 1
    top = int(indices.max()) if indices.size else 0
    while base**n_digits <= top:
        n_digits += 1
    out = np.zeros(indices.shape, dtype=np.float64)
    inv_base = 1.0 / base
    for step in range(n_digits - 1, -1, -1):
        digit = (indices // base**step) % base
        if perm is not None:
            digit = perm[digit]
        out = (out + digit) * inv_base
    return out


def radical_inverse(index: int, base: int) -> float:
    """Reflect the base-b digits of ``index`` about the radix point."""
    return float(_radical_inverse_many(np.array([index]), base)[0])


@lru_cache(maxsize=None)
def digit_permutation_for_base(base: int) -> tuple[int, ...]:
    """Reverse-radix digit permutation for one Halton base.

    Bit-reverse 0 .. 2^w - 1 within w = ceil(log2(base)) bits and drop the
    values >= base; the surviving order is the permutation. It fixes 0, so
    scrambling never pushes a coordinate out of [0, 1). Base 2 gives the
    identity.
    """
    if base < 2:
        raise ValueError(f"permutation base must be >= 2, got {base}")
    width = max(1, (base - 1).bit_length())
    perm = []
    for i in range(1 << width):
        rev = int(format(i, f"0{width}b")[::-1], 2)
        if rev < base:
            perm.append(rev)
    return tuple(perm)


def halton_point(index: int, spec: SequenceSpec) -> np.ndarray:
    """Halton point at sequence position ``index`` (after skip/leap)."""
    return _halton_batch(np.array([index]), spec)[0]


def _halton_batch(indices: np.ndarray, spec: SequenceSpec) -> np.ndarray:
    if spec.kind != "halton":
        raise ConfigurationError(f"halton generator got spec kind {spec.kind!r}")
    eff = spec.skip + np.asarray(indices, dtype=np.int64) * (spec.leap + 1)
    out = np.empty((len(eff), spec.dimension), dtype=np.float64)
    for j in range(spec.dimension):
        base = prime_for_dimension(j)
        perm = (
            digit_permutation_for_base(base)
            if spec.scramble == "digit_permutation"
            else None
        )
        out[:, j] = _radical_inverse_many(eff, base, perm)
    return out


# --------------------------------------------------------------------------
# Sobol'
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SobolTable:
    """Per-dimension direction integers (SOBOL_BITS wide) plus digital shift."""

    directions: np.ndarray  # (dimension, SOBOL_BITS) uint64
    shift: np.ndarray  # (dimension,) uint64


_direction_file_override: str | None = None


def set_direction_number_path(path: str | None) -> None:
    """Override the bundled direction-number file (None restores it)."""
    global _direction_file_override
    _direction_file_override = path
    _raw_direction_numbers.cache_clear()
    _sobol_base_table.cache_clear()
    _scrambled_sobol_table.cache_clear()


@lru_cache(maxsize=1)
def _raw_direction_numbers() -> tuple[tuple[int, int, tuple[int, ...]], ...]:
    """Parsed (degree, poly coefficients, m-values) per dimension >= 2.

    File format is the Joe-Kuo text layout: one line ``d s a m_1 .. m_s``
    per dimension, '#' comments allowed.
    """
    if _direction_file_override is not None:
        with open(_direction_file_override, "r") as fh:
            text = fh.read()
    else:
        text = (
            resources.files("qmcssa.data").joinpath("joe_kuo_d6_1111.txt").read_text()
        )
    entries: dict[int, tuple[int, int, tuple[int, ...]]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            d, s, a = int(parts[0]), int(parts[1]), int(parts[2])
            m = tuple(int(v) for v in parts[3 : 3 + s])
        except (ValueError, IndexError) as exc:
            raise ConfigurationError(
                f"malformed direction-number line {lineno}: {line!r}"
            ) from exc
        if len(m) != s:
            raise ConfigurationError(
                f"direction-number line {lineno} declares degree {s} "
                f"but carries {len(m)} initial values"
            )
        entries[d] = (s, a, m)
    dims = sorted(entries)
    if not dims or dims[0] != 2 or dims != list(range(2, dims[-1] + 1)):
        raise ConfigurationError(
            "direction-number file must cover contiguous dimensions from 2"
        )
    return tuple(entries[d] for d in dims)


@lru_cache(maxsize=8)
def _sobol_base_table(dimension: int) -> np.ndarray:
    """Unscrambled direction integers, shape (dimension, SOBOL_BITS)."""
    raw = _raw_direction_numbers()
    if dimension > len(raw) + 1:
        raise ConfigurationError(
            f"dimension {dimension} exceeds the direction-number table "
            f"(covers up to {len(raw) + 1})"
        )
    table = np.zeros((dimension, SOBOL_BITS), dtype=np.uint64)
    # dimension 1 is plain van der Corput base 2
    for k in range(1, SOBOL_BITS + 1):
        table[0, k - 1] = 1 << (SOBOL_BITS - k)
    for j in range(1, dimension):
        s, a, m = raw[j - 1]
        v = [0] * (SOBOL_BITS + 1)
        for k in range(1, min(s, SOBOL_BITS) + 1):
            v[k] = m[k - 1] << (SOBOL_BITS - k)
        for k in range(s + 1, SOBOL_BITS + 1):
            vk = v[k - s] ^ (v[k - s] >> s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    vk ^= v[k - i]
            v[k] = vk
        table[j] = v[1:]
    return table


def _scramble_directions(base: np.ndarray, seed: int) -> SobolTable:
    """Left-multiply every generating matrix by a random lower-triangular
    bit matrix with unit diagonal, then add a random digital shift.

    Draw order (documented so tables are reproducible): for each dimension,
    one 64-bit word per matrix row 2..SOBOL_BITS supplying its sub-diagonal
    bits, then one word whose top SOBOL_BITS bits are the shift.
    """
    stream_state = seed & _MASK64

    def next_word() -> int:
        nonlocal stream_state
        stream_state = (stream_state + _GAMMA) & _MASK64
        return _mix64(stream_state)

    dimension = base.shape[0]
    directions = np.zeros_like(base)
    shifts = np.zeros(dimension, dtype=np.uint64)
    for j in range(dimension):
        # row r of L (digit rows are 1-based, digit 1 = most significant):
        # unit diagonal at digit r, random bits at digits 1..r-1.
        rows = []
        for r in range(1, SOBOL_BITS + 1):
            mask = 1 << (SOBOL_BITS - r)
            if r > 1:
                bits = next_word() & ((1 << (r - 1)) - 1)
                for c in range(1, r):
                    if (bits >> (c - 1)) & 1:
                        mask |= 1 << (SOBOL_BITS - c)
            rows.append(mask)
        for k in range(SOBOL_BITS):
            v = int(base[j, k])
            scrambled = 0
            for r, mask in enumerate(rows, start=1):
                if (v & mask).bit_count() & 1:
                    scrambled |= 1 << (SOBOL_BITS - r)
            directions[j, k] = scrambled
        shifts[j] = next_word() >> (64 - SOBOL_BITS)
    return SobolTable(directions=directions, shift=shifts)


@lru_cache(maxsize=8)
def _scrambled_sobol_table(dimension: int, seed: int) -> SobolTable:
    return _scramble_directions(_sobol_base_table(dimension), seed)


def linear_matrix_scramble(spec: SequenceSpec) -> SobolTable:
    """Scrambled direction-number table for a sobol spec (seeded, cached)."""
    if spec.kind != "sobol" or spec.scramble != "linear_matrix":
        raise ConfigurationError(
            "linear_matrix_scramble needs kind=sobol, scramble=linear_matrix"
        )
    return _scrambled_sobol_table(spec.dimension, spec.seed)


def _sobol_table_for(spec: SequenceSpec) -> SobolTable:
    if spec.scramble == "linear_matrix":
        return _scrambled_sobol_table(spec.dimension, spec.seed)
    base = _sobol_base_table(spec.dimension)
    return SobolTable(directions=base, shift=np.zeros(spec.dimension, dtype=np.uint64))


def sobol_point(index: int, spec: SequenceSpec) -> np.ndarray:
    """Sobol' point at sequence position ``index`` (after skip/leap)."""
    return _sobol_batch(np.array([index]), spec)[0]


def _sobol_batch(indices: np.ndarray, spec: SequenceSpec) -> np.ndarray:
    if spec.kind != "sobol":
        raise ConfigurationError(f"sobol generator got spec kind {spec.kind!r}")
    table = _sobol_table_for(spec)
    eff = spec.skip + np.asarray(indices, dtype=np.int64) * (spec.leap + 1)
    if eff.size and int(eff.max()) >= MAX_INDEX:
        raise ValueError(f"sequence indices must be below 2^52, got {eff.max()}")
    gray = eff ^ (eff >> 1)
    gray = gray.astype(np.uint64)
    acc = np.zeros((len(eff), spec.dimension), dtype=np.uint64)
    top = int(gray.max()) if gray.size else 0
    for k in range(max(top.bit_length(), 1)):
        hit = (gray >> np.uint64(k)) & np.uint64(1) == 1
        if hit.any():
            acc[hit] ^= table.directions[:, k]
    acc ^= table.shift[np.newaxis, :]
    return acc.astype(np.float64) * 2.0**-SOBOL_BITS


# --------------------------------------------------------------------------
# Unified interface
# --------------------------------------------------------------------------

def _pseudo_batch(indices: np.ndarray, spec: SequenceSpec) -> np.ndarray:
    """Pseudo rows: point i is the d-tuple at stream tuple position
    ``skip + i * (leap + 1)`` (consecutive tuples when skip = leap = 0)."""
    d = spec.dimension
    out = np.empty((len(indices), d), dtype=np.float64)
    for row, i in enumerate(indices):
        start = (spec.skip + int(i) * (spec.leap + 1)) * d
        out[row] = _pseudo_block(spec.seed, start, d)
    return out


def point_at(index: int, spec: SequenceSpec) -> np.ndarray:
    """Row ``index`` of the sequence as a length-d vector (random access)."""
    if index < 0:
        raise ValueError("sequence indices must be non-negative")
    return _batch(np.array([index]), spec)[0]


def _batch(indices: np.ndarray, spec: SequenceSpec) -> np.ndarray:
    if spec.kind == "pseudo":
        return _pseudo_batch(indices, spec)
    if spec.kind == "halton":
        return _halton_batch(indices, spec)
    return _sobol_batch(indices, spec)


def generate_matrix(spec: SequenceSpec, n_points: int) -> UnitPointMatrix:
    """First ``n_points`` rows of the sequence as a UnitPointMatrix."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    if spec.kind == "pseudo" and spec.leap == 0:
        # contiguous stream block, reshaped row-major
        flat = _pseudo_block(
            spec.seed, spec.skip * spec.dimension, n_points * spec.dimension
        )
        values = flat.reshape(n_points, spec.dimension)
    else:
        values = _batch(np.arange(n_points, dtype=np.int64), spec)
    values.setflags(write=False)
    return UnitPointMatrix(values=values, spec=spec, index_origin=spec.skip)


# --------------------------------------------------------------------------
# CSV export / import
# --------------------------------------------------------------------------

def write_points_csv(points: UnitPointMatrix, stream: io.TextIOBase,
                     include_index: bool = False) -> None:
    """Write a point matrix as CSV with header dim_1..dim_d.

    ``include_index`` prepends an ``index`` column (the engine's on-disk
    schema); the plain layout matches the sequences export contract.
    Floats are written with repr so reading them back is exact.
    """
    writer = csv.writer(stream, lineterminator="\n")
    header = [f"dim_{j + 1}" for j in range(points.dimension)]
    if include_index:
        header = ["index"] + header
    writer.writerow(header)
    for i, row in enumerate(points.values):
        cells = [repr(float(v)) for v in row]
        if include_index:
            cells = [str(i)] + cells
        writer.writerow(cells)


def read_points_csv(stream: io.TextIOBase) -> np.ndarray:
    """Read a dim_*-style CSV (with or without index column) into an array."""
    reader = csv.reader(stream)
    header = next(reader)
    drop = 1 if header and header[0] == "index" else 0
    rows = [[float(c) for c in row[drop:]] for row in reader if row]
    return np.asarray(rows, dtype=np.float64)
