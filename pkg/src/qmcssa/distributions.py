"""Triangular shock distributions parameterized by (min, median, max).

The classic triangular distribution takes a mode; sensitivity designs are
usually stated as minimum / median / maximum instead, so the mode is solved
for analytically. Not every median is attainable: as the mode sweeps
[a, b] the median covers only

    [a + (b - a)(1 - 1/sqrt(2)),  a + (b - a)/sqrt(2)]

and anything outside that interval is rejected.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, InfeasibleMedianError
from .sequences import SequenceSpec, UnitPointMatrix

_MEDIAN_LO = 1.0 - 1.0 / math.sqrt(2.0)
_MEDIAN_HI = 1.0 / math.sqrt(2.0)


def solve_mode(minimum: float, median: float, maximum: float) -> float:
    """Mode of the triangular distribution with the given median.

    Closed form from inverting the triangular CDF at 1/2:
    c = a + 2(m-a)^2/(b-a) when the median sits at or above the midpoint,
    mirrored otherwise.
    """
    a, m, b = float(minimum), float(median), float(maximum)
    if not a < b:
        raise InfeasibleMedianError(f"need min < max, got [{a}, {b}]")
    lo = a + (b - a) * _MEDIAN_LO
    hi = a + (b - a) * _MEDIAN_HI
    if not lo <= m <= hi:
        raise InfeasibleMedianError(
            f"median {m} is not attainable on [{a}, {b}]; "
            f"feasible medians lie in [{lo}, {hi}]"
        )
    if m >= 0.5 * (a + b):
        return a + 2.0 * (m - a) ** 2 / (b - a)
    return b - 2.0 * (b - m) ** 2 / (b - a)


@dataclass(frozen=True)
class TriangularSpec:
    """Shock distribution on [minimum, maximum] pinned by its median.

    The mode is derived at construction and cached; a degenerate
    zero-width interval is rejected (drop the dimension instead).
    """

    minimum: float
    median: float
    maximum: float
    mode: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", solve_mode(self.minimum, self.median, self.maximum))

    def mean(self) -> float:
        return (self.minimum + self.mode + self.maximum) / 3.0

    def variance(self) -> float:
        a, b, c = self.minimum, self.maximum, self.mode
        return (a * a + b * b + c * c - a * b - a * c - b * c) / 18.0


def triangular_cdf(x, spec: TriangularSpec):
    """CDF of the triangular distribution (vectorized over x)."""
    a, b, c = spec.minimum, spec.maximum, spec.mode
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    width = b - a
    out = np.zeros(x.shape, dtype=np.float64)
    if c > a:
        m = (x > a) & (x <= c)
        out[m] = (x[m] - a) ** 2 / (width * (c - a))
    if c < b:
        m = (x > c) & (x < b)
        out[m] = 1.0 - (b - x[m]) ** 2 / (width * (b - c))
    out[x >= b] = 1.0
    return float(out[0]) if scalar else out


def triangular_inverse_cdf(u, spec: TriangularSpec):
    """Quantile function; u = 0 maps to the minimum, u = 1 to the maximum.

    Vectorized over u. Values exactly at the break point (c-a)/(b-a) land
    on the mode through either branch, so the split is seamless.
    """
    a, b, c = spec.minimum, spec.maximum, spec.mode
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError("quantile argument must lie in [0, 1]")
    width = b - a
    split = (c - a) / width
    lower = a + np.sqrt(u * width * (c - a))
    upper = b - np.sqrt((1.0 - u) * width * (b - c))
    out = np.where(u <= split, lower, upper)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DesignDimension:
    """One shock dimension: label, optional grouping tags, distribution."""

    label: str
    spec: TriangularSpec
    region: str = ""
    factor: str = ""


@dataclass(frozen=True)
class InputDesign:
    """Ordered shock dimensions driving a sensitivity experiment."""

    dimensions: tuple[DesignDimension, ...]

    def __post_init__(self) -> None:
        labels = [d.label for d in self.dimensions]
        if len(set(labels)) != len(labels):
            dupes = sorted({l for l in labels if labels.count(l) > 1})
            raise ConfigurationError(f"duplicate design labels: {dupes}")

    def __len__(self) -> int:
        return len(self.dimensions)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(d.label for d in self.dimensions)

    @property
    def specs(self) -> tuple[TriangularSpec, ...]:
        return tuple(d.spec for d in self.dimensions)


@dataclass(frozen=True)
class ShockMatrix:
    """Transformed sample matrix in shock units, with labels and provenance."""

    values: np.ndarray
    labels: tuple[str, ...]
    source_spec: SequenceSpec | None = None
    index_origin: int = 0

    @property
    def n_points(self) -> int:
        return self.values.shape[0]


def transform_matrix(points: UnitPointMatrix, design: InputDesign) -> ShockMatrix:
    """Map unit-hypercube samples through each dimension's quantile function."""
    if points.dimension != len(design):
        raise ConfigurationError(
            f"point matrix has {points.dimension} columns "
            f"but the design declares {len(design)} dimensions"
        )
    values = np.empty_like(points.values)
    for j, dim in enumerate(design.dimensions):
        values[:, j] = triangular_inverse_cdf(points.values[:, j], dim.spec)
    values.setflags(write=False)
    return ShockMatrix(
        values=values,
        labels=design.labels,
        source_spec=points.spec,
        index_origin=points.index_origin,
    )


# --------------------------------------------------------------------------
# Design file I/O (CSV: label, region, factor, min, median, max)
# --------------------------------------------------------------------------

DESIGN_FIELDS = ("label", "region", "factor", "min", "median", "max")


def load_design(stream: io.TextIOBase | Iterable[str]) -> InputDesign:
    """Read a design CSV; '#' comment lines are allowed anywhere."""
    rows = (line for line in stream if not line.lstrip().startswith("#"))
    reader = csv.DictReader(rows)
    missing = set(DESIGN_FIELDS) - set(reader.fieldnames or ())
    if missing:
        raise ConfigurationError(
            f"design file is missing columns {sorted(missing)}; "
            f"expected header {','.join(DESIGN_FIELDS)}"
        )
    dims = []
    for row in reader:
        try:
            spec = TriangularSpec(
                minimum=float(row["min"]),
                median=float(row["median"]),
                maximum=float(row["max"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(
                f"bad design record {row.get('label', '?')!r}: {exc}"
            ) from exc
        dims.append(
            DesignDimension(
                label=row["label"],
                region=row.get("region", ""),
                factor=row.get("factor", ""),
                spec=spec,
            )
        )
    if not dims:
        raise ConfigurationError("design file declares no dimensions")
    return InputDesign(dimensions=tuple(dims))


def load_design_file(path) -> InputDesign:
    with open(path, "r", newline="") as fh:
        return load_design(fh)


def write_shocks_csv(shocks: ShockMatrix, stream: io.TextIOBase,
                     include_index: bool = True) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    header = list(shocks.labels)
    if include_index:
        header = ["index"] + header
    writer.writerow(header)
    for i, row in enumerate(shocks.values):
        cells = [repr(float(v)) for v in row]
        if include_index:
            cells = [str(i)] + cells
        writer.writerow(cells)
