#!/usr/bin/env python3
"""Regenerate the bundled Sobol' direction-number file.

Extracts the first 1110 lines (dimensions 2..1111) of the Joe-Kuo D(6)
parameter set from scipy's bundled table and writes them in the standard
text format, one line per dimension:

    d s a m_1 ... m_s

where s is the degree of the primitive polynomial, a encodes its inner
coefficients and the m_i are the odd initial direction numbers. Dimension 1
(plain van der Corput in base 2) has no line; the loader synthesizes it.

Run from the repo root:  python scripts/make_direction_numbers.py
"""

import os
import sys

import numpy as np

MAX_DIM = 1111
OUT = os.path.join(
    os.path.dirname(__file__), "..", "src", "qmcssa", "data", "joe_kuo_d6_1111.txt"
)


def main() -> int:
    import scipy.stats._sobol as _sobol  # data file lives next to the module

    data_path = os.path.join(
        os.path.dirname(_sobol.__file__), "_sobol_direction_numbers.npz"
    )
    table = np.load(data_path)
    poly = table["poly"]
    vinit = table["vinit"]

    lines = ["# Joe-Kuo D(6) Sobol' direction numbers, dimensions 2..1111.",
             "# Columns: d s a m_1 ... m_s"]
    for dim in range(2, MAX_DIM + 1):
        p = int(poly[dim - 1])
        s = p.bit_length() - 1
        a = (p - (1 << s) - 1) >> 1
        m = [int(v) for v in vinit[dim - 1][:s]]
        if any(v <= 0 or v % 2 == 0 for v in m):
            raise ValueError(f"non-odd initial direction number at dim {dim}: {m}")
        lines.append(" ".join(str(v) for v in [dim, s, a] + m))

    with open(OUT, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 2} dimensions to {os.path.abspath(OUT)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
