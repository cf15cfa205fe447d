"""Persistence diagrams and their CSV form."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import FormatError

CSV_HEADER = ["birth", "death", "birth_row", "birth_col", "death_row", "death_col", "essential"]


class PersistencePair(NamedTuple):
    birth: float
    death: float
    birth_pixel: int
    death_pixel: int
    essential: bool


@dataclass(frozen=True)
class PersistenceDiagram:
    """Column-oriented 0-dimensional diagram of a superlevel filtration.

    Pairs are kept sorted by descending birth, ties by ascending birth pixel.
    Pixel indices are linear (``row * width + col``).
    """

    birth: np.ndarray
    death: np.ndarray
    birth_pixel: np.ndarray
    death_pixel: np.ndarray
    essential: np.ndarray
    width: int

    @classmethod
    def from_arrays(cls, birth, death, birth_pixel, death_pixel, essential, width: int):
        birth = np.asarray(birth, dtype=np.float64)
        death = np.asarray(death, dtype=np.float64)
        birth_pixel = np.asarray(birth_pixel, dtype=np.int64)
        death_pixel = np.asarray(death_pixel, dtype=np.int64)
        essential = np.asarray(essential, dtype=bool)
        order = np.lexsort((birth_pixel, -birth))
        cols = [a[order] for a in (birth, death, birth_pixel, death_pixel, essential)]
        for a in cols:
            a.flags.writeable = False
        return cls(*cols, width=int(width))

    @classmethod
    def from_pairs(cls, pairs, width: int):
        pairs = list(pairs)
        if not pairs:
            return cls.empty(width)
        cols = list(zip(*pairs))
        return cls.from_arrays(*cols, width=width)

    @classmethod
    def empty(cls, width: int = 1):
        return cls.from_arrays([], [], [], [], [], width=width)

    def __len__(self):
        return len(self.birth)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i) -> PersistencePair:
        return PersistencePair(
            float(self.birth[i]), float(self.death[i]),
            int(self.birth_pixel[i]), int(self.death_pixel[i]), bool(self.essential[i]),
        )

    @property
    def pairs(self) -> list[PersistencePair]:
        return list(self)

    @property
    def persistence(self) -> np.ndarray:
        return self.birth - self.death

    def finite(self) -> np.ndarray:
        """(k, 2) array of (birth, death) for non-essential pairs."""
        keep = ~self.essential
        return np.column_stack([self.birth[keep], self.death[keep]])

    def essential_births(self) -> np.ndarray:
        return self.birth[self.essential]

    def points(self) -> np.ndarray:
        return np.column_stack([self.birth, self.death])

    def key(self) -> list[tuple]:
        """Canonical sorted tuple form, for exact comparisons in tests."""
        return sorted(tuple(p) for p in self)

    def negated(self) -> "PersistenceDiagram":
        """Sublevel-convention view: every value negated (points above the diagonal)."""
        return PersistenceDiagram(
            -self.birth, -self.death, self.birth_pixel, self.death_pixel, self.essential,
            self.width,
        )


def format_float(x: float) -> str:
    # repr of a float64 round-trips exactly; float32 values are exactly representable.
    r = repr(float(x))
    return "0.0" if r == "-0.0" else r


def diagram_to_csv(d: PersistenceDiagram, sublevel: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    sign = -1.0 if sublevel else 1.0
    br, bc = np.divmod(d.birth_pixel, d.width)
    dr, dc = np.divmod(d.death_pixel, d.width)
    for i in range(len(d)):
        w.writerow([
            format_float(sign * d.birth[i]), format_float(sign * d.death[i]),
            int(br[i]), int(bc[i]), int(dr[i]), int(dc[i]), int(d.essential[i]),
        ])
    return buf.getvalue()


def write_diagram_csv(d: PersistenceDiagram, path, sublevel: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(diagram_to_csv(d, sublevel=sublevel))


def parse_diagram_csv(text: str, width: int | None = None) -> PersistenceDiagram:
    """Parse diagram CSV text.

    Without ``width`` the pixel grid width is taken as ``max(col) + 1``; ordering by
    linear index equals ordering by (row, col) for any valid width, so the diagram
    round-trips to identical CSV either way.
    """
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise FormatError(f"diagram CSV must start with header {','.join(CSV_HEADER)}")
    body = [r for r in rows[1:] if r]
    try:
        data = [
            (float(r[0]), float(r[1]), int(r[2]), int(r[3]), int(r[4]), int(r[5]), int(r[6]))
            for r in body
        ]
    except (ValueError, IndexError) as exc:
        raise FormatError(f"bad diagram CSV row: {exc}") from exc
    if any(len(r) != len(CSV_HEADER) for r in body):
        raise FormatError("diagram CSV row with wrong number of fields")
    if not data:
        return PersistenceDiagram.empty(width or 1)
    arr = np.array(data, dtype=np.float64)
    cols = arr[:, [3, 5]].astype(np.int64)
    if width is None:
        width = int(cols.max()) + 1
    bp = arr[:, 2].astype(np.int64) * width + arr[:, 3].astype(np.int64)
    dp = arr[:, 4].astype(np.int64) * width + arr[:, 5].astype(np.int64)
    return PersistenceDiagram.from_arrays(arr[:, 0], arr[:, 1], bp, dp, arr[:, 6] != 0, width)


def read_diagram_csv(path, width: int | None = None) -> PersistenceDiagram:
    with open(path, encoding="utf-8") as fh:
        return parse_diagram_csv(fh.read(), width=width)
