"""Per-iteration solver records and their CSV form.

CSV schema (UTF-8, LF line endings)::

    k,indices,fbe,phi_z,residual,wall_ns

``indices`` lists the 0-based block indices selected at iteration ``k``,
separated by ``;`` (empty on the final row).  Floats are written with the
shortest representation that round-trips.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

HEADER = ("k", "indices", "fbe", "phi_z", "residual", "wall_ns")


@dataclass(frozen=True)
class TraceRow:
    k: int
    indices: tuple
    fbe: float
    phi_z: float
    residual: float
    wall_ns: int


class SolverTrace:
    def __init__(self, rows=None):
        self.rows = list(rows or [])

    def append(self, k, indices, fbe, phi_z, residual, wall_ns):
        self.rows.append(TraceRow(int(k), tuple(int(i) for i in indices), float(fbe), float(phi_z), float(residual), int(wall_ns)))

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def k(self):
        return self.column("k")

    @property
    def fbe(self):
        return self.column("fbe")

    @property
    def phi_z(self):
        return self.column("phi_z")

    @property
    def residual(self):
        return self.column("residual")

    def is_monotone(self, slack=1e-10):
        f = self.fbe
        return bool(np.all(np.diff(f) <= slack))

    def to_csv(self, target=None, record_time=True):
        """Write the trace; returns the text when ``target`` is None.

        With ``record_time=False`` the wall-clock column is written as 0 so
        reruns are byte-identical.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for r in self.rows:
            w.writerow([
                r.k,
                ";".join(str(i) for i in r.indices),
                repr(r.fbe),
                repr(r.phi_z),
                repr(r.residual),
                r.wall_ns if record_time else 0,
            ])
        text = buf.getvalue()
        if target is None:
            return text
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source):
        if hasattr(source, "read"):
            text = source.read()
        elif isinstance(source, str) and source.startswith("k,indices"):
            text = source
        else:
            with open(source, encoding="utf-8", newline="") as fh:
                text = fh.read()
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        if header != HEADER:
            raise ValueError(f"unexpected trace header {header}")
        rows = []
        for k, idx, fbe, phi, res, wall in reader:
            indices = tuple(int(i) for i in idx.split(";")) if idx else ()
            rows.append(TraceRow(int(k), indices, float(fbe), float(phi), float(res), int(wall)))
        return cls(rows)
