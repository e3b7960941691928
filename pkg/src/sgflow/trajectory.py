"""Time-indexed families of fields and the grids they live on."""
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import field as F


class TrajectoryError(ValueError):
    pass


def graded_grid(T, J=64):
    """``t_j = T (j/J)**4`` for ``j = 1..J``; dense near 0 where rough data are singular."""
    if not (T > 0 and J >= 1):
        raise TrajectoryError("graded grid needs T > 0 and J >= 1")
    j = np.arange(1, J + 1)
    return T * (j / J) ** 4


def geometric_grid(T, levels=40, substeps=1, t_floor=0.0):
    """Increasing grid ``T 2**(-j/substeps)`` for ``j = 0..levels*substeps``, cut at ``t_floor``."""
    j = np.arange(levels * substeps + 1)
    t = T * 2.0 ** (-j / substeps)
    t = t[t >= t_floor * (1 - 1e-12)]
    return t[::-1].copy()


class LazyLineFields:
    """Sequence of ``exp(-t_i A) h0`` line fields computed on first access."""

    def __init__(self, h0, table, t_grid):
        self.h0, self.table, self.t_grid = h0, table, t_grid
        self._cache = {}

    def __len__(self):
        return len(self.t_grid)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        i = range(len(self))[i]
        if i not in self._cache:
            self._cache[i] = F.line_semigroup(self.h0, self.table, self.t_grid[i], 0)
        return self._cache[i]

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass(eq=False)
class Trajectory:
    """Fields ``fields[i]`` at times ``t_grid[i]`` plus provenance.

    Line trajectories built from a kernel table keep the table and initial
    field so that exact derivatives of any order up to 3 can be produced on
    demand (``derivative_values``) instead of differencing samples.
    """
    t_grid: np.ndarray
    fields: list
    h0: object = None
    provenance: dict = dc_field(default_factory=dict)
    table: object = None
    _derivs: dict = dc_field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=np.float64)
        if len(self.fields) != self.t_grid.size:
            raise TrajectoryError("one field per time is required")
        if self.t_grid.size and np.any(np.diff(self.t_grid) <= 0):
            raise TrajectoryError("t_grid must be strictly increasing")
        if isinstance(self.fields, LazyLineFields):
            return
        kinds = {type(f) for f in self.fields}
        if len(kinds) > 1:
            raise TrajectoryError("all fields must share a domain type")
        if self.fields and isinstance(self.fields[0], F.TorusField):
            shapes = {(f.dim, f.n, f.L) for f in self.fields}
            if len(shapes) > 1:
                raise TrajectoryError("all torus fields must share dim, n and L")
        if self.fields and isinstance(self.fields[0], F.LineField):
            shapes = {(f.W, f.m) for f in self.fields}
            if len(shapes) > 1:
                raise TrajectoryError("all line fields must share the window grid")

    def __len__(self):
        return self.t_grid.size

    @property
    def horizon(self):
        return float(self.t_grid[-1]) if len(self) else 0.0

    @property
    def is_torus(self):
        if isinstance(self.fields, LazyLineFields):
            return False
        return isinstance(self.fields[0], F.TorusField)

    @property
    def dim(self):
        return self.fields[0].dim if self.is_torus else 1

    def space_grid(self):
        if isinstance(self.fields, LazyLineFields):
            return self.h0.grid()
        return self.fields[0].grid()

    def derivative_values(self, i, orders):
        """Physical values of ``D^orders h(t_i)``; ``orders`` counts per axis."""
        if self.is_torus:
            return F.derivative(self.fields[i], orders).values()
        total = int(sum(orders))
        if total == 0:
            return self.fields[i].samples
        key = (i, total)
        if key not in self._derivs:
            if self.table is None or self.h0 is None:
                if total != 1:
                    raise TrajectoryError("higher line derivatives need the caloric source")
                f = self.fields[i]
                self._derivs[key] = np.gradient(f.samples, f.dx)
            else:
                self._derivs[key] = F.line_semigroup_values(self.h0, self.table,
                                                            self.t_grid[i], total)
        return self._derivs[key]

    def gradient_values(self, i):
        """Gradient components at time index ``i``, shape ``(dim, ...)``."""
        d = self.dim
        return np.stack([self.derivative_values(i, [1 if a == b else 0 for b in range(d)])
                         for a in range(d)])


def caloric_extension(h0, t_grid, table=None):
    """Trajectory ``t -> exp(-tA) h0`` on the given times."""
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if isinstance(h0, F.TorusField):
        fields = [F.semigroup_apply(h0, t) for t in t_grid]
        return Trajectory(t_grid, fields, h0, {"caloric": True})
    if table is None:
        raise TrajectoryError("line data need a kernel table")
    # values and derivatives are produced on demand from h0
    return Trajectory(t_grid, LazyLineFields(h0, table, t_grid), h0, {"caloric": True}, table)
