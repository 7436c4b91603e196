"""Uniform rectangular grids and gridded field solutions."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = ["Axis", "GridSpec", "FieldSolution", "GridError", "centered_derivative"]

MIN_NODES = 5


class GridError(ValueError):
    """Grid too small or inconsistent with the data placed on it."""


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    n: int

    def __post_init__(self):
        if self.n < MIN_NODES:
            raise GridError(f"axis {self.name!r} needs at least {MIN_NODES} nodes, got {self.n}")
        if not self.stop > self.start:
            raise GridError(f"axis {self.name!r} has non-positive extent")

    @property
    def h(self) -> float:
        return (self.stop - self.start) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n)


@dataclass(frozen=True)
class GridSpec:
    axes: tuple

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))

    @classmethod
    def uniform(cls, names, extents, counts) -> "GridSpec":
        return cls(tuple(Axis(nm, float(a), float(b), int(n)) for nm, (a, b), n in zip(names, extents, counts)))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(a.n for a in self.axes)

    @property
    def spacing(self) -> tuple:
        return tuple(a.h for a in self.axes)

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*[a.nodes for a in self.axes], indexing="ij")

    def interior(self, margin: int = 1) -> tuple:
        return tuple(slice(margin, a.n - margin) for a in self.axes)

    def refined(self, n_per_axis) -> "GridSpec":
        if np.isscalar(n_per_axis):
            n_per_axis = [n_per_axis] * self.ndim
        return GridSpec(tuple(replace(a, n=int(n)) for a, n in zip(self.axes, n_per_axis)))


def centered_derivative(u: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second-order derivative estimate: centered inside, one-sided at the edges."""
    return np.gradient(u, h, axis=axis, edge_order=2)


def _second_difference(u: np.ndarray, h: float, axis: int) -> np.ndarray:
    out = np.gradient(np.gradient(u, h, axis=axis, edge_order=2), h, axis=axis, edge_order=2)
    inner = [slice(None)] * u.ndim
    plus = [slice(None)] * u.ndim
    minus = [slice(None)] * u.ndim
    inner[axis] = slice(1, -1)
    plus[axis] = slice(2, None)
    minus[axis] = slice(None, -2)
    out[tuple(inner)] = (u[tuple(plus)] - 2.0 * u[tuple(inner)] + u[tuple(minus)]) / h ** 2
    return out


@dataclass
class FieldSolution:
    """Field values on a grid.

    ``phi`` has shape ``(n, *grid.shape)``, ``jets`` ``(n, k, *grid.shape)``
    and ``s`` ``(k, *grid.shape)`` (``None`` until reconstructed).  Optional
    ``second`` holds analytic second jets ``(n, k, k, *grid.shape)``.
    """

    grid: GridSpec
    phi: np.ndarray
    jets: np.ndarray | None = None
    s: np.ndarray | None = None
    provenance: str = "computed"
    second: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        if self.phi.ndim == self.grid.ndim:
            self.phi = self.phi[None]
        if self.phi.shape[1:] != self.grid.shape:
            raise GridError(f"field shape {self.phi.shape[1:]} does not match grid {self.grid.shape}")
        if self.jets is None:
            self.jets = np.stack([np.stack([centered_derivative(p, h, ax) for ax, h in enumerate(self.grid.spacing)])
                                  for p in self.phi])
        if self.provenance not in ("computed", "manufactured", "loaded"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def n_fields(self) -> int:
        return self.phi.shape[0]

    @property
    def k(self) -> int:
        return self.grid.ndim

    def with_s(self, s: np.ndarray) -> "FieldSolution":
        return replace(self, s=np.asarray(s, dtype=float))

    def point_arrays(self, chart) -> dict:
        """Coordinate symbol -> node array, for evaluating chart expressions."""
        pt = dict(chart.parameter_values())
        for i in range(chart.n):
            pt[chart.q(i)] = self.phi[i]
            for a in range(chart.k):
                pt[chart.v(i, a)] = self.jets[i, a]
        if self.s is not None:
            for a in range(chart.k):
                pt[chart.s(a)] = self.s[a]
        mesh = self.grid.mesh()
        for a in range(chart.k):
            pt[chart.t(a)] = mesh[a]
        return pt

    def second_jets(self) -> np.ndarray:
        if self.second is not None:
            return self.second
        n, k = self.n_fields, self.k
        hs = self.grid.spacing
        out = np.empty((n, k, k) + self.grid.shape)
        for i in range(n):
            for a in range(k):
                out[i, a, a] = _second_difference(self.phi[i], hs[a], a)
                for b in range(a + 1, k):
                    out[i, a, b] = out[i, b, a] = centered_derivative(self.jets[i, a], hs[b], b)
        return out

    def s_jets(self) -> np.ndarray:
        """``r[a, b] = d s^b / d t^a`` by centered differences."""
        if self.s is None:
            raise GridError("s fields have not been reconstructed")
        k = self.k
        hs = self.grid.spacing
        out = np.empty((k, k) + self.grid.shape)
        for a in range(k):
            for b in range(k):
                out[a, b] = centered_derivative(self.s[b], hs[a], a)
        return out

    # output --------------------------------------------------------------
    def columns(self, field_names=None) -> dict:
        names = field_names or [f"phi{i + 1}" for i in range(self.n_fields)]
        cols = {}
        for ax, m in zip(self.grid.axes, self.grid.mesh()):
            cols[ax.name] = m.ravel()
        for i, nm in enumerate(names):
            cols[nm] = self.phi[i].ravel()
            for a, ax in enumerate(self.grid.axes):
                cols[f"{nm}_{ax.name}"] = self.jets[i, a].ravel()
        if self.s is not None:
            for a, ax in enumerate(self.grid.axes):
                cols[f"s_{ax.name}"] = self.s[a].ravel()
        return cols

    def to_csv(self, path, field_names=None) -> Path:
        cols = self.columns(field_names)
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(cols))
            for row in zip(*cols.values()):
                w.writerow([format(float(x), ".17g") for x in row])
        return path

    def to_json(self, path, field_names=None) -> Path:
        names = field_names or [f"phi{i + 1}" for i in range(self.n_fields)]
        doc = {
            "provenance": self.provenance,
            "axes": [{"name": a.name, "start": a.start, "stop": a.stop, "n": a.n} for a in self.grid.axes],
            "fields": {nm: self.phi[i].tolist() for i, nm in enumerate(names)},
            "jets": {nm: self.jets[i].tolist() for i, nm in enumerate(names)},
            "s": None if self.s is None else self.s.tolist(),
            "meta": self.meta,
        }
        path = Path(path)
        path.write_text(json.dumps(doc))
        return path
