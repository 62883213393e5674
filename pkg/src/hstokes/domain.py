"""Grid geometry and field containers for the truncated half space.

The half space ``{x_n > 0}`` is replaced by the box ``[0, L)^(n-1) x [0, H]``
with periodic tangential axes.  Internally every array is laid out as::

    (time, *components, x_n, x_1, ..., x_{n-1})

so that the spatial axes are always the trailing ``dim`` axes.  Components
are ordered ``(x_1, ..., x_{n-1}, x_n)``: component ``dim - 1`` is the
wall-normal one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "SpaceTimeField",
    "BoundaryField",
    "make_grid",
    "sample",
    "sample_boundary",
    "boundary_trace",
    "save_field",
    "load_field",
]


@dataclass(frozen=True)
class GridSpec:
    """Discretization parameters of the truncated half space and time interval."""

    dim: int
    period_l: float
    height_h: float
    n_tangential: int
    n_normal: int
    t_final: float
    n_time: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        for name in ("n_tangential", "n_normal", "n_time"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")
        n = self.n_tangential
        if n & (n - 1):
            raise ValueError(f"n_tangential must be a power of two, got {n}")
        for name in ("period_l", "height_h", "t_final"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")

    @property
    def dx_t(self) -> float:
        return self.period_l / self.n_tangential

    @property
    def dx_n(self) -> float:
        return self.height_h / (self.n_normal - 1)

    @property
    def dt(self) -> float:
        return self.t_final / (self.n_time - 1)

    @property
    def n_full(self) -> int:
        """Normal points on the doubled torus of extent 2H."""
        return 2 * (self.n_normal - 1)

    @property
    def tangential_shape(self) -> tuple[int, ...]:
        return (self.n_tangential,) * (self.dim - 1)

    @property
    def space_shape(self) -> tuple[int, ...]:
        return (self.n_normal, *self.tangential_shape)

    @property
    def full_shape(self) -> tuple[int, ...]:
        return (self.n_full, *self.tangential_shape)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_time)

    @property
    def xn(self) -> np.ndarray:
        return np.linspace(0.0, self.height_h, self.n_normal)

    @property
    def xt(self) -> np.ndarray:
        return np.arange(self.n_tangential) * self.dx_t

    @property
    def ceiling_decay(self) -> float:
        """Decay factor of the lowest nonzero tangential mode across the box."""
        return float(np.exp(-2.0 * np.pi / self.period_l * self.height_h))

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Node coordinates ``(x_1, ..., x_{n-1}, x_n)`` broadcast to ``space_shape``."""
        axes = [self.xn] + [self.xt] * (self.dim - 1)
        mesh = np.meshgrid(*axes, indexing="ij")
        return (*mesh[1:], mesh[0])

    def tangential_coordinates(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.xt] * (self.dim - 1)), indexing="ij"))

    def with_horizon(self, n_time: int) -> "GridSpec":
        """Same spacing, truncated to the first ``n_time`` slices."""
        return GridSpec(
            self.dim,
            self.period_l,
            self.height_h,
            self.n_tangential,
            self.n_normal,
            self.dt * (n_time - 1),
            n_time,
        )

    def refined(self, normal: int = 2, time: int = 2) -> "GridSpec":
        return GridSpec(
            self.dim,
            self.period_l,
            self.height_h,
            self.n_tangential,
            (self.n_normal - 1) * normal + 1,
            self.t_final,
            (self.n_time - 1) * time + 1,
        )

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "period_l": self.period_l,
            "height_h": self.height_h,
            "n_tangential": self.n_tangential,
            "n_normal": self.n_normal,
            "t_final": self.t_final,
            "n_time": self.n_time,
        }


def make_grid(dim, L, H, n_tangential, n_normal, T, n_time) -> GridSpec:
    return GridSpec(
        int(dim), float(L), float(H), int(n_tangential), int(n_normal), float(T), int(n_time)
    )


def _comp_shape(grid: GridSpec, kind: str) -> tuple[int, ...]:
    return {"scalar": (), "vector": (grid.dim,), "tensor": (grid.dim, grid.dim)}[kind]


def _kind_of(comp_shape: tuple[int, ...]) -> str:
    return {0: "scalar", 1: "vector", 2: "tensor"}[len(comp_shape)]


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Samples of a scalar, vector or tensor field on the half grid at every time slice."""

    grid: GridSpec
    values: np.ndarray
    name: str = "field"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).view()
        if values.shape[0] != self.grid.n_time:
            raise ValueError(
                f"expected {self.grid.n_time} time slices, got {values.shape[0]}"
            )
        if values.shape[values.ndim - self.grid.dim:] != self.grid.space_shape:
            raise ValueError(
                f"spatial shape {values.shape[-self.grid.dim:]} does not match {self.grid.space_shape}"
            )
        if len(self.comp_shape_of(values)) > 2:
            raise ValueError("at most two component axes are supported")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"field {self.name!r} has non-finite entries")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def comp_shape_of(self, values) -> tuple[int, ...]:
        return values.shape[1 : values.ndim - self.grid.dim]

    @property
    def comp_shape(self) -> tuple[int, ...]:
        return self.comp_shape_of(self.values)

    @property
    def kind(self) -> str:
        return _kind_of(self.comp_shape)

    def slice(self, k: int) -> np.ndarray:
        return self.values[k]

    @property
    def slices(self) -> list[np.ndarray]:
        return [self.values[k] for k in range(self.grid.n_time)]

    def __add__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.values + other.values, self.name)

    def __sub__(self, other: "SpaceTimeField") -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.values - other.values, self.name)

    def scaled(self, factor: float) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, factor * self.values, self.name)

    @classmethod
    def zeros(cls, grid: GridSpec, kind: str = "vector", name: str = "field"):
        shape = (grid.n_time, *_comp_shape(grid, kind), *grid.space_shape)
        return cls(grid, np.zeros(shape), name)


@dataclass(frozen=True, eq=False)
class BoundaryField:
    """Data on the wall ``{x_n = 0}`` at every time slice.

    ``values`` has shape ``(n_time, *components, x_1, ..., x_{n-1})``.
    """

    grid: GridSpec
    values: np.ndarray
    name: str = "boundary"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).view()
        ndim_t = self.grid.dim - 1
        if values.shape[0] != self.grid.n_time:
            raise ValueError(
                f"expected {self.grid.n_time} time slices, got {values.shape[0]}"
            )
        if values.shape[values.ndim - ndim_t:] != self.grid.tangential_shape:
            raise ValueError(
                f"tangential shape {values.shape[-ndim_t:]} does not match {self.grid.tangential_shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError(f"boundary field {self.name!r} has non-finite entries")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def comp_shape(self) -> tuple[int, ...]:
        return self.values.shape[1 : self.values.ndim - (self.grid.dim - 1)]

    @property
    def kind(self) -> str:
        return _kind_of(self.comp_shape)

    @classmethod
    def zeros(cls, grid: GridSpec, kind: str = "vector", name: str = "boundary"):
        shape = (grid.n_time, *_comp_shape(grid, kind), *grid.tangential_shape)
        return cls(grid, np.zeros(shape), name)


def _as_array(obj, shape):
    if isinstance(obj, (list, tuple)):
        return np.stack([_as_array(o, shape) for o in obj])
    arr = np.asarray(obj, dtype=float)
    if arr.ndim > len(shape):
        return np.broadcast_to(arr, (*arr.shape[: arr.ndim - len(shape)], *shape))
    return np.broadcast_to(arr, shape)


def _evaluate(closure, coords, t, target_shape):
    return _as_array(closure(coords, t), target_shape)


def sample(
    grid: GridSpec,
    closure: Callable[[Sequence[np.ndarray], float], object],
    name: str = "field",
) -> SpaceTimeField:
    """Evaluate ``closure(x, t)`` at every node and time slice.

    ``x`` is the tuple ``(x_1, ..., x_{n-1}, x_n)`` of coordinate arrays of
    shape ``grid.space_shape``.  The closure returns an array of that shape
    (scalar field) or a nested sequence of such arrays (vector/tensor field).
    """
    coords = grid.coordinates()
    slices = [_evaluate(closure, coords, t, grid.space_shape) for t in grid.times]
    values = np.stack(slices)
    if not np.all(np.isfinite(values)):
        raise ValueError("closure produced non-finite values")
    return SpaceTimeField(grid, values, name)


def sample_boundary(
    grid: GridSpec,
    closure: Callable[[Sequence[np.ndarray], float], object],
    name: str = "boundary",
) -> BoundaryField:
    """Like :func:`sample` on the wall; ``x`` is ``(x_1, ..., x_{n-1})``."""
    coords = grid.tangential_coordinates()
    slices = [_evaluate(closure, coords, t, grid.tangential_shape) for t in grid.times]
    values = np.stack(slices)
    if not np.all(np.isfinite(values)):
        raise ValueError("closure produced non-finite values")
    return BoundaryField(grid, values, name)


def boundary_trace(field: SpaceTimeField, row: int = 0) -> BoundaryField:
    """Restriction to the wall row (``row=0``) or to an interior row for limit studies."""
    axis = field.values.ndim - field.grid.dim
    values = np.take(field.values, row, axis=axis)
    return BoundaryField(field.grid, values, f"{field.name}|x_n={row}")


# -- binary + JSON sidecar ----------------------------------------------------


def _disk_layout(field) -> tuple[np.ndarray, list[str]]:
    grid = field.grid
    values = field.values
    ncomp = len(field.comp_shape)
    flat_comp = int(np.prod(field.comp_shape)) if ncomp else 1
    if isinstance(field, SpaceTimeField):
        # (time, *comp, x_n, *tan) -> (time, x_n, *tan, comp)
        v = values.reshape(grid.n_time, flat_comp, *grid.space_shape)
        v = np.moveaxis(v, 1, -1)
        axes = ["time", "x_n"] + [f"x_{i + 1}" for i in range(grid.dim - 1)] + ["component"]
    else:
        # (time, *comp, *tan) -> (*tan, time, comp)
        v = values.reshape(grid.n_time, flat_comp, *grid.tangential_shape)
        v = np.moveaxis(v, (0, 1), (-2, -1))
        axes = [f"x_{i + 1}" for i in range(grid.dim - 1)] + ["time", "component"]
    return np.ascontiguousarray(v, dtype="<f8"), axes


def save_field(field, path) -> Path:
    """Write ``path.bin`` (little-endian float64, row-major) and ``path.json``."""
    path = Path(path)
    if path.suffix in (".bin", ".json"):
        path = path.with_suffix("")
    path.parent.mkdir(parents=True, exist_ok=True)
    data, axes = _disk_layout(field)
    path.with_suffix(".bin").write_bytes(data.tobytes(order="C"))
    meta = {
        "name": field.name,
        "container": "space_time" if isinstance(field, SpaceTimeField) else "boundary",
        "kind": field.kind,
        "component_shape": list(field.comp_shape),
        "shape": list(data.shape),
        "axes": axes,
        "dtype": "<f8",
        "grid": field.grid.to_dict(),
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path.with_suffix(".bin")


def load_field(path):
    """Inverse of :func:`save_field`."""
    path = Path(path)
    if path.suffix in (".bin", ".json"):
        path = path.with_suffix("")
    meta = json.loads(path.with_suffix(".json").read_text())
    grid = GridSpec(**meta["grid"])
    data = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
    data = data.reshape(meta["shape"]).astype(float)
    comp = tuple(meta["component_shape"])
    if meta["container"] == "space_time":
        v = np.moveaxis(data, -1, 1).reshape(grid.n_time, *comp, *grid.space_shape)
        return SpaceTimeField(grid, v, meta["name"])
    v = np.moveaxis(data, (-2, -1), (0, 1)).reshape(grid.n_time, *comp, *grid.tangential_shape)
    return BoundaryField(grid, v, meta["name"])
