"""Torus geometry, grid-sampled measures and fields, and their on-disk formats.

Everything downstream works on a regular grid over the flat torus of side
``side`` with ``resolution`` cells per axis.  Densities are stored per cell
(units 1/volume); integrals are cell sums times the cell volume.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"TGGRID01"


class GeometryError(ValueError):
    """Raised when two grid objects do not share a geometry."""


@dataclass(frozen=True)
class TorusGeometry:
    """Regular grid on the d-dimensional torus of side ``side``."""

    dim: int
    side: float
    resolution: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.side <= 0:
            raise ValueError("side must be positive")
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")

    @property
    def cell_side(self) -> float:
        return self.side / self.resolution

    @property
    def cell_volume(self) -> float:
        return (self.side / self.resolution) ** self.dim

    @property
    def shape(self) -> tuple:
        return (self.resolution,) * self.dim

    @property
    def n_cells(self) -> int:
        return self.resolution**self.dim

    def axis_centers(self) -> np.ndarray:
        """Cell centers along one axis: (i + 1/2) * side / n."""
        n = self.resolution
        return (np.arange(n) + 0.5) * (self.side / n)

    def centers(self) -> np.ndarray:
        """All cell centers, shape (*grid_shape, dim)."""
        axes = [self.axis_centers()] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def axis_displacements(self) -> np.ndarray:
        """Displacement nodes j*h wrapped to [-side/2, side/2)."""
        n = self.resolution
        x = np.arange(n) * (self.side / n)
        return np.where(x >= self.side / 2, x - self.side, x)

    def displacements(self) -> np.ndarray:
        """All displacement nodes, shape (*grid_shape, dim)."""
        axes = [self.axis_displacements()] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def wrap(self, points: np.ndarray) -> np.ndarray:
        """Reduce coordinates to the fundamental domain [0, side)."""
        return np.mod(points, self.side)

    def wrap_centered(self, deltas: np.ndarray) -> np.ndarray:
        """Reduce displacement vectors to [-side/2, side/2)."""
        return np.mod(np.asarray(deltas) + self.side / 2, self.side) - self.side / 2

    def distance(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Geodesic (wrapped Euclidean) distance between point arrays."""
        d = self.wrap_centered(np.atleast_2d(a) - np.atleast_2d(b))
        return np.sqrt(np.sum(d * d, axis=-1))

    def cell_index(self, points: np.ndarray) -> np.ndarray:
        """Integer cell index per axis of each point, shape (m, dim)."""
        pts = self.wrap(np.atleast_2d(points))
        idx = np.floor(pts / self.cell_side).astype(int)
        return np.clip(idx, 0, self.resolution - 1)

    def flat_cell_index(self, points: np.ndarray) -> np.ndarray:
        idx = self.cell_index(points)
        return np.ravel_multi_index(tuple(idx.T), self.shape)


@dataclass(frozen=True)
class Box:
    """Axis-aligned Euclidean window [lower, upper]^d."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower/upper dimension mismatch")
        if any(u <= l for l, u in zip(self.lower, self.upper)):
            raise ValueError("box must have positive extent")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def sides(self) -> np.ndarray:
        return np.asarray(self.upper, float) - np.asarray(self.lower, float)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((pts >= lo) & (pts <= hi), axis=-1)


def centered_box(side: float, dim: int, center=None) -> Box:
    """The cube of side ``side`` centered at ``center`` (default origin)."""
    c = np.zeros(dim) if center is None else np.asarray(center, float)
    h = side / 2.0
    return Box(tuple(c - h), tuple(c + h))


def _freeze(values: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(values, dtype=float)
    out.setflags(write=False)
    return out


@dataclass
class SignedGridField:
    """A real-valued field sampled on the torus grid (may take either sign)."""

    geometry: TorusGeometry
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.geometry.shape:
            vals = vals.reshape(self.geometry.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        self.values = _freeze(vals)

    def integral(self) -> float:
        return float(self.values.sum() * self.geometry.cell_volume)

    def __neg__(self):
        return SignedGridField(self.geometry, -self.values)


@dataclass
class GridMeasure:
    """A nonnegative density on the torus grid with cached total mass."""

    geometry: TorusGeometry
    values: np.ndarray
    mass: float = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.geometry.shape:
            vals = vals.reshape(self.geometry.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite")
        if np.any(vals < 0):
            raise ValueError("density values must be nonnegative")
        self.values = _freeze(vals)
        self.mass = float(vals.sum() * self.geometry.cell_volume)

    def as_signed(self) -> SignedGridField:
        return SignedGridField(self.geometry, self.values)

    def normalized(self) -> "GridMeasure":
        if self.mass <= 0:
            raise ValueError("cannot normalize a zero-mass measure")
        return GridMeasure(self.geometry, self.values / self.mass)


def uniform_measure(geometry: TorusGeometry) -> GridMeasure:
    """The uniform probability density 1/side^d."""
    density = 1.0 / geometry.side**geometry.dim
    return GridMeasure(geometry, np.full(geometry.shape, density))


def require_same_geometry(*objs) -> TorusGeometry:
    geoms = [o.geometry for o in objs]
    first = geoms[0]
    for g in geoms[1:]:
        if g != first:
            raise GeometryError(f"geometry mismatch: {g} vs {first}")
    return first


class TrigInterpolator:
    """Trigonometric interpolant of a grid field with precomputed transform.

    Matches the field at cell centers; for even resolutions the Nyquist mode
    is evaluated as a cosine so values stay real.
    """

    def __init__(self, field_values: np.ndarray, geometry: TorusGeometry):
        self.geometry = geometry
        self.coeff = np.fft.fftn(
            np.asarray(field_values, float).reshape(geometry.shape))
        self.modes = np.fft.fftfreq(geometry.resolution,
                                    d=1.0 / geometry.resolution)

    def _phase(self, x: np.ndarray) -> np.ndarray:
        n = self.geometry.resolution
        ph = np.exp(2j * np.pi * np.outer(x, self.modes))
        if n % 2 == 0:
            ph[:, n // 2] = np.cos(2 * np.pi * (n // 2) * x)
        return ph

    def __call__(self, points: np.ndarray) -> np.ndarray:
        geometry = self.geometry
        pts = np.atleast_2d(np.asarray(points, float))
        if pts.shape[1] != geometry.dim:
            raise GeometryError("point dimension does not match geometry")
        offset = 0.5 * geometry.cell_side
        phases = [self._phase((pts[:, a] - offset) / geometry.side)
                  for a in range(geometry.dim)]
        if geometry.dim == 1:
            out = phases[0] @ self.coeff
        elif geometry.dim == 2:
            out = np.einsum("mi,mj,ij->m", phases[0], phases[1], self.coeff)
        else:
            out = np.zeros(len(pts), dtype=complex)
            for m in range(len(pts)):
                acc = self.coeff
                for a in range(geometry.dim):
                    acc = np.tensordot(phases[a][m], acc, axes=(0, 0))
                out[m] = acc
        return np.real(out) / geometry.n_cells


def trig_interpolate(field_values: np.ndarray, geometry: TorusGeometry,
                     points: np.ndarray) -> np.ndarray:
    """One-shot trigonometric interpolation of a grid field at points."""
    return TrigInterpolator(field_values, geometry)(points)


def nearest_cell_values(field_values: np.ndarray, geometry: TorusGeometry,
                        points: np.ndarray) -> np.ndarray:
    """Piecewise-constant (cell lookup) evaluation of a grid field."""
    vals = np.asarray(field_values, float).reshape(geometry.shape)
    idx = geometry.cell_index(points)
    return vals[tuple(idx.T)]


# ---------------------------------------------------------------------------
# serialization: CSV and a binary container with a 32-byte header
# ---------------------------------------------------------------------------

def grid_to_csv(obj, path) -> None:
    """Write a GridMeasure/SignedGridField: header line, then one value/line."""
    geom = obj.geometry
    lines = ["dim,side,resolution"]
    lines.append(f"{geom.dim},{geom.side!r},{geom.resolution}")
    lines.extend(repr(float(v)) for v in obj.values.ravel(order="C"))
    Path(path).write_text("\n".join(lines) + "\n")


def grid_from_csv(path, kind="measure"):
    text = Path(path).read_text().strip().splitlines()
    if text[0].strip() != "dim,side,resolution":
        raise ValueError(f"unrecognized grid CSV header: {text[0]!r}")
    dim_s, side_s, res_s = text[1].split(",")
    geom = TorusGeometry(int(dim_s), float(side_s), int(res_s))
    values = np.array([float(v) for v in text[2:]]).reshape(geom.shape)
    cls = GridMeasure if kind == "measure" else SignedGridField
    return cls(geom, values)


def grid_to_binary(obj, path) -> None:
    """Binary container: 32-byte magic+metadata header, then float64 values."""
    geom = obj.geometry
    kind = 1 if isinstance(obj, GridMeasure) else 0
    header = MAGIC + struct.pack(
        "<BBHIdQ", kind, geom.dim, 0, geom.resolution, geom.side, 0
    )
    assert len(header) == 32
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(obj.values.astype("<f8").tobytes(order="C"))


def grid_from_binary(path):
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError("bad magic in binary grid container")
    kind, dim, _, resolution, side, _ = struct.unpack("<BBHIdQ", raw[8:32])
    geom = TorusGeometry(dim, side, resolution)
    values = np.frombuffer(raw[32:], dtype="<f8").reshape(geom.shape)
    cls = GridMeasure if kind == 1 else SignedGridField
    return cls(geom, values.copy())
