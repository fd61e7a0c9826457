"""Core data model for hyperspectral cubes, factor matrices, and file I/O.

Shape conventions used throughout the package:

* ``X`` is L x N (bands x pixels), each column one pixel spectrum.
* Pixel ``j`` sits at grid coordinates ``(j // width, j % width)``;
  this row-major linearization is fixed globally so spatial graphs and
  abundance maps agree on pixel identity.
* Values are never rescaled on load; noise calibration and sparsity
  weights depend on raw magnitudes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError, IoError, ParamError, ParseError, ShapeError

__all__ = [
    "HsiCube",
    "UnmixModel",
    "UnmixParams",
    "pixel_coords",
    "pixel_index",
    "load_cube",
    "save_cube",
    "augment_for_asc",
    "save_abundance_maps",
]


@dataclass(frozen=True)
class HsiCube:
    """A hyperspectral image as an L x N matrix plus its pixel grid."""

    data: np.ndarray  # L x N, nonnegative finite reflectance
    height: int
    width: int
    wavelengths: np.ndarray | None = None  # length L, nm

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ShapeError(f"cube data must be 2-D, got ndim={data.ndim}")
        if self.height <= 0 or self.width <= 0:
            raise ParamError("height and width must be positive")
        if self.height * self.width != data.shape[1]:
            raise ShapeError(
                f"height*width = {self.height * self.width} does not match "
                f"pixel count N = {data.shape[1]}"
            )
        if not np.all(np.isfinite(data)):
            l, j = np.argwhere(~np.isfinite(data))[0]
            raise DataError(f"non-finite value at band {l}, pixel {j}")
        if np.any(data < 0):
            l, j = np.argwhere(data < 0)[0]
            raise DataError(f"negative value at band {l}, pixel {j}")
        if self.wavelengths is not None and len(self.wavelengths) != data.shape[0]:
            raise ShapeError("wavelengths length must equal band count")
        object.__setattr__(self, "data", data)
        data.setflags(write=False)

    @property
    def band_count(self) -> int:
        return self.data.shape[0]

    @property
    def pixel_count(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class UnmixModel:
    """Factor triple (A, S, E) with the solver's objective trace.

    ``objective_trace[i]`` is ||X - A S||_F^2 after outer iteration i+1.
    The optional fields carry solver metadata used for reporting; they
    are None for variants that do not produce them.
    """

    endmembers: np.ndarray  # L x M, >= 0
    abundances: np.ndarray  # M x N, >= 0, columns approximately sum to 1
    noise: np.ndarray  # L x N
    objective_trace: np.ndarray
    fusion: object | None = None  # fusion.FusionState for graph variants
    gamma: float | None = None
    iterations: int = 0
    converged: bool = False

    def __post_init__(self):
        A = np.asarray(self.endmembers, dtype=np.float64)
        S = np.asarray(self.abundances, dtype=np.float64)
        E = np.asarray(self.noise, dtype=np.float64)
        if A.shape[1] != S.shape[0]:
            raise ShapeError("endmember and abundance inner dimensions differ")
        if E.shape != (A.shape[0], S.shape[1]):
            raise ShapeError("noise matrix shape must be L x N")
        if np.any(A < 0) or np.any(S < 0):
            raise DataError("endmembers and abundances must be nonnegative")
        object.__setattr__(self, "endmembers", A)
        object.__setattr__(self, "abundances", S)
        object.__setattr__(self, "noise", E)
        object.__setattr__(
            self, "objective_trace", np.asarray(self.objective_trace, dtype=np.float64)
        )


@dataclass(frozen=True)
class UnmixParams:
    """All scalar knobs of the pipeline.

    ``gamma=None`` means "estimate from the data".  ``sigma_s``/``sigma_l``
    accept a positive float or "auto" (median retained neighbor distance).
    ``neighbors_spatial``/``neighbors_spectral`` override ``neighbors``
    per view when set.
    """

    gamma: float | None = None
    beta: float = 1.5
    lam: float = 0.05
    mu: float = 0.1
    alpha: float = 0.1
    delta: float = 15.0
    order: int = 3  # graph order K
    neighbors: int = 10  # k-NN count C
    neighbors_spatial: int | None = None
    neighbors_spectral: int | None = None
    sigma_s: float | str = "auto"
    sigma_l: float | str = "auto"
    eps1: float = 1e-4
    eps2: float = 1e-6
    t1: int = 3000
    t2: int = 50
    seed: int = 0
    gamma_as_written: bool = False
    absolute_eps1: bool = False
    order_norm: bool = True

    def __post_init__(self):
        if self.gamma is not None and self.gamma < 0:
            raise ParamError("gamma must be nonnegative")
        for name in ("beta", "lam", "mu", "alpha"):
            if getattr(self, name) < 0:
                raise ParamError(f"{name} must be nonnegative")
        if self.delta <= 0:
            raise ParamError("delta must be positive")
        if self.order < 1:
            raise ParamError("graph order must be >= 1")
        for name in ("neighbors", "neighbors_spatial", "neighbors_spectral"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ParamError(f"{name} must be >= 1")
        for name in ("sigma_s", "sigma_l"):
            value = getattr(self, name)
            if isinstance(value, str):
                if value != "auto":
                    raise ParamError(f'{name} must be positive or "auto"')
            elif value <= 0:
                raise ParamError(f"{name} must be positive")
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise ParamError("eps1 and eps2 must be positive")
        if self.t1 < 1 or self.t2 < 1:
            raise ParamError("iteration caps t1, t2 must be >= 1")

    def replace(self, **changes) -> "UnmixParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = {
            "gamma": self.gamma,
            "beta": self.beta,
            "lambda": self.lam,
            "mu": self.mu,
            "alpha": self.alpha,
            "delta": self.delta,
            "order": self.order,
            "neighbors": self.neighbors,
            "neighbors_spatial": self.neighbors_spatial,
            "neighbors_spectral": self.neighbors_spectral,
            "sigma_s": self.sigma_s,
            "sigma_l": self.sigma_l,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "t1": self.t1,
            "t2": self.t2,
            "seed": self.seed,
            "gamma_as_written": self.gamma_as_written,
            "absolute_eps1": self.absolute_eps1,
            "order_norm": self.order_norm,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "UnmixParams":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ParamError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**d)


def pixel_coords(j: int, width: int) -> tuple[int, int]:
    """Grid coordinates (u, n) of pixel column j (row-major)."""
    return j // width, j % width


def pixel_index(u: int, n: int, width: int) -> int:
    """Inverse of pixel_coords."""
    return u * width + n


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def load_cube(path, format: str = "raw-f32") -> HsiCube:
    """Load a cube from disk.

    Formats:
      * ``raw-f32``: little-endian float32 binary, band-major, with a
        JSON sidecar ``<path>.json`` holding {"bands", "height", "width"}.
      * ``csv``: first line ``L,H,W``; then L lines of N comma-separated
        values.

    Values are read verbatim; no rescaling is applied.
    """
    path = Path(path)
    if not path.exists():
        raise IoError(f"cube file not found: {path}")
    if format == "raw-f32":
        return _load_raw(path)
    if format == "csv":
        return _load_csv(path)
    raise ParamError(f"unknown cube format: {format!r}")


def _load_raw(path: Path) -> HsiCube:
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise ParseError(f"missing sidecar header: {sidecar}")
    try:
        header = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid sidecar JSON: {exc}") from exc
    try:
        bands = int(header["bands"])
        height = int(header["height"])
        width = int(header["width"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"sidecar must carry integer bands/height/width: {exc}") from exc
    if bands <= 0 or height <= 0 or width <= 0:
        raise ParseError("sidecar dimensions must be positive")
    raw = np.fromfile(path, dtype="<f4")
    n = height * width
    if raw.size != bands * n:
        raise ParseError(
            f"binary holds {raw.size} floats, header implies {bands * n}"
        )
    data = raw.astype(np.float64).reshape(bands, n)
    _check_values(data)
    return HsiCube(data=data, height=height, width=width)


def _load_csv(path: Path) -> HsiCube:
    with open(path, "r") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ParseError(f"empty cube file: {path}")
    head = lines[0].split(",")
    if len(head) != 3:
        raise ParseError(f"header must be 'L,H,W', got {lines[0]!r}")
    try:
        bands, height, width = (int(tok) for tok in head)
    except ValueError as exc:
        raise ParseError(f"non-integer header field in {lines[0]!r}") from exc
    if bands <= 0 or height <= 0 or width <= 0:
        raise ParseError("header dimensions must be positive")
    if len(lines) - 1 != bands:
        raise ParseError(f"expected {bands} band rows, found {len(lines) - 1}")
    n = height * width
    rows = []
    for l, line in enumerate(lines[1:]):
        toks = line.split(",")
        if len(toks) != n:
            raise ParseError(
                f"band {l}: header declares N={n} but {len(toks)} pixel columns present"
            )
        try:
            rows.append([float(tok) for tok in toks])
        except ValueError as exc:
            raise ParseError(f"band {l}: non-numeric entry: {exc}") from exc
    data = np.asarray(rows, dtype=np.float64)
    _check_values(data)
    return HsiCube(data=data, height=height, width=width)


def _check_values(data: np.ndarray) -> None:
    bad = ~np.isfinite(data)
    if np.any(bad):
        l, j = np.argwhere(bad)[0]
        raise DataError(f"non-finite entry at band {l}, pixel {j}")
    neg = data < 0
    if np.any(neg):
        l, j = np.argwhere(neg)[0]
        raise DataError(f"negative entry at band {l}, pixel {j}")


def save_cube(cube: HsiCube, path, format: str = "raw-f32") -> None:
    """Write a cube to disk in the given format (see load_cube)."""
    path = Path(path)
    try:
        if format == "raw-f32":
            header = {
                "bands": cube.band_count,
                "height": cube.height,
                "width": cube.width,
            }
            _sidecar_path(path).write_text(json.dumps(header, sort_keys=True))
            cube.data.astype("<f4").tofile(path)
        elif format == "csv":
            with open(path, "w") as fh:
                fh.write(f"{cube.band_count},{cube.height},{cube.width}\n")
                for row in cube.data:
                    fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        else:
            raise ParamError(f"unknown cube format: {format!r}")
    except OSError as exc:
        raise IoError(f"failed to write {path}: {exc}") from exc


def augment_for_asc(residual: np.ndarray, endmembers: np.ndarray, delta: float):
    """Append a constant delta row to both matrices.

    The appended row softly enforces the sum-to-one constraint on
    abundances solved against the augmented system; existing rows are
    returned unchanged.
    """
    if delta <= 0:
        raise ParamError("delta must be positive")
    residual = np.asarray(residual, dtype=np.float64)
    endmembers = np.asarray(endmembers, dtype=np.float64)
    if residual.ndim != 2 or endmembers.ndim != 2:
        raise ShapeError("augment_for_asc expects 2-D matrices")
    if residual.shape[0] != endmembers.shape[0]:
        raise ShapeError("residual and endmembers must share the band dimension")
    res_row = np.full((1, residual.shape[1]), delta)
    end_row = np.full((1, endmembers.shape[1]), delta)
    return np.vstack([residual, res_row]), np.vstack([endmembers, end_row])


def save_abundance_maps(S: np.ndarray, height: int, width: int, out_dir) -> list[Path]:
    """Write one 8-bit grayscale PGM per abundance row.

    Pixel value is round(255 * clamp(s, 0, 1)); layout is the package's
    row-major pixel convention.  Returns the written paths.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[1] != height * width:
        raise ShapeError("abundance matrix must be M x (height*width)")
    if np.any(S < 0):
        raise DataError("abundances must be nonnegative")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out_dir}: {exc}") from exc
    paths = []
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    for m, row in enumerate(S):
        levels = np.rint(255.0 * np.clip(row, 0.0, 1.0)).astype(np.uint8)
        path = out_dir / f"abundance_{m:02d}.pgm"
        try:
            with open(path, "wb") as fh:
                fh.write(header)
                fh.write(levels.tobytes())
        except OSError as exc:
            raise IoError(f"failed to write {path}: {exc}") from exc
        paths.append(path)
    return paths
