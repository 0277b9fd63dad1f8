"""INI case configuration.

Sections and keys (SI units)::

    [grid]      dims, extent
    [material]  rho0, c0, eps, upper
    [time]      n_steps and either dt or courant
    [sources]   positions (``i,j; i,j; ...``), amplitude, frequency, cycles
    [sensors]   positions, or layout (top | ring) with stride
    [phantom]   voids (``circle cx cy d; sphere cx cy cz d; box x0 y0 x1 y1``)
    [data]      refine
    [train]     strategy, epochs, alpha_min, alpha_max, a, b, clip, seed, voxel,
                channels, pixel_norm, trapezoid, workers, pinn_stride
    [output]    directory

Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from .data import BoxVoid, Problem, Void, build_phantom, make_reference_data
from .forward import SensorArray, SourceSpec, check_courant
from .grid import Grid, MaterialModel, TimeAxis, make_grid
from .inversion import TrainConfig


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


SCHEMA = {
    "grid": {"dims", "extent"},
    "material": {"rho0", "c0", "eps", "upper"},
    "time": {"dt", "courant", "n_steps"},
    "sources": {"positions", "amplitude", "frequency", "cycles"},
    "sensors": {"positions", "layout", "stride"},
    "phantom": {"voids"},
    "data": {"refine"},
    "train": {"strategy", "epochs", "alpha_min", "alpha_max", "a", "b", "clip", "seed",
              "voxel", "channels", "pixel_norm", "trapezoid", "workers", "pinn_stride"},
    "output": {"directory"},
}
REQUIRED = {"grid": {"dims", "extent"}, "time": {"n_steps"}, "sources": {"positions"}}


@dataclass
class CaseConfig:
    grid: Grid
    material: MaterialModel
    time: TimeAxis
    sources: tuple
    sensors: SensorArray
    voids: tuple = ()
    refine: int = 2
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "out"

    def truth(self):
        return build_phantom(self.grid, self.voids, self.material.eps)

    def problem(self, refine: int | None = None) -> Problem:
        r = self.refine if refine is None else refine
        data = make_reference_data(self.voids, self.grid, self.material, self.time,
                                   self.sources, self.sensors, r)
        return Problem(self.grid, self.material, self.time, self.sources, self.sensors,
                       tuple(data), self.truth())


class _Reader:
    def __init__(self, cp: configparser.ConfigParser):
        self.cp = cp

    def has(self, sec, key):
        return self.cp.has_option(sec, key)

    def raw(self, sec, key):
        return self.cp.get(sec, key)

    def _conv(self, sec, key, fn, default):
        if not self.has(sec, key):
            if default is _MISSING:
                raise ConfigError(f"[{sec}] {key}", "required key is missing")
            return default
        try:
            return fn(self.raw(sec, key))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{sec}] {key}", f"cannot parse {self.raw(sec, key)!r} ({exc})") from None

    def float(self, sec, key, default=None):
        return self._conv(sec, key, float, default)

    def int(self, sec, key, default=None):
        return self._conv(sec, key, _strict_int, default)

    def bool(self, sec, key, default=None):
        return self._conv(sec, key, _bool, default)

    def floats(self, sec, key, default=None):
        return self._conv(sec, key, lambda s: tuple(float(x) for x in _split(s, ",")), default)

    def ints(self, sec, key, default=None):
        return self._conv(sec, key, lambda s: tuple(_strict_int(x) for x in _split(s, ",")), default)

    def points(self, sec, key, default=None):
        def parse(s):
            return [tuple(_strict_int(x) for x in _split(p, ",")) for p in _split(s, ";")]
        return self._conv(sec, key, parse, default)


_MISSING = object()


def _split(s: str, sep: str):
    return [p.strip() for p in s.split(sep) if p.strip()]


def _strict_int(s) -> int:
    v = float(s)
    if v != int(v):
        raise ValueError("not an integer")
    return int(v)


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


def _voids(text: str, ndim: int):
    out = []
    for item in _split(text, ";"):
        kind, *nums = item.split()
        vals = [float(x) for x in nums]
        if kind in ("circle", "sphere"):
            if len(vals) != ndim + 1:
                raise ValueError(f"{kind} needs {ndim} centre coordinates and a diameter")
            out.append(Void(tuple(vals[:ndim]), vals[ndim]))
        elif kind == "box":
            if len(vals) != 2 * ndim:
                raise ValueError(f"box needs {2 * ndim} corner coordinates")
            out.append(BoxVoid(tuple(vals[:ndim]), tuple(vals[ndim:])))
        else:
            raise ValueError(f"unknown void shape {kind!r}")
    return tuple(out)


def parse_config(text: str) -> CaseConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"[{sec}]", "unknown section")
        for key in cp.options(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"[{sec}] {key}", "unknown key")
    for sec, keys in REQUIRED.items():
        for key in keys:
            if not cp.has_option(sec, key):
                raise ConfigError(f"[{sec}] {key}", "required key is missing")
    r = _Reader(cp)

    dims = r.ints("grid", "dims")
    extent = r.floats("grid", "extent")
    if len(dims) != len(extent) or len(dims) not in (2, 3):
        raise ConfigError("[grid] dims", "dims and extent must both have 2 or 3 entries")
    if any(n < 3 for n in dims):
        raise ConfigError("[grid] dims", "every axis needs at least 3 nodes")
    if any(not e > 0 for e in extent):
        raise ConfigError("[grid] extent", "entries must be positive")
    grid = make_grid(dims, extent)

    try:
        material = MaterialModel(r.float("material", "rho0", 2700.0), r.float("material", "c0", 6000.0),
                                 r.float("material", "eps", 1e-5), r.float("material", "upper", 1.0))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("[material]", str(exc)) from None

    n_steps = r.int("time", "n_steps")
    if n_steps < 2:
        raise ConfigError("[time] n_steps", "must be >= 2")
    if r.has("time", "dt") == r.has("time", "courant"):
        raise ConfigError("[time] dt", "give exactly one of dt or courant")
    if r.has("time", "dt"):
        dt = r.float("time", "dt")
        if not dt > 0:
            raise ConfigError("[time] dt", "must be positive")
    else:
        c = r.float("time", "courant")
        if not 0 < c < 1:
            raise ConfigError("[time] courant", "must lie in (0, 1)")
        dt = c / (material.c0 * math.sqrt(sum(1.0 / h**2 for h in grid.spacing)))
    time = TimeAxis(dt, n_steps)
    try:
        check_courant(grid, material, time)
    except ValueError as exc:
        raise ConfigError("[time] dt", str(exc)) from None

    amp = r.float("sources", "amplitude", 1e12)
    freq = r.float("sources", "frequency", 5e5)
    cycles = r.int("sources", "cycles", 2)
    if not freq > 0:
        raise ConfigError("[sources] frequency", "must be positive")
    if cycles < 1:
        raise ConfigError("[sources] cycles", "must be >= 1")
    sources = []
    for p in r.points("sources", "positions"):
        try:
            grid.check_index(p)
        except ValueError as exc:
            raise ConfigError("[sources] positions", str(exc)) from None
        sources.append(SourceSpec(p, amp, freq, cycles))
    if not sources:
        raise ConfigError("[sources] positions", "at least one source is required")

    sensors = _sensors(r, grid, [s.position for s in sources])

    voids = ()
    if r.has("phantom", "voids"):
        try:
            voids = _voids(r.raw("phantom", "voids"), grid.ndim)
            for v in voids:
                v.check(grid)
        except ValueError as exc:
            raise ConfigError("[phantom] voids", str(exc)) from None

    refine = r.int("data", "refine", 2)
    if refine < 1:
        raise ConfigError("[data] refine", "must be >= 1")

    kw = {}
    for key, get in (("strategy", lambda s, k: r.raw(s, k).strip()), ("epochs", r.int),
                     ("alpha_min", r.float), ("alpha_max", r.float), ("a", r.float), ("b", r.float),
                     ("clip", r.float), ("seed", r.int), ("voxel", r.ints), ("channels", r.ints),
                     ("pixel_norm", r.bool), ("trapezoid", r.bool), ("workers", r.int),
                     ("pinn_stride", r.int)):
        if r.has("train", key):
            kw[key] = get("train", key)
    kw.setdefault("voxel", (1,) * grid.ndim)
    try:
        train = TrainConfig(**kw)
    except ValueError as exc:
        msg = str(exc)
        key = next((k for k in kw if k in msg), "strategy" if "strategy" in msg else "")
        raise ConfigError(f"[train] {key}".rstrip(), msg) from None
    if len(train.voxel) != grid.ndim or any(v < 1 or n % v for n, v in zip(grid.dims, train.voxel)):
        raise ConfigError("[train] voxel", f"voxel {train.voxel} does not tile grid {grid.dims}")

    out_dir = cp.get("output", "directory", fallback="out")
    return CaseConfig(grid, material, time, tuple(sources), sensors, voids, refine, train, out_dir)


def _sensors(r: _Reader, grid: Grid, source_nodes) -> SensorArray:
    if r.has("sensors", "positions") and r.has("sensors", "layout"):
        raise ConfigError("[sensors] layout", "give either positions or layout, not both")
    if r.has("sensors", "positions"):
        pts = r.points("sensors", "positions")
        for p in pts:
            try:
                grid.check_index(p)
            except ValueError as exc:
                raise ConfigError("[sensors] positions", str(exc)) from None
        try:
            return SensorArray(pts)
        except ValueError as exc:
            raise ConfigError("[sensors] positions", str(exc)) from None
    layout = r.raw("sensors", "layout").strip() if r.has("sensors", "layout") else "top"
    stride = r.int("sensors", "stride", 2)
    if stride < 1:
        raise ConfigError("[sensors] stride", "must be >= 1")
    try:
        return sensor_layout(grid, layout, stride, source_nodes)
    except ValueError as exc:
        raise ConfigError("[sensors] layout", str(exc)) from None


def sensor_layout(grid: Grid, layout: str, stride: int, exclude=()) -> SensorArray:
    """``top``: every ``stride``-th node of the last-axis top face; ``ring``: whole boundary."""
    exclude = {tuple(p) for p in exclude}
    if layout == "top":
        pts = [tuple(p) for p in np.argwhere(np.ones(grid.shape, dtype=bool))
               if p[-1] == grid.dims[-1] - 1 and sum(p[:-1]) % stride == 0]
    elif layout == "ring":
        pts = [tuple(p) for p in np.argwhere(grid.boundary_mask()) if sum(p) % stride == 0]
    else:
        raise ValueError(f"unknown layout {layout!r} (expected top or ring)")
    pts = [tuple(int(i) for i in p) for p in pts if tuple(int(i) for i in p) not in exclude]
    return SensorArray(pts)


def load_config(path) -> CaseConfig:
    with open(path) as fh:
        return parse_config(fh.read())
