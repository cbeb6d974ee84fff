"""Scenario configuration (line-oriented key=value text) and snapshot files.

A scenario file is UTF-8 text of ``[section]`` headers and ``key = value``
lines; ``#`` starts a comment.  Sections: [grid], [time], [material] (the
background) plus repeatable [material.circle], [material.halfplane],
[material.polygon] regions applied in order, [source], [receivers], [pml],
[surface] (optional) and [output].  Unknown keys and missing required keys
are reported with their line number.  ``print_scenario`` emits canonical
text whose reparse reproduces the scenario exactly.

Snapshot files are little-endian binary: magic "VAWS", u16 version, u8
dim, u32 n_x, u32 n_y, f64 h, f64 time, then n_x*n_y f32 cell pressure
means in row-major order.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field, replace

import numpy as np

SNAPSHOT_MAGIC = b"VAWS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sHBIIdd")


class ScenarioError(ValueError):
    """Configuration problem, carrying the offending line number."""

    def __init__(self, line: int | None, msg: str):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + msg)
        self.line = line


@dataclass(frozen=True)
class RegionSpec:
    shape: str  # background | circle | halfplane | polygon
    params: tuple[float, ...]
    rho: float
    c: float
    Q: float  # math.inf for elastic
    fit: str = "gmb"  # gmb | pade | tau | none
    L: int = 3
    omega_ref: float | None = None  # calibration frequency; default source dominant

    def __post_init__(self):
        if self.shape not in ("background", "circle", "halfplane", "polygon"):
            raise ValueError(f"unknown region shape {self.shape!r}")
        if self.rho <= 0 or self.c <= 0 or self.Q <= 0:
            raise ValueError("rho, c, Q must be positive")
        if self.fit not in ("gmb", "pade", "tau", "none"):
            raise ValueError(f"unknown fit method {self.fit!r}")


@dataclass(frozen=True)
class SourceSpec:
    kind: str  # point | plane_wave
    wavelet: str = "ricker"  # ricker | two_sine
    f0: float | None = 2.5
    T: float | None = None
    amplitude: float = 1.0
    # point source
    x: float = 0.0
    y: float = 0.0
    mode: str = "pressure"  # pressure | force
    fx: float = 0.0
    fy: float = 1.0
    spread: str = "bilinear"  # nearest | bilinear
    # plane wave
    angle: float = 0.0
    box: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("point", "plane_wave"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.wavelet not in ("ricker", "two_sine"):
            raise ValueError(f"unknown wavelet {self.wavelet!r}")
        if self.kind == "plane_wave" and self.box is None:
            raise ValueError("plane_wave source needs an injection box")


@dataclass(frozen=True)
class SurfaceSpec:
    kind: str  # line | circle | file
    params: tuple = ()
    path: str | None = None
    h_s: float | None = None  # default 1.3 h


@dataclass(frozen=True)
class PmlSection:
    delta: int = 30
    R: float = 5.0e-7
    exponent: int = 4
    sides: tuple[str, ...] = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class Scenario:
    dim: int
    x_min: float
    x_max: float
    h: float
    t_end: float
    regions: tuple[RegionSpec, ...]
    source: SourceSpec
    receivers: tuple[tuple[str, float, float], ...]
    y_min: float = 0.0
    y_max: float = 0.0
    cfl_fraction: float = 0.95
    dt: float | None = None
    pml: PmlSection | None = None
    surface: SurfaceSpec | None = None
    output_dir: str = "out"
    snapshot_every: int = 0
    prefix: str = "run"

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.x_max <= self.x_min or (self.dim == 2 and self.y_max <= self.y_min):
            raise ValueError("empty domain")
        if self.h <= 0 or self.t_end <= 0:
            raise ValueError("h and t_end must be positive")
        if not self.regions or self.regions[0].shape != "background":
            raise ValueError("first region must be the background")


_FLOAT_KEYS = "accepts inf for Q"


def _parse_float(value: str, line: int, key: str) -> float:
    v = value.strip().lower()
    if v in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(value)
    except ValueError:
        raise ScenarioError(line, f"{key}: not a number: {value!r}") from None


def _parse_int(value: str, line: int, key: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ScenarioError(line, f"{key}: not an integer: {value!r}") from None


def _sections(text: str):
    """Yield (section_name, header_line, [(line_no, key, value), ...])."""
    current = None
    items: list = []
    header_line = 0
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError(i, f"malformed section header {raw.strip()!r}")
            if current is not None:
                yield current, header_line, items
            current, header_line, items = line[1:-1].strip().lower(), i, []
        else:
            if "=" not in line:
                raise ScenarioError(i, f"expected key = value, got {raw.strip()!r}")
            if current is None:
                raise ScenarioError(i, "key outside any [section]")
            key, value = line.split("=", 1)
            items.append((i, key.strip().lower(), value.strip()))
    if current is not None:
        yield current, header_line, items


def _as_dict(items, line: int, section: str, allowed: set):
    out = {}
    for ln, key, value in items:
        if key not in allowed:
            raise ScenarioError(ln, f"unknown key {key!r} in [{section}]")
        if key in out:
            raise ScenarioError(ln, f"duplicate key {key!r} in [{section}]")
        out[key] = (ln, value)
    return out


def _require(d: dict, key: str, section: str, line: int):
    if key not in d:
        raise ScenarioError(line, f"[{section}] is missing required key {key!r}")
    return d[key]


def _region_from(section, line, items) -> RegionSpec:
    shape = "background" if section == "material" else section.split(".", 1)[1]
    allowed = {"rho", "c", "q", "fit", "l", "omega_ref"}
    shape_keys = {
        "background": set(),
        "circle": {"cx", "cy", "radius"},
        "halfplane": {"a", "b", "rhs"},
        "polygon": {"vertices"},
    }
    if shape not in shape_keys:
        raise ScenarioError(line, f"unknown material shape {shape!r}")
    d = _as_dict(items, line, section, allowed | shape_keys[shape])
    rho = _parse_float(*_require(d, "rho", section, line)[::-1], key="rho")
    c = _parse_float(*_require(d, "c", section, line)[::-1], key="c")
    q = _parse_float(*_require(d, "q", section, line)[::-1], key="Q")
    if shape == "circle":
        params = tuple(_parse_float(*_require(d, k, section, line)[::-1], key=k)
                       for k in ("cx", "cy", "radius"))
    elif shape == "halfplane":
        params = tuple(_parse_float(*_require(d, k, section, line)[::-1], key=k)
                       for k in ("a", "b", "rhs"))
    elif shape == "polygon":
        ln, value = _require(d, "vertices", section, line)
        parts = value.split()
        if len(parts) < 6 or len(parts) % 2:
            raise ScenarioError(ln, "vertices: need an even list of at least 6 numbers")
        params = tuple(_parse_float(p, ln, "vertices") for p in parts)
    else:
        params = ()
    fit = d.get("fit", (line, "gmb"))[1].lower()
    L = _parse_int(d["l"][1], d["l"][0], "L") if "l" in d else 3
    omega_ref = _parse_float(d["omega_ref"][1], d["omega_ref"][0], "omega_ref") if "omega_ref" in d else None
    try:
        return RegionSpec(shape, params, rho, c, q, fit, L, omega_ref)
    except ValueError as exc:
        raise ScenarioError(line, str(exc)) from None


def parse_scenario(text: str, base_dir: str | None = None) -> Scenario:
    grid = time_sec = source = pml = surface = output = None
    regions: list[RegionSpec] = []
    receivers: list[tuple[str, float, float]] = []
    seen = set()
    for section, line, items in _sections(text):
        if section in seen and not section.startswith("material."):
            raise ScenarioError(line, f"duplicate section [{section}]")
        seen.add(section)
        if section == "grid":
            grid = (line, _as_dict(items, line, section,
                                   {"dim", "x_min", "x_max", "y_min", "y_max", "h"}))
        elif section == "time":
            time_sec = (line, _as_dict(items, line, section,
                                       {"t_end", "cfl_fraction", "dt"}))
        elif section == "material" or section.startswith("material."):
            if section == "material" and regions:
                raise ScenarioError(line, "[material] background must come before shaped regions")
            if section != "material" and not regions:
                raise ScenarioError(line, "shaped region before the [material] background")
            regions.append(_region_from(section, line, items))
        elif section == "source":
            source = (line, _as_dict(items, line, section,
                                     {"type", "wavelet", "f0", "t", "amplitude", "x", "y",
                                      "mode", "fx", "fy", "spread", "angle", "box"}))
        elif section == "receivers":
            for ln, key, value in items:
                parts = value.split()
                if len(parts) not in (1, 2):
                    raise ScenarioError(ln, f"receiver {key!r}: expected 'x [y]'")
                x = _parse_float(parts[0], ln, key)
                y = _parse_float(parts[1], ln, key) if len(parts) == 2 else 0.0
                receivers.append((key, x, y))
        elif section == "pml":
            pml = (line, _as_dict(items, line, section, {"delta", "r", "exponent", "sides"}))
        elif section == "surface":
            surface = (line, _as_dict(items, line, section,
                                      {"type", "path", "h_s", "x0", "y0", "x1", "y1",
                                       "cx", "cy", "radius"}))
        elif section == "output":
            output = (line, _as_dict(items, line, section,
                                     {"directory", "snapshot_every", "prefix"}))
        else:
            raise ScenarioError(line, f"unknown section [{section}]")

    if grid is None:
        raise ScenarioError(None, "missing [grid] section")
    gl, gd = grid
    dim = _parse_int(*_require(gd, "dim", "grid", gl)[::-1], key="dim")
    x_min = _parse_float(*_require(gd, "x_min", "grid", gl)[::-1], key="x_min")
    x_max = _parse_float(*_require(gd, "x_max", "grid", gl)[::-1], key="x_max")
    h = _parse_float(*_require(gd, "h", "grid", gl)[::-1], key="h")
    y_min = _parse_float(gd["y_min"][1], gd["y_min"][0], "y_min") if "y_min" in gd else 0.0
    y_max = _parse_float(gd["y_max"][1], gd["y_max"][0], "y_max") if "y_max" in gd else 0.0
    if dim == 2 and ("y_min" not in gd or "y_max" not in gd):
        raise ScenarioError(gl, "[grid] needs y_min and y_max in 2D")

    if time_sec is None:
        raise ScenarioError(None, "missing [time] section")
    tl, td = time_sec
    t_end = _parse_float(*_require(td, "t_end", "time", tl)[::-1], key="t_end")
    cfl_fraction = _parse_float(td["cfl_fraction"][1], td["cfl_fraction"][0], "cfl_fraction") if "cfl_fraction" in td else 0.95
    dt = _parse_float(td["dt"][1], td["dt"][0], "dt") if "dt" in td else None

    if not regions:
        raise ScenarioError(None, "missing [material] background section")

    if source is None:
        raise ScenarioError(None, "missing [source] section")
    sl, sd = source
    kind = _require(sd, "type", "source", sl)[1].lower()
    wavelet = sd.get("wavelet", (sl, "ricker"))[1].lower()
    box = None
    if "box" in sd:
        ln, value = sd["box"]
        parts = value.split()
        if len(parts) != 4:
            raise ScenarioError(ln, "box: expected 'x_min y_min x_max y_max'")
        box = tuple(_parse_float(p, ln, "box") for p in parts)
    try:
        src = SourceSpec(
            kind=kind,
            wavelet=wavelet,
            f0=_parse_float(sd["f0"][1], sd["f0"][0], "f0") if "f0" in sd else (2.5 if wavelet == "ricker" else None),
            T=_parse_float(sd["t"][1], sd["t"][0], "T") if "t" in sd else None,
            amplitude=_parse_float(sd["amplitude"][1], sd["amplitude"][0], "amplitude") if "amplitude" in sd else 1.0,
            x=_parse_float(sd["x"][1], sd["x"][0], "x") if "x" in sd else 0.0,
            y=_parse_float(sd["y"][1], sd["y"][0], "y") if "y" in sd else 0.0,
            mode=sd.get("mode", (sl, "pressure"))[1].lower(),
            fx=_parse_float(sd["fx"][1], sd["fx"][0], "fx") if "fx" in sd else 0.0,
            fy=_parse_float(sd["fy"][1], sd["fy"][0], "fy") if "fy" in sd else 1.0,
            spread=sd.get("spread", (sl, "bilinear"))[1].lower(),
            angle=_parse_float(sd["angle"][1], sd["angle"][0], "angle") if "angle" in sd else 0.0,
            box=box,
        )
    except ValueError as exc:
        raise ScenarioError(sl, str(exc)) from None

    pml_spec = None
    if pml is not None:
        pl, pd = pml
        sides_raw = pd.get("sides", (pl, "left right bottom top"))[1]
        if sides_raw.strip().lower() == "none":
            pml_spec = None
        else:
            try:
                pml_spec = PmlSection(
                    delta=_parse_int(pd["delta"][1], pd["delta"][0], "delta") if "delta" in pd else 30,
                    R=_parse_float(pd["r"][1], pd["r"][0], "R") if "r" in pd else 5.0e-7,
                    exponent=_parse_int(pd["exponent"][1], pd["exponent"][0], "exponent") if "exponent" in pd else 4,
                    sides=tuple(sides_raw.split()),
                )
            except ValueError as exc:
                raise ScenarioError(pl, str(exc)) from None
    elif dim == 2:
        pml_spec = PmlSection()

    surf = None
    if surface is not None:
        ul, ud = surface
        stype = _require(ud, "type", "surface", ul)[1].lower()
        h_s = _parse_float(ud["h_s"][1], ud["h_s"][0], "h_s") if "h_s" in ud else None
        if stype == "line":
            params = tuple(_parse_float(*_require(ud, k, "surface", ul)[::-1], key=k)
                           for k in ("x0", "y0", "x1", "y1"))
            surf = SurfaceSpec("line", params, None, h_s)
        elif stype == "circle":
            params = tuple(_parse_float(*_require(ud, k, "surface", ul)[::-1], key=k)
                           for k in ("cx", "cy", "radius"))
            surf = SurfaceSpec("circle", params, None, h_s)
        elif stype == "file":
            spath = _require(ud, "path", "surface", ul)[1]
            if base_dir is not None and not os.path.isabs(spath):
                spath = os.path.join(base_dir, spath)
            surf = SurfaceSpec("file", (), spath, h_s)
        else:
            raise ScenarioError(ul, f"unknown surface type {stype!r}")

    out_dir, every, prefix = "out", 0, "run"
    if output is not None:
        ol, od = output
        out_dir = od.get("directory", (ol, "out"))[1]
        every = _parse_int(od["snapshot_every"][1], od["snapshot_every"][0], "snapshot_every") if "snapshot_every" in od else 0
        prefix = od.get("prefix", (ol, "run"))[1]

    try:
        return Scenario(dim, x_min, x_max, h, t_end, tuple(regions), src, tuple(receivers),
                        y_min, y_max, cfl_fraction, dt, pml_spec, surf, out_dir, every, prefix)
    except ValueError as exc:
        raise ScenarioError(None, str(exc)) from None


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def print_scenario(sc: Scenario) -> str:
    """Canonical text form; parse_scenario(print_scenario(sc)) == sc."""
    lines = ["[grid]", f"dim = {sc.dim}", f"x_min = {_fmt(sc.x_min)}", f"x_max = {_fmt(sc.x_max)}"]
    if sc.dim == 2:
        lines += [f"y_min = {_fmt(sc.y_min)}", f"y_max = {_fmt(sc.y_max)}"]
    lines += [f"h = {_fmt(sc.h)}", "", "[time]", f"t_end = {_fmt(sc.t_end)}",
              f"cfl_fraction = {_fmt(sc.cfl_fraction)}"]
    if sc.dt is not None:
        lines.append(f"dt = {_fmt(sc.dt)}")
    for r in sc.regions:
        header = "[material]" if r.shape == "background" else f"[material.{r.shape}]"
        lines += ["", header]
        if r.shape == "circle":
            for k, v in zip(("cx", "cy", "radius"), r.params):
                lines.append(f"{k} = {_fmt(v)}")
        elif r.shape == "halfplane":
            for k, v in zip(("a", "b", "rhs"), r.params):
                lines.append(f"{k} = {_fmt(v)}")
        elif r.shape == "polygon":
            lines.append("vertices = " + " ".join(_fmt(v) for v in r.params))
        lines += [f"rho = {_fmt(r.rho)}", f"c = {_fmt(r.c)}", f"Q = {_fmt(r.Q)}",
                  f"fit = {r.fit}", f"L = {r.L}"]
        if r.omega_ref is not None:
            lines.append(f"omega_ref = {_fmt(r.omega_ref)}")
    s = sc.source
    lines += ["", "[source]", f"type = {s.kind}", f"wavelet = {s.wavelet}"]
    if s.f0 is not None:
        lines.append(f"f0 = {_fmt(s.f0)}")
    if s.T is not None:
        lines.append(f"T = {_fmt(s.T)}")
    lines.append(f"amplitude = {_fmt(s.amplitude)}")
    if s.kind == "point":
        lines += [f"x = {_fmt(s.x)}", f"y = {_fmt(s.y)}", f"mode = {s.mode}",
                  f"fx = {_fmt(s.fx)}", f"fy = {_fmt(s.fy)}", f"spread = {s.spread}"]
        if s.angle != 0.0:
            lines.append(f"angle = {_fmt(s.angle)}")
    else:
        lines += [f"angle = {_fmt(s.angle)}",
                  "box = " + " ".join(_fmt(v) for v in s.box)]
    if sc.receivers:
        lines += ["", "[receivers]"]
        for name, x, y in sc.receivers:
            lines.append(f"{name} = {_fmt(x)} {_fmt(y)}" if sc.dim == 2 else f"{name} = {_fmt(x)}")
    lines += ["", "[pml]"]
    if sc.pml is None:
        lines.append("sides = none")
    else:
        lines += [f"delta = {sc.pml.delta}", f"R = {_fmt(sc.pml.R)}",
                  f"exponent = {sc.pml.exponent}", "sides = " + " ".join(sc.pml.sides)]
    if sc.surface is not None:
        u = sc.surface
        lines += ["", "[surface]", f"type = {u.kind}"]
        if u.kind == "line":
            for k, v in zip(("x0", "y0", "x1", "y1"), u.params):
                lines.append(f"{k} = {_fmt(v)}")
        elif u.kind == "circle":
            for k, v in zip(("cx", "cy", "radius"), u.params):
                lines.append(f"{k} = {_fmt(v)}")
        else:
            lines.append(f"path = {u.path}")
        if u.h_s is not None:
            lines.append(f"h_s = {_fmt(u.h_s)}")
    lines += ["", "[output]", f"directory = {sc.output_dir}",
              f"snapshot_every = {sc.snapshot_every}", f"prefix = {sc.prefix}", ""]
    return "\n".join(lines)


# -- snapshot files --------------------------------------------------------


@dataclass(frozen=True)
class SnapshotHeader:
    version: int
    dim: int
    n_x: int
    n_y: int
    h: float
    time: float


def write_snapshot(path, dim: int, h: float, time: float, field_values: np.ndarray) -> None:
    """Write a pressure-mean snapshot; 1D fields are stored with n_y = 1."""
    arr = np.atleast_2d(np.asarray(field_values, dtype=np.float32))
    if not np.isfinite(arr).all():
        raise ValueError("snapshot contains non-finite values")
    n_y, n_x = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, dim, n_x, n_y, h, time))
        fh.write(arr.astype("<f4").tobytes(order="C"))


def read_snapshot(path):
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise ValueError(f"{path}: truncated snapshot header")
        magic, version, dim, n_x, n_y, h, time = _HEADER.unpack(raw)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not a snapshot file")
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {version}")
        payload = fh.read()
    expected = 4 * n_x * n_y
    if len(payload) != expected:
        raise ValueError(f"{path}: payload length {len(payload)} != {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(n_y, n_x)
    return SnapshotHeader(version, dim, n_x, n_y, h, time), data
