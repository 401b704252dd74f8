"""Spec documents, synthetic instances, table/checkpoint files, CSV and SVG output."""
import io as _io
import math
import struct
import sys
import zipfile
from pathlib import Path

import numpy as np
import yaml

from .errors import (ConfigurationError, SpecParseError, TableFormatError, TruncatedFileError,
                     VersionMismatchError)
from .fast_thermal import ResistanceTables, check_compatible
from .floorplan_env import Chiplet, Net, SystemSpec, anchor_position
from .reward import RewardConfig
from .thermal_reference import ThermalStack

# ---------------------------------------------------------------- spec documents

_INTERPOSER_KEYS = ("width_mm", "height_mm", "lattice_size", "grid_nx", "grid_ny",
                    "cell_size_mm", "min_spacing_mm")
_INT_KEYS = {"lattice_size", "grid_nx", "grid_ny"}
_STACK_KEYS = ("lateral_conductivity_w_mk", "thickness_m", "vertical_conductance_w_m2k",
               "ambient_k")
_REWARD_KEYS = ("lambda", "mu", "t0_k", "alpha", "failure_reward")


def _section(doc, key, kind=dict):
    if key not in doc or doc[key] is None:
        raise SpecParseError(SpecParseError.MISSING_KEY, key, "required section is missing")
    if not isinstance(doc[key], kind):
        raise SpecParseError(SpecParseError.INVALID_VALUE, key,
                             f"expected a {'mapping' if kind is dict else 'list'}")
    return doc[key]


def _number(section, key, path, integer=False):
    if key not in section:
        raise SpecParseError(SpecParseError.MISSING_KEY, f"{path}.{key}", "required key is missing")
    v = section[key]
    if isinstance(v, str):
        # YAML 1.1 reads exponents without a dot ("5e-4") as strings
        try:
            v = float(v)
        except ValueError:
            pass
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecParseError(SpecParseError.NOT_FINITE, f"{path}.{key}", f"not a number: {v!r}")
    if not math.isfinite(v):
        raise SpecParseError(SpecParseError.NOT_FINITE, f"{path}.{key}", f"not finite: {v!r}")
    if integer:
        if int(v) != v:
            raise SpecParseError(SpecParseError.INVALID_VALUE, f"{path}.{key}",
                                 f"expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _positive(value, path):
    if value <= 0:
        raise SpecParseError(SpecParseError.INVALID_VALUE, path, f"must be > 0, got {value!r}")
    return value


def parse_system_spec(text):
    """Parse and validate a YAML spec document into a :class:`SystemSpec`."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "document"
        raise SpecParseError(SpecParseError.SYNTAX, where, str(exc).splitlines()[0]) from None
    if not isinstance(doc, dict):
        raise SpecParseError(SpecParseError.SYNTAX, "document", "top level must be a mapping")

    ip = _section(doc, "interposer")
    vals = {k: _number(ip, k, "interposer", k in _INT_KEYS) for k in _INTERPOSER_KEYS}
    for k in _INTERPOSER_KEYS:
        if k != "min_spacing_mm":
            _positive(vals[k], f"interposer.{k}")
    if vals["min_spacing_mm"] < 0:
        raise SpecParseError(SpecParseError.INVALID_VALUE, "interposer.min_spacing_mm", "must be >= 0")

    st = _section(doc, "stack")
    sv = {k: _positive(_number(st, k, "stack"), f"stack.{k}") for k in _STACK_KEYS}
    stack = ThermalStack(sv["lateral_conductivity_w_mk"], sv["thickness_m"],
                         sv["vertical_conductance_w_m2k"], sv["ambient_k"])

    chiplets = []
    names = {}
    for i, c in enumerate(_section(doc, "chiplets", list)):
        path = f"chiplets[{i}]"
        if not isinstance(c, dict):
            raise SpecParseError(SpecParseError.INVALID_VALUE, path, "expected a mapping")
        if "name" not in c:
            raise SpecParseError(SpecParseError.MISSING_KEY, f"{path}.name", "required key is missing")
        name = str(c["name"])
        if name in names:
            raise SpecParseError(SpecParseError.INVALID_VALUE, f"{path}.name", f"duplicate name {name!r}")
        w = _positive(_number(c, "width_mm", path), f"{path}.width_mm")
        h = _positive(_number(c, "height_mm", path), f"{path}.height_mm")
        p = _positive(_number(c, "power_w", path), f"{path}.power_w")
        if w > vals["width_mm"] or h > vals["height_mm"]:
            raise SpecParseError(SpecParseError.CHIPLET_TOO_LARGE, path,
                                 f"{w}x{h} mm does not fit the interposer")
        names[name] = i
        chiplets.append(Chiplet(name, w, h, p))
    if not chiplets:
        raise SpecParseError(SpecParseError.INVALID_VALUE, "chiplets", "at least one chiplet required")

    nets = []
    raw_nets = doc.get("nets") or []
    if not isinstance(raw_nets, list):
        raise SpecParseError(SpecParseError.INVALID_VALUE, "nets", "expected a list")
    for i, n in enumerate(raw_nets):
        path = f"nets[{i}]"
        if not isinstance(n, dict):
            raise SpecParseError(SpecParseError.INVALID_VALUE, path, "expected a mapping")
        ends = []
        for end in ("a", "b"):
            if end not in n:
                raise SpecParseError(SpecParseError.MISSING_KEY, f"{path}.{end}", "required key is missing")
            if str(n[end]) not in names:
                raise SpecParseError(SpecParseError.UNKNOWN_ENDPOINT, f"{path}.{end}",
                                     f"no chiplet named {n[end]!r}")
            ends.append(names[str(n[end])])
        if ends[0] == ends[1]:
            raise SpecParseError(SpecParseError.INVALID_VALUE, path, "net connects a chiplet to itself")
        wires = _number(n, "wires", path, integer=True)
        if wires < 1:
            raise SpecParseError(SpecParseError.INVALID_VALUE, f"{path}.wires", "must be >= 1")
        nets.append(Net(ends[0], ends[1], wires))

    reward = RewardConfig()
    if doc.get("reward") is not None:
        rw = _section(doc, "reward")
        rv = {k: _number(rw, k, "reward") for k in _REWARD_KEYS}
        try:
            reward = RewardConfig(rv["lambda"], rv["mu"], rv["t0_k"], rv["alpha"], rv["failure_reward"])
        except ConfigurationError as exc:
            raise SpecParseError(SpecParseError.INVALID_VALUE, "reward", str(exc)) from None

    try:
        return SystemSpec(
            width=vals["width_mm"], height=vals["height_mm"], chiplets=tuple(chiplets),
            nets=tuple(nets), lattice_size=vals["lattice_size"], grid_nx=vals["grid_nx"],
            grid_ny=vals["grid_ny"], cell_size_mm=vals["cell_size_mm"],
            min_spacing=vals["min_spacing_mm"], stack=stack, reward=reward)
    except ConfigurationError as exc:
        raise SpecParseError(SpecParseError.INVALID_VALUE, "document", str(exc)) from None


def spec_to_document(spec):
    st, rw = spec.stack, spec.reward
    return {
        "interposer": {
            "width_mm": float(spec.width), "height_mm": float(spec.height),
            "lattice_size": spec.lattice_size, "grid_nx": spec.grid_nx, "grid_ny": spec.grid_ny,
            "cell_size_mm": float(spec.cell_size_mm), "min_spacing_mm": float(spec.min_spacing),
        },
        "stack": {
            "lateral_conductivity_w_mk": st.lateral_conductivity, "thickness_m": st.thickness,
            "vertical_conductance_w_m2k": st.vertical_conductance, "ambient_k": st.ambient_temperature,
        },
        "chiplets": [{"name": c.name, "width_mm": float(c.width), "height_mm": float(c.height),
                      "power_w": float(c.power)} for c in spec.chiplets],
        "nets": [{"a": spec.chiplets[n.a].name, "b": spec.chiplets[n.b].name, "wires": n.wires}
                 for n in spec.nets],
        "reward": {"lambda": rw.lam, "mu": rw.mu, "t0_k": rw.t0, "alpha": rw.alpha,
                   "failure_reward": rw.failure_reward},
    }


def serialize_system_spec(spec):
    return yaml.safe_dump(spec_to_document(spec), sort_keys=False, default_flow_style=None)


def load_system_spec(path):
    return parse_system_spec(Path(path).read_text())


# ---------------------------------------------------------------- synthetic systems

SYNTH_INTERPOSER_MM = 64.0


def generate_synthetic(n_chiplets, rng):
    """Random instance: sides U[2, 16] mm, powers U[1, 30] W, connected netlist.

    Sizes are redrawn until total chiplet area is at most half the interposer.
    ``rng`` is a ``numpy.random.Generator`` or an integer seed.
    """
    if not 2 <= n_chiplets <= 16:
        raise ConfigurationError("n_chiplets must be in [2, 16]")
    rng = np.random.default_rng(rng)
    side = SYNTH_INTERPOSER_MM
    while True:
        w = np.round(rng.uniform(2.0, 16.0, n_chiplets), 2)
        h = np.round(rng.uniform(2.0, 16.0, n_chiplets), 2)
        if float(np.sum(w * h)) <= 0.5 * side * side:
            break
    p = np.round(rng.uniform(1.0, 30.0, n_chiplets), 2)
    chiplets = tuple(Chiplet(f"c{i}", float(w[i]), float(h[i]), float(p[i]))
                     for i in range(n_chiplets))

    perm = rng.permutation(n_chiplets)
    edges = set()
    for i in range(1, n_chiplets):
        j = int(rng.integers(0, i))
        edges.add(tuple(sorted((int(perm[i]), int(perm[j])))))
    extra = n_chiplets // 2
    for _ in range(extra):
        a, b = (int(v) for v in rng.choice(n_chiplets, size=2, replace=False))
        edges.add(tuple(sorted((a, b))))
    nets = tuple(Net(a, b, int(rng.integers(16, 513))) for a, b in sorted(edges))
    return SystemSpec(width=side, height=side, chiplets=chiplets, nets=nets,
                      lattice_size=32, grid_nx=64, grid_ny=64, cell_size_mm=1.0)


# ---------------------------------------------------------------- resistance tables

TABLE_MAGIC = b"CPLTABLE"
TABLE_VERSION = 1
_TABLE_HEADER = struct.Struct("<8sIIIddIII")


def persist_tables(tables, path):
    payload = np.concatenate([tables.self_widths, tables.self_heights,
                              tables.self_table.ravel(), tables.mutual_table]).astype("<f8")
    header = _TABLE_HEADER.pack(TABLE_MAGIC, TABLE_VERSION, tables.grid_nx, tables.grid_ny,
                                tables.cell_size, tables.ambient_temperature,
                                tables.self_widths.size, tables.self_heights.size,
                                tables.mutual_table.size)
    Path(path).write_bytes(header + payload.tobytes())


def load_tables(path, spec=None):
    """Read tables written by :func:`persist_tables`; optionally check them against ``spec``."""
    data = Path(path).read_bytes()
    if len(data) < _TABLE_HEADER.size:
        raise TruncatedFileError(f"{path}: file shorter than the table header")
    magic, version, nx, ny, cell, amb, nw, nh, nm = _TABLE_HEADER.unpack_from(data)
    if magic != TABLE_MAGIC:
        raise TableFormatError(f"{path}: not a resistance-table file")
    if version != TABLE_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {TABLE_VERSION}")
    count = nw + nh + nw * nh + nm
    need = _TABLE_HEADER.size + 8 * count
    if len(data) < need:
        raise TruncatedFileError(f"{path}: expected {need} bytes, found {len(data)}")
    if len(data) > need:
        raise TableFormatError(f"{path}: {len(data) - need} unexpected trailing bytes")
    vals = np.frombuffer(data, dtype="<f8", count=count, offset=_TABLE_HEADER.size).astype(np.float64)
    tables = ResistanceTables(
        self_widths=vals[:nw], self_heights=vals[nw:nw + nh],
        self_table=vals[nw + nh:nw + nh + nw * nh].reshape(nw, nh),
        mutual_table=vals[nw + nh + nw * nh:], cell_size=cell, ambient_temperature=amb,
        grid_nx=nx, grid_ny=ny)
    if spec is not None:
        check_compatible(tables, spec)
    return tables


# ---------------------------------------------------------------- checkpoints

CHECKPOINT_VERSION = 1


def save_checkpoint(path, params, rnd_params, rnd_stats, epoch):
    arrays = {f"policy/{k}": v for k, v in params.items()}
    arrays.update({f"rnd/{k}": v for k, v in rnd_params.items()})
    arrays.update({f"rndstat/{k}": np.asarray(v) for k, v in rnd_stats.items()})
    arrays["format_version"] = np.asarray(CHECKPOINT_VERSION)
    arrays["epoch"] = np.asarray(epoch)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    try:
        with np.load(path) as data:
            if int(data["format_version"]) != CHECKPOINT_VERSION:
                raise VersionMismatchError(f"{path}: checkpoint version {int(data['format_version'])}")
            out = {"policy": {}, "rnd": {}, "rndstat": {}, "epoch": int(data["epoch"])}
            for key in data.files:
                if "/" in key:
                    group, name = key.split("/", 1)
                    out[group][name] = data[key]
            return out
    except (ValueError, EOFError, OSError, KeyError, zipfile.BadZipFile) as exc:
        raise TruncatedFileError(f"{path}: unreadable checkpoint ({exc})") from None


# ---------------------------------------------------------------- floorplan files

def write_floorplan(path, floorplan, spec):
    rows = [(spec.chiplets[k].name, a[0], a[1]) for k, a in enumerate(floorplan.anchors)]
    write_csv(path, ("name", "ix", "iy"), rows)


def read_floorplan(path, spec):
    from .floorplan_env import state_from_anchors

    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0].strip() != "name,ix,iy":
        raise ConfigurationError(f"{path}: expected header 'name,ix,iy'")
    index = {c.name: k for k, c in enumerate(spec.chiplets)}
    anchors = [None] * spec.n
    for line in lines[1:]:
        name, ix, iy = line.split(",")
        if name not in index:
            raise ConfigurationError(f"{path}: unknown chiplet {name!r}")
        anchors[index[name]] = (int(ix), int(iy))
    if any(a is None for a in anchors):
        raise ConfigurationError(f"{path}: floorplan does not place every chiplet")
    return state_from_anchors(spec, anchors)


# ---------------------------------------------------------------- CSV

def fmt_value(v):
    """Floats: shortest exact repr, padded to at least six significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return repr(v)
        s = repr(v)
        digits = s.split("e")[0].replace("-", "").replace(".", "").lstrip("0")
        if len(digits) < 6:
            s = format(v, "#.6g")
            if "e" not in s and s.endswith("."):
                s += "0"
        return s
    if v is None:
        return ""
    return str(v)


def csv_text(header, rows):
    buf = _io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt_value(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path, header, rows):
    text = csv_text(header, rows)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------- SVG

_COOL = (49, 130, 189)
_HOT = (222, 45, 38)


def _color(temp, t_min, t_max):
    f = 0.0 if t_max <= t_min else min(max((temp - t_min) / (t_max - t_min), 0.0), 1.0)
    r, g, b = (round(c0 + f * (c1 - c0)) for c0, c1 in zip(_COOL, _HOT))
    return f"#{r:02x}{g:02x}{b:02x}"


def render_svg(floorplan, spec, estimate, path=None, scale=10.0):
    """Floorplan drawing coloured from ambient (cool) to the peak temperature (hot)."""
    from .errors import StateError

    if not floorplan.complete:
        raise StateError("render_svg needs a complete floorplan")
    w, h = spec.width * scale, spec.height * scale
    amb = spec.stack.ambient_temperature
    t_max = estimate.max_temperature
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1f}" height="{h:.1f}" '
        f'viewBox="0 0 {w:.1f} {h:.1f}">',
        f'<rect x="0" y="0" width="{w:.1f}" height="{h:.1f}" fill="#f7f7f7" stroke="#333" '
        f'stroke-width="2"/>',
    ]
    for k, c in enumerate(spec.chiplets):
        x, y = anchor_position(spec, floorplan.anchors[k])
        temp = estimate.per_chiplet_temperature[k]
        sx, sy = x * scale, (spec.height - y - c.height) * scale
        cw, ch = c.width * scale, c.height * scale
        parts.append(f'<rect x="{sx:.2f}" y="{sy:.2f}" width="{cw:.2f}" height="{ch:.2f}" '
                     f'fill="{_color(temp, amb, t_max)}" stroke="#000" stroke-width="1"/>')
        fs = max(min(cw, ch) / 6.0, 4.0)
        cx, cy = sx + cw / 2, sy + ch / 2
        parts.append(f'<text x="{cx:.2f}" y="{cy - fs:.2f}" font-size="{fs:.1f}" '
                     f'text-anchor="middle">{_xml(c.name)}</text>')
        parts.append(f'<text x="{cx:.2f}" y="{cy + 0.2 * fs:.2f}" font-size="{fs:.1f}" '
                     f'text-anchor="middle">{c.power:g} W</text>')
        parts.append(f'<text x="{cx:.2f}" y="{cy + 1.4 * fs:.2f}" font-size="{fs:.1f}" '
                     f'text-anchor="middle">{temp:.2f} K</text>')
    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"
    if path is not None:
        Path(path).write_text(svg)
    return svg


def _xml(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


__all__ = [
    "parse_system_spec", "serialize_system_spec", "load_system_spec", "generate_synthetic",
    "persist_tables", "load_tables", "save_checkpoint", "load_checkpoint", "write_floorplan",
    "read_floorplan", "write_csv", "csv_text", "fmt_value", "render_svg",
]
