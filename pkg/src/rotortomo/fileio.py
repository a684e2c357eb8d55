"""Disk formats: density blocks (JSON), measurement grids (CSV), run configs (YAML).

Blocks store the upper triangle only and are completed Hermitianly on load.
Grids store one row per (t, x) sample with the quadrature weight alongside, so
a file is self-contained: header metadata plus rows rebuild the exact
measurement object (floats are written with %.17g and survive the round trip
bit for bit).  Configs are YAML with a fixed key set; anything unknown or
ill-typed is rejected with a message naming the offending field.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .angular import QuadratureGrid
from .rotor import DensityBlock, MeasurementGrid, RotorKind, RotorSpec, rotor_kind


class FileFormatError(ValueError):
    """A data or config file failed structural validation."""


# ---------------------------------------------------------------------------
# density blocks (JSON)


def save_block(block: DensityBlock, path: str | Path) -> None:
    """Write a block as JSON: channel labels plus upper-triangle entries."""
    entries = []
    js = block.j_values
    for a, j1 in enumerate(js):
        for b in range(a, len(js)):
            v = complex(block.elements[a, b])
            entries.append([int(j1), int(js[b]), v.real, v.imag])
    payload = {"k": block.k, "m": block.m, "j_max": block.j_max, "entries": entries}
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_block(path: str | Path) -> DensityBlock:
    """Read a block written by :func:`save_block`, completing the lower triangle.

    Entries may be sparse (missing pairs are zero) but must stay in the upper
    triangle and inside the channel's J range.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise FileFormatError(f"{path}: top level must be an object")
    for key in ("k", "m", "j_max", "entries"):
        if key not in payload:
            raise FileFormatError(f"{path}: missing key '{key}'")
    extra = set(payload) - {"k", "m", "j_max", "entries"}
    if extra:
        raise FileFormatError(f"{path}: unknown key '{sorted(extra)[0]}'")
    k, m, j_max = payload["k"], payload["m"], payload["j_max"]
    for name, val in (("k", k), ("m", m), ("j_max", j_max)):
        if not isinstance(val, int) or isinstance(val, bool):
            raise FileFormatError(f"{path}: '{name}' must be an integer, got {val!r}")
    j_min = max(abs(k), abs(m))
    if j_max < j_min:
        raise FileFormatError(f"{path}: j_max={j_max} below channel minimum J={j_min}")
    n = j_max - j_min + 1
    mat = np.zeros((n, n), dtype=complex)
    seen = set()
    for i, entry in enumerate(payload["entries"]):
        if not (isinstance(entry, list) and len(entry) == 4):
            raise FileFormatError(f"{path}: entries[{i}] must be [J1, J2, re, im]")
        j1, j2, re_, im_ = entry
        if not all(isinstance(j, int) and not isinstance(j, bool) for j in (j1, j2)):
            raise FileFormatError(f"{path}: entries[{i}] J labels must be integers")
        if not all(isinstance(v, (int, float)) for v in (re_, im_)):
            raise FileFormatError(f"{path}: entries[{i}] values must be numbers")
        if not (j_min <= j1 <= j2 <= j_max):
            raise FileFormatError(
                f"{path}: entries[{i}] pair ({j1}, {j2}) outside upper triangle "
                f"of J range [{j_min}, {j_max}]"
            )
        if (j1, j2) in seen:
            raise FileFormatError(f"{path}: duplicate entry for pair ({j1}, {j2})")
        seen.add((j1, j2))
        a, b = j1 - j_min, j2 - j_min
        mat[a, b] = complex(re_, im_)
        if a != b:
            mat[b, a] = mat[a, b].conjugate()
    try:
        return DensityBlock(k=k, m=m, j_max=j_max, elements=mat)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# measurement grids (CSV)

_GRID_HEADER = re.compile(
    r"^#\s*omega=(?P<omega>[^,\s]+), kind=(?P<kind>[^,\s]+), k=(?P<k>-?\d+), "
    r"m=(?P<m>-?\d+), n_t=(?P<n_t>\d+), n_x=(?P<n_x>\d+), n_periods=(?P<n_periods>\d+)\s*$"
)


def save_grid(grid: MeasurementGrid, path: str | Path) -> None:
    """Write Pr(x, t) as CSV: metadata header, then `t, x, weight, pr` rows."""
    lines = [
        f"# omega={grid.omega:.17g}, kind={grid.kind.value}, k={grid.k}, "
        f"m={grid.m}, n_t={grid.n_t}, n_x={grid.n_x}, n_periods={grid.n_periods}"
    ]
    nodes, weights = grid.x_grid.nodes, grid.x_grid.weights
    for t, row in zip(grid.times, grid.values):
        for x, w, pr in zip(nodes, weights, row):
            lines.append(f"{t:.17g}, {x:.17g}, {w:.17g}, {pr:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_grid(path: str | Path) -> MeasurementGrid:
    """Read a grid written by :func:`save_grid`."""
    path = Path(path)
    raw = path.read_text().splitlines()
    if not raw:
        raise FileFormatError(f"{path}: empty file")
    header = _GRID_HEADER.match(raw[0])
    if header is None:
        raise FileFormatError(f"{path}: line 1: malformed header: {raw[0]!r}")
    try:
        omega = float(header["omega"])
    except ValueError:
        raise FileFormatError(f"{path}: line 1: omega={header['omega']!r} is not a number")
    try:
        kind = rotor_kind(header["kind"])
    except ValueError as exc:
        raise FileFormatError(f"{path}: line 1: {exc}") from None
    k, m = int(header["k"]), int(header["m"])
    n_t, n_x, n_periods = int(header["n_t"]), int(header["n_x"]), int(header["n_periods"])
    if omega <= 0:
        raise FileFormatError(f"{path}: line 1: omega must be positive")
    if n_t < 1 or n_x < 1 or n_periods < 1:
        raise FileFormatError(f"{path}: line 1: n_t, n_x, n_periods must be >= 1")

    rows = []
    for lineno, line in enumerate(raw[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FileFormatError(
                f"{path}: line {lineno}: expected 4 fields `t, x, weight, pr`, "
                f"got {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise FileFormatError(f"{path}: line {lineno}: non-numeric field in {line!r}")
    if len(rows) != n_t * n_x:
        raise FileFormatError(
            f"{path}: found {len(rows)} data rows, header promises n_t*n_x = {n_t * n_x}"
        )
    data = np.array(rows).reshape(n_t, n_x, 4)

    nodes, weights = data[0, :, 1].copy(), data[0, :, 2].copy()
    if not (np.all(np.diff(nodes) > 0) and np.all(np.abs(nodes) < 1)):
        raise FileFormatError(f"{path}: x nodes must be increasing and inside (-1, 1)")
    if np.any(weights <= 0) or abs(weights.sum() - 2.0) > 1e-8:
        raise FileFormatError(f"{path}: x weights must be positive and sum to 2")
    if np.any(data[:, :, 1] != nodes) or np.any(data[:, :, 2] != weights):
        bad = np.argwhere((data[:, :, 1] != nodes) | (data[:, :, 2] != weights))[0]
        raise FileFormatError(
            f"{path}: line {2 + bad[0] * n_x + bad[1]}: x grid differs from the "
            f"first time slice"
        )
    period = math.pi / omega
    times = np.arange(n_t) * (n_periods * period / n_t)
    if np.any(np.abs(data[:, :, 0] - times[:, None]) > 1e-9 * period):
        bad = int(np.argmax(np.abs(data[:, 0, 0] - times) > 1e-9 * period))
        raise FileFormatError(
            f"{path}: line {2 + bad * n_x}: time column is not uniform over "
            f"{n_periods} period(s) of T = pi/omega"
        )
    return MeasurementGrid(
        x_grid=QuadratureGrid(nodes=nodes, weights=weights, order=n_x),
        period=period,
        n_periods=n_periods,
        values=data[:, :, 3],
        omega=omega,
        kind=kind,
        k=k,
        m=m,
    )


# ---------------------------------------------------------------------------
# run configuration (YAML)


@dataclass(frozen=True)
class NoiseConfig:
    samples_per_time: int = 0  # 0 = noiseless
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    """One workbench run: rotor, block size, grids, noise, file locations."""

    spec: RotorSpec
    j_max: int
    n_periods: int = 1
    n_t: int = 0  # 0 = derive from the block
    n_x: int = 0
    search_cap: int = 0  # 0 = default degeneracy search depth
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    state_kind: str = "random-mixed"
    kick_strength: float = 1.0
    threshold: float = 0.0  # 0 = no gate
    paths: dict = field(default_factory=dict)


_SPEC_KEYS = {"kind", "omega", "omega2", "d_cd", "k", "m"}
_SAMPLING_KEYS = {"n_periods", "n_t", "n_x", "search_cap"}
_NOISE_KEYS = {"samples_per_time", "seed"}
_PATH_KEYS = {"state", "data", "out", "report", "metrics", "alignment"}
_TOP_KEYS = {"spec", "j_max", "sampling", "noise", "state", "paths", "threshold"}
_STATE_KEYS = {"kind", "kick_strength"}


def _section(cfg: dict, name: str, allowed: set) -> dict:
    sub = cfg.get(name, {})
    if sub is None:
        sub = {}
    if not isinstance(sub, dict):
        raise FileFormatError(f"config: '{name}' must be a mapping")
    for key in sub:
        if key not in allowed:
            raise FileFormatError(f"config: unknown key '{name}.{key}'")
    return sub


def _get_int(sub: dict, where: str, key: str, default: int, minimum: int = 0) -> int:
    val = sub.get(key, default)
    if not isinstance(val, int) or isinstance(val, bool):
        raise FileFormatError(f"config: '{where}.{key}' must be an integer, got {val!r}")
    if val < minimum:
        raise FileFormatError(f"config: '{where}.{key}' must be >= {minimum}, got {val}")
    return val


def _get_float(sub: dict, where: str, key: str, default: float) -> float:
    val = sub.get(key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise FileFormatError(f"config: '{where}.{key}' must be a number, got {val!r}")
    return float(val)


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a YAML run config."""
    path = Path(path)
    try:
        cfg = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise FileFormatError(f"{path}: not valid YAML ({exc})") from exc
    if not isinstance(cfg, dict):
        raise FileFormatError(f"{path}: top level must be a mapping")
    for key in cfg:
        if key not in _TOP_KEYS:
            raise FileFormatError(f"config: unknown key '{key}'")

    spec_cfg = _section(cfg, "spec", _SPEC_KEYS)
    if "kind" not in spec_cfg:
        raise FileFormatError("config: 'spec.kind' is required")
    try:
        spec = RotorSpec(
            kind=rotor_kind(spec_cfg["kind"]),
            omega=_get_float(spec_cfg, "spec", "omega", 1.0),
            omega2=_get_float(spec_cfg, "spec", "omega2", 0.0),
            d_cd=_get_float(spec_cfg, "spec", "d_cd", 0.0),
            k=_get_int(spec_cfg, "spec", "k", 0, minimum=-10**6),
            m=_get_int(spec_cfg, "spec", "m", 0, minimum=-10**6),
        )
    except ValueError as exc:
        raise FileFormatError(f"config: spec: {exc}") from exc

    if "j_max" not in cfg:
        raise FileFormatError("config: 'j_max' is required")
    j_max = _get_int(cfg, "config", "j_max", 0, minimum=0)
    if j_max < max(abs(spec.k), abs(spec.m)):
        raise FileFormatError(
            f"config: j_max={j_max} below channel minimum "
            f"J={max(abs(spec.k), abs(spec.m))}"
        )

    sampling = _section(cfg, "sampling", _SAMPLING_KEYS)
    noise_cfg = _section(cfg, "noise", _NOISE_KEYS)
    state_cfg = _section(cfg, "state", _STATE_KEYS)
    state_kind = state_cfg.get("kind", "random-mixed")
    if state_kind not in ("random-pure", "random-mixed", "cos2-kicked"):
        raise FileFormatError(f"config: 'state.kind' unknown: {state_kind!r}")

    paths = _section(cfg, "paths", _PATH_KEYS)
    for key, val in paths.items():
        if not isinstance(val, str) or not val:
            raise FileFormatError(f"config: 'paths.{key}' must be a non-empty string")

    return ExperimentConfig(
        spec=spec,
        j_max=j_max,
        n_periods=_get_int(sampling, "sampling", "n_periods", 1, minimum=1),
        n_t=_get_int(sampling, "sampling", "n_t", 0),
        n_x=_get_int(sampling, "sampling", "n_x", 0),
        search_cap=_get_int(sampling, "sampling", "search_cap", 0),
        noise=NoiseConfig(
            samples_per_time=_get_int(noise_cfg, "noise", "samples_per_time", 0),
            seed=_get_int(noise_cfg, "noise", "seed", 0),
        ),
        state_kind=state_kind,
        kick_strength=_get_float(state_cfg, "state", "kick_strength", 1.0),
        threshold=_get_float(cfg, "config", "threshold", 0.0),
        paths=dict(paths),
    )
