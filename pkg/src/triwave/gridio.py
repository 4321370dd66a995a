"""Configuration parsing, deterministic grid serialization, and heatmaps."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .ensemble import EnsembleData, PoleData
from .model import FieldGrid, GridSpec, ModelParams, Packet

__all__ = [
    "ChecksumError",
    "ConfigError",
    "RunOptions",
    "ExperimentConfig",
    "GridManifest",
    "parse_config",
    "write_field_grid",
    "read_field_grid",
    "render_heatmap",
    "ensemble_to_json",
    "ensemble_from_json",
    "windowed_total_variation",
]

_TOOL = f"triwave {__version__}"
_COLORMAP = "viridis"


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


class ChecksumError(IOError):
    """Stored payload does not match its recorded checksum."""


@dataclass(frozen=True)
class RunOptions:
    """Execution options shared by the command-line drivers."""

    cfl: float = 1.0
    threads: int = 1
    precision: str = "double"
    output_dir: str = "out"
    correction_mode: str = "oracle"
    norming_convention: str = "wkb-alternating-blaschke-default"
    coupling_scheme: str = "implicit_midpoint"
    transport: str = "upwind"
    epsilon_sweep: tuple[float, ...] = ()
    heatmap_channels: tuple[str, ...] = ("q1", "q2", "q3")

    def __post_init__(self) -> None:
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.precision not in ("double", "extended"):
            raise ConfigError(f"precision must be double or extended, got {self.precision!r}")
        if self.correction_mode not in ("oracle", "blaschke"):
            raise ConfigError(f"correction_mode must be oracle or blaschke, got {self.correction_mode!r}")
        if self.transport not in ("upwind", "spectral"):
            raise ConfigError(f"transport must be upwind or spectral, got {self.transport!r}")
        if self.coupling_scheme not in ("implicit_midpoint", "explicit_midpoint"):
            raise ConfigError(f"unknown coupling_scheme {self.coupling_scheme!r}")
        for ch in self.heatmap_channels:
            if ch not in ("q1", "q2", "q3"):
                raise ConfigError(f"unknown heatmap channel {ch!r}")
        if any(e <= 0 for e in self.epsilon_sweep):
            raise ConfigError("epsilon_sweep entries must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated experiment description."""

    model: ModelParams
    packets: tuple[Packet, ...]
    grid: GridSpec | None = None
    run: RunOptions = field(default_factory=RunOptions)
    raw: dict | None = None


_MODEL_KEYS = {"epsilon", "speeds", "couplings", "conjugate_fields"}
_PACKET_KEYS = {
    "mode", "shape", "amplitude", "width", "center",
    "support_halfwidth", "truncation_tol", "samples",
}
_GRID_KEYS = {"x_min", "x_max", "nx", "t_min", "t_max", "nt"}
_RUN_KEYS = {
    "cfl", "threads", "precision", "output_dir", "correction_mode",
    "norming_convention", "coupling_scheme", "transport", "epsilon_sweep",
    "heatmap_channels",
}
_TOP_KEYS = {"model", "packets", "grid", "run"}


def _reject_unknown(section: dict, allowed: set[str], where: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def _build_packet(entry: dict, index: int) -> Packet:
    _reject_unknown(entry, _PACKET_KEYS, f"packets[{index}]")
    if "mode" not in entry:
        raise ConfigError(f"packets[{index}] is missing required key 'mode'")
    kwargs: dict[str, Any] = {k: v for k, v in entry.items() if k != "samples"}
    samples = entry.get("samples")
    if samples is not None:
        if not (isinstance(samples, dict) and set(samples) == {"y", "f"}):
            raise ConfigError(
                f"packets[{index}].samples must be an object with keys 'y' and 'f'"
            )
        kwargs["samples"] = (tuple(samples["y"]), tuple(samples["f"]))
    try:
        return Packet(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"packets[{index}]: {exc}") from exc


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment configuration.

    Unknown keys anywhere are rejected by name; semantic violations surface
    the failed invariant's message.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object")
    _reject_unknown(data, _TOP_KEYS, "the top level")

    model_section = data.get("model", {})
    if not isinstance(model_section, dict):
        raise ConfigError("'model' must be an object")
    _reject_unknown(model_section, _MODEL_KEYS, "model")
    if "epsilon" not in model_section:
        raise ConfigError("model is missing required key 'epsilon'")
    try:
        model = ModelParams(
            epsilon=model_section["epsilon"],
            speeds=tuple(model_section.get("speeds", (1.0, 0.0, -1.0))),
            couplings=tuple(model_section.get("couplings", (1, -1, 1))),
            conjugate_fields=bool(model_section.get("conjugate_fields", False)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc

    packets_section = data.get("packets", [])
    if not isinstance(packets_section, list):
        raise ConfigError("'packets' must be a list")
    packets = tuple(_build_packet(p, i) for i, p in enumerate(packets_section))

    grid = None
    if "grid" in data:
        section = data["grid"]
        _reject_unknown(section, _GRID_KEYS, "grid")
        missing = _GRID_KEYS - set(section)
        if missing:
            raise ConfigError(f"grid is missing keys {sorted(missing)}")
        try:
            grid = GridSpec(**section)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"grid: {exc}") from exc

    run_section = data.get("run", {})
    _reject_unknown(run_section, _RUN_KEYS, "run")
    kwargs = dict(run_section)
    if "epsilon_sweep" in kwargs:
        kwargs["epsilon_sweep"] = tuple(kwargs["epsilon_sweep"])
    if "heatmap_channels" in kwargs:
        kwargs["heatmap_channels"] = tuple(kwargs["heatmap_channels"])
    try:
        run = RunOptions(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"run: {exc}") from exc

    return ExperimentConfig(model, packets, grid, run, raw=data)


# ---------------------------------------------------------------------------
# Serialization helpers
# ---------------------------------------------------------------------------


def model_to_dict(m: ModelParams) -> dict:
    return {
        "epsilon": m.epsilon,
        "speeds": list(m.speeds),
        "couplings": list(m.couplings),
        "conjugate_fields": m.conjugate_fields,
    }


def model_from_dict(d: dict) -> ModelParams:
    return ModelParams(
        epsilon=d["epsilon"],
        speeds=tuple(d["speeds"]),
        couplings=tuple(d["couplings"]),
        conjugate_fields=bool(d.get("conjugate_fields", False)),
    )


def packet_to_dict(p: Packet) -> dict:
    out = {
        "mode": p.mode,
        "shape": p.shape,
        "amplitude": p.amplitude,
        "width": p.width,
        "center": p.center,
        "support_halfwidth": p.support_halfwidth,
        "truncation_tol": p.truncation_tol,
    }
    if p.samples is not None:
        out["samples"] = {"y": list(p.samples[0]), "f": list(p.samples[1])}
    return out


@dataclass(frozen=True)
class GridManifest:
    """Self-describing metadata for a serialized FieldGrid."""

    path: Path
    shape: tuple[int, int]
    grid: dict
    model: dict
    payloads: dict
    config_echo: dict | None
    conventions: dict
    tool: str = _TOOL

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "triwave-grid",
                "version": 1,
                "tool": self.tool,
                "byte_order": "little",
                "dtype": "float64",
                "order": "C (t-major)",
                "shape": list(self.shape),
                "grid": self.grid,
                "model": self.model,
                "payloads": self.payloads,
                "config": self.config_echo,
                "conventions": self.conventions,
            },
            indent=2,
            sort_keys=True,
        )


_CONVENTIONS = {
    "equations": "eps (d_t + c_j d_x) q_j = i eta_j conj(q_k) conj(q_l), (j,k,l) cyclic",
    "lax": "J = diag(c1,c2,c3); K = diag(c2 c3, c3 c1, c1 c2); skew-Hermitian coupling",
    "mode_pairs": "mode 1 -> rows (2,3), mode 2 -> (1,3), mode 3 -> (1,2), 1-based",
}


def _payload_names(stem: str) -> dict[str, str]:
    return {
        f"q{j}_{part}": f"{stem}.q{j}_{part}.f64"
        for j in (1, 2, 3)
        for part in ("re", "im")
    }


def write_field_grid(
    grid: FieldGrid,
    path: str | Path,
    config_echo: dict | None = None,
    extra_conventions: dict | None = None,
) -> GridManifest:
    """Write six little-endian float64 payloads plus a JSON manifest.

    Reading the manifest back reproduces the grid bit-exactly; payload
    integrity is guarded by SHA-256 checksums.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stem = path.name[: -len(".json")] if path.name.endswith(".json") else path.name
    names = _payload_names(stem)
    payloads = {}
    parts = {
        "q1_re": grid.q1.real, "q1_im": grid.q1.imag,
        "q2_re": grid.q2.real, "q2_im": grid.q2.imag,
        "q3_re": grid.q3.real, "q3_im": grid.q3.imag,
    }
    for key, arr in parts.items():
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        target = path.parent / names[key]
        target.write_bytes(raw)
        payloads[key] = {
            "path": names[key],
            "sha256": hashlib.sha256(raw).hexdigest(),
            "bytes": len(raw),
        }
    conventions = dict(_CONVENTIONS)
    if extra_conventions:
        conventions.update(extra_conventions)
    manifest = GridManifest(
        path=path,
        shape=(grid.nt, grid.nx),
        grid={
            "x_min": grid.x_min, "x_max": grid.x_max, "nx": grid.nx,
            "t_min": grid.t_min, "t_max": grid.t_max, "nt": grid.nt,
        },
        model=model_to_dict(grid.params),
        payloads=payloads,
        config_echo=config_echo,
        conventions=conventions,
    )
    path.write_text(manifest.to_json())
    return manifest


def read_field_grid(path: str | Path) -> FieldGrid:
    """Load a grid written by write_field_grid, verifying checksums."""
    path = Path(path)
    meta = json.loads(path.read_text())
    if meta.get("format") != "triwave-grid":
        raise IOError(f"{path} is not a triwave grid manifest")
    shape = tuple(meta["shape"])
    parts = {}
    for key, info in meta["payloads"].items():
        raw = (path.parent / info["path"]).read_bytes()
        digest = hashlib.sha256(raw).hexdigest()
        if digest != info["sha256"]:
            raise ChecksumError(
                f"payload {info['path']}: checksum mismatch "
                f"(expected {info['sha256'][:12]}..., got {digest[:12]}...)"
            )
        parts[key] = np.frombuffer(raw, dtype="<f8").reshape(shape)
    g = meta["grid"]
    return FieldGrid(
        g["x_min"], g["x_max"], g["nx"], g["t_min"], g["t_max"], g["nt"],
        parts["q1_re"] + 1j * parts["q1_im"],
        parts["q2_re"] + 1j * parts["q2_im"],
        parts["q3_re"] + 1j * parts["q3_im"],
        model_from_dict(meta["model"]),
    )


# ---------------------------------------------------------------------------
# Heatmaps
# ---------------------------------------------------------------------------


def render_heatmap(
    grid: FieldGrid,
    channel: str,
    path: str | Path,
    vmax: float | None = None,
) -> Path:
    """PNG heatmap of |q_channel| (x horizontal, t upward) plus a JSON sidecar.

    The colormap and scaling are fixed and recorded, and the output bytes are
    a deterministic function of the input grid.
    """
    from matplotlib import colormaps
    from PIL import Image

    if channel not in ("q1", "q2", "q3"):
        raise ValueError(f"channel must be one of q1, q2, q3, got {channel!r}")
    if grid.nx < 1 or grid.nt < 1:
        raise ValueError("empty grid")
    data = np.abs(getattr(grid, channel))
    if vmax is None:
        vmax = float(np.max(data))
    scaled = data / vmax if vmax > 0 else np.zeros_like(data)
    lut = (colormaps[_COLORMAP](np.linspace(0.0, 1.0, 256))[:, :3] * 255).astype(np.uint8)
    idx = np.clip((scaled * 255).astype(int), 0, 255)
    rgb = lut[idx][::-1]  # flip so t increases upward
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
    sidecar = {
        "channel": channel,
        "colormap": _COLORMAP,
        "vmin": 0.0,
        "vmax": vmax,
        "x_range": [grid.x_min, grid.x_max],
        "t_range": [grid.t_min, grid.t_max],
        "shape": [grid.nt, grid.nx],
        "orientation": "x right, t up",
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


# ---------------------------------------------------------------------------
# Ensemble serialization
# ---------------------------------------------------------------------------


def ensemble_to_json(e: EnsembleData) -> str:
    return json.dumps(
        {
            "format": "triwave-ensemble",
            "version": 1,
            "tool": _TOOL,
            "time": e.time,
            "model": model_to_dict(e.params),
            "poles": [
                {
                    "lambda": [p.lam.real, p.lam.imag],
                    "mode": p.mode,
                    "norming": [p.norming.real, p.norming.imag],
                    "packet_index": p.packet_index,
                    "k_index": p.k_index,
                }
                for p in e.poles
            ],
            "labels": {
                "norming_convention": e.norming_convention,
                "correction_mode": e.correction_mode,
            },
            "conventions": _CONVENTIONS,
        },
        indent=2,
        sort_keys=True,
    )


def ensemble_from_json(text: str) -> EnsembleData:
    data = json.loads(text)
    if data.get("format") != "triwave-ensemble":
        raise IOError("not a triwave ensemble document")
    poles = tuple(
        PoleData(
            complex(*p["lambda"]),
            int(p["mode"]),
            complex(*p["norming"]),
            int(p.get("packet_index", -1)),
            int(p.get("k_index", -1)),
        )
        for p in data["poles"]
    )
    labels = data.get("labels", {})
    return EnsembleData(
        model_from_dict(data["model"]),
        poles,
        float(data["time"]),
        labels.get("norming_convention"),
        labels.get("correction_mode"),
    )


# ---------------------------------------------------------------------------
# Region statistics
# ---------------------------------------------------------------------------


def windowed_total_variation(
    grid: FieldGrid,
    win_x: int = 16,
    win_t: int = 16,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-window total-variation rate and peak amplitude of sum_j |q_j|.

    The grid is tiled into win_t x win_x blocks; each block reports the mean
    absolute increment of the total amplitude per unit x plus per unit t (a
    proxy separating quiescent, slowly varying, and oscillatory regions) and
    its peak amplitude.
    """
    if grid.nx < 2 * win_x or grid.nt < 2 * win_t:
        raise ValueError("grid too small for the requested window tiling")
    s = np.abs(grid.q1) + np.abs(grid.q2) + np.abs(grid.q3)
    bx = grid.nx // win_x
    bt = grid.nt // win_t
    tv = np.zeros((win_t, win_x))
    amp = np.zeros((win_t, win_x))
    for it in range(win_t):
        for ix in range(win_x):
            block = s[it * bt : (it + 1) * bt, ix * bx : (ix + 1) * bx]
            dx = np.abs(np.diff(block, axis=1)).mean() / grid.hx if block.shape[1] > 1 else 0.0
            dt = np.abs(np.diff(block, axis=0)).mean() / grid.ht if block.shape[0] > 1 else 0.0
            tv[it, ix] = dx + dt
            amp[it, ix] = block.max()
    return tv, amp
