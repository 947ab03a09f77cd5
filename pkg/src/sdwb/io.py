"""File formats: sites, fields, intervals, stepdown results, panels and run configs."""

from __future__ import annotations

import contextlib
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .fields import (
    BoundedUniformJumps,
    CompoundPoissonMA,
    FactorModel,
    FieldModel,
    FieldSample,
    GaussianMatern,
    StandardNormalJumps,
)
from .inference import JointCI, StepdownResult
from .kernels import ExpKernelSum, MaternSpec
from .sampling import PiecewiseConstant, SamplingDesign, SiteSet, Uniform

__all__ = [
    "PanelError",
    "RunConfig",
    "SpatioTemporalPanel",
    "design_from_dict",
    "design_to_dict",
    "ingest_panel",
    "model_from_dict",
    "model_to_dict",
    "panel_to_field",
    "read_field_csv",
    "read_sites_csv",
    "write_ci_csv",
    "write_draws_csv",
    "write_field_csv",
    "write_panel_csv",
    "write_rows_csv",
    "write_sites_csv",
    "write_stepdown_json",
]


def _fmt(x: float) -> str:
    # shortest string that round-trips exactly
    return repr(float(x))


@contextlib.contextmanager
def _output(path):
    """Open ``path`` for writing; ``None`` or ``"-"`` means standard output."""
    if path is None or str(path) == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_sites_csv(s: SiteSet, path) -> None:
    """Write ``site_id,x1,...,xd`` with round-trip precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site_id"] + [f"x{k + 1}" for k in range(s.d)])
        for i, row in enumerate(s.sites):
            w.writerow([i] + [_fmt(v) for v in row])


def read_sites_csv(path, lambda_n: float) -> SiteSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "site_id" or len(header) < 2:
            raise ValueError(f"{path}: expected header site_id,x1,...,xd")
        d = len(header) - 1
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != d + 1:
                raise ValueError(f"{path}:{lineno}: expected {d + 1} fields, got {len(rec)}")
            rows.append([float(v) for v in rec[1:]])
    return SiteSet(np.array(rows), lambda_n, d)


def write_field_csv(y: FieldSample, path, long: bool = False) -> None:
    """Wide form: one row per site, header ``0..p-1``. Long form: ``site_id,j,value``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if long:
            w.writerow(["site_id", "j", "value"])
            for i, row in enumerate(y.values):
                for j, v in enumerate(row):
                    w.writerow([i, j, _fmt(v)])
        else:
            w.writerow([str(j) for j in range(y.p)])
            for row in y.values:
                w.writerow([_fmt(v) for v in row])


def read_field_csv(path, sites: SiteSet) -> FieldSample:
    """Read a wide or long field CSV written by :func:`write_field_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        recs = [r for r in reader if r]
    if header == ["site_id", "j", "value"]:
        p = 1 + max(int(r[1]) for r in recs) if recs else 0
        values = np.full((sites.n, p), np.nan)
        for r in recs:
            values[int(r[0]), int(r[1])] = float(r[2])
        if np.isnan(values).any():
            raise ValueError(f"{path}: long-form field is incomplete")
    else:
        values = np.array([[float(v) for v in r] for r in recs])
        if values.ndim != 2 or values.shape[1] != len(header):
            raise ValueError(f"{path}: ragged rows in wide field CSV")
    return FieldSample(sites, values)


def write_ci_csv(ci: JointCI, path) -> None:
    with _output(path) as fh:
        w = csv.writer(fh)
        w.writerow(["j", "lower", "estimate", "upper"])
        for j, (lo, est, hi) in enumerate(zip(ci.lower, ci.estimate, ci.upper), start=1):
            w.writerow([j, _fmt(lo), _fmt(est), _fmt(hi)])


def write_stepdown_json(res: StepdownResult, path, times: Sequence[float] | None = None) -> None:
    out = res.to_dict()
    if times is not None:
        out["times"] = [float(t) for t in times]
    Path(path).write_text(json.dumps(out, indent=2) + "\n")


def write_draws_csv(stats: np.ndarray, path) -> None:
    with _output(path) as fh:
        w = csv.writer(fh)
        w.writerow(["stat"])
        for v in np.asarray(stats).reshape(-1):
            w.writerow([_fmt(v)])


def write_rows_csv(rows: Iterable, path, columns: Sequence[str]) -> None:
    with _output(path) as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            rec = asdict(row)
            w.writerow([_fmt(rec[c]) if isinstance(rec[c], float) else rec[c] for c in columns])


# ---------------------------------------------------------------------------
# spatio-temporal panels


class PanelError(ValueError):
    """Malformed or unusable panel input."""


@dataclass(frozen=True, eq=False)
class SpatioTemporalPanel:
    """Complete station-by-time panel ``M(s_i, t_j)`` after filtering."""

    station_ids: tuple[str, ...]
    coords: np.ndarray
    times: np.ndarray
    values: np.ndarray
    dropped: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if np.any(np.diff(self.times) <= 0):
            raise PanelError("panel times must be strictly increasing")
        if self.values.shape != (len(self.station_ids), self.times.size):
            raise PanelError("panel values must be stations x times")
        if np.isnan(self.values).any():
            raise PanelError("panel has missing entries")


PANEL_HEADER = ["station_id", "x", "y", "t", "value"]
_MISSING = {"", "na", "nan", "null"}


def ingest_panel(
    path,
    window: tuple[float, float] | None = None,
    transform: str = "none",
) -> SpatioTemporalPanel:
    """Read a long-form ``station_id,x,y,t,value`` panel.

    Rows outside ``window`` (inclusive) are ignored. Stations lacking a value at
    any time point present in the window are dropped and listed in
    ``SpatioTemporalPanel.dropped``. ``transform="log1p"`` maps ``M`` to
    ``log(1 + M)`` and rejects negative values.
    """
    if transform not in ("none", "log1p"):
        raise PanelError(f"unknown transform {transform!r}; use 'none' or 'log1p'")
    coords: dict[str, tuple[float, float]] = {}
    obs: dict[str, dict[float, float]] = {}
    negative: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != PANEL_HEADER:
            raise PanelError(f"{path}: expected header {','.join(PANEL_HEADER)}, got {','.join(header)}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != 5:
                raise PanelError(f"{path}:{lineno}: expected 5 fields, got {len(rec)}")
            sid = rec[0].strip()
            try:
                x, yc, t = float(rec[1]), float(rec[2]), float(rec[3])
            except ValueError as exc:
                raise PanelError(f"{path}:{lineno}: malformed row ({exc})") from None
            if window is not None and not window[0] <= t <= window[1]:
                continue
            if sid in coords and coords[sid] != (x, yc):
                raise PanelError(f"{path}:{lineno}: station {sid} changes coordinates")
            coords[sid] = (x, yc)
            raw = rec[4].strip()
            if raw.lower() in _MISSING:
                value = math.nan
            else:
                try:
                    value = float(raw)
                except ValueError:
                    raise PanelError(f"{path}:{lineno}: malformed value {raw!r}") from None
                if transform == "log1p" and value < 0:
                    negative.append(lineno)
            series = obs.setdefault(sid, {})
            if t in series:
                raise PanelError(f"{path}:{lineno}: duplicate observation for station {sid} at t={t:g}")
            series[t] = value
    if negative:
        raise PanelError(f"{path}: negative values cannot be log1p-transformed (rows {negative})")
    times = np.array(sorted({t for series in obs.values() for t in series}))
    keep, dropped = [], []
    for sid in obs:
        series = obs[sid]
        complete = all(t in series and not math.isnan(series[t]) for t in times)
        (keep if complete else dropped).append(sid)
    if not keep:
        raise PanelError(f"{path}: no station has complete data in the window")
    values = np.array([[obs[sid][t] for t in times] for sid in keep])
    if transform == "log1p":
        values = np.log1p(values)
    return SpatioTemporalPanel(
        tuple(keep), np.array([coords[sid] for sid in keep]), times, values, tuple(dropped)
    )


def panel_to_field(panel: SpatioTemporalPanel, lambda_n: float) -> FieldSample:
    """Stack each station's time series into one row of a field sample.

    Coordinates are translated so their bounding box is centred at the origin.
    Only inter-station distances enter the bootstrap, so this changes nothing
    downstream; the centred coordinates must fit in ``[-lambda_n/2, lambda_n/2]^d``.
    """
    lo, hi = panel.coords.min(axis=0), panel.coords.max(axis=0)
    span = float(np.max(hi - lo))
    if span > lambda_n:
        raise PanelError(
            f"station coordinates span {span:g} units, more than lambda_n={lambda_n:g}; "
            "rescale the coordinates or raise lambda_n"
        )
    coords = panel.coords - 0.5 * (lo + hi)
    sites = SiteSet(coords, lambda_n, coords.shape[1])
    return FieldSample(sites, panel.values)


def write_panel_csv(panel: SpatioTemporalPanel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PANEL_HEADER)
        for sid, (x, yc), row in zip(panel.station_ids, panel.coords, panel.values):
            for t, v in zip(panel.times, row):
                w.writerow([sid, _fmt(x), _fmt(yc), _fmt(t), _fmt(v)])


# ---------------------------------------------------------------------------
# model and design (de)serialization


def _kernel_to_dict(g) -> dict:
    if isinstance(g, ExpKernelSum):
        return {"type": "exp_sum", "terms": [list(t) for t in g.terms]}
    if isinstance(g, MaternSpec):
        return {"type": "matern", **asdict(g)}
    raise TypeError(f"cannot serialize kernel {g!r}")


def _kernel_from_dict(d: dict):
    if d["type"] == "exp_sum":
        return ExpKernelSum(tuple(tuple(t) for t in d["terms"]))
    if d["type"] == "matern":
        return MaternSpec(d["nu"], d["a_scale"], d["sigma2"])
    raise ValueError(f"unknown kernel type {d['type']!r}")


def model_to_dict(m: FieldModel) -> dict:
    shift = None if m.mean_shift is None else [float(v) for v in m.mean_shift]
    if isinstance(m, GaussianMatern):
        return {"type": "gaussian_matern", "p": m.p, "matern": asdict(m.matern), "mean_shift": shift}
    if isinstance(m, CompoundPoissonMA):
        jump = (
            {"type": "normal"}
            if isinstance(m.jump, StandardNormalJumps)
            else {"type": "bounded_uniform", "half_width": m.jump.half_width}
        )
        return {
            "type": "compound_poisson_ma",
            "p": m.p,
            "kernel": _kernel_to_dict(m.kernel),
            "intensity": m.intensity,
            "jump": jump,
            "truncation_scale": m.truncation_scale,
            "mean_shift": shift,
        }
    if isinstance(m, FactorModel):
        return {
            "type": "factor",
            "loadings": m.loadings.tolist(),
            "factor": asdict(m.factor),
            "noise_sd": m.noise_sd,
            "mean_shift": shift,
        }
    raise TypeError(f"unsupported model {type(m).__name__}")


def model_from_dict(d: dict) -> FieldModel:
    kind = d["type"]
    if kind == "gaussian_matern":
        return GaussianMatern(d["p"], MaternSpec(**d["matern"]), d.get("mean_shift"))
    if kind == "compound_poisson_ma":
        j = d.get("jump", {"type": "normal"})
        jump = StandardNormalJumps() if j["type"] == "normal" else BoundedUniformJumps(j["half_width"])
        return CompoundPoissonMA(
            d["p"], _kernel_from_dict(d["kernel"]), d["intensity"], jump, d.get("truncation_scale"),
            d.get("mean_shift"),
        )
    if kind == "factor":
        return FactorModel(np.array(d["loadings"]), MaternSpec(**d["factor"]), d["noise_sd"], d.get("mean_shift"))
    raise ValueError(f"unknown model type {kind!r}")


def design_to_dict(design: SamplingDesign) -> dict:
    density: dict[str, Any] = (
        {"type": "uniform"}
        if isinstance(design.density, Uniform)
        else {"type": "piecewise_constant", "weights": design.density.weights.tolist()}
    )
    return {
        "lambda_n": design.lambda_n,
        "d": design.d,
        "region": [list(design.region[0]), list(design.region[1])],
        "density": density,
        "kappa_inv": design.kappa_inv,
    }


def design_from_dict(d: dict) -> SamplingDesign:
    dens = d.get("density", {"type": "uniform"})
    density = Uniform() if dens["type"] == "uniform" else PiecewiseConstant(np.array(dens["weights"]))
    region = d.get("region")
    return SamplingDesign(
        lambda_n=d["lambda_n"],
        d=d.get("d", 2),
        region=None if region is None else (tuple(region[0]), tuple(region[1])),
        density=density,
        kappa_inv=d.get("kappa_inv", 0.0),
    )


@dataclass
class RunConfig:
    """Everything needed to repeat a command-line run.

    ``params`` maps option names (as spelled on the command line, without the
    leading dashes) to JSON values. Relative paths inside a saved config are
    resolved against the config file's directory.
    """

    command: str
    params: dict[str, Any] = field(default_factory=dict)

    def render(self) -> str:
        return json.dumps({"command": self.command, "params": self.params}, indent=2, sort_keys=True) + "\n"

    @classmethod
    def parse(cls, text: str) -> RunConfig:
        data = json.loads(text)
        if not isinstance(data, dict) or "command" not in data:
            raise ValueError("run config must be a JSON object with a 'command' key")
        return cls(str(data["command"]), dict(data.get("params", {})))

    def save(self, path) -> None:
        Path(path).write_text(self.render())

    @classmethod
    def load(cls, path) -> RunConfig:
        return cls.parse(Path(path).read_text())
