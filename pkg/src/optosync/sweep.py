"""Parameter scans and bisection of synchronisation thresholds."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .classical import (N_MIN, IntegratorConfig, integrate, phase_difference,
                        phase_lock, wrap)
from .correlations import (discord_time_average, gaussian_discord,
                           log_negativity, reduce)
from .errors import (MaxIterations, NoSignChange, OptosyncError,
                     ParameterError)
from .model import ClassicalState, SyncMetrics, SystemParams, validate
from .quantum import (initial_cm, phase_variance_series, propagate_cm,
                      time_average)

AXES = ("eta", "domega", "coupling_ratio", "temperature")
OUTPUTS = ("phase", "variance", "discord", "negativity")
QUANTUM_OUTPUTS = frozenset(("variance", "discord", "negativity"))
JUMP_RAD = math.pi / 4
JUMP_NEIGHBOURHOOD = 0.1


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional scan of ``axis`` over ``values``.

    ``transient_cut=None`` averages over the same final window used for
    the stationary phase, i.e. from ``(1 - window_fraction) * t_end``.
    """

    base: SystemParams = SystemParams()
    axis: str = "eta"
    values: Tuple[float, ...] = (3600.0,)
    outputs: Tuple[str, ...] = ("phase",)
    integrator: IntegratorConfig = IntegratorConfig()
    transient_cut: Optional[float] = None
    init: ClassicalState = field(default_factory=ClassicalState.seed)
    window_fraction: float = 0.2
    sync_threshold: float = 0.2
    n_min: float = N_MIN
    log_base: float = 10.0
    extend_near_jumps: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values",
                           tuple(float(v) for v in np.atleast_1d(self.values)))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    def replace(self, **changes) -> "SweepSpec":
        return replace(self, **changes)

    @property
    def quantum(self) -> bool:
        return bool(QUANTUM_OUTPUTS.intersection(self.outputs))

    def params_at(self, value: float) -> SystemParams:
        base = self.base
        if self.axis == "eta":
            return base.replace(eta=value)
        if self.axis == "domega":
            return base.replace(domega=value)
        if self.axis == "coupling_ratio":
            return base.replace(g=(base.g[0], value * base.g[0]))
        if self.axis == "temperature":
            return base.replace(temp=(value, value))
        raise ParameterError(f"unknown axis {self.axis!r}")

    def cut(self, t_end: float) -> float:
        if self.transient_cut is not None:
            return self.transient_cut
        return (1.0 - self.window_fraction) * t_end


def validate_spec(spec: SweepSpec) -> SweepSpec:
    if spec.axis not in AXES:
        raise ParameterError(f"axis must be one of {AXES}, got {spec.axis!r}")
    if not spec.values:
        raise ParameterError("sweep values must not be empty")
    diffs = np.diff(spec.values)
    if len(diffs) and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ParameterError("sweep values must be strictly monotone")
    unknown = set(spec.outputs) - set(OUTPUTS)
    if unknown:
        raise ParameterError(f"unknown outputs {sorted(unknown)}")
    if spec.transient_cut is not None and not (
            0 <= spec.transient_cut < spec.integrator.t_end):
        raise ParameterError("transient_cut must lie in [0, t_end)")
    for v in spec.values:
        validate(spec.params_at(v))
    return spec


@dataclass(frozen=True)
class SweepRow:
    value: float
    metrics: Optional[SyncMetrics]
    status: str                      # "ok" | "not_synchronized" | "error"
    error: str = ""
    t_end: float = float("nan")
    n_accepted: int = 0
    n_rejected: int = 0
    physicality_margin: float = float("nan")
    var_raw_min: float = float("nan")
    discord_gap_min: float = float("nan")   # min(B - A) after the cut
    discord_min: float = float("nan")
    extended: bool = False

    @property
    def synchronized(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    rows: Tuple[SweepRow, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r.metrics, name) if r.metrics else np.nan
                         for r in self.rows])


def evaluate(params: SystemParams, spec: SweepSpec,
             cfg: Optional[IntegratorConfig] = None):
    """Run one parameter point; return ``(row_fields, trajectory)``."""
    cfg = cfg or spec.integrator
    if spec.quantum:
        traj = propagate_cm(initial_cm(params), spec.init, params, cfg)
    else:
        traj = integrate(spec.init, params, cfg)
    series = phase_difference(traj, spec.n_min)
    lock = phase_lock(series, spec.window_fraction, spec.sync_threshold)
    cut = spec.cut(cfg.t_end)
    fields = dict(t_end=cfg.t_end, n_accepted=traj.n_accepted,
                  n_rejected=traj.n_rejected,
                  physicality_margin=traj.physicality_margin)
    extra = {}
    if "variance" in spec.outputs:
        pv = phase_variance_series(traj, spec.n_min)
        extra["var_avg"] = time_average(pv.t, pv.var, cut)
        fields["var_raw_min"] = pv.raw_min
    if spec.quantum and ({"discord", "negativity"} & set(spec.outputs)):
        r = reduce(traj.cov)
        late = traj.t >= cut
        if "discord" in spec.outputs:
            da = gaussian_discord(r, "A", spec.log_base)
            db = gaussian_discord(r, "B", spec.log_base)
            extra["discord_a_avg"] = discord_time_average(traj.t, da, cut)
            extra["discord_b_avg"] = discord_time_average(traj.t, db, cut)
            fields["discord_gap_min"] = float(np.min(db[late] - da[late]))
            fields["discord_min"] = float(min(da[late].min(), db[late].min()))
        if "negativity" in spec.outputs:
            E, _ = log_negativity(r)
            extra["e_max"] = float(E[late].max())
    metrics = SyncMetrics(phi_stat=lock.phi_stat, phi_amp=lock.phi_amp,
                          synchronized=lock.synchronized, drift=lock.drift,
                          window=lock.window, **extra)
    fields["metrics"] = metrics
    fields["status"] = "ok" if lock.synchronized else "not_synchronized"
    return fields, traj


def run_point(value: float, spec: SweepSpec,
              cfg: Optional[IntegratorConfig] = None) -> SweepRow:
    """Evaluate a single axis value; simulation failures become error rows."""
    try:
        fields, _ = evaluate(spec.params_at(value), spec, cfg)
    except OptosyncError as exc:
        return SweepRow(value=value, metrics=None, status="error",
                        error=f"{type(exc).__name__}: {exc}",
                        t_end=(cfg or spec.integrator).t_end)
    return SweepRow(value=value, **fields)


def _map(fn, items, workers):
    if workers and workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


class _PointTask:
    def __init__(self, spec, cfg=None):
        self.spec = spec
        self.cfg = cfg

    def __call__(self, value):
        return run_point(value, self.spec, self.cfg)


def detect_jumps(rows: Sequence[SweepRow]) -> List[float]:
    """Axis locations where the stationary phase of neighbouring
    synchronised rows changes by more than pi/4."""
    jumps = []
    good = [r for r in rows if r.synchronized]
    for a, b in zip(good, good[1:]):
        if abs(wrap(a.metrics.phi_stat - b.metrics.phi_stat)) > JUMP_RAD:
            jumps.append(0.5 * (a.value + b.value))
    return jumps


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Evaluate every axis value; rows follow ``spec.values`` order.

    Unsynchronised points within 10% of a detected phase jump are run once
    more with twice the integration time, since transients lengthen near
    the transition.
    """
    validate_spec(spec)
    rows = _map(_PointTask(spec), list(spec.values), workers)
    if spec.extend_near_jumps:
        jumps = detect_jumps(rows)
        redo = [i for i, r in enumerate(rows) if r.status == "not_synchronized"
                and any(abs(r.value - j) <= JUMP_NEIGHBOURHOOD * abs(j)
                        for j in jumps)]
        if redo:
            longer = spec.integrator.replace(t_end=2 * spec.integrator.t_end)
            new = _map(_PointTask(spec, longer), [rows[i].value for i in redo],
                       workers)
            for i, row in zip(redo, new):
                rows[i] = replace(row, extended=True)
    return SweepResult(spec=spec, rows=tuple(rows))


@dataclass(frozen=True)
class Threshold:
    value: float
    bracket: Tuple[float, float]
    iterations: int
    rows: Tuple[SweepRow, ...]


def find_threshold(spec: SweepSpec, predicate: Callable[[SweepRow], bool],
                   tolerance: float, max_iter: int = 60,
                   point: Callable[[float, SweepSpec], SweepRow] = None
                   ) -> Threshold:
    """Locate the first flip of ``predicate`` along ``spec.values``.

    The grid values are evaluated in order until the predicate differs
    from its value at ``spec.values[0]``; that adjacent pair is then
    bisected until the bracket is narrower than ``tolerance``. With two
    values this is plain bisection between them. Scanning first matters
    because the synchronised region need not be connected: a later
    re-entry into synchronisation would otherwise hide the first loss.
    ``point`` evaluates one axis value and defaults to :func:`run_point`.
    """
    validate_spec(spec)
    point = point or run_point
    if not tolerance > 0:
        raise ParameterError("tolerance must be positive")
    rows = [point(spec.values[0], spec)]
    f_lo = bool(predicate(rows[0]))
    lo = hi = None
    for prev, value in zip(spec.values, spec.values[1:]):
        row = point(value, spec)
        rows.append(row)
        if bool(predicate(row)) != f_lo:
            lo, hi = prev, value
            break
    if lo is None:
        raise NoSignChange(
            f"predicate is {f_lo} at every value in "
            f"[{spec.values[0]:g}, {spec.values[-1]:g}]")
    it = 0
    while abs(hi - lo) >= tolerance:
        if it >= max_iter:
            raise MaxIterations(f"bracket [{lo:g}, {hi:g}] after {it} steps")
        mid = 0.5 * (lo + hi)
        row = point(mid, spec)
        rows.append(row)
        if bool(predicate(row)) == f_lo:
            lo = mid
        else:
            hi = mid
        it += 1
    return Threshold(value=0.5 * (lo + hi), bracket=(lo, hi), iterations=it,
                     rows=tuple(rows))


def not_synchronized(row: SweepRow) -> bool:
    return row.status != "ok"


def phase_beyond(level: float) -> Callable[[SweepRow], bool]:
    """Predicate: synchronised with |phi_stat| at least ``level``."""
    def predicate(row: SweepRow) -> bool:
        return row.synchronized and abs(row.metrics.phi_stat) >= level
    return predicate
