"""Run configuration files.

A config is INI-style text with sections ``[system]``, ``[integrator]``
and ``[sweep]``. Every key is optional; missing keys take the reference
values. Pair-valued keys accept ``a, b`` or a single value for both.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .classical import IntegratorConfig
from .errors import ParameterError
from .model import ClassicalState, SystemParams
from .sweep import SweepSpec


class ConfigError(ParameterError):
    pass


SYSTEM_KEYS = ("delta", "kappa", "omega", "gamma", "g", "eta", "omega1_hz",
               "temp")
PAIR_KEYS = ("omega", "gamma", "g", "temp")
INTEGRATOR_KEYS = ("rel_tol", "abs_tol", "max_step", "t_end", "sample_dt",
                   "cov_abs_tol", "max_steps", "init")
SWEEP_KEYS = ("axis", "values", "outputs", "transient_cut", "window_fraction",
              "sync_threshold", "n_min", "log_base", "extend_near_jumps",
              "workers", "predicate", "tolerance")


@dataclass(frozen=True)
class RunConfig:
    system: SystemParams = SystemParams()
    integrator: IntegratorConfig = IntegratorConfig()
    sweep: SweepSpec = SweepSpec()
    workers: int = 1
    predicate: str = "not_synchronized"
    tolerance: float = 1.0

    def spec(self) -> SweepSpec:
        """Sweep spec tied to this config's system and integrator."""
        return self.sweep.replace(base=self.system, integrator=self.integrator)


def _float(section, key, text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {text!r}")
    return value


def _floats(section, key, text):
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    return [_float(section, key, p) for p in parts]


def parse_values(text: str):
    """Comma list ``1, 2, 3`` or inclusive range ``start:stop:step``."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"[sweep] values: bad range {text!r}")
        start, stop, step = (_float("sweep", "values", p) for p in parts)
        if step == 0 or (stop - start) / step < 0:
            raise ConfigError(f"[sweep] values: empty range {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(v) for v in start + step * np.arange(n))
    return tuple(_floats("sweep", "values", text))


def _bool(section, key, text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: not a boolean: {text!r}")


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    allowed = {"system": SYSTEM_KEYS, "integrator": INTEGRATOR_KEYS,
               "sweep": SWEEP_KEYS}
    for section in parser.sections():
        if section not in allowed:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in allowed[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")

    sys_kw = {}
    if parser.has_section("system"):
        for key, text in parser["system"].items():
            if key in PAIR_KEYS:
                vals = _floats("system", key, text)
                if len(vals) == 1:
                    vals = vals * 2
                if len(vals) != 2:
                    raise ConfigError(f"[system] {key}: expected 1 or 2 values")
                sys_kw[key] = tuple(vals)
            else:
                sys_kw[key] = _float("system", key, text)
    system = SystemParams(**sys_kw)

    int_kw = {}
    init = ClassicalState.seed()
    if parser.has_section("integrator"):
        for key, text in parser["integrator"].items():
            if key == "init":
                vals = _floats("integrator", key, text)
                if len(vals) != 6:
                    raise ConfigError("[integrator] init: expected 6 values "
                                      "q1, p1, q2, p2, a_re, a_im")
                init = ClassicalState.from_array(vals)
            elif key == "abs_tol" and text.strip().lower() == "auto":
                int_kw[key] = None
            elif key == "max_steps":
                int_kw[key] = int(_float("integrator", key, text))
            else:
                int_kw[key] = _float("integrator", key, text)
    integrator = IntegratorConfig(**int_kw)

    sw_kw = {"init": init}
    workers, predicate, tolerance = 1, "not_synchronized", 1.0
    if parser.has_section("sweep"):
        for key, text in parser["sweep"].items():
            if key == "axis":
                sw_kw["axis"] = text.strip()
            elif key == "values":
                sw_kw["values"] = parse_values(text)
            elif key == "outputs":
                sw_kw["outputs"] = tuple(
                    p.strip() for p in text.split(",") if p.strip())
            elif key == "transient_cut":
                sw_kw[key] = (None if text.strip().lower() == "auto"
                              else _float("sweep", key, text))
            elif key == "extend_near_jumps":
                sw_kw[key] = _bool("sweep", key, text)
            elif key == "workers":
                workers = int(_float("sweep", key, text))
            elif key == "predicate":
                predicate = text.strip()
            elif key == "tolerance":
                tolerance = _float("sweep", key, text)
            else:
                sw_kw[key] = _float("sweep", key, text)
    sweep = SweepSpec(base=system, integrator=integrator, **sw_kw)
    return RunConfig(system=system, integrator=integrator, sweep=sweep,
                     workers=workers, predicate=predicate, tolerance=tolerance)


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (tuple, list)):
        return ", ".join(_fmt(v) for v in x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def resolved_sections(cfg: RunConfig) -> Dict[str, Dict[str, str]]:
    """Every setting with defaults expanded, as strings."""
    system = {k: _fmt(getattr(cfg.system, k)) for k in SYSTEM_KEYS}
    ic = cfg.integrator
    integrator = {k: _fmt(getattr(ic, k)) for k in INTEGRATOR_KEYS
                  if k not in ("abs_tol", "init")}
    integrator["abs_tol"] = "auto" if ic.abs_tol is None else _fmt(ic.abs_tol)
    integrator["init"] = _fmt(list(cfg.sweep.init.to_array()))
    sw = cfg.sweep
    sweep = {
        "axis": sw.axis,
        "values": _fmt(list(sw.values)),
        "outputs": ", ".join(sw.outputs),
        "transient_cut": ("auto" if sw.transient_cut is None
                          else _fmt(sw.transient_cut)),
        "window_fraction": _fmt(sw.window_fraction),
        "sync_threshold": _fmt(sw.sync_threshold),
        "n_min": _fmt(sw.n_min),
        "log_base": _fmt(sw.log_base),
        "extend_near_jumps": _fmt(sw.extend_near_jumps),
        "workers": str(cfg.workers),
        "predicate": cfg.predicate,
        "tolerance": _fmt(cfg.tolerance),
    }
    return {"system": system, "integrator": integrator, "sweep": sweep}


def to_text(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_dict(resolved_sections(cfg))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()

