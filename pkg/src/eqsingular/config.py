"""Instance configuration files (INI key/value) and their content hash.

Sections: [instance] [drift] [volatility] [running_loss] [terminal_loss]
[cost] [discount] [kappa] [grid] and an optional [solver]. Every coefficient
section carries a `family` key selecting one entry of the model registry.
See docs/config.md for the full key list.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import model
from .equilibrium import FixedPointOptions
from .grid import SpaceTimeGrid
from .obstacle import ObstacleSolveOptions


class ConfigError(ValueError):
    """Malformed or incomplete configuration; the message names the key."""


def _num(sec, key, cast=float):
    name = f"{sec.name}.{key}"
    if key not in sec:
        raise ConfigError(f"missing config key {name}")
    raw = sec[key].strip()
    try:
        val = cast(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot read {raw!r} as {cast.__name__}") from None
    if cast is float and math.isnan(val):
        raise ConfigError(f"{name}: NaN is not allowed")
    return val


def _section(cp, name):
    if not cp.has_section(name):
        raise ConfigError(f"missing config section [{name}]")
    return cp[name]


def _family(sec, allowed):
    fam = sec.get("family")
    if fam is None:
        raise ConfigError(f"missing config key {sec.name}.family")
    fam = fam.strip()
    if fam not in allowed:
        raise ConfigError(f"{sec.name}.family: unknown family {fam!r} (known: {', '.join(allowed)})")
    return fam


def _drift(sec):
    _family(sec, ("mean_reverting",))
    return model.MeanRevertingDrift(_num(sec, "b"), _num(sec, "a"))


def _volatility(sec):
    _family(sec, ("constant",))
    return model.ConstantVolatility(_num(sec, "sigma"))


def _running_loss(sec):
    _family(sec, ("exp_linear",))
    psi = sec.get("psi_family", "exponential").strip()
    if psi == "exponential":
        rate = model.ExponentialRate(_num(sec, "psi0"), _num(sec, "psi_rate"))
    elif psi == "linear":
        rate = model.LinearRate(_num(sec, "psi_p"), _num(sec, "psi_q"))
    else:
        raise ConfigError(f"{sec.name}.psi_family: unknown family {psi!r}")
    x0 = _num(sec, "x0") if "x0" in sec else math.inf
    return model.ExpLinearLoss(_num(sec, "C_H"), rate, x0)


def _terminal(sec):
    fam = _family(sec, ("exponential", "affine"))
    if fam == "exponential":
        return model.ExponentialTerminal(_num(sec, "C_F"), _num(sec, "psi_F"))
    return model.AffineTerminal(_num(sec, "slope"), _num(sec, "intercept") if "intercept" in sec else 0.0)


def _cost(sec):
    _family(sec, ("constant",))
    return model.ConstantCost(_num(sec, "c"))


def _discount(sec):
    fam = _family(sec, tuple(model.DISCOUNTS))
    _, keys = model.DISCOUNTS[fam]
    return model.make_discount(fam, **{k: _num(sec, k) for k in keys})


def _kappa(sec):
    _family(sec, ("exponential",))
    return model.ExpKappa(_num(sec, "C_kappa"), _num(sec, "kbar"))


@dataclass(frozen=True)
class RunConfig:
    instance: model.ProblemInstance
    grid: SpaceTimeGrid
    options: FixedPointOptions = field(default_factory=FixedPointOptions)
    path: str | None = None
    digest: str = ""

    def with_discount(self, discount) -> "RunConfig":
        return replace(self, instance=self.instance.replace(discount=discount))

    def with_grid(self, **changes) -> "RunConfig":
        return replace(self, grid=self.grid.replace(**changes))


def _grid(sec, inst):
    x_max_raw = sec.get("x_max")
    if x_max_raw is None:
        raise ConfigError("missing config key grid.x_max")
    if x_max_raw.strip() == "x_star":
        x_max = model.effective_terminal(inst).x_star
    else:
        x_max = _num(sec, "x_max")
    x_min_raw = sec.get("x_min")
    if x_min_raw is None:
        raise ConfigError("missing config key grid.x_min")
    if x_min_raw.strip() == "kappa":
        if inst.kappa is None:
            raise ConfigError("grid.x_min = kappa needs a [kappa] section")
        x_min = model.kappa_window_left(inst) - 0.5
    else:
        x_min = _num(sec, "x_min")
    try:
        return SpaceTimeGrid(x_min, x_max, _num(sec, "Nx", int), inst.horizon,
                             _num(sec, "Nt", int), _num(sec, "Ns", int) if "Ns" in sec else 2)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[grid]: {exc}") from None


def _options(cp):
    if not cp.has_section("solver"):
        return FixedPointOptions()
    sec = cp["solver"]
    kw = {}
    if "damping" in sec:
        kw["damping"] = _num(sec, "damping")
    if "tol" in sec:
        kw["tol"] = _num(sec, "tol")
    if "max_iter" in sec:
        kw["max_iter"] = _num(sec, "max_iter", int)
    if "init" in sec:
        kw["init"] = sec["init"].strip()
    if "coupling_mode" in sec:
        kw["coupling_mode"] = sec["coupling_mode"].strip()
    ob = {}
    if "method" in sec:
        ob["method"] = sec["method"].strip()
    if "eps_schedule" in sec:
        try:
            ob["eps_schedule"] = tuple(float(v) for v in sec["eps_schedule"].split(","))
        except ValueError:
            raise ConfigError("solver.eps_schedule: expected comma separated numbers") from None
    try:
        return FixedPointOptions(obstacle=ObstacleSolveOptions(**ob), **kw)
    except ValueError as exc:
        raise ConfigError(f"[solver]: {exc}") from None


def parse_config(text: str, path: str | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case sensitive (C_H, Nx)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None
    top = _section(cp, "instance")
    try:
        inst = model.ProblemInstance(
            drift=_drift(_section(cp, "drift")),
            volatility=_volatility(_section(cp, "volatility")),
            running_loss=_running_loss(_section(cp, "running_loss")),
            terminal_loss=_terminal(_section(cp, "terminal_loss")),
            cost=_cost(_section(cp, "cost")),
            discount=_discount(_section(cp, "discount")),
            horizon=_num(top, "horizon"),
            kappa=_kappa(cp["kappa"]) if cp.has_section("kappa") else None,
            bound_M=_num(top, "bound_M") if "bound_M" in top else 1.0,
        )
    except (model.InputError, model.IllPosedError) as exc:
        raise ConfigError(str(exc)) from None
    grid = _grid(_section(cp, "grid"), inst)
    digest = hashlib.sha256(text.encode()).hexdigest()
    return RunConfig(inst, grid, _options(cp), path, digest)


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    return parse_config(text, str(p))


def dump_instance(inst: model.ProblemInstance) -> str:
    """INI text for an instance (no [grid] or [solver] section)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["instance"] = {"horizon": repr(inst.horizon), "bound_M": repr(inst.bound_M)}
    parts = {"drift": inst.drift, "volatility": inst.volatility, "running_loss": inst.running_loss,
             "terminal_loss": inst.terminal_loss, "cost": inst.cost, "discount": inst.discount}
    if inst.kappa is not None:
        parts["kappa"] = inst.kappa
    for name, obj in parts.items():
        cp[name] = {"family": obj.family, **{k: v if isinstance(v, str) else repr(v)
                                             for k, v in obj.params().items()}}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
