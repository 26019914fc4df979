"""Declarative JSON run configurations.

Configs are strict: unknown keys are rejected with the offending path in the
message, and physical quantities may be given as exact decimal strings
(canonical) or plain JSON numbers. All defaults are resolved here so the
CLI layer stays a thin driver.
"""

from __future__ import annotations

import json

import numpy as np

from .epidemic import (
    EpidemicParams,
    Grid2D,
    Kernel2D,
    RelaxedSIRHistory,
    constant_sir_history,
    default_profiles,
    make_epidemic_problem,
)
from .errors import ConfigurationError
from .integrator import InvariantGuard, TabulatedHistory
from .operators import ExpmConfig
from .scalar import (
    compatible_polynomial_history,
    constant_history,
    exponential_history,
    make_scalar_problem,
    window_for,
)

__all__ = ["load_config", "resolve", "build_problem", "build_guard", "build_expm"]


def _as_float(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigurationError("%s: expected a number or decimal string" % path)
    try:
        return float(value)
    except ValueError:
        raise ConfigurationError("%s: cannot parse %r as a number" % (path, value))


def _as_int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError("%s: expected an integer" % path)
    return value


def _check_keys(section, allowed, path):
    if not isinstance(section, dict):
        raise ConfigurationError("%s: expected an object" % path)
    for key in section:
        if key not in allowed:
            raise ConfigurationError("%s.%s: unknown key" % (path, key))


_TOP_KEYS = {"model", "delay", "history", "T", "N", "N_list", "N_ref", "order_window",
             "expm", "guard", "output", "seed", "grid", "params", "kernel", "validate"}


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError("config file not found: %s" % path)
    except json.JSONDecodeError as exc:
        raise ConfigurationError("config %s is not valid JSON: line %d: %s"
                                 % (path, exc.lineno, exc.msg))
    return resolve(raw)


def resolve(raw):
    """Validate a raw config dict and fill defaults. Returns a plain dict
    plan whose values are already converted (floats, ints, tuples)."""
    _check_keys(raw, _TOP_KEYS, "config")
    model = raw.get("model")
    if model not in ("scalar", "epidemic"):
        raise ConfigurationError("config.model: must be 'scalar' or 'epidemic'")

    delay = raw.get("delay", {})
    _check_keys(delay, {"mode", "delta", "epsilon", "weights", "latent_weights"},
                "config.delay")
    mode = delay.get("mode", "point")
    if mode not in ("point", "trapezoid-half", "expected-latent", "custom"):
        raise ConfigurationError("config.delay.mode: unknown mode %r" % (mode,))
    if mode == "expected-latent" and model != "epidemic":
        raise ConfigurationError("config.delay.mode: expected-latent is epidemic-only")
    delta = _as_float(delay.get("delta", "1.0"), "config.delay.delta")
    if delta <= 0:
        raise ConfigurationError("config.delay.delta: must be positive")
    latent_weights = delay.get("latent_weights")
    if latent_weights is not None:
        latent_weights = [_as_float(v, "config.delay.latent_weights") for v in latent_weights]
    epsilon = delay.get("epsilon")
    weights = delay.get("weights")
    if mode == "custom":
        if model != "scalar":
            raise ConfigurationError("config.delay.mode: custom weights are scalar-only "
                                     "(epidemic uses latent_weights)")
        if not weights:
            raise ConfigurationError("config.delay.weights: required for custom mode")
        weights = [_as_float(v, "config.delay.weights") for v in weights]
        if epsilon is None:
            raise ConfigurationError("config.delay.epsilon: required for custom mode")
        epsilon = _as_float(epsilon, "config.delay.epsilon")
        if not (0.0 < epsilon <= delta):
            raise ConfigurationError("config.delay.epsilon: must lie in (0, delta]")
    elif weights is not None or epsilon is not None:
        raise ConfigurationError("config.delay.weights/epsilon: only valid with "
                                 "mode 'custom'")

    history = raw.get("history", {})
    _check_keys(history, {"preset", "value", "psi", "values", "half_mode"}, "config.history")
    scalar_presets = ("constant", "compatible-poly", "exp-compatible", "tabulated")
    epidemic_presets = ("constant", "relaxed")
    preset = history.get("preset", "compatible-poly" if model == "scalar" else "relaxed")
    allowed = scalar_presets if model == "scalar" else epidemic_presets
    if preset not in allowed:
        raise ConfigurationError("config.history.preset: %r not in %s" % (preset, allowed))
    half_mode = history.get("half_mode", "exact")
    if half_mode not in ("exact", "averaged"):
        raise ConfigurationError("config.history.half_mode: must be 'exact' or 'averaged'")
    if preset == "tabulated" and half_mode != "averaged":
        raise ConfigurationError("config.history.half_mode: tabulated history "
                                 "requires 'averaged'")

    plan = {
        "model": model,
        "delay": {"mode": mode, "delta": delta, "epsilon": epsilon,
                  "weights": weights, "latent_weights": latent_weights},
        "history": {
            "preset": preset,
            "value": _as_float(history.get("value", "1.0"), "config.history.value"),
            "psi": _as_float(history.get("psi", "1.0"), "config.history.psi"),
            "values": history.get("values"),
            "half_mode": half_mode,
        },
        "T": _as_float(raw.get("T", "2.0"), "config.T"),
        "seed": _as_int(raw.get("seed", 0), "config.seed"),
    }
    if plan["T"] < 0:
        raise ConfigurationError("config.T: must be nonnegative")

    if "N" in raw:
        plan["N"] = _as_int(raw["N"], "config.N")
        if plan["N"] < 1:
            raise ConfigurationError("config.N: must be >= 1")
    if "N_list" in raw:
        if not isinstance(raw["N_list"], list) or not raw["N_list"]:
            raise ConfigurationError("config.N_list: must be a nonempty list")
        plan["N_list"] = tuple(_as_int(v, "config.N_list") for v in raw["N_list"])
    if "N_ref" in raw:
        plan["N_ref"] = _as_int(raw["N_ref"], "config.N_ref")

    window = raw.get("order_window")
    if window is not None:
        if not isinstance(window, list) or len(window) != 2:
            raise ConfigurationError("config.order_window: expected [low, high]")
        plan["order_window"] = (_as_float(window[0], "config.order_window"),
                                _as_float(window[1], "config.order_window"))
    else:
        plan["order_window"] = (1.8, 2.2) if model == "scalar" else (1.7, 2.3)

    expm = raw.get("expm", {})
    _check_keys(expm, {"method", "tol", "max_krylov_dim"}, "config.expm")
    plan["expm"] = {
        "method": expm.get("method", "krylov-arnoldi"),
        "tol": _as_float(expm.get("tol", "1e-10"), "config.expm.tol"),
        "max_krylov_dim": _as_int(expm.get("max_krylov_dim", 96), "config.expm.max_krylov_dim"),
    }

    guard = raw.get("guard", {})
    _check_keys(guard, {"predicate", "tolerance", "action"}, "config.guard")
    plan["guard"] = {
        "predicate": guard.get("predicate",
                               "nonnegative-mass" if model == "epidemic" else "none"),
        "tolerance": _as_float(guard.get("tolerance", "1e-9"), "config.guard.tolerance"),
        "action": guard.get("action", "record"),
    }

    output = raw.get("output", {})
    _check_keys(output, {"trajectory", "report", "guard_series", "order_table",
                         "fields", "stride"}, "config.output")
    plan["output"] = {
        "trajectory": output.get("trajectory", "trajectory.csv"),
        "report": output.get("report", "report.json"),
        "guard_series": output.get("guard_series", "guard.csv"),
        "order_table": output.get("order_table", "orders.csv"),
        "fields": output.get("fields", "fields.csv" if model == "epidemic" else None),
        "stride": _as_int(output.get("stride", 1), "config.output.stride"),
    }

    validate = raw.get("validate", {})
    _check_keys(validate, {"r1_threshold", "r2_threshold"}, "config.validate")
    plan["validate"] = {
        "r1_threshold": _as_float(validate.get("r1_threshold", "1e-8"),
                                  "config.validate.r1_threshold"),
        "r2_threshold": _as_float(validate.get("r2_threshold", "1e-6"),
                                  "config.validate.r2_threshold"),
    }

    if model == "epidemic":
        grid = raw.get("grid")
        if grid is None:
            raise ConfigurationError("config.grid: required for the epidemic model")
        _check_keys(grid, {"nx", "ny", "Lx", "Ly"}, "config.grid")
        plan["grid"] = {
            "nx": _as_int(grid.get("nx", 16), "config.grid.nx"),
            "ny": _as_int(grid.get("ny", 16), "config.grid.ny"),
            "Lx": _as_float(grid.get("Lx", "1.0"), "config.grid.Lx"),
            "Ly": _as_float(grid.get("Ly", "1.0"), "config.grid.Ly"),
        }
        params = raw.get("params")
        if params is None:
            raise ConfigurationError("config.params: required for the epidemic model")
        _check_keys(params, {"beta", "gamma", "nu", "mass"}, "config.params")
        plan["params"] = {
            "beta": _as_float(params.get("beta", "3.0"), "config.params.beta"),
            "gamma": _as_float(params.get("gamma", "1.0"), "config.params.gamma"),
            "nu": _as_float(params.get("nu", "0.2"), "config.params.nu"),
            "mass": _as_float(params.get("mass", "1.0"), "config.params.mass"),
        }
        if plan["params"]["beta"] < 0:
            raise ConfigurationError("config.params.beta: must be nonnegative")
        for name in ("gamma", "nu", "mass"):
            if plan["params"][name] <= 0:
                raise ConfigurationError("config.params.%s: must be positive" % name)
        kernel = raw.get("kernel", {})
        _check_keys(kernel, {"type", "radius", "amplitude"}, "config.kernel")
        ktype = kernel.get("type", "bump")
        if ktype != "bump":
            raise ConfigurationError("config.kernel.type: only 'bump' is available")
        radius = _as_float(kernel.get("radius", "0.5"), "config.kernel.radius")
        amplitude = kernel.get("amplitude", "normalized")
        plan["kernel"] = {"type": ktype, "radius": radius, "amplitude": amplitude}
    else:
        for key in ("grid", "params", "kernel"):
            if key in raw:
                raise ConfigurationError("config.%s: only valid for the epidemic model" % key)
    return plan


def build_expm(plan):
    return ExpmConfig(method=plan["expm"]["method"], tol=plan["expm"]["tol"],
                      max_krylov_dim=plan["expm"]["max_krylov_dim"])


def build_guard(plan):
    g = plan["guard"]
    return InvariantGuard(predicate=g["predicate"], tolerance=g["tolerance"],
                          action=g["action"])


def _scalar_history(plan):
    h = plan["history"]
    mode = plan["delay"]["mode"]
    if h["preset"] == "constant":
        return constant_history(h["value"])
    if h["preset"] == "compatible-poly":
        if mode == "custom":
            raise ConfigurationError(
                "config.history.preset: compatible-poly needs a built-in delay "
                "family (custom functionals have no closed-form moments)")
        window = window_for(plan["delay"]["delta"], mode)
        return compatible_polynomial_history(window, mode, h["value"])
    if h["preset"] == "exp-compatible":
        if mode != "point":
            raise ConfigurationError(
                "config.history.preset: exp-compatible requires point delay")
        return exponential_history(window_for(plan["delay"]["delta"], mode), h["psi"])
    if h["preset"] == "tabulated":
        if not h["values"]:
            raise ConfigurationError("config.history.values: required for tabulated preset")
        return TabulatedHistory([np.array([_as_float(v, "config.history.values")])
                                 for v in h["values"]])
    raise ConfigurationError("unhandled history preset %r" % (h["preset"],))


def build_problem(plan):
    if plan["model"] == "scalar":
        return make_scalar_problem(plan["delay"]["delta"], plan["delay"]["mode"],
                                   _scalar_history(plan), plan["T"],
                                   epsilon=plan["delay"]["epsilon"],
                                   weights=plan["delay"]["weights"])
    grid = Grid2D(nx=plan["grid"]["nx"], ny=plan["grid"]["ny"],
                  Lx=plan["grid"]["Lx"], Ly=plan["grid"]["Ly"])
    amp = plan["kernel"]["amplitude"]
    if amp == "normalized":
        kernel = Kernel2D.normalized(plan["kernel"]["radius"])
    else:
        kernel = Kernel2D(radius=plan["kernel"]["radius"],
                          amplitude=_as_float(amp, "config.kernel.amplitude"))
    params = EpidemicParams(beta=plan["params"]["beta"], gamma=plan["params"]["gamma"],
                            nu=plan["params"]["nu"], mass=plan["params"]["mass"],
                            kernel=kernel)
    preset = plan["history"]["preset"]
    if preset == "relaxed":
        history = RelaxedSIRHistory(default_profiles(grid, params.mass), params, grid,
                                    plan["delay"]["delta"])
    else:
        history = constant_sir_history(default_profiles(grid, params.mass))
    return make_epidemic_problem(params, grid, history, mode=plan["delay"]["mode"],
                                 delta=plan["delay"]["delta"], horizon=plan["T"],
                                 latent_weights=plan["delay"]["latent_weights"])
