"""INI-style instance and run configuration.

Schema (all sections optional except ``[instance]``)::

    [instance]
    name = coupled-strings          ; a catalog instance, or omit and describe a structure:
    kind = k-polycosymplectic       ; cosymplectic | k-polycosymplectic | k-polysymplectic
    k = 2
    coordinates = x, y, w, v
    bounds = -1:1, -1:1, -1:1, -1:1

    [parameters]                    ; builder arguments for catalog instances
    coupling = q*sin(x)

    [tau.1]                         ; one section per component, coordinate = coefficient
    y = 1
    [omega.1]                       ; a^b = coefficient of da∧db
    x^w = 1

    [hamiltonian]
    h = 0.5*p**2

    [action]                        ; abelian translations, one generator per key
    xi.1 = q1, q2

    [momentum]                      ; J.<alpha>.<j> = expression
    J.1.1 = p1t + p2t

    [run]                           ; defaults for command-line flags
    mu = 1.0, 0.5
    grid = 201x201
"""
from __future__ import annotations

import configparser
import inspect
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expr import ExprError, compile_expr, expr_field
from .fields import AnalyticField, ChartBox
from .forms import VForm
from .instances import AUXILIARY, CATALOG, _translation_action, get_instance
from .reduction import MomentumMapModel, ReductionInstance, abelian_group
from .structures import CosymplecticStructure, KPolycosymplecticStructure, KPolysymplecticStructure

KINDS = ("cosymplectic", "k-polycosymplectic", "k-polysymplectic")


class ConfigError(ValueError):
    pass


@dataclass
class LoadedConfig:
    instance: ReductionInstance | None = None
    structure: object = None
    run: dict = field(default_factory=dict)
    source: str = ""


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    return cp


def _bounds(text: str, n: int) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != n:
        raise ConfigError(f"bounds lists {len(parts)} intervals for {n} coordinates")
    out = []
    for p in parts:
        try:
            a, b = p.split(":")
            out.append((float(a), float(b)))
        except ValueError:
            raise ConfigError(f"bad interval {p!r}; write lo:hi") from None
    return tuple(out)


def _form(cp, chart: ChartBox, prefix: str, degree: int, k: int) -> VForm:
    slots = []
    for a in range(1, k + 1):
        sec = f"{prefix}.{a}"
        terms = {}
        if cp.has_section(sec):
            for key, val in cp.items(sec):
                names = tuple(s.strip() for s in key.split("^"))
                if len(names) != degree or any(nm not in chart.names for nm in names):
                    raise ConfigError(f"[{sec}] key {key!r} is not a degree-{degree} term in the coordinates")
                try:
                    terms[names] = float(val)
                except ValueError:
                    terms[names] = expr_field(val, chart.names, label=val)
        slots.append(terms)
    return VForm.from_terms(chart, degree, slots)


def _structure(cp):
    sec = cp["instance"]
    kind = sec.get("kind", "k-polycosymplectic").strip()
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    names = tuple(s.strip() for s in sec.get("coordinates", "").split(",") if s.strip())
    if not names:
        raise ConfigError("[instance] needs coordinates")
    bounds = _bounds(sec["bounds"], len(names)) if "bounds" in sec else ((-1.0, 1.0),) * len(names)
    try:
        k = int(sec.get("k", "1"))
    except ValueError:
        raise ConfigError("k must be an integer") from None
    if k < 1:
        raise ConfigError("k must be positive")
    chart = ChartBox(names, bounds)
    omega = _form(cp, chart, "omega", 2, k)
    if kind == "k-polysymplectic":
        return KPolysymplecticStructure(chart, k, omega)
    tau = _form(cp, chart, "tau", 1, k)
    if kind == "cosymplectic":
        if k != 1:
            raise ConfigError("cosymplectic structures have k = 1")
        return CosymplecticStructure(chart, tau, omega)
    return KPolycosymplecticStructure(chart, k, tau, omega)


def _user_instance(cp, s) -> ReductionInstance | None:
    if not isinstance(s, KPolycosymplecticStructure):
        return None
    chart = s.chart
    h = expr_field(cp["hamiltonian"].get("h", "0"), chart.names, label="h") if cp.has_section("hamiltonian") \
        else AnalyticField(lambda x: [0.0 * x[0]], chart.dim, 1, "h=0")
    slots = []
    if cp.has_section("action"):
        for key, val in sorted(cp.items("action")):
            coords = [c.strip() for c in val.split(",") if c.strip()]
            bad = [c for c in coords if c not in chart.names]
            if bad:
                raise ConfigError(f"[action] {key} translates unknown coordinates {bad}")
            slots.append(coords)
    action = _translation_action(chart, slots, abelian_group(len(slots)))
    mom = None
    if cp.has_section("momentum"):
        m = len(slots)
        texts = [["0"] * m for _ in range(s.k)]
        for key, val in cp.items("momentum"):
            try:
                _, a, j = key.split(".")
                texts[int(a) - 1][int(j) - 1] = val
            except (ValueError, IndexError):
                raise ConfigError(f"[momentum] key {key!r} should read J.<alpha>.<j> within range") from None
        mom = MomentumMapModel(s.k, m, expr_field([t for row in texts for t in row], chart.names, label="J"))
    return ReductionInstance(name="config", structure=s, action=action, momentum=mom, hamiltonian=h,
                             summary="user structure from a config file")


def _params(cp, name: str) -> dict:
    """Builder keyword arguments, converted to the type of each default."""
    if not cp.has_section("parameters"):
        return {}
    builder = CATALOG.get(name) or AUXILIARY.get(name)
    sig = inspect.signature(builder) if builder else None
    out = {}
    for key, val in cp.items("parameters"):
        if sig is None or key not in sig.parameters:
            raise ConfigError(f"instance {name} takes no parameter {key!r}")
        default = sig.parameters[key].default
        if isinstance(default, float):
            try:
                out[key] = float(val)
            except ValueError:
                raise ConfigError(f"parameter {key} must be a number, got {val!r}") from None
        elif isinstance(default, tuple):
            out[key] = tuple(float(v) for v in val.split(","))
        else:
            out[key] = val.strip()
    return out


def load_config(path: str | Path) -> LoadedConfig:
    cp = _parser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    except configparser.Error as e:
        raise ConfigError(f"malformed config {path}: {e}") from None
    return parse_config(cp, str(path))


def loads_config(text: str) -> LoadedConfig:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    return parse_config(cp, "<string>")


def parse_config(cp, source: str) -> LoadedConfig:
    if not cp.has_section("instance"):
        raise ConfigError("config needs an [instance] section")
    run = dict(cp.items("run")) if cp.has_section("run") else {}
    sec = cp["instance"]
    try:
        if "name" in sec:
            name = sec["name"].strip()
            inst = get_instance(name, **_params(cp, name))
            return LoadedConfig(inst, inst.structure, run, source)
        s = _structure(cp)
        return LoadedConfig(_user_instance(cp, s), s, run, source)
    except (ExprError, KeyError, TypeError) as e:
        raise ConfigError(str(e).strip("'\"")) from None
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _coef(v: float) -> str:
    return f"{v:.12g}"


def export_structure(s, h_text: str | None = None, note: str = "") -> str:
    """Config text for a structure with constant coefficients (reduced-data export)."""
    chart = s.chart
    for w in (s.omega,) + ((s.tau,) if hasattr(s, "tau") else ()):
        if not w.is_constant:
            raise ValueError("export supports constant coefficients only")
    lines = []
    if note:
        lines += [f"# {line}" for line in note.splitlines()]
    kind = "k-polysymplectic" if not hasattr(s, "tau") else "cosymplectic" if s.k == 1 else "k-polycosymplectic"
    lines += ["[instance]", f"kind = {kind}", f"k = {s.k}", f"coordinates = {', '.join(chart.names)}",
              "bounds = " + ", ".join(f"{_coef(a)}:{_coef(b)}" for a, b in chart.bounds), ""]
    from .forms import multi_indices
    forms = [("omega", s.omega, 2)] + ([("tau", s.tau, 1)] if hasattr(s, "tau") else [])
    for prefix, w, deg in sorted(forms, key=lambda t: t[0] != "tau"):
        vals = w.at(chart.center)
        for a in range(s.k):
            lines.append(f"[{prefix}.{a + 1}]")
            for r, I in enumerate(multi_indices(chart.dim, deg)):
                if abs(vals[a, r]) > 1e-14:
                    lines.append(f"{'^'.join(chart.names[i] for i in I)} = {_coef(vals[a, r])}")
            lines.append("")
    if h_text:
        lines += ["[hamiltonian]", f"h = {h_text}", ""]
    return "\n".join(lines)


def parse_mu(text: str | None) -> tuple[float, ...] | None:
    if text is None or not str(text).strip():
        return None
    try:
        return tuple(float(v) for v in str(text).split(","))
    except ValueError:
        raise ConfigError(f"--mu expects comma-separated numbers, got {text!r}") from None


def parse_grid(text: str) -> tuple[int, int]:
    try:
        a, b = str(text).lower().split("x")
        n, m = int(a), int(b)
    except ValueError:
        raise ConfigError(f"--grid expects NxM, got {text!r}") from None
    if n < 8 or m < 8:
        raise ConfigError(f"grid sizes must be at least 8, got {n}x{m}")
    return n, m


def check_compile(text: str, names) -> None:
    compile_expr(text, names)


__all__ = ["ConfigError", "LoadedConfig", "load_config", "loads_config", "export_structure", "parse_mu",
           "parse_grid", "np"]
