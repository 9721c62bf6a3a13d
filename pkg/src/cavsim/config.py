"""Line-oriented ``key = value`` configuration files.

The format is deliberately tiny: one assignment per line, ``#`` starts a
comment, no sections or nesting, so that a run is reproducible from a config
pasted into a report.  Absent keys fall back to the experimental defaults of
:class:`~cavsim.evolution.Scenario`; unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .evolution import Scenario
from .exceptions import ConfigError

BACKENDS = ("dense", "branch", "oracle")


@dataclass(frozen=True)
class SweepSpec:
    """Grid of decay-ratio and amplitude values plus sampling/backend choices."""

    g_values: tuple[float, ...] = (0.0,)
    q_values: tuple[float, ...] = (0.0,)
    alpha_values: tuple[complex, ...] | None = None
    beta_values: tuple[complex, ...] | None = None
    n_samples: int = 181
    backend: str = "dense"

    def validate(self) -> "SweepSpec":
        if any(g < 0 for g in self.g_values) or any(q < 0 for q in self.q_values):
            raise ConfigError("sweep decay ratios must be non-negative", key="sweep_g")
        if not self.g_values or not self.q_values:
            raise ConfigError("sweep grids must be non-empty", key="sweep_g")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be positive", key="n_samples")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}", key="backend")
        return self


_FLOAT_KEYS = {
    "omega_a",
    "omega_1",
    "omega_2",
    "Omega_1",
    "Omega_2",
    "Delta_1",
    "Delta_2",
    "omega_tilde_1",
    "omega_tilde_2",
    "gamma_1",
    "gamma_2",
    "phi",
    "ramsey_angle",
    "tail_tol",
}
_COMPLEX_KEYS = {"alpha", "beta"}
_INT_KEYS = {"N1", "N2", "n_samples"}
_LIST_KEYS = {"sweep_g", "sweep_q", "sweep_alpha", "sweep_beta"}


def _parse_number(raw: str, key: str, line: int, kind):
    try:
        value = kind(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse value '{raw}'", key=key, line=line) from exc
    if kind is float and not math.isfinite(value):
        raise ConfigError("value must be finite", key=key, line=line)
    return value


def parse_config(text: str) -> tuple[Scenario, SweepSpec]:
    """Parse config text into a validated (Scenario, SweepSpec) pair."""
    assignments: dict[str, tuple[object, int]] = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in assignments:
            raise ConfigError("duplicate key", key=key, line=lineno)
        if key in _FLOAT_KEYS or key in ("g", "q"):
            value: object = _parse_number(raw, key, lineno, float)
        elif key in _COMPLEX_KEYS:
            value = _parse_number(raw.replace(" ", ""), key, lineno, complex)
        elif key in _INT_KEYS:
            value = _parse_number(raw, key, lineno, int)
        elif key == "durations":
            parts = [p for p in raw.split(",") if p.strip()]
            value = tuple(_parse_number(p.strip(), key, lineno, float) for p in parts)
            if len(value) != 5:
                raise ConfigError("expected five comma-separated durations", key=key, line=lineno)
        elif key in _LIST_KEYS:
            parts = [p for p in raw.split(",") if p.strip()]
            kind = complex if key in ("sweep_alpha", "sweep_beta") else float
            value = tuple(_parse_number(p.strip().replace(" ", ""), key, lineno, kind) for p in parts)
        elif key in ("frame", "backend"):
            value = raw
        else:
            raise ConfigError("unknown key", key=key, line=lineno)
        assignments[key] = (value, lineno)

    def take(key, default=None):
        return assignments.pop(key, (default, None))[0]

    scenario_kwargs = {}
    for key, field_name in (
        ("omega_a", "omega_a"),
        ("omega_1", "omega_1"),
        ("omega_2", "omega_2"),
        ("Omega_1", "Omega_1"),
        ("Omega_2", "Omega_2"),
        ("Delta_1", "Delta_1"),
        ("Delta_2", "Delta_2"),
        ("omega_tilde_1", "omega_tilde_1"),
        ("omega_tilde_2", "omega_tilde_2"),
        ("phi", "phi"),
        ("ramsey_angle", "ramsey_angle"),
        ("alpha", "alpha"),
        ("beta", "beta"),
        ("durations", "stage_durations"),
        ("N1", "n1"),
        ("N2", "n2"),
        ("frame", "frame"),
        ("tail_tol", "tail_tol"),
    ):
        if key in assignments:
            scenario_kwargs[field_name] = take(key)

    scenario = dataclasses.replace(Scenario(), **scenario_kwargs)

    for ratio_key, gamma_key, omega in (
        ("g", "gamma_1", scenario.omega_1),
        ("q", "gamma_2", scenario.omega_2),
    ):
        has_ratio = ratio_key in assignments
        has_rate = gamma_key in assignments
        if has_ratio and has_rate:
            line = assignments[gamma_key][1]
            raise ConfigError(
                f"give either {ratio_key} or {gamma_key}, not both", key=gamma_key, line=line
            )
        if has_ratio:
            ratio, line = assignments.pop(ratio_key)
            if ratio < 0:
                raise ConfigError("decay ratio must be non-negative", key=ratio_key, line=line)
            scenario = dataclasses.replace(scenario, **{gamma_key: ratio * omega})
        elif has_rate:
            rate, line = assignments.pop(gamma_key)
            if rate < 0:
                raise ConfigError("decay rate must be non-negative", key=gamma_key, line=line)
            scenario = dataclasses.replace(scenario, **{gamma_key: rate})

    sweep = SweepSpec(
        g_values=take("sweep_g", (0.0,)),
        q_values=take("sweep_q", (0.0,)),
        alpha_values=take("sweep_alpha"),
        beta_values=take("sweep_beta"),
        n_samples=take("n_samples", 181),
        backend=take("backend", "dense"),
    )
    scenario.validate()
    sweep.validate()
    return scenario, sweep


def encode_value(v) -> str:
    """Canonical short encoding of a sweep value for file names."""
    if isinstance(v, complex):
        if v.imag == 0:
            v = v.real
        else:
            return f"{v.real:g}{v.imag:+g}j"
    return f"{v:g}"


def sweep_filename(alpha, beta, g, q) -> str:
    return (
        f"a{encode_value(alpha)}_b{encode_value(beta)}"
        f"_g{encode_value(g)}_q{encode_value(q)}.csv"
    )
