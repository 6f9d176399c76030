"""Run configuration files: UTF-8 text, one ``key = value`` per line, ``#`` comments."""

from __future__ import annotations

from pathlib import Path

from .analytics import SweepConfig, parse_mechanism, resolve_gamma
from .lossmodel import parse_severity


class ConfigError(ValueError):
    pass


REQUIRED = ("n", "dbar", "sigma", "seed", "p", "severity", "s", "mechanisms")
OPTIONAL = ("seeds", "z", "gamma", "reps", "max_reps", "min_degree", "output", "workers",
            "batch", "target_rel_se")



def parse_config_text(text: str) -> dict:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in REQUIRED and key not in OPTIONAL:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    missing = [k for k in REQUIRED if k not in out]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    return out


def parse_sigmas(text: str) -> tuple[float, ...]:
    """Comma or space separated list, or ``start:stop:step`` (stop inclusive)."""
    text = text.strip()
    if text.count(":") == 2:
        a, b, c = (float(x) for x in text.split(":"))
        if c <= 0 or b < a:
            raise ConfigError("sigma range needs start <= stop and step > 0")
        k = int(round((b - a) / c))
        return tuple(float(a + i * c) for i in range(k + 1) if a + i * c <= b + 1e-9)
    vals = [v for v in text.replace(",", " ").split() if v]
    if not vals:
        raise ConfigError("empty sigma list")
    return tuple(float(v) for v in vals)


def _num(raw: dict, key: str, kind=float, default=None):
    if key not in raw:
        return default
    try:
        return kind(raw[key])
    except ValueError:
        raise ConfigError(f"{key} = {raw[key]!r} is not a valid {kind.__name__}") from None


def build_sweep_config(raw: dict) -> tuple[SweepConfig, dict]:
    """Validated SweepConfig plus run options (output path, workers)."""
    try:
        reps_raw = raw.get("reps", "auto")
        reps = None if reps_raw == "auto" else int(reps_raw)
        mechanisms = tuple(raw["mechanisms"].split())
        z = _num(raw, "z", float, 0.0)
        for m in mechanisms:
            parse_mechanism(m, z)
        s = _num(raw, "s")
        dbar = _num(raw, "dbar")
        gamma = raw.get("gamma", "s/dbar")
        if resolve_gamma(gamma, s, dbar) < 0:
            raise ConfigError("gamma must be nonnegative")
        cfg = SweepConfig(
            n=_num(raw, "n", int), dbar=dbar, sigmas=parse_sigmas(raw["sigma"]),
            seeds=_num(raw, "seeds", int, 1), master_seed=_num(raw, "seed", int),
            p=_num(raw, "p"), severity=parse_severity(raw["severity"]), s=s,
            gamma=gamma, mechanisms=mechanisms, z=z, reps=reps,
            max_reps=_num(raw, "max_reps", int, 500), batch=_num(raw, "batch", int, 10),
            target_rel_se=_num(raw, "target_rel_se", float, 0.01),
            min_degree=_num(raw, "min_degree", int, 5))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not cfg.dbar > cfg.min_degree:
        raise ConfigError("dbar must exceed min_degree")
    opts = {"output": raw.get("output"), "workers": _num(raw, "workers", int, None)}
    if opts["workers"] is not None and opts["workers"] < 1:
        raise ConfigError("workers must be positive")
    return cfg, opts


def load_config(path) -> tuple[SweepConfig, dict]:
    text = Path(path).read_text(encoding="utf-8")
    return build_sweep_config(parse_config_text(text))
