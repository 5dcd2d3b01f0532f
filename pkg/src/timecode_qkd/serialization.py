"""Config loading, report (de)serialization and the fixed CSV layouts.

Floats are written with 17 significant digits so identical runs produce
byte-identical files and every value parses back to the same double.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
from functools import lru_cache
from importlib import resources
from typing import Any, Optional

import jsonschema
from referencing import Registry, Resource

from .adversary import AmbiguousPolicy, ChannelConfig, NoEve, ResendFull, ResendShort
from .interferometer import InterferometerConfig
from .protocol import EncoderConfig, QberEstimate
from .session import SessionConfig, SessionCounts, SessionReport
from .stats import Verdict, VerdictKind

SCHEMA_VERSION = 1

SWEEP_COLUMNS = (
    "parameter_value", "seed", "sifted_len", "qber", "qber_lo", "qber_hi",
    "portA_frac", "p_value", "verdict",
)
SUMMARY_COLUMNS = (
    "seed", "n_pulses", "sifted_len", "qber", "qber_lo", "qber_hi",
    "portA_frac", "p_value", "verdict",
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("timecode_qkd").joinpath("schemas").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


@lru_cache(maxsize=None)
def _registry() -> Registry:
    res = [Resource.from_contents(load_schema(n)) for n in ("config", "report")]
    return Registry().with_resources((r.id(), r) for r in res)


def _validator(name: str):
    schema = load_schema(name)
    cls = jsonschema.validators.validator_for(schema)
    return cls(schema, registry=_registry())


def _schema_error(data: Any, name: str) -> Optional[str]:
    err = jsonschema.exceptions.best_match(_validator(name).iter_errors(data))
    if err is None:
        return None
    path = ".".join(str(p) for p in err.absolute_path) or "<root>"
    return f"{path}: {err.message}"


def validate_report_dict(data: dict) -> None:
    msg = _schema_error(data, "report")
    if msg:
        raise ValueError(f"invalid report: {msg}")


# -- config -----------------------------------------------------------------

def eve_to_dict(eve) -> dict:
    if isinstance(eve, NoEve):
        return {"strategy": "none"}
    if isinstance(eve, ResendFull):
        return {"strategy": "resend_full", "ambiguous_policy": eve.ambiguous_policy.value}
    if isinstance(eve, ResendShort):
        return {"strategy": "resend_short", "pulse_duration": eve.pulse_duration}
    raise TypeError(f"unknown Eve strategy {eve!r}")


def eve_from_dict(d: dict):
    kind = d["strategy"]
    if kind == "none":
        return NoEve()
    if kind == "resend_full":
        return ResendFull(AmbiguousPolicy(d.get("ambiguous_policy", "guess_uniform")))
    if kind == "resend_short":
        return ResendShort(float(d.get("pulse_duration", ResendShort().pulse_duration)))
    raise ConfigError(f"eve.strategy: unknown strategy {kind!r}")


def config_to_dict(cfg: SessionConfig) -> dict:
    return {
        "n_pulses": cfg.n_pulses,
        "encoder": {
            "pulse_duration": cfg.encoder.pulse_duration,
            "delays": list(cfg.encoder.delays),
        },
        "channel": {
            "transmittance": cfg.channel.transmittance,
            "dark_count_prob": cfg.channel.dark_count_prob,
        },
        "eve": eve_to_dict(cfg.eve),
        "intercept_fraction": cfg.intercept_fraction,
        "mz": {"arm_delay": cfg.mz.arm_delay, "arm_phase": cfg.mz.arm_phase},
        "p_route_mz": cfg.p_route_mz,
        "reveal_fraction": cfg.reveal_fraction,
        "confidence_level": cfg.confidence_level,
        "mz_alpha": cfg.mz_alpha,
        "seed": cfg.seed,
    }


def config_from_dict(data: Any) -> SessionConfig:
    """Validate a config mapping against the schema and build a SessionConfig.

    Missing fields take their defaults; unknown fields are rejected.
    """
    msg = _schema_error(data, "config")
    if msg:
        raise ConfigError(msg)
    kw: dict[str, Any] = {}
    try:
        if "encoder" in data:
            enc = dict(data["encoder"])
            if "delays" in enc:
                enc["delays"] = tuple(enc["delays"])
            kw["encoder"] = EncoderConfig(**enc)
        if "channel" in data:
            kw["channel"] = ChannelConfig(**data["channel"])
        if "mz" in data:
            kw["mz"] = InterferometerConfig(**data["mz"])
        if "eve" in data:
            kw["eve"] = eve_from_dict(data["eve"])
        for key in ("n_pulses", "intercept_fraction", "p_route_mz", "reveal_fraction",
                    "confidence_level", "mz_alpha", "seed"):
            if key in data:
                kw[key] = data[key]
        return SessionConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config_dict(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc


def load_config(path) -> SessionConfig:
    return config_from_dict(load_config_dict(path))


def set_param(data: dict, name: str, value) -> dict:
    """Copy of a config mapping with one (possibly dotted) parameter replaced."""
    out = copy.deepcopy(data)
    node = out
    *parents, leaf = name.split(".")
    for p in parents:
        node = node.setdefault(p, {})
    node[leaf] = value
    return out


# -- report -----------------------------------------------------------------

def report_to_dict(r: SessionReport) -> dict:
    q = r.qber
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config_to_dict(r.config),
        "counts": {
            "emitted": r.counts.emitted,
            "intercepted": r.counts.intercepted,
            "eve_suppressed": r.counts.eve_suppressed,
            "lost": r.counts.lost,
            "routed_to_key": r.counts.routed_to_key,
            "routed_to_mz": r.counts.routed_to_mz,
            "dark_counts": r.counts.dark_counts,
            "key_clicks": r.counts.key_clicks,
            "decoded": r.counts.decoded,
            "ambiguous": r.counts.ambiguous,
            "no_candidate": r.counts.no_candidate,
        },
        "sifted_len": r.sifted_len,
        "sifted_errors": r.sifted_errors,
        "qber": None if q is None else {
            "revealed": q.revealed,
            "errors": q.errors,
            "qber": q.qber,
            "confidence_interval": list(q.confidence_interval),
            "confidence_level": q.confidence_level,
            "revealed_positions": list(q.revealed_positions),
        },
        "mz_counts": {"port_a": r.mz_counts[0], "port_b": r.mz_counts[1]},
        "mz_porta_frac": r.porta_frac,
        "mz_porta_ci": None if r.mz_porta_ci is None else list(r.mz_porta_ci),
        "mz_expected_honest": r.mz_expected_honest,
        "expected_sift_fraction": r.expected_sift_fraction,
        "verdict": {"kind": r.verdict.kind.value, "p_value": r.verdict.p_value},
        "final_key_alice": r.final_key_alice,
        "final_key_bob": r.final_key_bob,
    }


def report_from_dict(d: dict) -> SessionReport:
    validate_report_dict(d)
    c = dict(d["counts"])
    key_clicks = c.pop("key_clicks")
    counts = SessionCounts(**c)
    if counts.key_clicks != key_clicks:
        raise ValueError("report counts are inconsistent: key_clicks")
    q = d["qber"]
    qber = None if q is None else QberEstimate(
        revealed=q["revealed"],
        errors=q["errors"],
        qber=q["qber"],
        confidence_interval=tuple(q["confidence_interval"]),
        confidence_level=q["confidence_level"],
        revealed_positions=tuple(q["revealed_positions"]),
    )
    ci = d["mz_porta_ci"]
    return SessionReport(
        config=config_from_dict(d["config"]),
        counts=counts,
        sifted_len=d["sifted_len"],
        sifted_errors=d["sifted_errors"],
        qber=qber,
        mz_counts=(d["mz_counts"]["port_a"], d["mz_counts"]["port_b"]),
        mz_porta_ci=None if ci is None else tuple(ci),
        mz_expected_honest=d["mz_expected_honest"],
        expected_sift_fraction=d["expected_sift_fraction"],
        verdict=Verdict(VerdictKind(d["verdict"]["kind"]), d["verdict"]["p_value"]),
        final_key_alice=d["final_key_alice"],
        final_key_bob=d["final_key_bob"],
    )


# -- text output ------------------------------------------------------------

def fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _scalar(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return fmt_float(v)
    if isinstance(v, str):
        return json.dumps(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with 17-significant-digit floats; scalar lists stay on one line."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_scalar(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return _scalar(obj)


def report_to_json(r: SessionReport) -> str:
    return dumps(report_to_dict(r)) + "\n"


def report_from_json(text: str) -> SessionReport:
    return report_from_dict(json.loads(text))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def report_row(r: SessionReport) -> dict[str, Any]:
    lo = hi = q = None
    if r.qber is not None:
        q = r.qber.qber
        lo, hi = r.qber.confidence_interval
    return {
        "seed": r.config.seed,
        "n_pulses": r.config.n_pulses,
        "sifted_len": r.sifted_len,
        "qber": q,
        "qber_lo": lo,
        "qber_hi": hi,
        "portA_frac": r.porta_frac,
        "p_value": r.verdict.p_value,
        "verdict": r.verdict.kind.value,
    }


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()
