"""Run configuration and its flat ``key = value`` file form.

File syntax: one ``key = value`` per line, ``#`` starts a comment, blank
lines are ignored. Values are typed by key (see ``FIELDS`` and README).
``input`` may repeat; each occurrence adds one path. Unknown keys are an
error.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

from .analysis import AnalysisConfig, ThresholdRule
from .ingest import SessionCalendar
from .series import AlphabetSpec


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    input: List[str] = field(default_factory=list)
    session_open: str = "09:30"
    session_close: str = "16:00"
    on_bad_line: str = "abort"
    delta_t: float = 1800.0
    alphabet: str = "sign"
    lag: int = 1
    te_mode: str = "event"
    shuffles: int = 100
    significance: float = 2.0
    min_records: int = 30
    network_rule: str = "absolute"
    pearson_threshold: float = 0.4
    te_threshold: float = 0.05
    top_quantile: float = 0.1
    seed: int = 0
    threads: int = 1
    out: str = "out"

    def validate(self) -> "RunConfig":
        try:
            session = SessionCalendar(self.session_open, self.session_close)
            AlphabetSpec.parse(self.alphabet)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        checks = [
            (self.on_bad_line in ("abort", "skip"), "on_bad_line must be abort or skip"),
            (0 < self.delta_t <= session.length, "delta_t must lie in (0, session length]"),
            (self.lag >= 1, "lag must be >= 1"),
            (self.te_mode in ("event", "binned", "both"), "te_mode must be event, binned or both"),
            (self.shuffles == 0 or self.shuffles >= 2, "shuffles must be 0 or >= 2"),
            (self.significance >= 0, "significance must be >= 0"),
            (self.min_records >= 1, "min_records must be >= 1"),
            (self.network_rule in ("absolute", "top_quantile"),
             "network_rule must be absolute or top_quantile"),
            (0 < self.top_quantile <= 1, "top_quantile must lie in (0, 1]"),
            (self.seed >= 0, "seed must be >= 0"),
            (self.threads >= 0, "threads must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    @property
    def session(self) -> SessionCalendar:
        return SessionCalendar(self.session_open, self.session_close)

    def analysis(self) -> AnalysisConfig:
        threads = self.threads or (os.cpu_count() or 1)
        return AnalysisConfig(
            session=self.session, delta_t=self.delta_t,
            alphabet=AlphabetSpec.parse(self.alphabet), lag=self.lag,
            te_mode=self.te_mode, shuffles=self.shuffles,
            significance=self.significance, min_records=self.min_records,
            seed=self.seed, threads=threads)

    def rule_for(self, kind: str) -> ThresholdRule:
        if self.network_rule == "top_quantile":
            return ThresholdRule.top_quantile(self.top_quantile)
        theta = self.pearson_threshold if kind == "pearson" else self.te_threshold
        return ThresholdRule.absolute(theta)

    # file form ------------------------------------------------------------

    def to_dict(self, include_out: bool = True) -> Dict[str, Any]:
        d = dataclasses.asdict(self)
        if not include_out:
            del d["out"]
        return d

    def to_text(self, include_out: bool = True) -> str:
        lines = []
        for f in dataclasses.fields(self):
            if f.name == "out" and not include_out:
                continue
            v = getattr(self, f.name)
            if f.name == "input":
                lines.extend(f"input = {p}" for p in v)
            else:
                lines.append(f"{f.name} = {_format(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls(**parse_text(text))

    @classmethod
    def load(cls, path) -> Dict[str, Any]:
        """Typed values present in a config file (a manifest JSON is also accepted)."""
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        if text.lstrip().startswith("{"):
            doc = json.loads(text)
            doc = doc.get("config", doc)
            return {k: _coerce(k, v) for k, v in doc.items()}
        return parse_text(text)

    @classmethod
    def resolve(cls, path=None, overrides: Optional[Mapping[str, Any]] = None) -> "RunConfig":
        """Defaults, overlaid by the file at ``path``, overlaid by non-None ``overrides``."""
        values: Dict[str, Any] = {}
        if path is not None:
            values.update(cls.load(path))
        for k, v in (overrides or {}).items():
            if v is not None:
                values[k] = _coerce(k, v)
        return cls(**values).validate()


FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _format(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(key: str, value):
    if key not in FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    typ = FIELDS[key]
    try:
        if key == "input":
            if isinstance(value, str):
                return [value]
            return [str(v) for v in value]
        if typ == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if typ == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def parse_text(text: str) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = key.strip(), value.strip()
        if key == "input":
            values.setdefault("input", []).append(value)
        else:
            values[key] = _coerce(key, value)
    if "input" in values:
        values["input"] = _coerce("input", values["input"])
    return values
