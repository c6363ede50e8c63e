"""Flat ``key = value`` run configuration with dotted keys.

Values are parsed and validated when loaded, so a bad file is rejected
before any command touches its outputs.  Lines starting with ``#`` are
comments.  Later sources win: defaults, then the file, then ``--set``
overrides in command-line order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, Optional, Tuple

from .errors import ConfigError, ContractViolation
from .features import ALL_TEMPLATES, default_pp_predicate, pp_prefix_predicate
from .metrics import MetricWeights
from .samplers import STRATEGIES, SampleConfig
from .search import DEFAULT_MAX_PARSES, DEFAULT_SCHEDULE, SearchSchedule, format_n, parse_n
from .synth import SynthSpec
from .trainer import TrainerConfig

FATAL_CHOICES = ("none", "unconverged", "frozen", "any")


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise ValueError("must be >= 1")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _pos_float(text):
    v = float(text)
    if not v > 0:
        raise ValueError("must be > 0")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise ValueError("must be >= 0")
    return v


def _opt_pos_float(text):
    return None if text.strip().lower() in ("", "none", "off") else _pos_float(text)


def _opt_n(text):
    return parse_n(text)  # "all" -> None


def _path(text):
    text = text.strip()
    return Path(text) if text else None


def _choice(options):
    def parse(text):
        t = text.strip().lower()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t
    return parse


def _templates(text):
    names = [t.strip().upper() for t in text.split(",") if t.strip()]
    bad = [t for t in names if t not in ALL_TEMPLATES]
    if bad or not names:
        raise ValueError(f"templates must be a non-empty subset of {sorted(ALL_TEMPLATES)}")
    return frozenset(names)


def _schedule(text):
    return tuple(parse_n(t) for t in text.split(",") if t.strip())


def _int_range(text):
    parts = text.replace("-", ",").split(",")
    if len(parts) != 2:
        raise ValueError("expected 'lo,hi'")
    return int(parts[0]), int(parts[1])


def _text(text):
    return text.strip()


# key -> (parser, default as text)
SCHEMA: Dict[str, Tuple[Callable, str]] = {
    "corpus.train": (_path, ""),
    "corpus.heldout": (_path, ""),
    "corpus.test": (_path, ""),
    "metric.w_cross": (_nonneg_float, "1.0"),
    "metric.w_recall": (_nonneg_float, "1.0"),
    "metric.w_precision": (_nonneg_float, "1.0"),
    "metric.labeled": (_bool, "false"),
    "reference.epsilon": (_pos_float, "1e-6"),
    "sampler.strategy": (_choice(STRATEGIES), "rand"),
    "sampler.n": (_opt_n, "all"),
    "sampler.seed": (int, "0"),
    "sampler.runs": (_pos_int, "1"),
    "sampler.manifest": (_path, ""),
    "features.templates": (_templates, "RULE,PP_HEAD,HEAD_LEX"),
    "features.min_count": (_pos_int, "2"),
    "features.pp_prefix": (_text, "PP"),
    "trainer.iterations": (_pos_int, "20"),
    "trainer.sigma2": (_opt_pos_float, "none"),
    "trainer.newton_tol": (_pos_float, "1e-8"),
    "trainer.newton_max_steps": (_pos_int, "50"),
    "trainer.convergence_tol": (_pos_float, "1e-10"),
    "trainer.fatal_flags": (_choice(FATAL_CHOICES), "none"),
    "search.schedule": (_schedule, ",".join(format_n(n) for n in DEFAULT_SCHEDULE)),
    "search.patience": (_nonneg_int, "1"),
    "search.eval_every": (_pos_int, "2"),
    "eval.max_parses": (_opt_n, str(DEFAULT_MAX_PARSES)),
    "synth.sentences": (_nonneg_int, "100"),
    "synth.tokens": (_int_range, "6,12"),
    "synth.candidates": (_int_range, "2,30"),
    "synth.hidden_features": (_pos_int, "200"),
    "synth.noise": (_nonneg_float, "0.3"),
    "synth.seed": (int, "0"),
    "synth.vocabulary": (_pos_int, "60"),
    "synth.label_fidelity": (_nonneg_float, "0.9"),
    "synth.heldout_fraction": (_nonneg_float, "0.0"),
    "model.path": (_path, ""),
    "output.corpus": (_path, ""),
    "output.heldout": (_path, ""),
    "output.model": (_path, ""),
    "output.trace": (_path, ""),
    "output.results": (_path, ""),
    "output.manifest": (_path, ""),
    "output.reference": (_path, ""),
    "output.verdicts": (_path, ""),
}


def parse_assignments(lines: Iterable[str], source: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


@dataclass(frozen=True)
class RunConfig:
    values: Dict[str, object]

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    # typed views ------------------------------------------------------------

    def metric(self) -> MetricWeights:
        v = self.values
        try:
            return MetricWeights(v["metric.w_cross"], v["metric.w_recall"],
                                 v["metric.w_precision"], v["metric.labeled"])
        except ContractViolation as err:
            raise ConfigError(str(err)) from None

    def sampler(self) -> SampleConfig:
        v = self.values
        return SampleConfig(v["sampler.n"], v["sampler.strategy"], v["sampler.seed"])

    def trainer(self, threads: int = 1) -> TrainerConfig:
        v = self.values
        try:
            return TrainerConfig(v["trainer.iterations"], v["trainer.newton_tol"],
                                 v["trainer.newton_max_steps"], v["trainer.sigma2"],
                                 v["trainer.convergence_tol"], threads)
        except ContractViolation as err:
            raise ConfigError(str(err)) from None

    def schedule(self) -> SearchSchedule:
        try:
            return SearchSchedule(self.values["search.schedule"], self.values["search.patience"])
        except ContractViolation as err:
            raise ConfigError(f"search.schedule: {err}") from None

    def templates(self) -> frozenset:
        return self.values["features.templates"]

    def pp_predicate(self):
        prefix = self.values["features.pp_prefix"]
        return default_pp_predicate if prefix == "PP" else pp_prefix_predicate(prefix)

    def synth(self) -> SynthSpec:
        v = self.values
        try:
            return SynthSpec(
                sentences=v["synth.sentences"], tokens=v["synth.tokens"],
                candidates=v["synth.candidates"], hidden_features=v["synth.hidden_features"],
                noise=v["synth.noise"], seed=v["synth.seed"], vocabulary=v["synth.vocabulary"],
                label_fidelity=v["synth.label_fidelity"],
            )
        except ContractViolation as err:
            raise ConfigError(str(err)) from None

    def to_text(self) -> str:
        """Canonical dump, one line per key in schema order."""
        lines = []
        for key, (parser, _) in SCHEMA.items():
            v = self.values[key]
            if v is None and parser is _opt_n:
                text = "all"
            elif v is None and parser is _opt_pos_float:
                text = "none"
            else:
                text = _render(v)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"


def _render(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, frozenset):
        return ",".join(sorted(v))
    if isinstance(v, tuple):
        return ",".join(format_n(x) if x is None or isinstance(x, int) else str(x) for x in v)
    return str(v)


def load_config(path: Optional[str] = None, overrides: Iterable[str] = ()) -> RunConfig:
    raw = {k: default for k, (_, default) in SCHEMA.items()}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw.update(_checked(parse_assignments(fh, str(path))))
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} must look like key=value")
        raw.update(_checked({key.strip(): value.strip()}))
    values = {}
    for key, text in raw.items():
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(text)
        except (ValueError, ContractViolation) as err:
            raise ConfigError(f"{key}: {err}") from None
    return RunConfig(values)


def _checked(assign: Dict[str, str]) -> Dict[str, str]:
    unknown = sorted(set(assign) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return assign
