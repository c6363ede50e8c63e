"""Improved iterative scaling with an optional zero-mean Gaussian prior.

Each iteration solves, per feature and against the iteration-start model,

    sum_x P(x) f_i(x) exp(delta_i * f#(x)) [+ (lambda_i + delta_i) / sigma2] = E_R[f_i]

where ``f#(x)`` is the total feature count of parse ``x``, then applies all
increments together.  Probabilities are normalised over the whole sample.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .errors import ContractViolation
from .features import FeatureTable
from .rfm import Model, Sample, log_scores

log = logging.getLogger(__name__)

WEIGHT_FLOOR = -30.0


@dataclass(frozen=True)
class TrainerConfig:
    iterations: int = 20
    newton_tol: float = 1e-8
    newton_max_steps: int = 50
    prior_variance: Optional[float] = None
    convergence_tol: float = 1e-10
    threads: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ContractViolation("iterations must be >= 1")
        if self.newton_tol <= 0 or self.convergence_tol <= 0:
            raise ContractViolation("tolerances must be positive")
        if self.newton_max_steps < 1:
            raise ContractViolation("newton_max_steps must be >= 1")
        if self.prior_variance is not None and self.prior_variance <= 0:
            raise ContractViolation("prior variance must be positive")

    @property
    def inv_var(self) -> float:
        return 0.0 if self.prior_variance is None else 1.0 / self.prior_variance


class TraceRecord(NamedTuple):
    iteration: int
    loglik: float
    max_mismatch: float
    weight_norm: float


@dataclass
class TrainingTrace:
    records: List[TraceRecord] = field(default_factory=list)
    frozen: set = field(default_factory=set)
    unconverged: set = field(default_factory=set)

    def __len__(self):
        return len(self.records)

    def logliks(self):
        return [r.loglik for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "loglik", "max_mismatch", "weight_norm"])
        for r in self.records:
            w.writerow([r.iteration, f"{r.loglik:.17g}", f"{r.max_mismatch:.17g}",
                        f"{r.weight_norm:.17g}"])
        return buf.getvalue()

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


class _Prepared:
    """Arrays derived once per sample."""

    def __init__(self, sample: Sample, n_features: int):
        if sample.n_features != n_features:
            raise ContractViolation(
                f"sample featurized for {sample.n_features} features, table has {n_features}"
            )
        m = sample.matrix()
        self.matrix = m
        self.indptr = m.indptr.astype(np.int64)
        self.indices = m.indices.astype(np.int64)
        self.data = m.data.astype(np.float64)
        totals = sample.totals
        self.levels, self.row_level = np.unique(totals, return_inverse=True)
        self.row_level = self.row_level.astype(np.int64)
        self.levels = self.levels.astype(np.float64)
        self.ref = sample.ref_probs
        self.n_features = n_features

    def probs(self, weights):
        if self.n_features == 0:
            s = np.zeros(self.matrix.shape[0])
        else:
            s = self.matrix @ weights
        logp = s - logsumexp(s)
        return logp


def reference_expectations(sample: Sample) -> np.ndarray:
    """E_R[f_i] = sum_x R(x) f_i(x)."""
    return np.asarray(sample.matrix().T @ sample.ref_probs).ravel()


def model_expectations(model: Model, sample: Sample) -> np.ndarray:
    s = log_scores(model, sample)
    p = np.exp(s - logsumexp(s))
    return np.asarray(sample.matrix().T @ p).ravel()


def log_likelihood(model: Model, sample: Sample) -> float:
    """sum_x R(x) log P(x | model), P normalised over the sample."""
    s = log_scores(model, sample)
    return float(sample.ref_probs @ (s - logsumexp(s)))


def _mismatch(er, em, weights, inv_var, frozen_mask):
    gap = er - em - weights * inv_var
    if frozen_mask is not None:
        gap = gap[~frozen_mask]
    return float(np.max(np.abs(gap))) if gap.size else 0.0


def iis_step(model: Model, sample: Sample, er: np.ndarray, cfg: TrainerConfig,
             prepared: Optional[_Prepared] = None, trace: Optional[TrainingTrace] = None) -> Model:
    """One batch scaling update; every increment is solved against ``model``."""
    if len(er) != len(model):
        raise ContractViolation("reference expectations do not match the feature table")
    if len(model) == 0:
        return model
    prep = prepared or _Prepared(sample, len(model))
    p = np.exp(prep.probs(model.weights))
    moments = kernels.feature_moments(prep.indptr, prep.indices, prep.data, prep.row_level, p,
                                      len(model), len(prep.levels))
    delta, flags = kernels.solve_increments(
        moments, prep.levels, er, model.weights, cfg.inv_var, cfg.newton_tol,
        cfg.newton_max_steps, WEIGHT_FLOOR, cfg.threads,
    )
    if trace is not None:
        trace.frozen.update(np.flatnonzero(flags == kernels.FROZEN).tolist())
        bad = np.flatnonzero(flags == kernels.UNCONVERGED).tolist()
        if bad:
            log.warning("newton did not converge for %d features; bisection used", len(bad))
        trace.unconverged.update(bad)
    return model.with_weights(model.weights + delta)


def train(sample: Sample, table: FeatureTable, cfg: TrainerConfig = TrainerConfig(),
          templates=None, callback: Optional[Callable[[int, Model], None]] = None):
    """Fit weights from zero; returns ``(model, trace)``.

    ``callback(iteration, model)`` sees the model after every iteration.
    """
    kw = {} if templates is None else {"templates": templates}
    model = Model(table, np.zeros(len(table)), **kw)
    trace = TrainingTrace()
    prep = _Prepared(sample, len(table))
    er = reference_expectations(sample) if len(table) else np.zeros(0)
    frozen_mask = None
    for it in range(1, cfg.iterations + 1):
        model = iis_step(model, sample, er, cfg, prep, trace)
        if trace.frozen and frozen_mask is None:
            frozen_mask = np.zeros(len(table), dtype=bool)
            frozen_mask[list(trace.frozen)] = True
        logp = prep.probs(model.weights)
        loglik = float(prep.ref @ logp)
        if len(table):
            em = np.asarray(prep.matrix.T @ np.exp(logp)).ravel()
            mismatch = _mismatch(er, em, model.weights, cfg.inv_var, frozen_mask)
        else:
            mismatch = 0.0
        trace.records.append(TraceRecord(it, loglik, mismatch, model.norm()))
        if callback is not None:
            callback(it, model)
        if mismatch < cfg.convergence_tol:
            break
    return model, trace
