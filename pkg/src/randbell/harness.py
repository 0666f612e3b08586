"""Seeded Monte Carlo campaigns over random Bell operators.

Every trial is a pure function of ``(config, trial_index)``: its seed is
``derive_seed(master_seed, trial_index)`` and each random ingredient draws from
its own Philox lane keyed by that seed.  Results are therefore independent of
the worker count.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .core import (
    LOG_BASE,
    AngleConfig,
    BellSpec,
    Scheme,
    SignAssignment,
    Stream,
    derive_seed,
    generator,
    make_coefficients,
    mk_reference,
    prop_bound,
    sample_signs,
    szk_confidence,
    tail_probability,
    ww_direct_bound,
)
from .coplanar import OptimizerConfig, eigen_records, eigenvector, max_norm_over_angles, norm_fixed_angles
from .errors import ConfigError
from .lhv import MAX_EXACT_BITS, lhv_norm
from .statevector import ghz, haar_product_rotation, max_expectation_over_angles, mk_spec
from .wernerwolf import (
    SignFunction,
    beta_from_f,
    f_from_index,
    sample_f,
    ww_max_norm_over_angles,
    ww_norm_fixed_angles,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "trial_index", "trial_seed", "n", "r", "norm_estimate",
    "bound", "lhv_value", "passed", "elapsed_ms",
)
DEFAULT_TRIALS = {
    "coplanar_mc": 1000, "ww_mc": 1000, "expectation_mc": 100, "lhv_sweep": 100, "mk_baseline": 1,
}
# how a campaign is executed, not what it computes; left out of emitted results
EXECUTION_KEYS = ("threads", "output_path")
ESTIMATE_NOTE = (
    "norm_estimate is an attained value (a lower bound on the supremum over directions); "
    "a pass is conservative because a better optimizer could only raise the estimate"
)


class Kind(str, Enum):
    COPLANAR_MC = "coplanar_mc"
    WW_MC = "ww_mc"
    EXPECTATION_MC = "expectation_mc"
    LHV_SWEEP = "lhv_sweep"
    MK_BASELINE = "mk_baseline"


class StateSelector(str, Enum):
    GHZ = "ghz"
    RANDOM = "random"
    EIGEN = "eigen"


@dataclass(frozen=True)
class CampaignConfig:
    kind: Kind
    n: int
    r: int = 2
    trials: int | None = None
    master_seed: int = 0
    scheme: Scheme = Scheme.UNIFORM
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    output_path: str | None = None
    threads: int = 1
    state: StateSelector = StateSelector.GHZ
    # explicit magnitudes (scheme=explicit); forced signs, or the forced f for ww_mc
    coefficients: tuple[float, ...] | None = None
    signs: tuple[int, ...] | None = None
    exhaustive: bool = False
    lhv: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", Kind(self.kind))
            object.__setattr__(self, "scheme", Scheme(self.scheme))
            object.__setattr__(self, "state", StateSelector(self.state))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if isinstance(self.optimizer, dict):
            object.__setattr__(self, "optimizer", OptimizerConfig.from_dict(self.optimizer))
        if self.trials is None:
            object.__setattr__(self, "trials", DEFAULT_TRIALS[self.kind.value])
        for name in ("coefficients", "signs"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(v))
        self.validate()

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.n < 2:
            raise ConfigError(f"campaigns need n >= 2 (bounds use ln n), got n={self.n}")
        if self.r < 1:
            raise ConfigError(f"r must be >= 1, got {self.r}")
        if self.kind in (Kind.WW_MC, Kind.MK_BASELINE) and self.r != 2:
            raise ConfigError(f"{self.kind.value} requires r = 2")
        if self.kind is Kind.WW_MC:
            if self.n > 20:
                raise ConfigError("ww_mc supports n <= 20")
            if self.exhaustive and self.n > 4:
                raise ConfigError("exhaustive ww_mc supports n <= 4")
            if self.signs is not None and len(self.signs) != 2**self.n:
                raise ConfigError(f"forced sign function needs {2**self.n} entries")
        if self.kind is Kind.EXPECTATION_MC and self.n > 10:
            raise ConfigError("expectation_mc supports n <= 10")
        if self.kind is Kind.MK_BASELINE and self.n > 20:
            raise ConfigError("mk_baseline supports n <= 20")
        if self.kind in (Kind.COPLANAR_MC, Kind.LHV_SWEEP, Kind.EXPECTATION_MC):
            size = self.r**self.n
            if self.scheme is Scheme.EXPLICIT and (self.coefficients is None or len(self.coefficients) != size):
                raise ConfigError(f"explicit scheme needs {size} coefficients")
            if self.signs is not None and len(self.signs) != size:
                raise ConfigError(f"forced signs need {size} entries")
        if self.optimizer.starts < 0 or self.optimizer.max_iters < 1:
            raise ConfigError("optimizer needs starts >= 0 and max_iters >= 1")
        if self.optimizer.starts == 0 and self.kind is not Kind.WW_MC:
            raise ConfigError("starts = 0 (fixed directions) is only meaningful for ww_mc")

    @property
    def n_trials(self) -> int:
        if self.kind is Kind.MK_BASELINE:
            return self.n - 1
        if self.kind is Kind.WW_MC and self.exhaustive:
            return 2 ** (2**self.n)
        return self.trials

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("kind", "scheme", "state"):
            d[key] = getattr(self, key).value
        d["optimizer"] = self.optimizer.to_dict()
        for key in ("coefficients", "signs"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    trial_seed: int
    n: int
    r: int
    norm_estimate: float
    bound: float
    lhv_value: float | None
    passed: bool
    elapsed_ms: float


@dataclass(frozen=True)
class CampaignSummary:
    kind: str
    trials: int
    empirical_pass_fraction: float
    paper_bound_fraction: float | None
    bound: float
    norm_quantiles: dict
    mk_reference: float
    config: dict
    version: str = __version__
    log_base: str = LOG_BASE
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# trial construction
# ---------------------------------------------------------------------------

def build_spec(cfg: CampaignConfig, seed: int) -> BellSpec:
    coeffs = make_coefficients(cfg.scheme, cfg.n, cfg.r, seed=seed, values=cfg.coefficients)
    if cfg.signs is not None:
        signs = SignAssignment(np.asarray(cfg.signs), seed)
    else:
        signs = sample_signs(seed, cfg.n, cfg.r)
    return BellSpec.from_parts(coeffs, signs)


def fixed_ww_angles(master_seed: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Campaign-wide random directions for fixed-angle Werner-Wolf runs."""
    t = generator(master_seed, Stream.ANGLES).uniform(0.0, 2 * math.pi, size=(2, n))
    return t[0], t[1]


def _select_state(cfg: CampaignConfig, spec: BellSpec, seed: int):
    if cfg.state is StateSelector.GHZ:
        return ghz(cfg.n)
    if cfg.state is StateSelector.RANDOM:
        return haar_product_rotation(ghz(cfg.n), seed)
    angles = AngleConfig(generator(seed, Stream.ANGLES).uniform(0.0, 2 * math.pi, (cfg.r, cfg.n)))
    top = max(eigen_records(spec, angles), key=lambda rec: rec.magnitude)
    return eigenvector(top.omega, top.theta, cfg.n)


def campaign_bound(cfg: CampaignConfig, n: int | None = None) -> float:
    n = cfg.n if n is None else n
    if cfg.kind is Kind.WW_MC:
        return prop_bound("prop3", n, 2)
    if cfg.kind is Kind.EXPECTATION_MC:
        return prop_bound("prop2", n, cfg.r)
    return prop_bound("prop1", n, cfg.r)


def paper_bound_fraction(cfg: CampaignConfig) -> float | None:
    n, r = cfg.n, cfg.r
    if cfg.kind in (Kind.COPLANAR_MC, Kind.LHV_SWEEP):
        return tail_probability(n, r)
    if cfg.kind is Kind.WW_MC:
        return szk_confidence(1, 2**n)
    if cfg.kind is Kind.EXPECTATION_MC:
        return szk_confidence(2 * r * n, 2 * n)
    return None


def run_trial(cfg: CampaignConfig, index: int) -> TrialRecord:
    seed = derive_seed(cfg.master_seed, index)
    start = time.perf_counter()
    n, r = cfg.n, cfg.r
    lhv_value = None
    opt = replace(cfg.optimizer, seed=seed)
    if cfg.kind in (Kind.COPLANAR_MC, Kind.LHV_SWEEP):
        spec = build_spec(cfg, seed)
        norm, _ = max_norm_over_angles(spec, opt)
        if cfg.kind is Kind.LHV_SWEEP or cfg.lhv:
            classical = lhv_norm(spec, seed=seed)
            lhv_value = classical.value
            # the classical optimizer is an angle configuration in {0, pi}
            at_lhv = norm_fixed_angles(spec, AngleConfig(np.where(classical.argmax > 0, 0.0, math.pi)))
            norm = max(norm, at_lhv)
    elif cfg.kind is Kind.WW_MC:
        if cfg.signs is not None:
            f = SignFunction(np.asarray(cfg.signs))
        elif cfg.exhaustive:
            f = f_from_index(index, n)
        else:
            f = sample_f(seed, n)
        if cfg.optimizer.starts == 0:
            norm = ww_norm_fixed_angles(f, *fixed_ww_angles(cfg.master_seed, n))
        else:
            norm, _ = ww_max_norm_over_angles(f, opt)
        if cfg.lhv and 2 * n <= MAX_EXACT_BITS:
            lhv_value = lhv_norm(beta_from_f(f).spec()).value
    elif cfg.kind is Kind.EXPECTATION_MC:
        spec = build_spec(cfg, seed)
        state = _select_state(cfg, spec, seed)
        norm, _ = max_expectation_over_angles(spec, state, opt)
        if cfg.lhv:
            lhv_value = lhv_norm(spec, seed=seed).value
    else:
        n = index + 2
        mk = mk_spec(n)
        norm = norm_fixed_angles(mk.spec, mk.optimal_angles)
        if 2 * n <= MAX_EXACT_BITS:
            lhv_value = lhv_norm(mk.spec).value
    bound = campaign_bound(cfg, n)
    elapsed = (time.perf_counter() - start) * 1000.0
    return TrialRecord(index, seed, n, r, float(norm), bound, lhv_value, bool(norm <= bound), elapsed)


def _trial_batch(args) -> list[TrialRecord]:
    cfg, indices = args
    return [run_trial(cfg, i) for i in indices]


def run_campaign(cfg: CampaignConfig) -> tuple[CampaignSummary, list[TrialRecord]]:
    """Run every trial of ``cfg`` (on ``cfg.threads`` worker processes) and summarize."""
    indices = list(range(cfg.n_trials))
    if cfg.threads == 1 or len(indices) == 1:
        records = [run_trial(cfg, i) for i in indices]
    else:
        chunks = [indices[k::cfg.threads * 4] for k in range(cfg.threads * 4)]
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            parts = pool.map(_trial_batch, [(cfg, c) for c in chunks if c])
            records = [rec for part in parts for rec in part]
    records.sort(key=lambda rec: rec.trial_index)
    return summarize(cfg, records), records


def summarize(cfg: CampaignConfig, records: Sequence[TrialRecord]) -> CampaignSummary:
    norms = np.array([rec.norm_estimate for rec in records])
    passed = sum(rec.passed for rec in records)
    quantiles = {
        "min": float(norms.min()),
        "p50": float(np.percentile(norms, 50)),
        "p95": float(np.percentile(norms, 95)),
        "max": float(norms.max()),
    }
    notes = {"estimate": ESTIMATE_NOTE, "log": "ln is the natural logarithm in every bound"}
    if cfg.kind is Kind.WW_MC:
        notes["ww_constant_13"] = prop_bound("prop3", cfg.n, 2)
        notes["ww_direct_szk"] = ww_direct_bound(cfg.n)
    lhv = [rec.lhv_value for rec in records if rec.lhv_value is not None]
    if lhv:
        notes["lhv_max"] = float(max(lhv))
        ratios = [rec.norm_estimate / rec.lhv_value for rec in records if rec.lhv_value]
        if ratios:
            notes["quantum_over_lhv_max"] = float(max(ratios))
    return CampaignSummary(
        kind=cfg.kind.value,
        trials=len(records),
        empirical_pass_fraction=passed / len(records),
        paper_bound_fraction=paper_bound_fraction(cfg),
        bound=campaign_bound(cfg),
        norm_quantiles=quantiles,
        mk_reference=mk_reference(cfg.n),
        config={k: v for k, v in cfg.to_dict().items() if k not in EXECUTION_KEYS},
        notes=notes,
    )


def bounds_satisfied(summary: CampaignSummary) -> bool:
    if summary.paper_bound_fraction is None:
        return summary.empirical_pass_fraction == 1.0
    return summary.empirical_pass_fraction >= summary.paper_bound_fraction


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def records_csv(records: Sequence[TrialRecord], include_timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        w.writerow([
            rec.trial_index, rec.trial_seed, rec.n, rec.r, _fmt(rec.norm_estimate),
            _fmt(rec.bound), _fmt(rec.lhv_value), "true" if rec.passed else "false",
            f"{rec.elapsed_ms:.3f}" if include_timing else "",
        ])
    return buf.getvalue()


def results_json(summary: CampaignSummary, records: Sequence[TrialRecord], include_timing: bool = False) -> str:
    rows = []
    for rec in records:
        d = dataclasses.asdict(rec)
        if not include_timing:
            d["elapsed_ms"] = None
        rows.append(d)
    doc = {
        "summary": summary.to_dict(),
        "config": summary.config,
        "version": summary.version,
        "log_base": summary.log_base,
        "records": rows,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit_results(
    summary: CampaignSummary,
    records: Sequence[TrialRecord],
    fmt: str,
    path: str | Path,
    include_timing: bool = False,
) -> Path:
    """Write CSV or JSON; identical inputs give identical bytes unless timing is included."""
    path = Path(path)
    if fmt == "csv":
        text = records_csv(records, include_timing)
    elif fmt == "json":
        text = results_json(summary, records, include_timing)
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def read_records_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


__all__ = [
    "CSV_COLUMNS", "CampaignConfig", "CampaignSummary", "Kind", "StateSelector",
    "TrialRecord", "bounds_satisfied", "emit_results", "run_campaign", "run_trial", "summarize",
]
