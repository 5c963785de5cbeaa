"""Monte Carlo campaigns: decay sweeps, relaxed sweeps, bias floor, proximity
predicate scans, noise power checks, and log-log fitting.

Every experiment is replayable: per-task substreams are keyed by the
global trial index under the master seed, so identical configs produce
identical records (and CSV bytes) regardless of thread count.  Wall-clock
columns are the single exception and are excluded from the determinism
contract.

CSV schema (header exactly):
    mode,N,K,M,r,trial,seed,value,baseline,wall_ms
Column meaning by mode:
    grfcq/qcs/relaxed  value = width estimate, baseline = linear least-squares
                       error (nan when M < N);
    bias               value = code discrepancy / M, baseline = ||x - x*||;
    scan               value = max width over the searched signals, baseline = nan;
    noise              value = ||noise||^2 / (M*delta^2/12), baseline = the
                       normalized deviation zeta_hat.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import min_measurements_grfcq, predicted_eps
from .cellgeom import build_cell, empirical_worst_case, estimate_width
from .quantizer import QuantizerSpec, l1_discrepancy, quantization_error
from .randkit import Stream, derive_stream
from .reconstruct import linear_baseline
from .sensing import SignalModel, gen_ensemble, sample_signal, sense

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "DecayFit",
    "SweepResult",
    "BiasResult",
    "ScanResult",
    "NoiseResult",
    "FitError",
    "CSV_HEADER",
    "fit_loglog",
    "decay_sweep",
    "relaxed_sweep",
    "bias_experiment",
    "proximity_violation_scan",
    "noise_power_check",
    "write_records",
]

CSV_HEADER = "mode,N,K,M,r,trial,seed,value,baseline,wall_ms"


class FitError(ValueError):
    """Not enough usable points for a log-log fit."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared experiment configuration; not every field matters to every mode."""

    mode: str
    n: int
    k: int | None = None
    r: int = 0
    m_list: tuple[int, ...] = ()
    trials: int = 50
    directions: int = 512
    delta: float = 1.0
    eta: float = 0.1
    rho: float | None = None
    lam: float = 0.25
    eps0: float = 0.5
    signals: int = 200
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.k is not None and not 1 <= self.k <= self.n:
            raise ValueError(f"k must satisfy 1 <= k <= n, got {self.k}")
        if self.r < 0:
            raise ValueError(f"r must be >= 0, got {self.r}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.directions < 1:
            raise ValueError(f"directions must be >= 1, got {self.directions}")
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        m_list = tuple(int(m) for m in self.m_list)
        if any(m < 1 for m in m_list):
            raise ValueError("every M must be >= 1")
        if list(m_list) != sorted(m_list):
            raise ValueError("m_list must be sorted ascending")
        object.__setattr__(self, "m_list", m_list)


@dataclass(frozen=True)
class RunRecord:
    """One experiment data point; one CSV row."""

    mode: str
    n: int
    k: int
    m: int
    r: int
    trial: int
    seed: int
    value: float
    baseline: float
    wall_ms: float

    def to_row(self) -> str:
        return (
            f"{self.mode},{self.n},{self.k},{self.m},{self.r},{self.trial},"
            f"{self.seed},{self.value!r},{self.baseline!r},{self.wall_ms:.3f}"
        )


@dataclass(frozen=True)
class DecayFit:
    """Ordinary least squares on (ln M, ln value)."""

    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class SweepResult:
    records: list[RunRecord]
    fit: DecayFit | None
    baseline_fit: DecayFit | None
    summary: dict


@dataclass(frozen=True)
class BiasResult:
    records: list[RunRecord]
    per_m: list[dict]
    summary: dict


@dataclass(frozen=True)
class ScanResult:
    records: list[RunRecord]
    m: int
    violation_rate: float
    threshold: float
    summary: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NoiseResult:
    records: list[RunRecord]
    per_m: list[dict]
    summary: dict


def fit_loglog(points) -> DecayFit:
    """OLS power-law fit; needs >= 3 distinct M values and positive values."""
    ms = np.asarray([p[0] for p in points], dtype=np.float64)
    vs = np.asarray([p[1] for p in points], dtype=np.float64)
    if np.unique(ms).size < 3:
        raise FitError(f"need >= 3 distinct M values, got {np.unique(ms).size}")
    if np.any(ms <= 0.0) or np.any(vs <= 0.0) or not np.all(np.isfinite(vs)):
        raise FitError("log-log fit needs positive finite points")
    x = np.log(ms)
    y = np.log(vs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    r_squared = 1.0 if ss_tot == 0.0 and ss_res < 1e-24 else 1.0 - ss_res / max(ss_tot, 1e-300)
    return DecayFit(slope=float(slope), intercept=float(intercept), r_squared=r_squared)


def _map_tasks(fn, args_list, threads: int):
    if threads <= 1:
        return [fn(*args) for args in args_list]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda args: fn(*args), args_list))


def _task_seed(master: int, global_index: int) -> tuple[int, int, int]:
    seed_t = derive_stream(master, global_index)
    return seed_t, derive_stream(seed_t, 0), derive_stream(seed_t, 1)


def _width_task(cfg: ExperimentConfig, model: SignalModel, mi: int, m: int, trial: int) -> RunRecord:
    start = time.perf_counter()
    seed_t, ens_seed, sig_seed = _task_seed(cfg.seed, mi * cfg.trials + trial)
    spec = QuantizerSpec(cfg.delta)
    ensemble = gen_ensemble(m, cfg.n, spec, ens_seed)
    stream = Stream(sig_seed)
    signal = sample_signal(model, stream)
    obs = sense(ensemble, signal)
    cell = build_cell(ensemble, obs.codes, ball_radius=1.0, support=signal.support)
    est = estimate_width(cell, signal.x, cfg.directions, stream, r=cfg.r)
    baseline = float("nan")
    if m >= cfg.n:
        baseline = float(np.linalg.norm(signal.x - linear_baseline(ensemble, obs.codes)))
    wall_ms = (time.perf_counter() - start) * 1e3
    return RunRecord(
        mode=cfg.mode,
        n=cfg.n,
        k=cfg.k or 0,
        m=m,
        r=cfg.r,
        trial=trial,
        seed=seed_t,
        value=est.value,
        baseline=baseline,
        wall_ms=wall_ms,
    )


def _medians_per_m(records: list[RunRecord], attr: str) -> list[tuple[int, float]]:
    out = []
    for m in sorted({rec.m for rec in records}):
        vals = np.asarray([getattr(rec, attr) for rec in records if rec.m == m])
        vals = vals[np.isfinite(vals)]
        if vals.size:
            out.append((m, float(np.median(vals))))
    return out


def decay_sweep(cfg: ExperimentConfig, threads: int = 1) -> SweepResult:
    """Width-vs-M sweep with the linear baseline alongside.

    Mode "grfcq" samples unit-ball signals; "qcs" samples sparse signals and
    measures widths inside the true support subspace.  Fits the log-log
    slope of per-M median widths and overlays the saturated-proximity
    prediction where M is large enough for it.
    """
    if not cfg.m_list:
        raise ValueError("m_list must not be empty")
    if cfg.mode not in ("grfcq", "qcs", "relaxed"):
        raise ValueError(f"decay sweep supports modes grfcq/qcs/relaxed, got {cfg.mode!r}")
    if cfg.mode == "qcs" and cfg.k is None:
        raise ValueError("qcs mode requires k")
    if cfg.mode == "grfcq" and cfg.k is not None:
        raise ValueError("grfcq mode samples the full ball; leave k unset")
    # k set => sparse signals with support-restricted widths (any mode label)
    model = SignalModel(cfg.n, cfg.k)
    tasks = [
        (cfg, model, mi, m, trial)
        for mi, m in enumerate(cfg.m_list)
        for trial in range(cfg.trials)
    ]
    records = _map_tasks(_width_task, tasks, threads)
    records.sort(key=lambda rec: (rec.m, rec.trial))

    def try_fit(points):
        try:
            return fit_loglog(points)
        except FitError:
            return None

    fit = try_fit(_medians_per_m(records, "value"))
    baseline_fit = try_fit(_medians_per_m(records, "baseline"))

    per_m = []
    for m in cfg.m_list:
        vals = np.asarray([rec.value for rec in records if rec.m == m])
        base = np.asarray([rec.baseline for rec in records if rec.m == m])
        base = base[np.isfinite(base)]
        try:
            eps_kwargs = {"k": cfg.k, "mode": "qcs"} if cfg.mode == "qcs" else {}
            predicted = predicted_eps(m, cfg.eta, cfg.delta, cfg.n, **eps_kwargs)
        except ValueError:
            predicted = None
        per_m.append(
            {
                "m": m,
                "median_width": float(np.median(vals)),
                "max_width": float(np.max(vals)),
                "baseline_median": float(np.median(base)) if base.size else None,
                "predicted_eps": predicted,
            }
        )
    summary = {
        "mode": cfg.mode,
        "n": cfg.n,
        "k": cfg.k,
        "r": cfg.r,
        "delta": cfg.delta,
        "trials": cfg.trials,
        "directions": cfg.directions,
        "seed": cfg.seed,
        "per_m": per_m,
        "fit": None if fit is None else vars(fit),
        "baseline_fit": None if baseline_fit is None else vars(baseline_fit),
    }
    if fit is None:
        summary["fit_note"] = "fit undefined: needs >= 3 distinct M values and > 1 trial"
    return SweepResult(records=records, fit=fit, baseline_fit=baseline_fit, summary=summary)


def relaxed_sweep(cfg: ExperimentConfig, threads: int = 1) -> SweepResult:
    """Decay sweep with widths measured at relaxation level cfg.r.

    With r = 0 the records are identical to the strict sweep under the
    same seed; matched seeds keep per-trial instances identical across r.
    """
    if cfg.mode != "relaxed":
        cfg = ExperimentConfig(**{**vars(cfg), "mode": "relaxed"})
    return decay_sweep(cfg, threads)


def _bias_task(cfg: ExperimentConfig, mi: int, m: int, trial: int) -> RunRecord:
    start = time.perf_counter()
    seed_t, ens_seed, sig_seed = _task_seed(cfg.seed, mi * cfg.trials + trial)
    spec = QuantizerSpec(cfg.delta)
    k = cfg.k or 2
    ensemble = gen_ensemble(m, cfg.n, spec, ens_seed)
    stream = Stream(sig_seed)
    raw = sample_signal(SignalModel.sparse_ball(cfg.n, k), stream)
    # Shrink so the offset vector stays inside the unit ball.
    x = raw.x * (1.0 - abs(cfg.lam) * cfg.delta)
    pivot = int(raw.support[0])
    x_star = x.copy()
    x_star[pivot] += cfg.lam * cfg.delta
    disc = l1_discrepancy(sense(ensemble, x), sense(ensemble, x_star))
    wall_ms = (time.perf_counter() - start) * 1e3
    return RunRecord(
        mode="bias",
        n=cfg.n,
        k=k,
        m=m,
        r=0,
        trial=trial,
        seed=seed_t,
        value=disc / m,
        baseline=float(np.linalg.norm(x - x_star)),
        wall_ms=wall_ms,
    )


def bias_experiment(cfg: ExperimentConfig, threads: int = 1) -> BiasResult:
    """Constant-offset discrepancy floor: x* = x + lam*delta*e_i on the support.

    Per M reports the mean and stderr of discrepancy/M and the implied
    constant c with discrepancy/M ~ c*|lam|; the distance ||x - x*|| equals
    |lam|*delta for every M, demonstrating the non-decaying floor.
    """
    if not cfg.m_list:
        raise ValueError("m_list must not be empty")
    if abs(cfg.lam) * cfg.delta >= 1.0:
        raise ValueError(
            f"|lam|*delta = {abs(cfg.lam) * cfg.delta} >= 1 pushes the offset signal out of the unit ball"
        )
    tasks = [
        (cfg, mi, m, trial) for mi, m in enumerate(cfg.m_list) for trial in range(cfg.trials)
    ]
    records = _map_tasks(_bias_task, tasks, threads)
    records.sort(key=lambda rec: (rec.m, rec.trial))
    per_m = []
    for m in cfg.m_list:
        vals = np.asarray([rec.value for rec in records if rec.m == m])
        mean = float(vals.mean())
        stderr = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
        per_m.append(
            {
                "m": m,
                "mean_discrepancy_per_m": mean,
                "stderr": stderr,
                "c": mean / abs(cfg.lam) if cfg.lam != 0.0 else None,
                "distance": abs(cfg.lam) * cfg.delta,
            }
        )
    cs = [row["c"] for row in per_m if row["c"] is not None]
    stability = None
    if len(cs) >= 2 and np.mean(cs) > 0.0:
        stability = float((max(cs) - min(cs)) / np.mean(cs))
    summary = {
        "mode": "bias",
        "n": cfg.n,
        "k": cfg.k or 2,
        "lam": cfg.lam,
        "delta": cfg.delta,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "per_m": per_m,
        "c_stability": stability,
    }
    return BiasResult(records=records, per_m=per_m, summary=summary)


def proximity_violation_scan(cfg: ExperimentConfig, threads: int = 1) -> ScanResult:
    """Fraction of ensemble draws where the searched worst case exceeds eps0.

    M is set from the unit-ball measurement formula at (eps0, eta); each
    draw searches cfg.signals sampled signals with cfg.directions random
    directions each.  The searcher is a lower-bound method, so the reported
    rate conservatively lower-bounds the true failure probability.
    """
    m = min_measurements_grfcq(cfg.eps0, cfg.eta, cfg.delta, cfg.n)
    spec = QuantizerSpec(cfg.delta)
    model = SignalModel.unit_ball(cfg.n)

    def task(draw: int) -> RunRecord:
        start = time.perf_counter()
        seed_t, ens_seed, scan_seed = _task_seed(cfg.seed, draw)
        ensemble = gen_ensemble(m, cfg.n, spec, ens_seed)
        result = empirical_worst_case(ensemble, model, cfg.signals, cfg.directions, scan_seed)
        wall_ms = (time.perf_counter() - start) * 1e3
        return RunRecord(
            mode="scan",
            n=cfg.n,
            k=0,
            m=m,
            r=0,
            trial=draw,
            seed=seed_t,
            value=result.max_width,
            baseline=float("nan"),
            wall_ms=wall_ms,
        )

    records = _map_tasks(task, [(d,) for d in range(cfg.trials)], threads)
    records.sort(key=lambda rec: rec.trial)
    violations = sum(1 for rec in records if rec.value > cfg.eps0)
    rate = violations / cfg.trials
    threshold = cfg.eta + 2.0 * float(np.sqrt(cfg.eta * (1.0 - cfg.eta) / cfg.trials))
    summary = {
        "mode": "scan",
        "n": cfg.n,
        "eps0": cfg.eps0,
        "eta": cfg.eta,
        "delta": cfg.delta,
        "m": m,
        "draws": cfg.trials,
        "signals": cfg.signals,
        "directions": cfg.directions,
        "violation_rate": rate,
        "threshold": threshold,
        "seed": cfg.seed,
    }
    return ScanResult(records=records, m=m, violation_rate=rate, threshold=threshold, summary=summary)


def noise_power_check(cfg: ExperimentConfig, threads: int = 1) -> NoiseResult:
    """Quantization-noise power against the M*delta^2/12 law.

    Per trial senses a fresh unit-ball signal and reports the normalized
    power ratio and the deviation zeta_hat = (power - M*delta^2/12) /
    (delta^2*sqrt(M)/12).
    """
    if not cfg.m_list:
        raise ValueError("m_list must not be empty")
    spec = QuantizerSpec(cfg.delta)
    model = SignalModel.unit_ball(cfg.n)

    def task(mi: int, m: int, trial: int) -> RunRecord:
        start = time.perf_counter()
        seed_t, ens_seed, sig_seed = _task_seed(cfg.seed, mi * cfg.trials + trial)
        ensemble = gen_ensemble(m, cfg.n, spec, ens_seed)
        stream = Stream(sig_seed)
        signal = sample_signal(model, stream)
        err = quantization_error(ensemble.phi @ signal.x, ensemble.xi, spec)
        power = float(err @ err)
        expected = m * cfg.delta**2 / 12.0
        zeta = (power - expected) / (cfg.delta**2 * np.sqrt(m) / 12.0)
        wall_ms = (time.perf_counter() - start) * 1e3
        return RunRecord(
            mode="noise",
            n=cfg.n,
            k=0,
            m=m,
            r=0,
            trial=trial,
            seed=seed_t,
            value=power / expected,
            baseline=float(zeta),
            wall_ms=wall_ms,
        )

    tasks = [(mi, m, t) for mi, m in enumerate(cfg.m_list) for t in range(cfg.trials)]
    records = _map_tasks(task, tasks, threads)
    records.sort(key=lambda rec: (rec.m, rec.trial))
    per_m = []
    for m in cfg.m_list:
        ratios = np.asarray([rec.value for rec in records if rec.m == m])
        zetas = np.asarray([rec.baseline for rec in records if rec.m == m])
        per_m.append(
            {
                "m": m,
                "mean_ratio": float(ratios.mean()),
                "p99_zeta": float(np.percentile(zetas, 99.0)),
            }
        )
    summary = {
        "mode": "noise",
        "n": cfg.n,
        "delta": cfg.delta,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "per_m": per_m,
    }
    return NoiseResult(records=records, per_m=per_m, summary=summary)


def write_records(path, records: list[RunRecord]) -> None:
    """Write records as UTF-8, LF-terminated CSV with the fixed schema."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for rec in records:
            fh.write(rec.to_row() + "\n")
