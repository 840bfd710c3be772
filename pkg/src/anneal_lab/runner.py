"""Configuration-driven sweep executor for model-comparison scans.

A sweep is the Cartesian product of (n_spins, alpha, t_f) grids for one
model.  Every grid point gets a seed derived by hashing the master seed with
the point key, so adding grid points never perturbs existing points'
randomness, reruns are bit-identical, and interrupted sweeps resume by key.
Records are appended as JSONL, one record per point, in canonical grid
order.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import observables as obs
from .instance import NoiseSpec, ProblemInstance, apply_control_errors, build_signature_instance
from .schedule import AnnealSchedule, TemperatureSchedule, default_schedule, dw2_like_schedule, read_schedule_csv

MODELS = ("sa", "sd", "sssv", "sssv_strong", "sssv_weak", "sssv_forced",
          "me", "me_closed", "boltzmann")
SAMPLED_MODELS = ("sd", "sssv", "sssv_strong", "sssv_weak", "sssv_forced")


@dataclass
class SweepConfig:
    model: str
    alpha_grid: list[float]
    t_f: list[float] = field(default_factory=lambda: [20000.0])
    n_spins: list[int] = field(default_factory=lambda: [8])
    n_runs: int = 1000
    noise: dict = field(default_factory=dict)  # NoiseSpec fields
    params: dict = field(default_factory=dict)  # model-specific knobs
    schedule: dict = field(default_factory=lambda: {"kind": "default"})
    master_seed: int = 0
    output: str = "records.jsonl"

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if not self.alpha_grid or not self.t_f or not self.n_spins:
            raise ValueError("alpha_grid, t_f, and n_spins must be nonempty")
        if self.model in SAMPLED_MODELS and self.n_runs < 1:
            raise ValueError("n_runs must be >= 1 for sampled models")
        NoiseSpec(**{**self.noise, "seed": 0})  # field validation
        self.load_schedule()

    @classmethod
    def from_file(cls, path) -> "SweepConfig":
        with open(path) as fh:
            raw = json.load(fh)
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def config_hash(self) -> str:
        canon = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def load_schedule(self) -> AnnealSchedule:
        kind = self.schedule.get("kind", "default")
        if kind == "default":
            return default_schedule()
        if kind == "dw2_like":
            return dw2_like_schedule()
        if kind == "csv":
            return read_schedule_csv(self.schedule["path"])
        raise ValueError(f"unknown schedule kind {kind!r}")


def point_key(model: str, n_spins: int, alpha: float, t_f: float) -> str:
    return f"{model}|N={n_spins}|alpha={alpha!r}|tf={t_f!r}"


def derive_seed(master_seed: int, key: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _noisy_instances(base: ProblemInstance, noise: dict, alpha: float, seed: int, count: int):
    """One control-error realization per run (or per point when count=1)."""
    spec = NoiseSpec(**{**noise, "seed": seed})
    seqs = np.random.SeedSequence(seed).spawn(count)
    return [
        apply_control_errors(base, spec, alpha=alpha, rng=np.random.default_rng(sq))
        for sq in seqs
    ]


def run_point(config: SweepConfig, n_spins: int, alpha: float, t_f: float) -> dict:
    """Execute one grid point and return its JSONL record."""
    key = point_key(config.model, n_spins, alpha, t_f)
    seed = derive_seed(config.master_seed, key)
    record = {
        "key": key,
        "model": config.model,
        "n_spins": n_spins,
        "alpha": alpha,
        "t_f": t_f,
        "seed": seed,
        "config_hash": config.config_hash(),
        "error": None,
    }
    try:
        record["observables"] = _execute(config, n_spins, alpha, t_f, seed)
    except Exception as exc:  # recorded, surfaced via exit code
        record["error"] = f"{type(exc).__name__}: {exc}"
    return record


def _execute(config: SweepConfig, n_spins: int, alpha: float, t_f: float, seed: int) -> dict:
    base = build_signature_instance(n_spins)
    schedule = config.load_schedule().with_t_f(t_f)
    params = config.params
    model = config.model
    gibbs_beta = params.get("gibbs_beta")

    if model == "sa":
        from .sa import run_sa

        inst = _noisy_instances(base, config.noise, alpha, seed, 1)[0]
        ts = TemperatureSchedule(
            kind=params.get("temperature_kind", "schedule_linked"),
            T0=params.get("T0", 2.226),
            TK=params.get("TK", 0.5),
            steps=params.get("sa_steps", 1000),
        )
        vec = run_sa(inst, ts, schedule=schedule)
        dist = obs.StateDistribution.exact(vec.probs)
        rec = obs.observables_record(dist, base, rotations=params.get("rotations", False))
        if gibbs_beta:
            rec["gibbs_distance"] = obs.trace_distance(
                dist, np.diag(obs.gibbs_state(_scaled(base, alpha), schedule, 1.0, gibbs_beta)).real
            )
        return rec

    if model in ("sssv", "sssv_strong", "sssv_weak", "sssv_forced"):
        from .sssv import SssvConfig, run_sssv

        variant = {"sssv": "plain", "sssv_strong": "strong_decohere",
                   "sssv_weak": "weak_decohere", "sssv_forced": "forced"}[model]
        instances = _noisy_instances(base, config.noise, alpha, seed, config.n_runs)
        cfg = SssvConfig(
            kT=params.get("kT", 1.382),
            sweeps=params.get("sweeps", 100_000),
            variant=variant,
            g2eta=params.get("g2eta", 1e-6 if variant == "strong_decohere" else 2.5e-7),
            seed=seed,
        )
        result = run_sssv(instances, schedule, alpha, t_f, cfg, n_runs=config.n_runs)
        dist = result.distribution()
        rec = obs.observables_record(dist, base, rotations=params.get("rotations", False))
        if gibbs_beta:
            rec["gibbs_distance"] = obs.trace_distance(
                dist, np.diag(obs.gibbs_state(_scaled(base, alpha), schedule, 1.0, gibbs_beta)).real
            )
        return rec

    if model == "sd":
        from .spin_dynamics import LangevinParams, run_sd_open_ensemble, sd_estimators

        instances = _noisy_instances(base, config.noise, alpha, seed, config.n_runs)
        lp = LangevinParams(
            zeta=params.get("zeta", 1e-3),
            kT=params.get("kT", 2.226),
            dt=params.get("dt", 0.01),
            seed=seed,
        )
        final = run_sd_open_ensemble(instances, schedule, alpha, t_f, lp, n_runs=config.n_runs)
        p_iso, p_clu = sd_estimators(final)
        bits = (final[..., 2] < 0).astype(np.uint8)
        dist = obs.StateDistribution.from_bitstrings(bits)
        rec = obs.observables_record(dist, base, rotations=params.get("rotations", False))
        rec["P_I"], rec["P_C"] = p_iso, p_clu  # cos^2-estimator versions
        rec["ratio"] = p_iso / p_clu if p_clu > 0 else "inf"
        rec["core_mz_median"] = float(np.median(final[:, n_spins // 2:, 2]))
        rec["outer_mz_median"] = float(np.median(final[:, : n_spins // 2, 2]))
        return rec

    if model in ("me", "me_closed"):
        from .master_equation import BathSpec, run_closed, run_me

        inst = _noisy_instances(base, config.noise, alpha, seed, 1)[0]
        if model == "me_closed":
            closed = run_closed(inst, schedule, alpha, t_f,
                                n_slices=params.get("n_slices", 4000))
            probs = np.abs(closed.psi_final) ** 2
            dist = obs.StateDistribution.exact(probs / probs.sum())
            rec = obs.observables_record(dist, base)
            rec["norm_drift"] = closed.norm_drift
            if gibbs_beta:
                rho = np.outer(closed.psi_final, closed.psi_final.conj())
                rec["gibbs_distance"] = obs.trace_distance(
                    rho, obs.gibbs_state(_scaled(base, alpha), schedule, 1.0, gibbs_beta)
                )
            return rec
        spec = BathSpec(
            kappa=params.get("kappa", 1.27e-4),
            beta=params.get("beta", 1.0 / 2.226),
            lamb_shift=params.get("lamb_shift", True),
            truncation=params.get("truncation", 56),
        )
        result = run_me(inst, schedule, alpha, t_f, spec,
                        n_cells=params.get("n_cells", 1200))
        probs = np.clip(np.real(np.diag(result.rho_final)), 0.0, None)
        dist = obs.StateDistribution.exact(probs / probs.sum())
        rec = obs.observables_record(dist, base)
        rec["trace_drift"] = result.trace_drift
        rec["min_eigenvalue"] = result.min_eigenvalue
        if params.get("negativity", False):
            rec["negativity_final"] = obs.negativity(
                result.rho_final, obs.default_vertical_partition(base)
            )
        if gibbs_beta:
            rec["gibbs_distance"] = obs.trace_distance(
                result.rho_final, obs.gibbs_state(_scaled(base, alpha), schedule, 1.0, gibbs_beta)
            )
        return rec

    if model == "boltzmann":
        from .spectrum import boltzmann_population_model, signature_ground_set

        inst = base
        if params.get("h_vs_j_row"):
            from .instance import apply_h_detuning

            inst = apply_h_detuning(inst, tuple(params["h_vs_j_row"]))
        pops, _ = boltzmann_population_model(
            inst, alpha,
            beta=params.get("beta", 10.7),
            noise_sigma=config.noise.get("sigma", 0.0),
            rng=np.random.default_rng(seed),
        )
        iso, cluster = signature_ground_set(base)
        p_iso = float(pops[iso])
        p_clu = float(pops[cluster].mean())
        return {
            "P_I": p_iso,
            "P_C": p_clu,
            "ratio": p_iso / p_clu if p_clu > 0 else "inf",
            "normalization": float(pops.sum()),
            "cluster_populations": [float(pops[i]) for i in cluster],
        }

    raise ValueError(f"unknown model {model!r}")


def _scaled(instance, alpha):
    from .instance import scale_instance

    return scale_instance(instance, alpha) if alpha != 1.0 else instance


def _grid(config: SweepConfig):
    for n in config.n_spins:
        for alpha in config.alpha_grid:
            for t_f in config.t_f:
                yield n, alpha, t_f


def run_sweep(config: SweepConfig, workers: int | None = None, resume: bool = True) -> int:
    """Execute all grid points; returns the count of failed points.

    Existing output records with matching keys and no error are reused
    verbatim; the output file is rewritten in canonical grid order, so a
    resumed sweep produces the same file as an uninterrupted one.
    """
    config.validate()
    if workers is None:
        workers = int(os.environ.get("ANNEAL_LAB_WORKERS", "1"))
    done: dict[str, dict] = {}
    if resume and os.path.exists(config.output):
        with open(config.output) as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    if rec.get("error") is None and rec.get("config_hash") == config.config_hash():
                        done[rec["key"]] = rec
    points = list(_grid(config))
    todo = [(n, a, t) for (n, a, t) in points
            if point_key(config.model, n, a, t) not in done]
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            fresh = list(pool.map(_run_point_star, [(config, *p) for p in todo]))
    else:
        fresh = [run_point(config, *p) for p in todo]
    by_key = dict(done)
    for rec in fresh:
        by_key[rec["key"]] = rec
    failures = 0
    with open(config.output, "w") as fh:
        for p in points:
            rec = by_key[point_key(config.model, *p)]
            if rec.get("error") is not None:
                failures += 1
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return failures


def _run_point_star(args):
    return run_point(*args)


def load_records(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out


def compare_models(*record_sets: list[dict]) -> str:
    """Aligned text table of P_I/P_C (and P_GS) per model over the shared grid.

    Raises when the record sets do not share the same (N, alpha, t_f) grid.
    """
    if not record_sets:
        raise ValueError("no record sets given")
    grids = []
    for recs in record_sets:
        grids.append(sorted((r["n_spins"], r["alpha"], r["t_f"]) for r in recs))
    if any(g != grids[0] for g in grids[1:]):
        raise ValueError("record sets are on misaligned grids")
    models = [recs[0]["model"] if recs else "?" for recs in record_sets]
    index = [
        {(r["n_spins"], r["alpha"], r["t_f"]): r for r in recs} for recs in record_sets
    ]
    lines = []
    header = f"{'N':>3} {'alpha':>8} {'t_f':>10}"
    for m in models:
        header += f" {m + ' ratio':>16} {m + ' P_GS':>12}"
    lines.append(header)
    for point in grids[0]:
        n, alpha, t_f = point
        row = f"{n:>3} {alpha:>8.4f} {t_f:>10.1f}"
        for ix in index:
            rec = ix[point]
            if rec.get("error"):
                row += f" {'ERROR':>16} {'-':>12}"
                continue
            o = rec["observables"]
            ratio = o.get("ratio")
            ratio_s = f"{ratio:.4g}" if isinstance(ratio, (int, float)) else str(ratio)
            pgs = o.get("P_GS")
            pgs_s = f"{pgs:.4g}" if isinstance(pgs, (int, float)) else "-"
            row += f" {ratio_s:>16} {pgs_s:>12}"
        lines.append(row)
    return "\n".join(lines)
