"""Semi-classical O(3) spin dynamics: closed precession and spin-Langevin.

The closed-system equations of motion are

    dM_i/dt = -H_i x M_i,
    H_i = 2 A(t) x_hat + 2 alpha B(t) (h_i + sum_j J_ij M_j . z_hat) z_hat,

and the open system adds white noise and a Landau-Lifshitz friction term,

    dM_i/dt = -(H_i + xi(t) + zeta H_i x M_i) x M_i,
    <xi_a(t) xi_b(t')> = 2 kT zeta delta_ab delta(t - t').

Integration is stochastic Heun (Stratonovich), with each moment renormalized
to the unit sphere after every step.  Ensembles evolve in lockstep with one
RNG stream per run spawned from the master seed, so a run's trajectory is
reproducible independently of batch size or chunking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import ProblemInstance
from .schedule import OPERATING_KT, AnnealSchedule

_CHUNK_STEPS = 256


@dataclass(frozen=True)
class SpinConfiguration:
    """N unit 3-vectors."""

    moments: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.moments, dtype=float)
        if m.ndim != 2 or m.shape[1] != 3:
            raise ValueError("moments must have shape (N, 3)")
        norms = np.linalg.norm(m, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("moments must be unit vectors (|norm - 1| <= 1e-9)")
        object.__setattr__(self, "moments", m)

    @classmethod
    def along_x(cls, n_spins: int) -> "SpinConfiguration":
        m = np.zeros((n_spins, 3))
        m[:, 0] = 1.0
        return cls(m)


@dataclass(frozen=True)
class LangevinParams:
    zeta: float = 1e-3
    kT: float = OPERATING_KT
    dt: float = 0.01  # ns
    seed: int = 0
    noise_mode: str = "componentwise"  # or "isotropic" (variance split across 3 axes)

    def __post_init__(self):
        if self.zeta < 0:
            raise ValueError("zeta must be >= 0")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.noise_mode not in ("componentwise", "isotropic"):
            raise ValueError("noise_mode must be 'componentwise' or 'isotropic'")


def effective_field(
    instance: ProblemInstance,
    schedule: AnnealSchedule,
    alpha: float,
    s: float,
    config,
) -> np.ndarray:
    """Per-spin field H_i (N, 3) in 1/ns at schedule point s."""
    m = config.moments if isinstance(config, SpinConfiguration) else np.asarray(config, dtype=float)
    a, b = float(schedule.a_of(s)), float(schedule.b_of(s))
    return _field_batch(m[None], instance.fields[None], instance.coupling_matrix()[None], a, b, alpha)[0]


def _field_batch(m, h, jm, a, b, alpha):
    """(R, N, 3) effective field for an (R, N, 3) moment batch."""
    mz = m[..., 2]
    hz = 2.0 * alpha * b * (h + np.einsum("rij,rj->ri", jm, mz))
    field = np.zeros_like(m)
    field[..., 0] = 2.0 * a
    field[..., 2] = hz
    return field


def _rhs(m, field, zeta, xi):
    torque = field if xi is None else field + xi
    if zeta:
        torque = torque + zeta * np.cross(field, m)
    return -np.cross(torque, m)


def run_sd_closed(
    instance: ProblemInstance,
    schedule: AnnealSchedule,
    alpha: float,
    t_f: float | None = None,
    dt: float = 0.01,
    initial: SpinConfiguration | None = None,
    record_every: int = 1000,
):
    """Closed-system trajectory from M_i = x_hat (default), RK4 + renormalization.

    Returns (times, trajectory) with trajectory of shape (T, N, 3).  Raises
    if the pre-renormalization norm drift of any step exceeds 1e-6.
    """
    t_f = t_f if t_f is not None else schedule.t_f
    m0 = initial if initial is not None else SpinConfiguration.along_x(instance.n_spins)
    m = m0.moments[None].copy()
    h = instance.fields[None]
    jm = instance.coupling_matrix()[None]
    n_steps = int(np.ceil(t_f / dt))
    times, traj = [0.0], [m[0].copy()]
    for k in range(n_steps):
        t = k * dt
        step = min(dt, t_f - t)
        m = _rk4_step(m, t, step, t_f, schedule, h, jm, alpha)
        norms = np.linalg.norm(m, axis=-1)
        if np.max(np.abs(norms - 1.0)) > 1e-6:
            raise RuntimeError(
                f"norm drift {np.max(np.abs(norms - 1.0)):.2e} at t={t:.3f} ns; reduce dt"
            )
        m /= norms[..., None]
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            times.append(t + step)
            traj.append(m[0].copy())
    return np.array(times), np.array(traj)


def _rk4_step(m, t, dt, t_f, schedule, h, jm, alpha):
    def f(mm, tt):
        a, b = float(schedule.a_of(tt / t_f)), float(schedule.b_of(tt / t_f))
        return _rhs(mm, _field_batch(mm, h, jm, a, b, alpha), 0.0, None)

    k1 = f(m, t)
    k2 = f(m + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(m + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(m + dt * k3, t + dt)
    return m + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def run_sd_open_ensemble(
    instance,
    schedule: AnnealSchedule,
    alpha: float,
    t_f: float | None = None,
    params: LangevinParams | None = None,
    n_runs: int = 1,
    initial: SpinConfiguration | None = None,
) -> np.ndarray:
    """Final moments (n_runs, N, 3) of independent spin-Langevin runs.

    ``instance`` may be a single instance or one noisy realization per run.
    Stochastic Heun with the same noise draw in predictor and corrector;
    per-component noise std sqrt(2 kT zeta / dt) (divided by sqrt(3) in
    isotropic mode).
    """
    params = params if params is not None else LangevinParams()
    t_f = t_f if t_f is not None else schedule.t_f
    if isinstance(instance, ProblemInstance):
        instances = [instance]
    else:
        instances = list(instance)
    n = instances[0].n_spins
    h = np.stack([i.fields for i in instances])
    jm = np.stack([i.coupling_matrix() for i in instances])
    if len(instances) == 1:
        h = np.broadcast_to(h, (n_runs, n))
        jm = np.broadcast_to(jm, (n_runs, n, n))
    elif len(instances) != n_runs:
        raise ValueError("provide one instance or one per run")

    dt = params.dt
    n_steps = int(np.ceil(t_f / dt))
    var_scale = 1.0 / 3.0 if params.noise_mode == "isotropic" else 1.0
    sigma = np.sqrt(2.0 * params.kT * params.zeta * var_scale / dt)

    m0 = initial if initial is not None else SpinConfiguration.along_x(n)
    m = np.broadcast_to(m0.moments, (n_runs, n, 3)).copy()
    streams = [np.random.default_rng(sq) for sq in np.random.SeedSequence(params.seed).spawn(n_runs)]

    zeta = params.zeta
    for start in range(0, n_steps, _CHUNK_STEPS):
        stop = min(start + _CHUNK_STEPS, n_steps)
        noise = np.empty((n_runs, stop - start, n, 3))
        for r, g in enumerate(streams):
            noise[r] = g.standard_normal((stop - start, n, 3))
        for k in range(start, stop):
            t = k * dt
            step = min(dt, t_f - t)
            xi = sigma * noise[:, k - start]
            s0, s1 = t / t_f, (t + step) / t_f
            a0, b0 = float(schedule.a_of(s0)), float(schedule.b_of(s0))
            a1, b1 = float(schedule.a_of(s1)), float(schedule.b_of(s1))
            f0 = _rhs(m, _field_batch(m, h, jm, a0, b0, alpha), zeta, xi)
            m_pred = m + step * f0
            f1 = _rhs(m_pred, _field_batch(m_pred, h, jm, a1, b1, alpha), zeta, xi)
            m = m + 0.5 * step * (f0 + f1)
            m /= np.linalg.norm(m, axis=-1, keepdims=True)
    return m


def run_sd_open(
    instance: ProblemInstance,
    schedule: AnnealSchedule,
    alpha: float,
    t_f: float | None = None,
    params: LangevinParams | None = None,
) -> SpinConfiguration:
    """Single spin-Langevin run; equals run 0 of the corresponding ensemble."""
    final = run_sd_open_ensemble(instance, schedule, alpha, t_f, params, n_runs=1)
    return SpinConfiguration(final[0])


def sd_estimators(runs) -> tuple[float, float]:
    """(P_I, P_C) from final configurations via per-spin |0> probabilities.

    cos^2(theta_j/2) = (1 + M_j^z)/2 is the |0> probability of spin j; the
    cluster estimator multiplies it over the core spins (divided by the
    cluster degeneracy), the isolated estimator multiplies the |1>
    probability over every spin.
    """
    if isinstance(runs, SpinConfiguration):
        mz = runs.moments[None, :, 2]
    else:
        arr = np.asarray(runs if not isinstance(runs, list) else np.stack(
            [r.moments if isinstance(r, SpinConfiguration) else r for r in runs]
        ))
        if arr.ndim == 2:
            arr = arr[None]
        mz = arr[..., 2]
    if mz.shape[0] < 1:
        raise ValueError("need at least one run")
    n = mz.shape[1]
    n_half = n // 2
    p0 = (1.0 + mz) / 2.0
    p1 = (1.0 - mz) / 2.0
    p_cluster = float(p0[:, n_half:].prod(axis=1).mean() / 2**n_half)
    p_isolated = float(p1.prod(axis=1).mean())
    return p_isolated, p_cluster
