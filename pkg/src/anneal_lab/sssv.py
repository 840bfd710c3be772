"""O(2)-rotor Metropolis annealer and its decohered/forced variants.

Each qubit is a planar rotor M_i = (sin theta_i, 0, cos theta_i) with
theta_i in [0, pi].  The rotor energy is the spin-coherent projection of the
annealing Hamiltonian,

    E(theta) = -A(t) dx sum_i sin theta_i
               + alpha B(t) ( -sum_i h_i dz cos theta_i
                              -sum_(ij) J_ij dz^2 cos theta_i cos theta_j ),

with damping factors dx, dz = 1 for the plain model.  Note the coupling
term carries the same sign convention as the Ising Hamiltonian, so that at
theta in {0, pi} the energy reduces to alpha B(t) times the classical Ising
energy of the sign configuration.

Variants ("decohering" the rotors toward Ising spins over a timescale
tau_alpha):

* ``strong_decohere``  -- dx = exp(-t/tau), dz = 1 (equivalently A(t) ->
  A(t) exp(-t/tau)).
* ``weak_decohere``    -- while A(t) >= alpha B(t): dx = 1, dz = exp(-t/tau);
  afterwards dx = exp(-(t-t_c)/tau) and dz frozen at exp(-t_c/tau), where
  t_c solves A(t_c) = alpha B(t_c).
* ``forced``           -- plain energy, but proposals are drawn from the
  shrinking range [0, (pi/2) e^(-t/tau)] U [pi - (pi/2) e^(-t/tau), pi].

Runs are vectorized: a batch evolves in lockstep, with every run owning an
RNG stream spawned from the master seed (SeedSequence.spawn), so results
are reproducible run-by-run and independent of internal chunking.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi

import numpy as np

from .instance import ProblemInstance
from .schedule import SSSV_KT, AnnealSchedule

VARIANTS = ("plain", "strong_decohere", "weak_decohere", "forced")

_GUARD_TOL = 1e-8
_CHUNK_SWEEPS = 512


@dataclass(frozen=True)
class RotorState:
    """Rotor angles theta_i in [0, pi]."""

    angles: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float)
        if np.any(a < 0) or np.any(a > pi):
            raise ValueError("angles must lie in [0, pi]")
        object.__setattr__(self, "angles", a)


@dataclass(frozen=True)
class SssvConfig:
    kT: float = SSSV_KT  # 10.56 mK
    sweeps: int = 100_000
    variant: str = "plain"
    g2eta: float = 1e-6
    seed: int = 0
    site_order: str = "fixed"  # or "random" (shared per-sweep permutation)
    beta_device: float = 1.0 / 2.226  # inverse operating temperature, for tau_alpha
    guard_every: int = 1000  # full-energy bookkeeping check interval

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.kT <= 0:
            raise ValueError("kT must be positive")
        if self.site_order not in ("fixed", "random"):
            raise ValueError("site_order must be 'fixed' or 'random'")


def tau_alpha(alpha: float, beta: float, g2eta: float) -> float:
    """Decoherence timescale tau = alpha * beta / (4 pi g^2 eta), in ns."""
    if alpha <= 0 or beta <= 0 or g2eta <= 0:
        raise ValueError("tau_alpha requires positive alpha, beta, g2eta")
    return alpha * beta / (4.0 * pi * g2eta)


def crossing_time(schedule: AnnealSchedule, alpha: float) -> float:
    """First time t_c with A(t_c) = alpha B(t_c) (t_f if never crossed)."""
    grid = np.linspace(0.0, 1.0, 2001)
    f = schedule.a_of(grid) - alpha * schedule.b_of(grid)
    if f[0] < 0:
        return 0.0
    below = np.flatnonzero(f <= 0)
    if below.size == 0:
        return schedule.t_f
    j = below[0]
    s0, s1 = grid[j - 1], grid[j]
    f0, f1 = f[j - 1], f[j]
    s_c = s0 if f0 == f1 else s0 + (s1 - s0) * f0 / (f0 - f1)
    return float(s_c * schedule.t_f)


def variant_factors(
    variant: str,
    t: float,
    tau: float,
    t_c: float,
) -> tuple[float, float]:
    """Damping factors (dx, dz) at time t for the given variant."""
    if variant == "strong_decohere":
        return float(np.exp(-t / tau)), 1.0
    if variant == "weak_decohere":
        if t < t_c:
            return 1.0, float(np.exp(-t / tau))
        return float(np.exp(-(t - t_c) / tau)), float(np.exp(-t_c / tau))
    return 1.0, 1.0  # plain and forced


def sssv_energy(
    instance: ProblemInstance,
    schedule: AnnealSchedule,
    alpha: float,
    s: float,
    state,
    dx: float = 1.0,
    dz: float = 1.0,
) -> float:
    """Rotor energy at schedule point s (1/ns), with optional damping factors."""
    theta = state.angles if isinstance(state, RotorState) else np.asarray(state, dtype=float)
    a, b = float(schedule.a_of(s)), float(schedule.b_of(s))
    cz = dz * np.cos(theta)
    e = -a * dx * float(np.sin(theta).sum())
    e -= alpha * b * float(instance.fields @ cz)
    for (i, j), jij in instance.couplings.items():
        e -= alpha * b * jij * cz[i] * cz[j]
    return e


def _batch_params(instances, n_runs: int):
    """Stack per-run (h, J) arrays; accepts one instance or a list of n_runs."""
    if isinstance(instances, ProblemInstance):
        instances = [instances]
    n = instances[0].n_spins
    if len(instances) not in (1, n_runs):
        raise ValueError("provide one instance or one per run")
    h = np.stack([inst.fields for inst in instances])
    jm = np.stack([inst.coupling_matrix() for inst in instances])
    if len(instances) == 1:
        h = np.broadcast_to(h, (n_runs, n))
        jm = np.broadcast_to(jm, (n_runs, n, n))
    return n, h, jm


@dataclass
class SssvResult:
    bits: np.ndarray  # (n_runs, N) uint8, 0 <-> |0> (theta <= pi/2)
    angles: np.ndarray  # (n_runs, N) final rotor angles
    config: SssvConfig

    def distribution(self):
        from .observables import StateDistribution

        return StateDistribution.from_bitstrings(self.bits)


def sssv_sweep(
    state,
    instance: ProblemInstance,
    schedule: AnnealSchedule,
    alpha: float,
    s: float,
    kT: float,
    rng: np.random.Generator,
) -> RotorState:
    """One Metropolis sweep (N site-ordered proposals) of a single run."""
    theta = np.array(state.angles if isinstance(state, RotorState) else state, dtype=float)
    n, h, jm = _batch_params(instance, 1)
    theta_b = theta[None, :]
    u = rng.random((1, 1, n, 2))
    _sweep_batch(theta_b, h, jm, float(schedule.a_of(s)), float(schedule.b_of(s)), alpha,
                 1.0, 1.0, kT, u[:, 0], np.arange(n), proposal_width=None)
    return RotorState(theta_b[0])


def _sweep_batch(theta, h, jm, a, b, alpha, dx, dz, kT, u, order, proposal_width):
    """In-place Metropolis sweep on a (R, N) angle batch.

    ``u`` has shape (R, N, 2): proposal and acceptance uniforms per site.
    ``proposal_width`` restricts proposals to the forced-variant range when
    not None.  Returns the accumulated accepted energy change.
    """
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)
    ab = alpha * b
    de_total = 0.0
    for pos, i in enumerate(order):
        uu = u[:, pos, 0]
        if proposal_width is None:
            prop = pi * uu
        else:
            lower = uu < 0.5
            prop = np.where(lower, 2.0 * uu * proposal_width, pi - (2.0 * uu - 1.0) * proposal_width)
        cos_p = np.cos(prop)
        sin_p = np.sin(prop)
        local = np.einsum("rj,rj->r", jm[:, i, :], cos_t)  # sum_j J_ij cos theta_j
        dcos = cos_p - cos_t[:, i]
        de = -a * dx * (sin_p - sin_t[:, i]) - ab * dz * dcos * (h[:, i] + dz * local)
        accept = u[:, pos, 1] < np.exp(-np.maximum(de, 0.0) / kT)
        theta[accept, i] = prop[accept]
        cos_t[accept, i] = cos_p[accept]
        sin_t[accept, i] = sin_p[accept]
        de_total += float(de[accept].sum())
    return de_total


def run_sssv(
    instance,
    schedule: AnnealSchedule,
    alpha: float,
    t_f: float | None = None,
    config: SssvConfig | None = None,
    n_runs: int = 1,
) -> SssvResult:
    """Anneal ``n_runs`` independent SSSV trajectories and read them out.

    ``instance`` may be a single ProblemInstance or a list with one noisy
    realization per run.  Sweep k of S runs at s_k = k/S (t = s_k t_f).
    Final angles are rounded to bits with theta <= pi/2 -> |0>.
    """
    config = config if config is not None else SssvConfig()
    t_f = t_f if t_f is not None else schedule.t_f
    n, h, jm = _batch_params(instance, n_runs)
    ref_instance = instance if isinstance(instance, ProblemInstance) else instance[0]

    tau = tau_alpha(alpha, config.beta_device, config.g2eta)
    t_c = crossing_time(schedule.with_t_f(t_f), alpha)
    sweeps = config.sweeps
    s_grid = np.arange(1, sweeps + 1) / sweeps
    a_grid = schedule.a_of(s_grid)
    b_grid = schedule.b_of(s_grid)

    streams = [np.random.default_rng(seq) for seq in np.random.SeedSequence(config.seed).spawn(n_runs)]
    order_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x5157)))

    theta = np.full((n_runs, n), pi / 2.0)
    guard_failures = []
    for start in range(0, sweeps, _CHUNK_SWEEPS):
        stop = min(start + _CHUNK_SWEEPS, sweeps)
        u = np.empty((n_runs, stop - start, n, 2))
        for r, g in enumerate(streams):
            u[r] = g.random((stop - start, n, 2))
        for k in range(start, stop):
            t = s_grid[k] * t_f
            dx, dz = variant_factors(config.variant, t, tau, t_c)
            width = (pi / 2.0) * np.exp(-t / tau) if config.variant == "forced" else None
            order = order_rng.permutation(n) if config.site_order == "random" else np.arange(n)
            guard = config.guard_every and (k + 1) % config.guard_every == 0
            if guard:
                e_before = _batch_energy(theta, h, jm, a_grid[k], b_grid[k], alpha, dx, dz)
            de = _sweep_batch(theta, h, jm, a_grid[k], b_grid[k], alpha, dx, dz,
                              config.kT, u[:, k - start], order, width)
            if guard:
                e_after = _batch_energy(theta, h, jm, a_grid[k], b_grid[k], alpha, dx, dz)
                drift = abs((e_after - e_before) - de)
                if drift > _GUARD_TOL * max(1.0, abs(e_before)):
                    guard_failures.append((k + 1, drift))
    if guard_failures:
        raise RuntimeError(f"local-energy bookkeeping drift detected: {guard_failures[:3]}")
    bits = (theta > pi / 2.0).astype(np.uint8)
    return SssvResult(bits=bits, angles=theta, config=config)


def _batch_energy(theta, h, jm, a, b, alpha, dx, dz):
    cz = dz * np.cos(theta)
    e = -a * dx * np.sin(theta).sum()
    e -= alpha * b * np.einsum("rn,rn->", h, cz)
    e -= alpha * b * 0.5 * np.einsum("rij,ri,rj->", jm, cz, cz)
    return float(e)


def write_readout(path, result: SssvResult, include_angles: bool = False) -> None:
    """One line per run: bitstring (qubit 0 leftmost), optionally the angles."""
    with open(path, "w") as fh:
        for r in range(result.bits.shape[0]):
            line = "".join(str(int(b)) for b in result.bits[r])
            if include_angles:
                line += " " + " ".join(f"{a:.9f}" for a in result.angles[r])
            fh.write(line + "\n")
