"""Adiabatic open-system master equation with Ohmic dephasing baths.

The equation of motion (double-sided, no rotating-wave approximation) is

    drho/dt = -i [H_S(t), rho]
              + sum_alpha sum_ab Gamma(w_ba) [L_ab,alpha rho, A_alpha] + h.c.

with A_alpha = sigma_alpha^z, L_ab,alpha = <a|A_alpha|b> |a><b| built from
the instantaneous eigenbasis, Gamma(w) = gamma(w)/2 + i S(w), and the Ohmic
bath rate

    gamma(w) = 2 pi kappa w exp(-|w|/w_c) / (1 - exp(-beta w)),

where kappa is the dimensionless system-bath coupling.  S(w) is the Cauchy
principal value (Lamb-shift) integral of gamma.

Two work representations are provided:

* ``me_rhs`` / ``representation="fixed"`` -- rho kept in the computational
  basis, the right-hand side assembled verbatim and integrated with an
  embedded 4/5 explicit pair.  Exact but stiff: the unitary phases limit
  the step to a fraction of 1/||H||, so this path is intended for small N
  and for validating the fast path.
* ``representation="eigen"`` (default) -- rho carried in the instantaneous
  eigenbasis truncated to the lowest K levels.  The anneal is split into
  cells with a frozen basis per cell; within a cell the diagonal phases are
  absorbed exactly (so the embedded 4/5 pair only resolves the slow frame
  drift and the dissipator) and at cell boundaries the state is rotated by
  the unitary polar factor of the basis-overlap matrix, which preserves the
  trace exactly while following the eigenbasis.

Both representations agree on small systems to integrator tolerance; the
eigen path is what makes device-scale anneal times tractable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import pi

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline

from .instance import ProblemInstance, all_energies
from .schedule import AnnealSchedule
from .spectrum import DENSE_CAP, transverse_field_matrix

DEFAULT_KAPPA = 1.27e-4


@dataclass(frozen=True)
class BathSpec:
    """Ohmic-bath and truncation parameters."""

    kappa: float = DEFAULT_KAPPA  # g^2 eta / hbar^2, dimensionless
    beta: float = 1.0 / 2.226  # inverse temperature, ns
    omega_c: float = 8.0 * pi  # UV cutoff, 1/ns
    lamb_shift: bool = True
    truncation: int = 56  # retained instantaneous eigenstates

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.omega_c <= 0 or self.beta <= 0:
            raise ValueError("omega_c and beta must be positive")
        if self.truncation < 1:
            raise ValueError("truncation must be >= 1")


class MEPositivityError(RuntimeError):
    pass


def bath_gamma(omega, spec: BathSpec):
    """Ohmic rate gamma(w); the w = 0 singularity is removable (2 pi kappa / beta)."""
    w = np.asarray(omega, dtype=float)
    x = spec.beta * w
    small = np.abs(x) < 1e-10
    denom = np.where(small, 1.0, -np.expm1(-np.where(np.abs(x) > 700, np.sign(x) * 700, x)))
    cut = np.exp(-np.abs(w) / spec.omega_c)
    out = np.where(
        small,
        2.0 * pi * spec.kappa / spec.beta * cut * (1.0 + x / 2.0),
        2.0 * pi * spec.kappa * w * cut / denom,
    )
    return out if out.ndim else float(out)


def principal_value_integral(f, x0: float, lo: float, hi: float, rel_tol: float = 1e-9) -> float:
    """Cauchy principal value of integral f(w)/(w - x0) dw over [lo, hi]."""
    if not (lo < x0 < hi):
        # no singularity inside: ordinary adaptive quadrature
        val, _ = quad(lambda w: f(w) / (w - x0), lo, hi, epsrel=rel_tol, limit=200)
        return val
    val, err = quad(f, lo, hi, weight="cauchy", wvar=x0, epsrel=rel_tol, limit=200)
    if not np.isfinite(val):
        raise RuntimeError(f"principal-value quadrature failed at x0={x0}")
    return val


def lamb_shift(omega: float, spec: BathSpec) -> float:
    """Lamb-shift S(w) = (1/2pi) PV integral gamma(w') / (w - w') dw'."""
    if spec.kappa == 0 or not spec.lamb_shift:
        return 0.0
    span = 60.0 * spec.omega_c + abs(omega)
    # PV int gamma/(w - w') dw' = -PV int gamma/(w' - w) dw'
    return -principal_value_integral(lambda w: bath_gamma(w, spec), omega, -span, span) / (2.0 * pi)


class _LambTable:
    """Cubic-spline table of S(w) over a symmetric range (built once, reused)."""

    _cache: dict = {}

    def __new__(cls, spec: BathSpec, omega_max: float, n_points: int = 1601):
        bucket = float(np.ceil(omega_max / 25.0) * 25.0)
        key = (spec.kappa, spec.beta, spec.omega_c, spec.lamb_shift, bucket, n_points)
        if key in cls._cache:
            return cls._cache[key]
        obj = super().__new__(cls)
        if spec.lamb_shift and spec.kappa > 0:
            grid = np.linspace(-bucket, bucket, n_points)
            vals = np.array([lamb_shift(w, spec) for w in grid])
            obj._spline = CubicSpline(grid, vals)
        else:
            obj._spline = None
        cls._cache[key] = obj
        return obj

    def __call__(self, omega):
        if self._spline is None:
            return np.zeros_like(np.asarray(omega, dtype=float))
        lo, hi = self._spline.x[0], self._spline.x[-1]
        return self._spline(np.clip(omega, lo, hi))


def _sigma_z_diagonals(n_spins: int) -> np.ndarray:
    """(N, 2^N) array of sigma_z eigenvalues per qubit over the basis."""
    idx = np.arange(2**n_spins, dtype=np.int64)
    bits = (idx[None, :] >> (n_spins - 1 - np.arange(n_spins))[:, None]) & 1
    return (1 - 2 * bits).astype(np.float64)


def _gamma_matrix(eps: np.ndarray, spec: BathSpec, lamb: "_LambTable") -> np.ndarray:
    """Gamma(w_ba) on the retained levels: entry (a, b) = gamma(eps_b - eps_a)/2 + i S."""
    omega = eps[None, :] - eps[:, None]
    g = 0.5 * bath_gamma(omega, spec)
    if spec.lamb_shift and spec.kappa > 0:
        return g + 1j * lamb(omega)
    return g.astype(complex)


def me_rhs(
    rho: np.ndarray,
    s: float,
    instance: ProblemInstance,
    schedule: AnnealSchedule,
    alpha: float,
    spec: BathSpec,
) -> np.ndarray:
    """Fixed-basis right-hand side of the master equation at schedule point s.

    Builds the instantaneous eigenbasis, truncates the L operators to the
    lowest ``spec.truncation`` levels, and assembles the double-sided sum.
    The bracket-plus-h.c. structure makes the result traceless identically.
    """
    n = instance.n_spins
    if n > DENSE_CAP:
        raise ValueError(f"N={n} exceeds dense cap {DENSE_CAP}")
    dim = 2**n
    a_s, b_s = float(schedule.a_of(s)), float(schedule.b_of(s))
    h = a_s * transverse_field_matrix(n)
    h[np.diag_indices_from(h)] += alpha * b_s * all_energies(instance)
    out = -1j * (h @ rho - rho @ h)
    if spec.kappa == 0:
        return out
    k = min(spec.truncation, dim)
    evals, evecs = np.linalg.eigh(h)
    eps, v = evals[:k], evecs[:, :k]
    lamb = _LambTable(spec, float(eps[-1] - eps[0]) + 1.0)
    gam = _gamma_matrix(eps, spec, lamb)
    z = _sigma_z_diagonals(n)
    for q in range(n):
        a_tilde = v.T @ (z[q][:, None] * v)
        g_full = v @ (gam * a_tilde) @ v.T  # sum_ab Gamma(w_ba) L_ab in the fixed basis
        gr = g_full @ rho
        m = gr * z[q][None, :] - z[q][:, None] * gr  # [G rho, A_q], A_q diagonal
        out += m + m.conj().T
    return out


@dataclass
class MEResult:
    """Trajectory record and final state of one master-equation run."""

    times: np.ndarray
    s_values: np.ndarray
    branch_populations: np.ndarray  # (T, K) instantaneous-eigenstate populations
    p_ground_manifold: np.ndarray  # total population of the lowest 2^(N/2)+1 branches
    p_isolated: np.ndarray  # computational-basis isolated-state population
    p_cluster: np.ndarray  # mean computational-basis cluster population
    isolated_branch: int  # branch index that ends as the isolated state
    rho_final: np.ndarray  # (2^N, 2^N) computational basis
    trace_drift: float
    min_eigenvalue: float
    leakage_estimate: float
    truncation: int
    n_ground: int = 17
    states: list = field(default_factory=list)  # optional (rho_eigen, V) per record

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.p_cluster > 0, self.p_isolated / self.p_cluster, np.inf)

    def rho_at(self, record_index: int) -> np.ndarray:
        if not self.states:
            raise ValueError("run_me(..., store_states=True) required for rho_at")
        rho_eig, v = self.states[record_index]
        return v @ rho_eig @ v.conj().T


# Dormand-Prince embedded 4(5) coefficients.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def _dopri_step(f, t, y, h, rtol, atol):
    """One embedded Dormand-Prince 4/5 trial step; returns (y5, error_ratio)."""
    k = [f(t, y)]
    for i in range(1, 7):
        yi = y + h * sum(a * kk for a, kk in zip(_DP_A[i], k))
        k.append(f(t + _DP_C[i] * h, yi))
    y5 = y + h * sum(b * kk for b, kk in zip(_DP_B5, k) if b != 0.0)
    y4 = y + h * sum(b * kk for b, kk in zip(_DP_B4, k) if b != 0.0)
    scale = atol + rtol * np.maximum(np.abs(y5), np.abs(y))
    err = np.sqrt(np.mean(np.abs((y5 - y4) / scale) ** 2))
    return y5, err


def _integrate_adaptive(f, t0, t1, y0, rtol, atol, h0=None):
    """Adaptive embedded 4/5 integration of dy/dt = f(t, y) over [t0, t1]."""
    t, y = t0, y0
    h = h0 if h0 is not None else (t1 - t0) / 8.0
    while t < t1 - 1e-12 * max(1.0, t1):
        h = min(h, t1 - t)
        if h < 1e-12:
            raise RuntimeError(f"step-size underflow at t={t}")
        y_new, err = _dopri_step(f, t, y, h, rtol, atol)
        if err <= 1.0:
            t += h
            y = y_new
            h *= min(5.0, max(0.2, 0.9 * (1.0 / max(err, 1e-10)) ** 0.2))
        else:
            h *= max(0.2, 0.9 * (1.0 / err) ** 0.2)
    return y, h


def _polar_unitary(o: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(o)
    return u @ vt


class _CellData:
    __slots__ = ("eps", "v", "hx_v", "hi_v", "g_ops", "a_ops", "evals_full", "evecs_full")


def _prepare_cell(instance, schedule, alpha, t_f, spec, z_diag, hx, e_ising, s_mid, lamb, kappa_on):
    """Frozen-basis data at a cell midpoint."""
    dim = hx.shape[0]
    k = min(spec.truncation, dim)
    a_s, b_s = float(schedule.a_of(s_mid)), float(schedule.b_of(s_mid))
    h = a_s * hx
    h[np.diag_indices_from(h)] += alpha * b_s * e_ising
    evals, evecs = np.linalg.eigh(h)
    cell = _CellData()
    cell.evals_full, cell.evecs_full = evals, evecs
    cell.eps, cell.v = evals[:k].copy(), evecs[:, :k].copy()
    # Projections of the two Hamiltonian parts: the in-cell Hamiltonian is
    # reconstructed exactly as A(t) hx_v + alpha B(t) hi_v at stage times.
    cell.hx_v = cell.v.T @ (hx @ cell.v)
    cell.hi_v = alpha * (cell.v.T @ (e_ising[:, None] * cell.v))
    cell.a_ops = np.einsum("nd,dk,dj->nkj", z_diag, cell.v, cell.v, optimize=True)
    if kappa_on:
        gam = _gamma_matrix(cell.eps, spec, lamb)
        cell.g_ops = gam[None, :, :] * cell.a_ops
    else:
        cell.g_ops = None
    return cell


def _cell_rhs_factory(cell, schedule, t_f, kappa_on):
    eps = cell.eps
    hx_v, hi_v = cell.hx_v, cell.hi_v
    a_ops = cell.a_ops
    g_ops = cell.g_ops

    def rhs(t_abs, sigma, phase_ref):
        # sigma is the phase-stripped state: rho_tilde = phases * sigma
        ph = np.exp(-1j * eps * (t_abs - phase_ref))
        phases = ph[:, None] * ph.conj()[None, :]
        rho = phases * sigma
        s = min(t_abs / t_f, 1.0)
        h_rem = float(schedule.a_of(s)) * hx_v + float(schedule.b_of(s)) * hi_v
        h_rem = h_rem - np.diag(eps)
        out = -1j * (h_rem @ rho - rho @ h_rem)
        if kappa_on:
            gr = g_ops @ rho
            m = (gr @ a_ops - a_ops @ gr).sum(axis=0)
            out += m + m.conj().T
        return phases.conj() * out

    return rhs


def run_me(
    instance: ProblemInstance,
    schedule: AnnealSchedule,
    alpha: float,
    t_f: float | None = None,
    spec: BathSpec | None = None,
    representation: str = "eigen",
    rtol: float = 1e-7,
    atol: float = 1e-10,
    n_cells: int = 1200,
    n_record: int = 101,
    store_states: bool = False,
    positivity_tol: float = 1e-7,
) -> MEResult:
    """Integrate the master equation from the ground state of H(0) to t_f.

    The default eigen representation truncates to ``spec.truncation``
    instantaneous levels; ``representation="fixed"`` integrates ``me_rhs``
    directly in the computational basis (small N only).  Aborts when the
    recorded state leaves positivity by more than ``positivity_tol``.
    """
    spec = spec if spec is not None else BathSpec()
    t_f = t_f if t_f is not None else schedule.t_f
    if representation == "fixed":
        return _run_me_fixed(instance, schedule, alpha, t_f, spec, rtol, atol, n_record,
                             store_states, positivity_tol)
    if representation != "eigen":
        raise ValueError("representation must be 'eigen' or 'fixed'")

    n = instance.n_spins
    dim = 2**n
    k = min(spec.truncation, dim)
    kappa_on = spec.kappa > 0
    hx = transverse_field_matrix(n)
    e_ising = all_energies(instance)
    z_diag = _sigma_z_diagonals(n)

    # Lamb-shift lookup table over the spectral range seen during the anneal.
    omega_max = 0.0
    for s_probe in np.linspace(0.0, 1.0, 9):
        h = float(schedule.a_of(s_probe)) * hx
        h[np.diag_indices_from(h)] += alpha * float(schedule.b_of(s_probe)) * e_ising
        ev = np.linalg.eigvalsh(h)
        omega_max = max(omega_max, float(ev[min(k, dim) - 1] - ev[0]))
    lamb = _LambTable(spec, 1.1 * omega_max + 1.0) if (kappa_on and spec.lamb_shift) else None

    edges = np.linspace(0.0, 1.0, n_cells + 1)
    record_stride = max(1, n_cells // max(1, n_record - 1))

    # initial state: ground-state projector of H(0)
    h0 = float(schedule.a_of(0.0)) * hx
    h0[np.diag_indices_from(h0)] += alpha * float(schedule.b_of(0.0)) * e_ising
    _, vec0 = np.linalg.eigh(h0)
    psi0 = vec0[:, 0]

    from .spectrum import signature_ground_set

    iso_idx, cluster_idx = signature_ground_set(instance)
    n_ground = 1 + len(cluster_idx)

    records = {"t": [], "s": [], "branch": [], "pgm": [], "piso": [], "pclu": []}
    states = []
    trace_drift = 0.0
    min_eig = 1.0
    leak_acc = 0.0
    last_leak_t = 0.0

    sigma = None
    v_prev = None
    h_guess = None
    for m in range(n_cells):
        s_lo, s_hi = edges[m], edges[m + 1]
        t_lo, t_hi = s_lo * t_f, s_hi * t_f
        s_mid = 0.5 * (s_lo + s_hi)
        cell = _prepare_cell(instance, schedule, alpha, t_f, spec, z_diag, hx, e_ising,
                             s_mid, lamb, kappa_on)
        if m == 0:
            amp = cell.v.T @ psi0
            sigma = np.outer(amp, amp.conj()).astype(complex)
        else:
            o = _polar_unitary(v_prev.T @ cell.v)
            sigma = o.conj().T @ sigma @ o
        sigma = 0.5 * (sigma + sigma.conj().T)
        v_prev = cell.v

        if m % record_stride == 0:
            _record(records, states, store_states, t_lo, s_lo, sigma, cell.v,
                    iso_idx, cluster_idx, n_ground)
            tr = float(np.real(np.trace(sigma)))
            trace_drift = max(trace_drift, abs(tr - 1.0))
            lam_min = float(np.linalg.eigvalsh(sigma)[0])
            min_eig = min(min_eig, lam_min)
            if lam_min < -positivity_tol:
                raise MEPositivityError(
                    f"positivity violation {lam_min:.3e} at s={s_lo:.4f} "
                    f"(alpha={alpha}, kappa={spec.kappa}, K={k})"
                )
            if kappa_on and k < dim:
                leak_acc += _leakage_rate(cell, sigma, spec, k) * (t_lo - last_leak_t)
                last_leak_t = t_lo

        rhs = _cell_rhs_factory(cell, schedule, t_f, kappa_on)
        f = lambda t, y: rhs(t, y, t_lo)
        sigma, h_guess = _integrate_adaptive(f, t_lo, t_hi, sigma, rtol, atol, h_guess)
        ph = np.exp(-1j * cell.eps * (t_hi - t_lo))
        sigma = (ph[:, None] * ph.conj()[None, :]) * sigma

    sigma = 0.5 * (sigma + sigma.conj().T)
    _record(records, states, store_states, t_f, 1.0, sigma, v_prev, iso_idx, cluster_idx, n_ground)
    tr = float(np.real(np.trace(sigma)))
    trace_drift = max(trace_drift, abs(tr - 1.0))
    min_eig = min(min_eig, float(np.linalg.eigvalsh(sigma)[0]))

    final_vecs = v_prev
    overlap_iso = np.abs(final_vecs[iso_idx, :]) ** 2
    isolated_branch = int(np.argmax(overlap_iso))
    rho_final = final_vecs @ sigma @ final_vecs.conj().T

    if leak_acc > 0.05:
        import warnings

        warnings.warn(
            f"truncation K={k} may be too small: integrated leakage estimate "
            f"{leak_acc:.3f} exceeds 0.05",
            stacklevel=2,
        )
    return MEResult(
        times=np.array(records["t"]),
        s_values=np.array(records["s"]),
        branch_populations=np.array(records["branch"]),
        p_ground_manifold=np.array(records["pgm"]),
        p_isolated=np.array(records["piso"]),
        p_cluster=np.array(records["pclu"]),
        isolated_branch=isolated_branch,
        rho_final=rho_final,
        trace_drift=trace_drift,
        min_eigenvalue=min_eig,
        leakage_estimate=leak_acc,
        truncation=k,
        n_ground=n_ground,
        states=states,
    )


def _record(records, states, store_states, t, s, sigma, v, iso_idx, cluster_idx, n_ground):
    diag = np.real(np.diag(sigma))
    records["t"].append(t)
    records["s"].append(s)
    records["branch"].append(diag.copy())
    records["pgm"].append(float(diag[:n_ground].sum()))
    v_iso = v[iso_idx, :]
    v_clu = v[cluster_idx, :]
    records["piso"].append(float(np.real(v_iso @ sigma @ v_iso.conj())))
    records["pclu"].append(float(np.mean(np.real(np.einsum("gk,kj,gj->g", v_clu, sigma, v_clu.conj(), optimize=True)))))
    if store_states:
        states.append((sigma.copy(), v.copy()))


def _leakage_rate(cell, sigma, spec, k):
    """Occupancy-weighted excitation rate out of the retained subspace."""
    eps_drop = cell.evals_full[k:]
    v_drop = cell.evecs_full[:, k:]
    pops = np.clip(np.real(np.diag(sigma)), 0.0, None)
    rate = 0.0
    # coupling |<b_drop| sigma_z_q |a_kept>|^2 summed over qubits
    n = int(np.log2(cell.evecs_full.shape[0]))
    z = _sigma_z_diagonals(n)
    for q in range(n):
        cross = v_drop.T @ (z[q][:, None] * cell.v)  # (D-K, K)
        g = bath_gamma(eps_drop[:, None] - cell.eps[None, :], spec)
        rate += float(np.einsum("ba,ba,a->", g, cross**2, pops))
    return rate


def _run_me_fixed(instance, schedule, alpha, t_f, spec, rtol, atol, n_record,
                  store_states, positivity_tol):
    n = instance.n_spins
    dim = 2**n
    hx = transverse_field_matrix(n)
    e_ising = all_energies(instance)
    h0 = float(schedule.a_of(0.0)) * hx
    h0[np.diag_indices_from(h0)] += alpha * float(schedule.b_of(0.0)) * e_ising
    _, vec0 = np.linalg.eigh(h0)
    rho0 = np.outer(vec0[:, 0], vec0[:, 0].conj()).astype(complex)

    def f(t, y):
        rho = y.reshape(dim, dim)
        return me_rhs(rho, t / t_f, instance, schedule, alpha, spec).ravel()

    t_eval = np.linspace(0.0, t_f, n_record)
    sol = solve_ivp(f, (0.0, t_f), rho0.ravel(), method="RK45", rtol=rtol, atol=atol,
                    t_eval=t_eval, dense_output=False)
    if not sol.success:
        raise RuntimeError(f"fixed-basis integration failed: {sol.message}")

    from .spectrum import signature_ground_set

    iso_idx, cluster_idx = signature_ground_set(instance)
    n_ground = 1 + len(cluster_idx)
    records = {"t": [], "s": [], "branch": [], "pgm": [], "piso": [], "pclu": []}
    states = []
    trace_drift, min_eig = 0.0, 1.0
    k = min(spec.truncation, dim)
    for i, t in enumerate(sol.t):
        rho = sol.y[:, i].reshape(dim, dim)
        s = t / t_f
        h = float(schedule.a_of(s)) * hx
        h[np.diag_indices_from(h)] += alpha * float(schedule.b_of(s)) * e_ising
        evals, evecs = np.linalg.eigh(h)
        v = evecs[:, :k]
        sigma = v.conj().T @ rho @ v
        _record(records, states, store_states, t, s, sigma, v, iso_idx, cluster_idx, n_ground)
        trace_drift = max(trace_drift, abs(float(np.real(np.trace(rho))) - 1.0))
        lam_min = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
        min_eig = min(min_eig, lam_min)
        if lam_min < -positivity_tol:
            raise MEPositivityError(f"positivity violation {lam_min:.3e} at t={t}")
    rho_final = sol.y[:, -1].reshape(dim, dim)
    h = float(schedule.a_of(1.0)) * hx
    h[np.diag_indices_from(h)] += alpha * float(schedule.b_of(1.0)) * e_ising
    _, evecs = np.linalg.eigh(h)
    overlap_iso = np.abs(evecs[iso_idx, :k]) ** 2
    return MEResult(
        times=np.array(records["t"]),
        s_values=np.array(records["s"]),
        branch_populations=np.array(records["branch"]),
        p_ground_manifold=np.array(records["pgm"]),
        p_isolated=np.array(records["piso"]),
        p_cluster=np.array(records["pclu"]),
        isolated_branch=int(np.argmax(overlap_iso)),
        rho_final=rho_final,
        trace_drift=trace_drift,
        min_eigenvalue=min_eig,
        leakage_estimate=0.0,
        truncation=k,
        n_ground=n_ground,
        states=states,
    )


@dataclass
class ClosedResult:
    times: np.ndarray
    psi_final: np.ndarray
    psi_records: np.ndarray  # (T, 2^N)
    norm_drift: float


def run_closed(
    instance: ProblemInstance,
    schedule: AnnealSchedule,
    alpha: float,
    t_f: float | None = None,
    n_slices: int = 4000,
    initial: np.ndarray | None = None,
    n_record: int = 101,
) -> ClosedResult:
    """Closed-system state-vector evolution (norm-preserving unitary stepping).

    Each slice applies a fourth-order commutator-free Magnus propagator
    (two exact exponentials built from the Gauss-node Hamiltonians), so the
    norm is conserved to roundoff by construction.  Serves as the kappa = 0
    oracle for the master equation.
    """
    t_f = t_f if t_f is not None else schedule.t_f
    n = instance.n_spins
    hx = transverse_field_matrix(n)
    e_ising = all_energies(instance)
    if initial is None:
        h0 = float(schedule.a_of(0.0)) * hx
        h0[np.diag_indices_from(h0)] += alpha * float(schedule.b_of(0.0)) * e_ising
        _, vec0 = np.linalg.eigh(h0)
        psi = vec0[:, 0].astype(complex)
    else:
        psi = np.asarray(initial, dtype=complex)
        if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
            raise ValueError("initial state must be normalized")
    dt = t_f / n_slices
    record_stride = max(1, n_slices // max(1, n_record - 1))
    times, recs = [0.0], [psi.copy()]
    norm_drift = 0.0
    gauss = np.sqrt(3.0) / 6.0
    c1, c2 = 0.25 + gauss, 0.25 - gauss

    def h_at(s):
        h = float(schedule.a_of(s)) * hx
        h[np.diag_indices_from(h)] += alpha * float(schedule.b_of(s)) * e_ising
        return h

    for m in range(n_slices):
        s1 = (m + 0.5 - gauss) / n_slices
        s2 = (m + 0.5 + gauss) / n_slices
        h1 = h_at(max(s1, 0.0))
        h2 = h_at(min(s2, 1.0))
        for hmix in (c1 * h1 + c2 * h2, c2 * h1 + c1 * h2):
            evals, evecs = np.linalg.eigh(hmix)
            psi = evecs @ (np.exp(-1j * evals * dt) * (evecs.T @ psi))
        norm_drift = max(norm_drift, abs(float(np.linalg.norm(psi)) - 1.0))
        if norm_drift > 1e-8:
            raise RuntimeError(f"norm drift {norm_drift:.2e} exceeded 1e-8")
        if (m + 1) % record_stride == 0 or m == n_slices - 1:
            times.append((m + 1) * dt)
            recs.append(psi.copy())
    return ClosedResult(np.array(times), psi, np.array(recs), norm_drift)


def write_trajectory_csv(path, result: MEResult) -> None:
    """Trajectory CSV: t, pop_ground_manifold, pop_isolated_branch, pop_cluster_mean, P_I, P_C."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "pop_ground_manifold", "pop_isolated_branch", "pop_cluster_mean",
                    "P_I", "P_C"])
        iso = result.isolated_branch
        n_ground = result.n_ground
        for i, t in enumerate(result.times):
            branch = result.branch_populations[i]
            others = [b for j, b in enumerate(branch[:n_ground]) if j != iso]
            w.writerow([
                repr(float(t)),
                repr(float(result.p_ground_manifold[i])),
                repr(float(branch[iso]) if iso < len(branch) else 0.0),
                repr(float(np.mean(others)) if others else 0.0),
                repr(float(result.p_isolated[i])),
                repr(float(result.p_cluster[i])),
            ])


def save_rho(path, rho: np.ndarray) -> None:
    """Dump a density matrix as little-endian complex128 (.npy layout)."""
    np.save(path, np.ascontiguousarray(rho, dtype="<c16"))
