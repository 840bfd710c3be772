"""Annealing schedules A(s), B(s) and SA temperature schedules.

Units: hbar = k_B = 1 throughout the package.  Schedule values are angular
frequencies in 1/ns (the conventional "GHz" axis), times are in ns, and all
inverse temperatures carry units of ns.  The 17 mK operating point
corresponds to k_B T / hbar = 2.226 1/ns.

The true device schedule is only published as a figure, so the package
ships documented synthetic defaults; everything downstream is parametrized
by the schedule, so a digitized schedule CSV drops in.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

OPERATING_KT = 2.226  # k_B T / hbar at 17 mK, in 1/ns
SSSV_KT = 1.382  # k_B T / hbar at 10.56 mK, in 1/ns


@dataclass(frozen=True)
class AnnealSchedule:
    """Piecewise-linear schedule knots (s, A, B) plus the total anneal time.

    Invariants: s strictly increasing from 0 to 1, A monotone nonincreasing
    with A(1) ~ 0, B monotone nondecreasing.  Monotonicity validation can be
    relaxed with ``strict=False`` for experimental schedules.
    """

    s: np.ndarray
    A: np.ndarray
    B: np.ndarray
    t_f: float = 20000.0  # ns
    strict: bool = True

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        a = np.asarray(self.A, dtype=float)
        b = np.asarray(self.B, dtype=float)
        if not (s.shape == a.shape and s.shape == b.shape and s.ndim == 1 and len(s) >= 2):
            raise ValueError("knots must be 1-d arrays of equal length >= 2")
        if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise ValueError("s must increase strictly from 0 to 1")
        if self.t_f <= 0:
            raise ValueError("t_f must be positive")
        if self.strict:
            if abs(a[-1]) > 1e-6 * max(abs(a[0]), 1e-300):
                raise ValueError("A(1) must vanish to within 1e-6 of A(0)")
            if np.any(np.diff(a) > 1e-12):
                raise ValueError("A must be monotone nonincreasing")
            if np.any(np.diff(b) < -1e-12):
                raise ValueError("B must be monotone nondecreasing")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)

    def a_of(self, s):
        return np.interp(self._check(s), self.s, self.A)

    def b_of(self, s):
        return np.interp(self._check(s), self.s, self.B)

    def slopes_at(self, s):
        """(dA/ds, dB/ds) of the active linear segment (right-continuous)."""
        sv = np.asarray(self._check(s), dtype=float)
        seg = np.clip(np.searchsorted(self.s, sv, side="right") - 1, 0, len(self.s) - 2)
        ds = np.diff(self.s)
        return np.diff(self.A)[seg] / ds[seg], np.diff(self.B)[seg] / ds[seg]

    def with_t_f(self, t_f: float) -> "AnnealSchedule":
        return AnnealSchedule(self.s, self.A, self.B, t_f=t_f, strict=self.strict)

    def _check(self, s):
        sv = np.asarray(s, dtype=float)
        if np.any(sv < 0) or np.any(sv > 1):
            raise ValueError("s must lie in [0, 1]")
        return s


def evaluate(schedule: AnnealSchedule, s: float) -> tuple[float, float]:
    """Linear interpolation of (A, B) between bracketing knots; exact at knots."""
    return float(schedule.a_of(s)), float(schedule.b_of(s))


def _smoothstep(s: np.ndarray) -> np.ndarray:
    return s * s * (3.0 - 2.0 * s)


def default_schedule(t_f: float = 20000.0, n_knots: int = 50) -> AnnealSchedule:
    """Synthetic default: cubic-smoothstep A: 10 -> 0 and B: 0 -> 10 (1/ns)."""
    s = np.linspace(0.0, 1.0, n_knots)
    w = _smoothstep(s)
    return AnnealSchedule(s=s, A=10.0 * (1.0 - w), B=10.0 * w, t_f=t_f)


def dw2_like_schedule(t_f: float = 20000.0, n_knots: int = 50) -> AnnealSchedule:
    """Schedule with device-like energy scales: A: 33 -> 0, B: 0 -> 31 (1/ns).

    B(1)/kT ~ 14 matches the regime in which the energy-scale sweep
    traverses the quantum-to-thermal crossover at small alpha.
    """
    s = np.linspace(0.0, 1.0, n_knots)
    w = _smoothstep(s)
    return AnnealSchedule(s=s, A=33.0 * (1.0 - w), B=31.0 * w, t_f=t_f)


def write_schedule_csv(schedule: AnnealSchedule, path) -> None:
    with open(path, "w") as fh:
        fh.write("s,A,B\n")
        for s, a, b in zip(schedule.s, schedule.A, schedule.B):
            fh.write(f"{float(s)!r},{float(a)!r},{float(b)!r}\n")


def read_schedule_csv(path_or_file, t_f: float = 20000.0, strict: bool = True) -> AnnealSchedule:
    """Parse a schedule CSV with header ``s,A,B``; errors carry row numbers."""
    if isinstance(path_or_file, io.TextIOBase):
        lines = path_or_file.read().splitlines()
        name = getattr(path_or_file, "name", "<stream>")
    else:
        with open(path_or_file) as fh:
            lines = fh.read().splitlines()
        name = str(path_or_file)
    if not lines:
        raise ValueError(f"{name}: empty schedule file")
    header = [c.strip() for c in lines[0].split(",")]
    if header != ["s", "A", "B"]:
        raise ValueError(f"{name}:1: expected header 's,A,B', got {lines[0]!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"{name}:{lineno}: expected 3 comma-separated values, got {len(parts)}")
        try:
            rows.append(tuple(float(p) for p in parts))
        except ValueError:
            raise ValueError(f"{name}:{lineno}: could not parse floats from {line!r}") from None
    if len(rows) < 2:
        raise ValueError(f"{name}: need at least 2 data rows, got {len(rows)}")
    arr = np.array(rows)
    return AnnealSchedule(s=arr[:, 0], A=arr[:, 1], B=arr[:, 2], t_f=t_f, strict=strict)


@dataclass(frozen=True)
class TemperatureSchedule:
    """SA temperature schedule over K steps.

    Kinds:

    * ``schedule_linked`` -- the Boltzmann factor follows the device,
      exp(-beta * B(s_k) * dE) with fixed operating beta = 1/T0; the
      returned "temperature" is T0 / B(s_k) per unit of dimensionless
      Ising energy.
    * ``exponential`` -- T(k) = T0 (TK/T0)^(k/K)
    * ``linear``      -- T(k) = T0 + (k/K)(TK - T0)
    * ``constant``    -- T(k) = TK
    """

    kind: str = "schedule_linked"
    T0: float = OPERATING_KT
    TK: float = 0.5
    steps: int = 1000

    KINDS = ("schedule_linked", "exponential", "linear", "constant")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {self.KINDS}")
        if self.T0 <= 0 or self.TK <= 0:
            raise ValueError("temperatures must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


def temperature_at(ts: TemperatureSchedule, k: int, schedule: AnnealSchedule | None = None) -> float:
    """Temperature at step k (0 <= k <= K), in 1/ns (see class docstring)."""
    if not (0 <= k <= ts.steps):
        raise ValueError(f"step index {k} outside [0, {ts.steps}]")
    x = k / ts.steps
    if ts.kind == "schedule_linked":
        if schedule is None:
            raise ValueError("schedule_linked temperature requires a schedule")
        b = float(schedule.b_of(x))
        return ts.T0 / max(b, 1e-300)
    if ts.kind == "exponential":
        return ts.T0 * (ts.TK / ts.T0) ** x
    if ts.kind == "linear":
        return ts.T0 + x * (ts.TK - ts.T0)
    return ts.TK  # constant


def beta_eff_at(ts: TemperatureSchedule, k: int, schedule: AnnealSchedule) -> float:
    """Effective inverse temperature multiplying the dimensionless Ising dE.

    For the schedule-linked kind this is beta * B(s_k) with beta = 1/T0;
    for the explicit-temperature kinds the dimensionless energies are
    converted with the final Ising scale B(1), giving B(1)/T(k).
    """
    if ts.kind == "schedule_linked":
        return float(schedule.b_of(k / ts.steps)) / ts.T0
    return float(schedule.b_of(1.0)) / temperature_at(ts, k)
