"""Model-comparison suite for quantum-signature annealing tests.

Builds the ring-plus-pendants signature Ising instances, evolves them under
one quantum model (adiabatic master equation) and five classical or
semi-classical dynamics (exact-vector SA, O(3) spin-Langevin dynamics, the
O(2)-rotor Metropolis annealer and its decohered/forced variants), and
computes the observables that tell the models apart, with the accompanying
statistics toolchain.
"""

from .instance import (
    GaugeVector,
    NoiseSpec,
    ProblemInstance,
    apply_control_errors,
    apply_crosstalk,
    apply_gauge,
    apply_h_detuning,
    apply_noise,
    build_signature_instance,
    ising_energy,
    scale_instance,
)
from .schedule import (
    AnnealSchedule,
    TemperatureSchedule,
    default_schedule,
    dw2_like_schedule,
    evaluate,
    read_schedule_csv,
    temperature_at,
    write_schedule_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule",
    "GaugeVector",
    "NoiseSpec",
    "ProblemInstance",
    "TemperatureSchedule",
    "apply_control_errors",
    "apply_crosstalk",
    "apply_gauge",
    "apply_h_detuning",
    "apply_noise",
    "build_signature_instance",
    "default_schedule",
    "dw2_like_schedule",
    "evaluate",
    "ising_energy",
    "read_schedule_csv",
    "scale_instance",
    "temperature_at",
    "write_schedule_csv",
]
