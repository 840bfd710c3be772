"""Quantum-signature Ising instances and control-error transformations.

The benchmark instance is a ring of N/2 ferromagnetically coupled "core"
spins, each carrying one pendant "outer" spin.  Core spins have local field
+1, outer spins -1, and every coupling is +1, which makes the classical
ground manifold split into 2^(N/2) "cluster" states (core spins up, outer
spins free) plus one "isolated" state (everything down).

Index layout used throughout the package:

* outer spins occupy indices ``0 .. n-1``,
* core spins occupy indices ``n .. 2n-1`` (ring order),
* outer spin ``i`` is attached to core spin ``n + i``.

A spin configuration is a vector of +/-1; basis-state integers place qubit 0
in the most significant bit, with bit 0 <-> spin +1 <-> |0> and bit 1 <->
spin -1 <-> |1>.  Rendered bitstrings therefore read "outer block, core
block" left to right.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

Edge = tuple[int, int]

# Device calibration table: optimized |J| for a given |h| (flattens the
# cluster-state staircase).  Rows are (|h|, |J|).
H_VS_J_TABLE = (
    (1.0, 0.9810),
    (6.0 / 7.0, 0.8440),
    (5.0 / 7.0, 0.7040),
    (4.0 / 7.0, 0.5655),
    (3.0 / 7.0, 0.4265),
    (2.0 / 7.0, 0.2850),
    (1.0 / 7.0, 0.1420),
)


def _norm_edge(i: int, j: int) -> Edge:
    if i == j:
        raise ValueError(f"self-loop edge ({i},{j}) is not allowed")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class ProblemInstance:
    """Ising instance: local fields, couplings on an edge set, spin roles.

    ``couplings`` maps undirected edges (i, j) with i < j to J_ij.  The
    instance is immutable; all transformations return new instances.
    """

    n_spins: int
    fields: np.ndarray
    couplings: dict[Edge, float]
    core: frozenset[int]
    outer: frozenset[int]
    degenerate_ring: bool = False  # N=4 two-ring collapsed to a single edge

    def __post_init__(self):
        h = np.asarray(self.fields, dtype=float)
        if h.shape != (self.n_spins,):
            raise ValueError(f"fields must have shape ({self.n_spins},), got {h.shape}")
        object.__setattr__(self, "fields", h)
        clean = {}
        for (i, j), val in self.couplings.items():
            e = _norm_edge(int(i), int(j))
            if not (0 <= e[0] < self.n_spins and 0 <= e[1] < self.n_spins):
                raise ValueError(f"edge {e} out of range for N={self.n_spins}")
            if e in clean:
                raise ValueError(f"duplicate edge {e}")
            clean[e] = float(val)
        object.__setattr__(self, "couplings", clean)

    @property
    def edges(self) -> list[Edge]:
        return sorted(self.couplings)

    def coupling_array(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (edge_index_array of shape (E, 2), J values of shape (E,))."""
        es = self.edges
        if not es:
            return np.zeros((0, 2), dtype=int), np.zeros(0)
        idx = np.array(es, dtype=int)
        j = np.array([self.couplings[e] for e in es])
        return idx, j

    def coupling_matrix(self) -> np.ndarray:
        """Dense symmetric J matrix (zero diagonal)."""
        jm = np.zeros((self.n_spins, self.n_spins))
        for (i, j), val in self.couplings.items():
            jm[i, j] = jm[j, i] = val
        return jm

    def to_dict(self) -> dict:
        return {
            "n_spins": int(self.n_spins),
            "h": [float(x) for x in self.fields],
            "edges": [[int(i), int(j), float(v)] for (i, j), v in sorted(self.couplings.items())],
            "core": sorted(int(i) for i in self.core),
            "outer": sorted(int(i) for i in self.outer),
            "degenerate_ring": bool(self.degenerate_ring),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemInstance":
        return cls(
            n_spins=int(d["n_spins"]),
            fields=np.asarray(d["h"], dtype=float),
            couplings={(int(i), int(j)): float(v) for i, j, v in d["edges"]},
            core=frozenset(int(i) for i in d["core"]),
            outer=frozenset(int(i) for i in d["outer"]),
            degenerate_ring=bool(d.get("degenerate_ring", False)),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "ProblemInstance":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class GaugeVector:
    """Sign vector a_i in {+1, -1} implementing h -> a h, J_ij -> a_i a_j J_ij."""

    signs: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.signs, dtype=int)
        if not np.all(np.abs(a) == 1):
            raise ValueError("gauge entries must be exactly +/-1")
        object.__setattr__(self, "signs", a)

    def __len__(self):
        return len(self.signs)

    def index_mask(self) -> int:
        """Bit mask XOR-ing a basis index into its gauged relabeling."""
        mask = 0
        n = len(self.signs)
        for i, a in enumerate(self.signs):
            if a == -1:
                mask |= 1 << (n - 1 - i)
        return mask


@dataclass(frozen=True)
class NoiseSpec:
    """Control-error model parameters.

    Application order inside :func:`apply_control_errors` is fixed:
    h-vs-J detuning, then Gaussian noise on existing h and J, then
    cross-talk, then the overall alpha rescaling.  Cross-talk enters with an
    effective susceptibility alpha*chi so that, after the final rescaling,
    the cross-talk corrections carry the expected alpha^2 dependence.
    """

    sigma: float = 0.0
    chi: float = 0.0
    h_over_j_offset: float | None = None  # ratio r such that |h| = r |J|
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not np.isfinite(self.chi):
            raise ValueError("chi must be finite")
        if self.h_over_j_offset is not None and self.h_over_j_offset <= 0:
            raise ValueError("h_over_j_offset must be positive")


def build_signature_instance(n_spins: int) -> ProblemInstance:
    """Build the ring-plus-pendants signature instance for even N >= 4.

    For N=4 the 2-core "ring" traverses its single edge twice; the two arcs
    are collapsed into one J=+2 edge (which preserves the doubled-edge
    spectrum and the single-flip energy shells) and the instance is flagged
    ``degenerate_ring``.
    """
    if n_spins < 4 or n_spins % 2 != 0:
        raise ValueError(f"n_spins must be an even integer >= 4, got {n_spins}")
    n = n_spins // 2
    h = np.empty(n_spins)
    h[:n] = -1.0  # outer
    h[n:] = +1.0  # core
    couplings: dict[Edge, float] = {}
    for i in range(n):  # pendant bonds
        couplings[(i, n + i)] = 1.0
    if n == 2:
        couplings[(n, n + 1)] = 2.0
        degenerate = True
    else:
        for i in range(n):  # core ring
            couplings[_norm_edge(n + i, n + (i + 1) % n)] = 1.0
        degenerate = False
    return ProblemInstance(
        n_spins=n_spins,
        fields=h,
        couplings=couplings,
        core=frozenset(range(n, n_spins)),
        outer=frozenset(range(n)),
        degenerate_ring=degenerate,
    )


def ising_energy(instance: ProblemInstance, config) -> float:
    """Classical energy -sum h_i s_i - sum J_ij s_i s_j of a +/-1 configuration."""
    s = np.asarray(config, dtype=float)
    if s.shape != (instance.n_spins,):
        raise ValueError(f"config must have length {instance.n_spins}, got shape {s.shape}")
    if not np.all(np.abs(s) == 1):
        raise ValueError("config entries must be +/-1")
    e = -float(instance.fields @ s)
    for (i, j), jij in instance.couplings.items():
        e -= jij * s[i] * s[j]
    return e


def all_configs(n_spins: int) -> np.ndarray:
    """All 2^N spin configurations as a (2^N, N) array of +/-1.

    Row k corresponds to basis index k (qubit 0 is the most significant
    bit; bit 0 means spin +1).
    """
    idx = np.arange(2**n_spins, dtype=np.int64)
    bits = (idx[:, None] >> (n_spins - 1 - np.arange(n_spins))) & 1
    return (1 - 2 * bits).astype(np.int8)


def config_to_index(config) -> int:
    s = np.asarray(config)
    bits = (1 - s) // 2
    n = len(s)
    return int(sum(int(b) << (n - 1 - i) for i, b in enumerate(bits)))


def index_to_config(index: int, n_spins: int) -> np.ndarray:
    bits = (index >> (n_spins - 1 - np.arange(n_spins))) & 1
    return (1 - 2 * bits).astype(np.int8)


def all_energies(instance: ProblemInstance, chunk: int = 1 << 22) -> np.ndarray:
    """Vector of Ising energies over all 2^N basis states (chunked for large N)."""
    n = instance.n_spins
    dim = 2**n
    eidx, jval = instance.coupling_array()
    h = instance.fields
    out = np.empty(dim)
    for lo in range(0, dim, chunk):
        hi = min(lo + chunk, dim)
        idx = np.arange(lo, hi, dtype=np.int64)
        s = (1 - 2 * ((idx[:, None] >> (n - 1 - np.arange(n))) & 1)).astype(np.float64)
        e = -(s @ h)
        if len(jval):
            e -= (s[:, eidx[:, 0]] * s[:, eidx[:, 1]]) @ jval
        out[lo:hi] = e
    return out


def apply_gauge(instance: ProblemInstance, gauge: GaugeVector) -> ProblemInstance:
    """Gauge transform h_i -> a_i h_i, J_ij -> a_i a_j J_ij (spectrum preserved)."""
    a = gauge.signs
    if len(a) != instance.n_spins:
        raise ValueError("gauge length does not match instance")
    h = instance.fields * a
    couplings = {e: v * a[e[0]] * a[e[1]] for e, v in instance.couplings.items()}
    return replace(instance, fields=h, couplings=couplings)


def random_gauge(n_spins: int, rng: np.random.Generator) -> GaugeVector:
    return GaugeVector(signs=rng.choice([-1, 1], size=n_spins))


def apply_noise(instance: ProblemInstance, spec: NoiseSpec, rng=None) -> ProblemInstance:
    """Perturb every h_i and every existing J_ij by independent N(0, sigma) draws.

    No new edges are created.  Draw order is fields first, then couplings in
    sorted edge order, so identical (spec, seed) inputs give bit-identical
    instances.
    """
    if spec.sigma == 0:
        return instance
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    h = instance.fields + rng.normal(0.0, spec.sigma, size=instance.n_spins)
    couplings = dict(instance.couplings)
    for e in sorted(couplings):
        couplings[e] = couplings[e] + rng.normal(0.0, spec.sigma)
    return replace(instance, fields=h, couplings=couplings)


def apply_crosstalk(
    instance: ProblemInstance,
    chi: float,
    reference: ProblemInstance | None = None,
    extra_pairs: list[Edge] | None = None,
) -> ProblemInstance:
    """Susceptibility cross-talk on the instance graph.

        h_i  -> h_i  - chi * sum_k J_ik h_k
        J_ij -> J_ij + chi * sum_k J_ik J_jk

    The k sums use the couplings of ``reference`` (default: the instance
    itself); passing the pre-noise instance realizes the convention that the
    spurious terms are built from unperturbed couplings.  New J entries are
    created for every pair sharing at least one common neighbor (``J_ij = 0``
    baseline); ``extra_pairs`` forces additional pairs to be considered, as
    an escape hatch for hardware layouts with spurious couplings beyond the
    common-neighbor rule.
    """
    if chi == 0:
        return instance
    ref = reference if reference is not None else instance
    jm_ref = ref.coupling_matrix()
    h = instance.fields - chi * (jm_ref @ (ref.fields))

    n = instance.n_spins
    neighbors = [np.flatnonzero(jm_ref[i]) for i in range(n)]
    pairs = set(instance.couplings)
    for i in range(n):
        for j in range(i + 1, n):
            common = np.intersect1d(neighbors[i], neighbors[j], assume_unique=True)
            if common.size:
                pairs.add((i, j))
    if extra_pairs:
        pairs.update(_norm_edge(i, j) for i, j in extra_pairs)

    couplings = {}
    for (i, j) in pairs:
        ks = np.intersect1d(neighbors[i], neighbors[j], assume_unique=True)
        ks = ks[(ks != i) & (ks != j)]
        correction = chi * float(jm_ref[i, ks] @ jm_ref[j, ks]) if ks.size else 0.0
        couplings[(i, j)] = instance.couplings.get((i, j), 0.0) + correction
    return replace(instance, fields=h, couplings=couplings)


def scale_instance(instance: ProblemInstance, alpha: float) -> ProblemInstance:
    """Rescale all fields and couplings by alpha (transverse field untouched)."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return replace(
        instance,
        fields=instance.fields * alpha,
        couplings={e: v * alpha for e, v in instance.couplings.items()},
    )


def apply_h_detuning(instance: ProblemInstance, table_row: tuple[float, float]) -> ProblemInstance:
    """Rescale |J| to the tabulated value, preserving signs and leaving h alone.

    ``table_row`` is an (|h|, |J|) pair, typically one of ``H_VS_J_TABLE``.
    """
    h_mag, j_mag = table_row
    if h_mag <= 0 or j_mag <= 0:
        raise ValueError("detuning magnitudes must be positive")
    couplings = {e: np.sign(v) * j_mag if v != 0 else 0.0 for e, v in instance.couplings.items()}
    return replace(instance, couplings=couplings)


def apply_control_errors(
    instance: ProblemInstance,
    spec: NoiseSpec,
    alpha: float = 1.0,
    rng=None,
) -> ProblemInstance:
    """Full control-error pipeline: detune, noise, cross-talk, alpha scaling.

    Cross-talk uses the effective susceptibility alpha*chi and the pre-noise
    couplings as reference, so the final instance carries cross-talk terms
    of order alpha^2 as on the physical device.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    inst = instance
    if spec.h_over_j_offset is not None:
        # Detuning of |h| against |J| = r |J| sign-preserving; built instances
        # have |h| = |J| = 1 so multiplying h by r realizes |h| = r |J|.
        inst = replace(inst, fields=inst.fields * spec.h_over_j_offset)
    pre_noise = inst
    inst = apply_noise(inst, spec, rng)
    inst = apply_crosstalk(inst, alpha * spec.chi, reference=pre_noise)
    return scale_instance(inst, alpha) if alpha != 1.0 else inst
