"""End-of-run observables: ground populations, Hamming groups, excited
families, negativity, Gibbs reference state, and trace distance."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .instance import ProblemInstance, all_energies, config_to_index
from .schedule import AnnealSchedule
from .spectrum import signature_ground_set


@dataclass
class StateDistribution:
    """Probability mass over the 2^N computational basis.

    ``n_runs`` is carried for sampled sources so downstream statistics can
    bootstrap at the run level.
    """

    probs: np.ndarray
    source: str = "exact"  # "exact" or "sampled"
    n_runs: int | None = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or len(p) & (len(p) - 1):
            raise ValueError("probs must have length 2^N")
        if np.any(p < -1e-12):
            raise ValueError("probabilities must be nonnegative")
        total = p.sum()
        if self.source == "exact":
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"exact distribution must sum to 1, off by {total - 1:.2e}")
        elif abs(total - 1.0) > 1e-12:
            raise ValueError("sampled distribution must be exactly normalized counts")
        self.probs = p

    @property
    def n_spins(self) -> int:
        return int(np.log2(len(self.probs)))

    @classmethod
    def exact(cls, probs) -> "StateDistribution":
        return cls(np.asarray(probs, dtype=float), source="exact")

    @classmethod
    def from_counts(cls, counts) -> "StateDistribution":
        c = np.asarray(counts, dtype=float)
        return cls(c / c.sum(), source="sampled", n_runs=int(round(c.sum())))

    @classmethod
    def from_bitstrings(cls, bits: np.ndarray) -> "StateDistribution":
        """bits: (n_runs, N) array of 0/1 (0 <-> spin +1)."""
        bits = np.asarray(bits)
        n = bits.shape[1]
        weights = 1 << (n - 1 - np.arange(n, dtype=np.int64))
        idx = bits.astype(np.int64) @ weights
        counts = np.bincount(idx, minlength=2**n)
        return cls.from_counts(counts)


class GroundPopulations(NamedTuple):
    p_isolated: float
    p_cluster: float  # mean population per cluster state
    ratio: float
    p_ground: float


def ground_populations(dist: StateDistribution, instance: ProblemInstance) -> GroundPopulations:
    """P_I, mean cluster population P_C, their ratio, and total P_GS.

    Sums run over the clean-instance ground configurations derived from the
    core/outer labels, so transformed instances are scored against the clean
    manifold.  The ratio is +inf when P_C = 0.
    """
    isolated, cluster = signature_ground_set(instance)
    p_iso = float(dist.probs[isolated])
    p_c = float(dist.probs[cluster].mean())
    ratio = p_iso / p_c if p_c > 0 else float("inf")
    return GroundPopulations(p_iso, p_c, ratio, p_iso + float(dist.probs[cluster].sum()))


@dataclass
class HammingGroup:
    hamming: int
    multiplicity: int
    population_per_state: float
    members: np.ndarray  # basis indices
    rotation_class: int | None = None


def _outer_patterns(instance: ProblemInstance):
    """Member cluster indices keyed by outer bit pattern (1 = outer spin down)."""
    isolated, cluster = signature_ground_set(instance)
    n = instance.n_spins
    outer = sorted(instance.outer)
    patterns = {}
    for idx in cluster:
        bits = (idx >> (n - 1 - np.arange(n))) & 1
        patterns[tuple(int(bits[q]) for q in outer)] = int(idx)
    return isolated, patterns


def _rotation_orbits(n_outer: int):
    """Orbits of outer bit patterns under the ring rotation, as canonical keys."""
    orbits = {}
    for pattern in range(2**n_outer):
        bits = tuple((pattern >> (n_outer - 1 - i)) & 1 for i in range(n_outer))
        rots = [tuple(bits[(i + r) % n_outer] for i in range(n_outer)) for r in range(n_outer)]
        orbits[bits] = min(rots)
    return orbits


def hamming_groups(
    dist: StateDistribution,
    instance: ProblemInstance,
    rotations: bool = False,
) -> list[HammingGroup]:
    """Cluster states grouped by Hamming distance to the isolated configuration.

    With ``rotations`` the groups are additionally split by the orbit of the
    outer-spin pattern under the N/2-fold ring rotation (for N=8 only the
    H=6 group splits, into the adjacent-pair and opposite-pair classes).
    The isolated state itself is reported as the (H=0, M=1) group.
    """
    isolated, patterns = _outer_patterns(instance)
    n_outer = len(instance.outer)
    n_core = len(instance.core)
    groups: dict[tuple, list[int]] = {(0, None): [isolated]}
    orbits = _rotation_orbits(n_outer) if rotations else None
    for bits, idx in patterns.items():
        # Cluster cores differ from the isolated everywhere; outer spins at +1
        # (bit 0) differ as well.
        h = n_core + sum(1 - b for b in bits)
        key = (h, orbits[bits] if rotations else None)
        groups.setdefault(key, []).append(idx)
    out = []
    class_ids = {}
    for (h, cls), members in sorted(groups.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        members = np.array(sorted(members))
        if cls is not None and cls not in class_ids:
            class_ids[cls] = len(class_ids)
        out.append(
            HammingGroup(
                hamming=h,
                multiplicity=len(members),
                population_per_state=float(dist.probs[members].mean()),
                members=members,
                rotation_class=class_ids[cls] if cls is not None else None,
            )
        )
    return out


def excited_family_populations(dist: StateDistribution, instance: ProblemInstance):
    """Populations of the two permutation families of first excited states.

    Family 1 gathers the states with all outer spins down and exactly one
    core spin down; family 2 the states with all core spins down and exactly
    one outer spin up.  Both sit one excitation quantum above the ground
    manifold on a clean instance.  Returns (family1, family2) total
    populations.
    """
    n = instance.n_spins
    if n < 8:
        raise ValueError("excited families need a signature instance with N >= 8")
    outer, core = sorted(instance.outer), sorted(instance.core)
    fam1, fam2 = [], []
    for c in core:
        cfg = np.ones(n, dtype=int)
        cfg[outer] = -1
        cfg[c] = -1
        fam1.append(config_to_index(cfg))
    for o in outer:
        cfg = -np.ones(n, dtype=int)
        cfg[o] = +1
        fam2.append(config_to_index(cfg))
    return float(dist.probs[fam1].sum()), float(dist.probs[fam2].sum())


def default_vertical_partition(instance: ProblemInstance) -> list[int]:
    """Half split keeping ring adjacency: cores 0,1 of the ring plus their outers."""
    n_half = instance.n_spins // 2
    return sorted([0, 1, n_half, n_half + 1])


def negativity(rho: np.ndarray, partition) -> float:
    """Entanglement negativity (||rho^T_A||_1 - 1) / 2 for a qubit partition."""
    rho = np.asarray(rho)
    dim = rho.shape[0]
    n = int(np.log2(dim))
    if rho.shape != (dim, dim) or 2**n != dim:
        raise ValueError("rho must be 2^N x 2^N")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-8:
        raise ValueError("rho must be Hermitian")
    part = sorted(partition)
    if not part or len(part) >= n or any(q < 0 or q >= n for q in part):
        raise ValueError("partition must be a nonempty proper subset of qubits")
    rest = [q for q in range(n) if q not in part]
    tensor = rho.reshape((2,) * (2 * n))
    # move partition qubits first on both bra and ket sides
    perm = part + rest
    axes = perm + [n + q for q in perm]
    tensor = np.transpose(tensor, axes)
    da, db = 2 ** len(part), 2 ** len(rest)
    m = tensor.reshape(da, db, da, db)
    m = np.transpose(m, (2, 1, 0, 3)).reshape(da * db, da * db)  # transpose subsystem A
    evals = np.linalg.eigvalsh(m)
    return float((np.abs(evals).sum() - 1.0) / 2.0)


def gibbs_state(
    instance: ProblemInstance,
    schedule: AnnealSchedule,
    alpha: float,
    beta: float,
) -> np.ndarray:
    """Gibbs state exp(-beta H(t_f))/Z of the end-of-anneal Hamiltonian."""
    from .spectrum import hamiltonian_matrix

    h = hamiltonian_matrix(instance, schedule, 1.0, alpha)
    evals, evecs = np.linalg.eigh(h)
    w = np.exp(-beta * (evals - evals[0]))
    w /= w.sum()
    return (evecs * w) @ evecs.conj().T


def trace_distance(a, b) -> float:
    """(1/2) ||a - b||_1; StateDistributions are promoted to diagonal matrices."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    if np.max(np.abs(diff - diff.conj().T)) < 1e-12:
        vals = np.linalg.eigvalsh(diff)
        return float(np.abs(vals).sum() / 2.0)
    return float(np.linalg.svd(diff, compute_uv=False).sum() / 2.0)


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, StateDistribution):
        return np.diag(x.probs).astype(complex)
    x = np.asarray(x)
    if x.ndim == 1:
        return np.diag(x).astype(complex)
    return x


def observables_record(
    dist: StateDistribution,
    instance: ProblemInstance,
    rotations: bool = False,
) -> dict:
    """Scalar observables plus the Hamming-group table, JSON-ready."""
    pops = ground_populations(dist, instance)
    groups = hamming_groups(dist, instance, rotations=rotations)
    rec = {
        "P_I": pops.p_isolated,
        "P_C": pops.p_cluster,
        "ratio": pops.ratio if np.isfinite(pops.ratio) else "inf",
        "P_GS": pops.p_ground,
        "hamming_groups": [
            {
                "H": g.hamming,
                "M": g.multiplicity,
                "p_per_state": g.population_per_state,
                "class": g.rotation_class,
            }
            for g in groups
        ],
    }
    if instance.n_spins >= 8:
        f1, f2 = excited_family_populations(dist, instance)
        rec["excited_family_core_perm"] = f1
        rec["excited_family_outer_perm"] = f2
    return rec


def append_jsonl(path, record: dict) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(record) + "\n")
