"""Dense instantaneous spectra, degeneracy analysis, and reference models.

Everything here works in the full 2^N computational basis with N capped for
dense linear algebra.  The annealing Hamiltonian is

    H(s) = A(s) * H_X + alpha * B(s) * H_I,   H_X = -sum_i sigma_i^x,

with H_I the classical Ising Hamiltonian of the instance (diagonal in the
computational basis).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .instance import ProblemInstance, all_configs, all_energies, config_to_index
from .schedule import AnnealSchedule

DENSE_CAP = 12  # largest N for dense 2^N x 2^N work
ENUM_CAP = 24  # largest N for brute-force enumeration


def flip_index_table(n_spins: int) -> np.ndarray:
    """(2^N, N) table: entry [i, j] is basis index i with qubit j flipped."""
    idx = np.arange(2**n_spins, dtype=np.int64)
    masks = 1 << (n_spins - 1 - np.arange(n_spins, dtype=np.int64))
    return idx[:, None] ^ masks[None, :]


def transverse_field_matrix(n_spins: int) -> np.ndarray:
    """Dense H_X = -sum_i sigma_i^x."""
    if n_spins > DENSE_CAP:
        raise ValueError(f"N={n_spins} exceeds dense cap {DENSE_CAP}")
    dim = 2**n_spins
    hx = np.zeros((dim, dim))
    flips = flip_index_table(n_spins)
    rows = np.repeat(np.arange(dim), n_spins)
    hx[rows, flips.ravel()] = -1.0
    return hx


def hamiltonian_matrix(
    instance: ProblemInstance,
    schedule: AnnealSchedule,
    s: float,
    alpha: float = 1.0,
) -> np.ndarray:
    """Dense Hermitian H(s) = A(s) H_X + alpha B(s) H_I."""
    if instance.n_spins > DENSE_CAP:
        raise ValueError(f"N={instance.n_spins} exceeds dense cap {DENSE_CAP}")
    a, b = float(schedule.a_of(s)), float(schedule.b_of(s))
    h = a * transverse_field_matrix(instance.n_spins)
    h[np.diag_indices_from(h)] += alpha * b * all_energies(instance)
    return h


@dataclass
class SpectralSlice:
    """Instantaneous eigensystem at one schedule point.

    Eigenvalues ascending; eigenvector columns carry a lexicographic phase
    convention (first amplitude above tolerance made real positive) so that
    repeated runs produce identical slices.
    """

    s: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    @classmethod
    def compute(cls, instance, schedule, s, alpha=1.0, vectors=True) -> "SpectralSlice":
        h = hamiltonian_matrix(instance, schedule, s, alpha)
        if vectors:
            evals, evecs = np.linalg.eigh(h)
            return cls(s=s, eigenvalues=evals, eigenvectors=fix_eigenvector_gauge(evecs))
        return cls(s=s, eigenvalues=np.linalg.eigvalsh(h))


def fix_eigenvector_gauge(vectors: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Make the first above-tolerance amplitude of each column real positive."""
    v = np.array(vectors)
    for k in range(v.shape[1]):
        col = v[:, k]
        nz = np.flatnonzero(np.abs(col) > tol)
        lead = col[nz[0]] if nz.size else col[np.argmax(np.abs(col))]
        phase = lead / abs(lead)
        v[:, k] = col / phase
    return v


def gap_profile(
    instance: ProblemInstance,
    schedule: AnnealSchedule,
    alpha: float,
    level: int,
    n_points: int = 64,
):
    """Sample gap(s) = eps_level(s) - eps_0(s) on a uniform s grid.

    Levels are sorted per point, so level crossings show up as kinks.
    Returns (s_grid, gaps).
    """
    if not (0 <= level < 2**instance.n_spins):
        raise ValueError(f"level must lie in [0, 2^N), got {level}")
    grid = np.linspace(0.0, 1.0, n_points)
    gaps = np.empty(n_points)
    for i, s in enumerate(grid):
        evals = np.linalg.eigvalsh(hamiltonian_matrix(instance, schedule, s, alpha))
        gaps[i] = evals[level] - evals[0]
    return grid, gaps


def write_gap_csv(path, grid, gaps, level: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", f"gap_level_{level}"])
        for s, g in zip(grid, gaps):
            w.writerow([repr(float(s)), repr(float(g))])


def ground_degeneracy(instance: ProblemInstance, atol: float = 1e-9):
    """Exact minimal-energy configuration set of H_I by enumeration.

    Returns (count, configs) with configs of shape (count, N) in +/-1.
    """
    if instance.n_spins > ENUM_CAP:
        raise ValueError(f"N={instance.n_spins} exceeds enumeration cap {ENUM_CAP}")
    energies = all_energies(instance)
    e0 = energies.min()
    idx = np.flatnonzero(energies <= e0 + atol)
    n = instance.n_spins
    bits = (idx[:, None] >> (n - 1 - np.arange(n))) & 1
    return len(idx), (1 - 2 * bits).astype(np.int8)


def signature_ground_set(instance: ProblemInstance):
    """(isolated_index, cluster_indices) of the clean signature ground manifold.

    Derived from the core/outer labeling, so it applies to transformed
    instances whose clean topology is known.
    """
    n = instance.n_spins
    outer = sorted(instance.outer)
    isolated = config_to_index(-np.ones(n, dtype=int))
    base = np.ones(n, dtype=int)  # all +1: cluster with every outer up
    cluster = []
    for pattern in range(2 ** len(outer)):
        cfg = base.copy()
        for b, q in enumerate(outer):
            if (pattern >> (len(outer) - 1 - b)) & 1:
                cfg[q] = -1
        cluster.append(config_to_index(cfg))
    return isolated, np.array(sorted(cluster), dtype=np.int64)


def single_flip_connectivity(instance: ProblemInstance):
    """Count single-flip links from the ground manifold to the +4 / +8 shells.

    Returns a dict with the isolated state's neighbor counts by energy cost
    and the total cluster links by cost, from exhaustive flip enumeration.
    """
    energies = all_energies(instance)
    flips = flip_index_table(instance.n_spins)
    isolated, cluster = signature_ground_set(instance)
    de_iso = energies[flips[isolated]] - energies[isolated]
    de_cluster = energies[flips[cluster]] - energies[cluster][:, None]
    round4 = lambda x: np.round(x, 9)
    iso_counts = {float(v): int(c) for v, c in zip(*np.unique(round4(de_iso), return_counts=True))}
    cl_counts = {float(v): int(c) for v, c in zip(*np.unique(round4(de_cluster), return_counts=True))}
    return {"isolated": iso_counts, "cluster": cl_counts}


def perturbative_ground_splitting(instance: ProblemInstance):
    """Spectrum of the transverse-field perturbation projected on the ground manifold.

    Builds P0 (-sum sigma_x) P0 in the basis of ground configurations; the
    matrix element between two basis configurations is -1 when they differ
    by exactly one spin flip.  Returns a dict with the full spectrum, the
    isolated block eigenvalue, and the cluster-block spectrum.  Raises if
    the instance lacks the signature degeneracy structure.
    """
    count, configs = ground_degeneracy(instance)
    expected = 2 ** (instance.n_spins // 2) + 1
    if count != expected:
        raise ValueError(
            f"ground degeneracy {count} != {expected}; not a clean signature instance"
        )
    diff = (configs[:, None, :] != configs[None, :, :]).sum(axis=2)
    pmat = np.where(diff == 1, -1.0, 0.0)
    iso_row = np.array([bool(np.all(c == -1)) for c in configs])
    k = int(np.flatnonzero(iso_row)[0])
    if np.any(pmat[k] != 0):
        raise ValueError("isolated state is connected inside the ground manifold")
    cluster_block = np.delete(np.delete(pmat, k, axis=0), k, axis=1)
    cluster_spectrum = np.linalg.eigvalsh(cluster_block)
    return {
        "eigenvalues": np.linalg.eigvalsh(pmat),
        "isolated_eigenvalue": 0.0,
        "cluster_spectrum": cluster_spectrum,
        "cluster_minimum": float(cluster_spectrum[0]),
    }


def boltzmann_population_model(
    instance: ProblemInstance,
    alpha: float,
    beta: float = 10.7,
    noise_sigma: float = 0.0,
    rng=None,
    x_field: float = 0.01,
):
    """Static Boltzmann reference model H = alpha (H_I + x H_X) + eta.

    eta is Gaussian noise on the fields and couplings (independent of
    alpha).  All 2^N levels are Boltzmann weighted, p_n = exp(-beta E_n)/Z,
    and the populations of the lowest 2^(N/2)+1 levels are resolved onto the
    computational basis through their overlaps.

    Returns (config_populations over the 2^N basis, level_probabilities).
    """
    if instance.n_spins > DENSE_CAP:
        raise ValueError(f"N={instance.n_spins} exceeds dense cap {DENSE_CAP}")
    n_ground = 2 ** (instance.n_spins // 2) + 1
    diag = alpha * all_energies(instance)
    if noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        from .instance import NoiseSpec, apply_noise

        noisy = apply_noise(instance, NoiseSpec(sigma=noise_sigma), rng)
        diag = diag + (all_energies(noisy) - all_energies(instance))
    h = alpha * x_field * transverse_field_matrix(instance.n_spins)
    h[np.diag_indices_from(h)] += diag
    evals, evecs = np.linalg.eigh(h)
    w = np.exp(-beta * (evals - evals[0]))
    p_levels = w / w.sum()
    weights = p_levels[:n_ground]
    pops = (np.abs(evecs[:, :n_ground]) ** 2) @ weights
    return pops, p_levels
