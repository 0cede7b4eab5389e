"""Random admissible inputs for verification runs. All draws go through a numpy Generator."""

from __future__ import annotations

import numpy as np

from .elliptic import lattice_nearest
from .liealg import GradedDecomposition, LieAlgebra
from .rmat import DomainQuery, in_domain
from .settings import DEFAULT, Settings


def random_complex(rng: np.random.Generator, size, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.normal(size=size) + 1j * rng.normal(size=size))


def random_g0(dec: GradedDecomposition, rng: np.random.Generator, scale: float = 0.3) -> np.ndarray:
    return dec.bases[0] @ random_complex(rng, dec.bases[0].shape[1], scale)


def random_admissible_omega(L: LieAlgebra, dec: GradedDecomposition, rng: np.random.Generator,
                            k: complex | None = None, tau: complex | None = None, scale: float = 0.3,
                            margin: float = 0.05, tries: int = 200, settings: Settings = DEFAULT) -> np.ndarray:
    """Random ``omega`` in G_0 whose domain margin exceeds ``margin``."""
    for _ in range(tries):
        om = random_g0(dec, rng, scale)
        rep = in_domain(L, dec, DomainQuery(om, k=k, tau=tau), settings)
        if rep.admitted and rep.min_margin > margin:
            return om
    raise RuntimeError("could not sample an admissible omega; reduce scale")


def lattice_distance(z: complex, tau: complex) -> float:
    return lattice_nearest(z, tau)[0]


def random_z_triple(tau: complex, rng: np.random.Generator, min_dist: float = 0.05, tries: int = 1000):
    """``(z1, z2, z3)`` with every difference at least ``min_dist`` from the lattice Z + tau Z."""
    tau = complex(tau)
    for _ in range(tries):
        z = rng.uniform(-0.5, 0.5, 3) + 1j * rng.uniform(-0.5, 0.5, 3) * tau.imag
        diffs = (z[0] - z[1], z[0] - z[2], z[1] - z[2])
        if all(lattice_distance(d, tau) > min_dist for d in diffs):
            return tuple(complex(v) for v in z)
    raise RuntimeError("could not sample spectral parameters off the lattice")


def random_strip_point(tau: complex, rng: np.random.Generator, inset: float = 0.15) -> complex:
    """``z`` with ``-Im tau < Im z < 0``, kept ``inset * Im tau`` away from the strip edges."""
    t = complex(tau).imag
    return complex(rng.uniform(-0.5, 0.5) + 1j * rng.uniform(-(1 - inset) * t, -inset * t))


def random_off_lattice(tau: complex, rng: np.random.Generator, min_dist: float = 0.05) -> complex:
    tau = complex(tau)
    while True:
        z = complex(rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1) * tau.imag)
        if lattice_distance(z, tau) > min_dist:
            return z
