"""Numerical tolerances shared by all modules."""

from dataclasses import dataclass, replace, asdict


@dataclass(frozen=True)
class Settings:
    tol_algebra: float = 1e-10
    tol_degenerate: float = 1e-10
    # minimum distance from a spectrum/argument to a forbidden point
    tol_pole: float = 1e-6
    # eigenvalues closer than cluster_rel * max(1, |A|) are merged
    cluster_rel: float = 1e-8
    # eigenvector conditioning above which a matrix counts as defective
    cond_max: float = 1e8
    fd_step: float = 1e-5
    # |Re w| beyond which coth(w/2) is replaced by sign(Re w)
    coth_saturation: float = 40.0

    def with_(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return asdict(self)


DEFAULT = Settings()
