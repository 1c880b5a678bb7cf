"""Numerical verification tools: finite-difference gradient checks, a
brute-force localized-sparse-eigenvalue probe on small instances, and the
gradient sup-norm scaling table.

The probe enumerates supports exhaustively but can only sample the l1 ball
of coefficient vectors, so rho_plus is a lower bound on the true sup and
rho_minus an upper bound on the true inf; treat the output as a
qualitative positivity diagnostic, not a certificate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from .cox import CoxObjective
from .data import (ConstantSignal, Design, Independent, SimulationConfig,
                   SurvivalDataset, simulate_dataset)
from .errors import CapabilityError

__all__ = ["LseReport", "lse_probe", "grad_check",
           "gradient_sup_norm_scaling"]

LSE_P_CAP = 20
LSE_SUPPORT_CAP = 2_000_000


@dataclass(frozen=True)
class LseReport:
    m: int
    r: float
    rho_minus: float
    rho_plus: float
    probe_count: int
    beta_samples: str

    def to_dict(self):
        return asdict(self)


def _l1_sphere_sample(rng, p, radius):
    # Dirichlet(1,..,1) magnitudes with random signs are uniform on the
    # l1 sphere of the given radius
    w = rng.dirichlet(np.ones(p))
    signs = rng.choice((-1.0, 1.0), size=p)
    return radius * w * signs


def lse_probe(dataset: SurvivalDataset, beta_star, m: int, r: float,
              n_beta_samples: int = 0, seed: int = 0) -> LseReport:
    """Extreme eigenvalues of m-column Hessian submatrices over probed
    coefficient points within l1 distance r of beta_star.

    Supports are enumerated exhaustively at size min(m, p); by eigenvalue
    interlacing that already attains the extrema over all supports of size
    <= m. Probed points are beta_star plus n_beta_samples draws on the l1
    sphere of radius r.
    """
    p = dataset.p
    if p > LSE_P_CAP:
        raise CapabilityError(f"lse_probe capped at p <= {LSE_P_CAP}, got {p}")
    if not (1 <= m <= p):
        raise CapabilityError(f"m must lie in [1, p]; got m={m}, p={p}")
    if r < 0:
        raise ValueError("radius r must be non-negative")
    k = min(m, p)
    n_supports = math.comb(p, k)
    if n_supports > LSE_SUPPORT_CAP:
        raise CapabilityError(
            f"{n_supports} supports exceed the enumeration cap {LSE_SUPPORT_CAP}")

    beta_star = np.asarray(beta_star, dtype=np.float64)
    rng = np.random.default_rng(seed)
    points = [beta_star]
    if r > 0:
        points += [beta_star + _l1_sphere_sample(rng, p, r)
                   for _ in range(n_beta_samples)]

    obj = CoxObjective(dataset)
    rho_minus = np.inf
    rho_plus = -np.inf
    probes = 0
    for beta in points:
        hess = obj.hessian(beta)
        for support in itertools.combinations(range(p), k):
            idx = np.asarray(support, dtype=np.intp)
            sub = hess[np.ix_(idx, idx)]
            eig = np.linalg.eigvalsh(sub)
            rho_minus = min(rho_minus, float(eig[0]))
            rho_plus = max(rho_plus, float(eig[-1]))
            probes += 1
    desc = f"center + {len(points) - 1} l1-sphere samples (seed={seed})"
    return LseReport(m=m, r=float(r), rho_minus=rho_minus, rho_plus=rho_plus,
                     probe_count=probes, beta_samples=desc)


def grad_check(dataset: SurvivalDataset, beta, h: float = 1e-5,
               gradient=None) -> float:
    """Max deviation of the analytic gradient from central differences,
    scaled by 1 + ||analytic||_inf. `gradient` can inject a replacement
    vector (negative-control hook)."""
    obj = CoxObjective(dataset)
    beta = np.asarray(beta, dtype=np.float64)
    analytic = obj.gradient(beta) if gradient is None else np.asarray(gradient)
    fd = np.empty_like(analytic)
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = h
        fd[j] = (obj.nll(beta + e) - obj.nll(beta - e)) / (2 * h)
    scale = 1.0 + float(np.abs(analytic).max())
    return float(np.abs(analytic - fd).max() / scale)


def gradient_sup_norm_scaling(reps: int, n: int, p_list, seed: int = 0,
                              s: int = 10, signal: float = 0.8,
                              design: Design = Independent()):
    """Median ||grad at the generating coefficients||_inf per p, for
    eyeballing the sqrt(log p / n) rate."""
    out = []
    for pi, p in enumerate(p_list):
        norms = []
        for rep in range(reps):
            ss = np.random.SeedSequence([int(seed), pi, rep])
            cfg = SimulationConfig(n=n, p=int(p), s=max(1, min(s, int(p))),
                                   signal=ConstantSignal(signal), design=design,
                                   seed=int(ss.generate_state(1, np.uint64)[0]))
            dataset, beta_star = simulate_dataset(cfg)
            g = CoxObjective(dataset).gradient(beta_star)
            norms.append(float(np.abs(g).max()))
        out.append((int(p), float(np.median(norms))))
    return out
