"""Least-squares calibration fits and the simplex optimizer they share.

Objectives route through eigen-solvers, so everything is derivative-free:
a deterministic Nelder-Mead simplex with scale-based initial offsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .constants import PH, UA
from .coupled import Controls, solve_coupled, transition_lines
from .params import CouplerParams, SquidParams, SystemParams
from .squid import MonostablePotentialError, persistent_current

SINGULARITY_MARGIN = 0.05


class FitError(RuntimeError):
    """Fit could not be performed on the given data."""


class DegenerateDataError(FitError):
    """Data carries no information about one or more parameters."""


class InsufficientCoverageError(FitError):
    """Spectroscopy dataset lacks the sweeps needed to constrain the fit."""


class CouplerRangeError(ValueError):
    """Requested coupler strength or bias outside the valid branch."""


@dataclass(frozen=True)
class FitResult:
    """Named best-fit parameters, residual, and convergence record."""

    parameters: dict
    residual_rms: float
    iterations: int
    converged: bool
    history: tuple = field(default=(), repr=False)   # best objective per iteration

    def values(self, names) -> np.ndarray:
        return np.array([self.parameters[n] for n in names])


def nelder_mead(objective, x0, scale=0.1, tol=1e-9, max_iter=2000,
                names=None) -> FitResult:
    """Deterministic Nelder-Mead minimization.

    The initial simplex is x0 plus scale[i] along each coordinate.
    Converged when both the simplex diameter (inf-norm) and the objective
    spread fall below tol.
    """
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (n,)).copy()
    if names is None:
        names = [f"x{i}" for i in range(n)]
    f0 = float(objective(x0))
    if not np.isfinite(f0):
        raise FitError(f"objective not finite at the start point: {f0}")
    simplex = [x0]
    for i in range(n):
        xi = x0.copy()
        xi[i] += scale[i] if scale[i] != 0 else 0.1
        simplex.append(xi)
    simplex = np.array(simplex)
    fvals = np.array([f0] + [float(objective(x)) for x in simplex[1:]])

    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    history = []
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        history.append(float(fvals[0]))
        diameter = np.max(np.abs(simplex[1:] - simplex[0]))
        spread = fvals[-1] - fvals[0]
        if diameter < tol and spread < tol:
            converged = True
            break
        centroid = simplex[:-1].mean(axis=0)
        xr = centroid + alpha * (centroid - simplex[-1])
        fr = float(objective(xr))
        if fr < fvals[0]:
            xe = centroid + gamma * (centroid - simplex[-1])
            fe = float(objective(xe))
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            xc = centroid + rho * (simplex[-1] - centroid)
            fc = float(objective(xc))
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
            else:
                simplex[1:] = simplex[0] + sigma * (simplex[1:] - simplex[0])
                fvals[1:] = [float(objective(x)) for x in simplex[1:]]
    order = np.argsort(fvals, kind="stable")
    simplex, fvals = simplex[order], fvals[order]
    return FitResult(parameters=dict(zip(names, simplex[0])),
                     residual_rms=float(fvals[0]),
                     iterations=iterations, converged=converged,
                     history=tuple(history))


# --- coupler model ----------------------------------------------------------

def coupler_m12(cp: CouplerParams, phico_x: float) -> float:
    """Mutual inductance (henries) at a coupler bias given in Phi0 units."""
    c = np.cos(np.pi * phico_x)        # cos(phi/2) with phi = 2 pi Phi_co/Phi0
    denom = 1.0 + cp.beta * c
    if abs(denom) <= SINGULARITY_MARGIN:
        raise CouplerRangeError(
            f"coupler bias {phico_x} is within {SINGULARITY_MARGIN} of the "
            "1 + beta cos singularity")
    return cp.msq_over_l * cp.beta * c / denom + cp.m12_offset


def bias_for_m12(cp: CouplerParams, target: float) -> float:
    """Coupler bias (Phi0 units) realizing a target mutual inductance (H).

    Inverts the coupler model on the principal branch where
    1 + beta cos(phi/2) > 0 and the curve is monotone.
    """
    if abs(target) > cp.m12_max_abs:
        raise CouplerRangeError(
            f"|target| = {abs(target) / PH:.3f} pH exceeds the coupler range "
            f"{cp.m12_max_abs / PH:.3f} pH")
    hi_cos = (SINGULARITY_MARGIN - 1.0) / cp.beta      # lowest usable cos
    lo = 0.0
    hi = float(np.arccos(max(hi_cos, -1.0)) / np.pi)
    f = lambda x: coupler_m12(cp, x) - target
    if f(lo) < 0 or f(hi) > 0:
        raise CouplerRangeError("target not bracketed on the principal branch")
    root = brentq(f, lo, hi, xtol=1e-12)
    return float(root)


def fit_coupler(phico: np.ndarray, m12: np.ndarray, seed=None,
                tol: float = 1e-12, max_iter: int = 4000) -> FitResult:
    """Fit (msq_over_l, beta, m12_offset) to coupler calibration data.

    phico in Phi0 units, m12 in henries.  Parameters are reported in pH
    (beta dimensionless).
    """
    phico = np.asarray(phico, dtype=float)
    m12 = np.asarray(m12, dtype=float)
    if len(phico) < 6:
        raise FitError("need at least 6 calibration points")
    span = m12.max() - m12.min()
    if span < 1e-6 * max(abs(m12).max(), PH):
        raise DegenerateDataError("coupler data is constant; parameters unresolvable")
    if seed is None:
        seed = (span / PH, 1.0, float(np.median(m12)) / PH)

    def objective(x):
        msq, beta, off = x
        if msq <= 0 or beta <= 0:
            return 1e6
        c = np.cos(np.pi * phico)
        denom = 1.0 + beta * c
        if np.any(np.abs(denom) < SINGULARITY_MARGIN):
            return 1e6
        model = msq * PH * beta * c / denom + off * PH
        return float(np.sqrt(np.mean((model - m12) ** 2))) / PH

    return nelder_mead(objective, seed, scale=(0.5, 0.05, 0.2), tol=tol,
                       max_iter=max_iter,
                       names=("msq_over_l_pH", "beta", "m12_offset_pH"))


# --- classical persistent-current fit ---------------------------------------

def degeneracy_bias(phicjj_x: float) -> float:
    """Qubit flux bias (Phi0 units) of the symmetric double well.

    Zero where the effective Josephson energy is negative
    (cos(pi phicjj) < 0) and half a flux quantum where it is positive.
    """
    return 0.0 if np.cos(np.pi * phicjj_x) < 0 else 0.5


def persistent_current_model(ic_uA: float, l_pH: float, phicjj: np.ndarray,
                             lcjj_pH: float = 17.0, c_fF: float = 119.5) -> np.ndarray:
    """Classical |Ip| (amps) at the degeneracy bias; zero where monostable."""
    p = SquidParams.from_units(ic_uA, l_pH, lcjj_pH, c_fF)
    out = np.empty(len(phicjj))
    for i, f in enumerate(phicjj):
        try:
            out[i] = persistent_current(p, float(f), degeneracy_bias(float(f)))
        except MonostablePotentialError:
            out[i] = 0.0
    return out


def fit_persistent_current(phicjj: np.ndarray, ip: np.ndarray, seed=(2.0, 300.0),
                           lcjj_pH: float = 17.0, c_fF: float = 119.5,
                           tol: float = 1e-9, max_iter: int = 800) -> FitResult:
    """Fit (Ic, L) to measured persistent current versus cjj bias.

    phicjj in Phi0 units spanning at least one flux quantum of the
    high-barrier regime, ip in amps.  Reports ic_uA and l_pH.
    """
    phicjj = np.asarray(phicjj, dtype=float)
    ip = np.asarray(ip, dtype=float)
    if phicjj.max() - phicjj.min() < 1.0:
        raise FitError("data must span >= 1 Phi0 of cjj bias")

    def objective(x):
        ic_uA, l_pH = x
        if ic_uA <= 0 or l_pH <= 0:
            return 1e6
        model = persistent_current_model(ic_uA, l_pH, phicjj, lcjj_pH, c_fF)
        return float(np.sqrt(np.mean((model - ip) ** 2))) / UA

    return nelder_mead(objective, seed, scale=(0.2, 20.0), tol=tol,
                       max_iter=max_iter, names=("ic_uA", "l_pH"))


# --- joint spectroscopy fit --------------------------------------------------

@dataclass(frozen=True)
class SpectroscopySweep:
    """One spectroscopy sweep: swept qubit, partner cjj setting, line data.

    points are (swept phicjj, line index >= 1, frequency GHz); a partner
    setting of 0.5 is the monostable effective-single-qubit configuration.
    """

    sweep_qubit: int
    partner_phicjj: float
    points: tuple

    def __post_init__(self):
        if self.sweep_qubit not in (1, 2):
            raise ValueError("sweep_qubit must be 1 or 2")


MONOSTABLE_CJJ = 0.5


def _sweep_lines(sys_params: SystemParams, sweep: SpectroscopySweep,
                 n_levels: int) -> np.ndarray:
    out = np.empty(len(sweep.points))
    kmax = max(int(idx) for _, idx, _ in sweep.points) + 1
    for i, (f, idx, _) in enumerate(sweep.points):
        if sweep.sweep_qubit == 1:
            c = Controls(phicjj1_x=float(f), phicjj2_x=sweep.partner_phicjj)
        else:
            c = Controls(phicjj1_x=sweep.partner_phicjj, phicjj2_x=float(f))
        _, _, spec = solve_coupled(sys_params, c, n_levels=n_levels, k=kmax)
        out[i] = transition_lines(spec, "ground")[int(idx) - 1]
    return out


def fit_spectroscopy(sweeps, ic1_uA: float, l1_pH: float, ic2_uA: float,
                     l2_pH: float, seed, coupler: CouplerParams | None = None,
                     n_levels: int = 10, tol: float = 1e-7,
                     max_iter: int = 600) -> FitResult:
    """Joint fit of (C1, C2, C12, Lcjj1, Lcjj2) to spectroscopy line data.

    sweeps is a list of SpectroscopySweep covering both effective
    single-qubit (partner monostable) and two-qubit settings; seed is the
    design-value starting point (c1_fF, c2_fF, c12_fF, lcjj1_pH, lcjj2_pH).
    Known Ic and L come from the classical persistent-current fits.
    """
    sweeps = list(sweeps)
    if not sweeps or not any(len(s.points) for s in sweeps):
        raise InsufficientCoverageError("no spectroscopy data")
    partner_settings = {round(s.partner_phicjj, 9) for s in sweeps}
    if len(partner_settings) < 2:
        raise InsufficientCoverageError(
            "need at least two distinct partner cjj settings to separate "
            "qubit and coupling capacitances")
    if not any(abs(s.partner_phicjj - MONOSTABLE_CJJ) < 1e-9 for s in sweeps):
        raise InsufficientCoverageError(
            "need an effective single-qubit sweep (partner monostable)")
    coupler = coupler or CouplerParams.from_units(10.77, 1.416, 1.848, 8.145)
    observed = np.concatenate([[p[2] for p in s.points] for s in sweeps])

    def objective(x):
        c1, c2, c12, lcjj1, lcjj2 = x
        if min(c1, c2, lcjj1, lcjj2) <= 0 or c12 < 0:
            return 1e6
        sp = SystemParams(
            qubit1=SquidParams.from_units(ic1_uA, l1_pH, lcjj1, c1),
            qubit2=SquidParams.from_units(ic2_uA, l2_pH, lcjj2, c2),
            c12=c12 * 1e-15, coupler=coupler)
        model = np.concatenate([_sweep_lines(sp, s, n_levels) for s in sweeps])
        return float(np.sqrt(np.mean((model - observed) ** 2)))

    return nelder_mead(objective, seed, scale=(4.0, 4.0, 5.0, 0.6, 0.6),
                       tol=tol, max_iter=max_iter,
                       names=("c1_fF", "c2_fF", "c12_fF", "lcjj1_pH", "lcjj2_pH"))
