"""Single rf-SQUID physics on a flux grid.

The cjj loop is eliminated adiabatically: for every qubit flux the
two-loop potential is minimized over the cjj flux, giving the effective
1D potential.  The resulting Hamiltonian Q^2/2C + U_eff(Phi) is
discretized with a central second-order finite difference.

Flux arguments are fractions of Phi0; energies are joules unless a name
says otherwise.
"""

from __future__ import annotations

import functools

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .constants import PHI0, HBAR, GHZ
from .grid import (FluxGrid, FluxGridOperator, EigenSystem, BoundaryLeakError,
                   diagonalize)
from .params import SquidParams

CJJ_WINDOW = 0.25          # minimization window, +- Phi0 around the cjj bias
CJJ_TOL = 1e-12            # convergence tolerance on phi_cjj, Phi0 units
CJJ_MAX_ITER = 200
LEAK_BOUND = 1e-6          # max boundary amplitude relative to peak
GRID_MIN_N = 257
GRID_MAX_N = 1501
GRID_POINTS_PER_SIGMA = 8  # target spacing = sigma / 8
GRID_TAIL_SIGMAS = 10.0    # halfwidth margin beyond the outermost well


class MonostablePotentialError(RuntimeError):
    """Operation requires a bistable potential but only one minimum exists."""


class TargetOutOfRangeError(ValueError):
    """Requested tunneling amplitude is not achievable on the cjj branch."""


class MinimizerError(RuntimeError):
    """cjj minimization failed to converge."""


def josephson_energy(p: SquidParams) -> float:
    """Total Josephson energy Phi0 Ic / 2 pi in joules."""
    return PHI0 * p.ic / (2.0 * np.pi)


def two_loop_potential(p: SquidParams, phiq, phicjj, phiq_x: float, phicjj_x: float):
    """Full two-loop potential U(phi_q, phi_cjj); all fluxes in Phi0 units."""
    ej = josephson_energy(p)
    return ((phiq - phiq_x) ** 2 * PHI0**2 / (2.0 * p.l)
            + (phicjj - phicjj_x) ** 2 * PHI0**2 / (2.0 * p.lcjj)
            - ej * np.cos(np.pi * phicjj) * np.cos(2.0 * np.pi * phiq))


def _minimize_cjj(p: SquidParams, phicjj_x: float, cosq: np.ndarray) -> np.ndarray:
    """Minimizing phi_cjj (Phi0 units) for each cos(2 pi phi_q) value.

    The inner problem is strictly convex whenever 1/Lcjj exceeds
    EJ (pi/Phi0)^2, which holds for any Lcjj << L device; Newton on the
    stationarity condition then converges globally.  Falls back to
    bounded scalar minimization otherwise.
    """
    ej = josephson_energy(p)
    lo, hi = phicjj_x - CJJ_WINDOW, phicjj_x + CJJ_WINDOW
    quad = PHI0**2 / p.lcjj                     # d2/dx2 of the quadratic term
    jos = ej * np.pi**2                         # max |d2/dx2| of the cos term
    if quad > 2.0 * jos:
        x = np.full_like(cosq, phicjj_x)
        for _ in range(CJJ_MAX_ITER):
            g1 = (x - phicjj_x) * quad + ej * np.pi * cosq * np.sin(np.pi * x)
            g2 = quad + jos * cosq * np.cos(np.pi * x)
            step = g1 / g2
            x = np.clip(x - step, lo, hi)
            if np.max(np.abs(step)) < CJJ_TOL:
                return x
        raise MinimizerError("cjj Newton iteration did not converge")
    # non-convex regime: golden-section / parabolic per grid point
    out = np.empty_like(cosq)
    for i, cq in np.ndenumerate(cosq):
        res = minimize_scalar(
            lambda xc: (xc - phicjj_x) ** 2 * quad / 2.0
            - ej * np.cos(np.pi * xc) * cq,
            bounds=(lo, hi), method="bounded",
            options={"xatol": CJJ_TOL, "maxiter": CJJ_MAX_ITER})
        if not res.success:
            raise MinimizerError(f"cjj minimization failed at cos={cq}")
        out[i] = res.x
    return out


def effective_potential(p: SquidParams, phicjj_x: float, phiq_x: float, phiq):
    """U_eff(phi_q) = min over phi_cjj of the two-loop potential, in joules.

    phiq may be a scalar or array of Phi0 fractions.
    """
    phiq = np.asarray(phiq, dtype=float)
    cosq = np.cos(2.0 * np.pi * phiq)
    xc = _minimize_cjj(p, phicjj_x, cosq)
    u = two_loop_potential(p, phiq, xc, phiq_x, phicjj_x)
    return u if u.shape else float(u)


def effective_josephson_energy(p: SquidParams, phicjj_x: float) -> float:
    """Tunable EJ(phicjj_x) of the rough cjj elimination, in joules."""
    return josephson_energy(p) * np.cos(np.pi * phicjj_x)


def approx_effective_potential(p: SquidParams, phicjj_x: float, phiq_x: float, phiq):
    """Rough effective potential with the cjj loop frozen at its bias."""
    phiq = np.asarray(phiq, dtype=float)
    return ((phiq - phiq_x) ** 2 * PHI0**2 / (2.0 * p.l)
            - effective_josephson_energy(p, phicjj_x) * np.cos(2.0 * np.pi * phiq))


@functools.lru_cache(maxsize=4096)
def classical_geometry(p: SquidParams, c_tilde: float, phicjj_x: float, phiq_x: float):
    """Well positions (Phi0 units), ground-well sigma estimate, barrier top.

    Uses the rough potential on a dense scan; good enough for grid sizing
    and bistability classification.
    """
    xs = phiq_x + np.linspace(-0.6, 0.6, 2401)
    u = approx_effective_potential(p, phicjj_x, phiq_x, xs)
    interior = (u[1:-1] < u[:-2]) & (u[1:-1] <= u[2:])
    mins = xs[1:-1][interior]
    d = (xs[1] - xs[0]) * PHI0
    ig = int(np.argmin(u))
    ig = min(max(ig, 1), len(xs) - 2)
    curv = max((u[ig + 1] - 2.0 * u[ig] + u[ig - 1]) / d**2, 1.0 / max(p.l, 1e-9))
    omega = np.sqrt(curv / c_tilde)
    sigma = np.sqrt(HBAR / (2.0 * c_tilde * omega)) / PHI0
    barrier = None
    if len(mins) >= 2:
        i1 = int(np.searchsorted(xs, mins[0]))
        i2 = int(np.searchsorted(xs, mins[-1]))
        barrier = float(xs[i1 + int(np.argmax(u[i1:i2 + 1]))])
    return tuple(float(m) for m in mins), float(sigma), barrier


def make_grid(p: SquidParams, c_tilde: float, phicjj_x: float, phiq_x: float) -> FluxGrid:
    """Adaptive grid: covers the classical wells plus tails, spacing ~ sigma/8."""
    mins, sigma, _ = classical_geometry(p, c_tilde, phicjj_x, phiq_x)
    spread = max((abs(m - phiq_x) for m in mins), default=0.0)
    halfwidth = max(spread + GRID_TAIL_SIGMAS * sigma, 0.05)
    n = int(np.ceil(2.0 * halfwidth / (sigma / GRID_POINTS_PER_SIGMA)))
    n = min(max(n, GRID_MIN_N), GRID_MAX_N)
    n += (n + 1) % 2
    return FluxGrid(center=phiq_x, halfwidth=halfwidth, n=n)


def _kinetic_coefficient(loaded_c: float, grid: FluxGrid) -> float:
    return HBAR**2 / (2.0 * loaded_c * grid.spacing**2)


def assemble_hamiltonian(u: np.ndarray, loaded_c: float, grid: FluxGrid) -> FluxGridOperator:
    """Kinetic (central FD2) plus a given potential array, as a grid operator."""
    t = _kinetic_coefficient(loaded_c, grid)
    m = np.diag(u + 2.0 * t)
    idx = np.arange(grid.n - 1)
    m[idx, idx + 1] = -t
    m[idx + 1, idx] = -t
    return FluxGridOperator(grid=grid, matrix=m)


def build_single_hamiltonian(p: SquidParams, loaded_c: float, phicjj_x: float,
                             phiq_x: float, grid: FluxGrid) -> FluxGridOperator:
    """Single-SQUID Hamiltonian Q^2/2C + U_eff on the grid.

    Raises BoundaryLeakError when the ground state has weight above
    LEAK_BOUND at the grid edge (grid too narrow).
    """
    if loaded_c <= 0:
        raise ValueError("loaded capacitance must be positive")
    u = effective_potential(p, phicjj_x, phiq_x, grid.points() / PHI0)
    op = assemble_hamiltonian(u, loaded_c, grid)
    ground = diagonalize(op, 1).states[:, 0]
    leak = max(abs(ground[0]), abs(ground[-1])) / np.max(np.abs(ground))
    if leak > LEAK_BOUND:
        raise BoundaryLeakError(
            f"ground-state boundary amplitude {leak:.2e} exceeds {LEAK_BOUND:.0e}; "
            "widen the grid")
    return op


@functools.lru_cache(maxsize=2048)
def solve_squid(p: SquidParams, loaded_c: float, phicjj_x: float, phiq_x: float,
                k: int = 10, grid: FluxGrid | None = None) -> EigenSystem:
    """Memoized build + diagonalize for one SQUID at one bias point.

    The doublet phase convention <chi1|(Phi - Phi_x)|chi2> > 0 keeps signs
    of downstream reduced parameters stable across sweeps (the
    max-amplitude rule is ambiguous for the odd state of a symmetric
    double well).
    """
    if grid is None:
        grid = make_grid(p, loaded_c, phicjj_x, phiq_x)
    op = build_single_hamiltonian(p, loaded_c, phicjj_x, phiq_x, grid)
    eig = diagonalize(op, k)
    if k >= 2:
        v = np.array(eig.states)
        x12 = float(((v[:, 0] * (grid.points() - phiq_x * PHI0)) * v[:, 1]).sum())
        if x12 < 0:
            v[:, 1] = -v[:, 1]
            eig = EigenSystem(grid=grid, energies=eig.energies, states=v)
    return eig


def matrix_elements(kind: str, eig: EigenSystem, phiq_x: float) -> np.ndarray:
    """Operator matrix in the eigenbasis.

    kind 'flux': <mu|(Phi - Phi_x)|nu>, real symmetric, Wb.
    kind 'charge': <mu|Q|nu> = -i hbar <mu|d/dPhi|nu>, imaginary
    antisymmetric (real eigenvectors), coulombs.
    """
    v = eig.states
    pts = eig.grid.points()
    if kind == "flux":
        return (v.T * (pts - phiq_x * PHI0)) @ v
    if kind == "charge":
        return -1j * charge_matrix_imag(eig)
    raise ValueError(f"unknown operator kind {kind!r}")


def charge_matrix_imag(eig: EigenSystem) -> np.ndarray:
    """Real antisymmetric W with Q = -i W in the eigenbasis."""
    v = eig.states
    d = eig.grid.spacing
    upper = v[1:, :]
    lower = v[:-1, :]
    # central difference; exact antisymmetry enforced by symmetrization
    w = HBAR * (lower.T @ upper - upper.T @ lower) / (2.0 * d)
    return 0.5 * (w - w.T)


def potential_minima(p: SquidParams, phicjj_x: float, phiq_x: float):
    """Local minima of U_eff (Phi0 units) within +-0.6 Phi0 of the bias.

    Dense scan followed by parabolic refinement; the scan spacing of
    2.5e-4 Phi0 puts the refined positions within ~1e-6 Phi0.
    """
    xs = phiq_x + np.linspace(-0.6, 0.6, 4801)
    u = effective_potential(p, phicjj_x, phiq_x, xs)
    interior = np.flatnonzero((u[1:-1] < u[:-2]) & (u[1:-1] <= u[2:])) + 1
    d = xs[1] - xs[0]
    out = []
    for i in interior:
        denom = u[i - 1] - 2.0 * u[i] + u[i + 1]
        shift = 0.5 * (u[i - 1] - u[i + 1]) / denom if denom > 0 else 0.0
        out.append(float(xs[i] + np.clip(shift, -1.0, 1.0) * d))
    return out


def persistent_current(p: SquidParams, phicjj_x: float, phiq_x: float) -> float:
    """Classical persistent current |Phi_q* - Phi_q^x| / L at the deepest well, amps.

    Raises MonostablePotentialError when U_eff has a single minimum.
    """
    mins = potential_minima(p, phicjj_x, phiq_x)
    if len(mins) < 2:
        raise MonostablePotentialError(
            f"potential at phicjj_x={phicjj_x} has {len(mins)} minimum; "
            "persistent current needs a bistable potential")
    depths = [effective_potential(p, phicjj_x, phiq_x, m) for m in mins]
    star = mins[int(np.argmin(depths))]
    return abs(star - phiq_x) * PHI0 / p.l


def gap_ghz(p: SquidParams, loaded_c: float, phicjj_x: float, phiq_x: float = 0.0,
            grid: FluxGrid | None = None) -> float:
    """Single-SQUID splitting (eps2 - eps1)/h in GHz."""
    eig = solve_squid(p, loaded_c, phicjj_x, phiq_x, k=2, grid=grid)
    return float((eig.energies[1] - eig.energies[0]) / GHZ)


CJJ_BRANCH = (0.5, 0.98)   # monotone barrier branch used for calibration
GAP_TOL_GHZ = 1e-3         # 1 MHz


def find_cjj_for_delta(p: SquidParams, loaded_c: float, target_ghz: float,
                       grid: FluxGrid | None = None) -> float:
    """cjj bias (Phi0 units) at which the single-SQUID gap equals target.

    Root-find on the monotone branch phicjj_x in (0.5, 0.98) where the
    barrier grows and the gap falls from the plasma frequency toward zero.
    """
    lo, hi = CJJ_BRANCH
    lo += 1e-9
    if target_ghz <= 0:
        raise TargetOutOfRangeError(f"target gap must be positive, got {target_ghz}")
    g = lambda f: gap_ghz(p, loaded_c, f, 0.0, grid) - target_ghz
    glo = g(lo)
    if glo < 0:
        raise TargetOutOfRangeError(
            f"target {target_ghz} GHz above the achievable maximum "
            f"{glo + target_ghz:.3f} GHz on the branch")
    # march toward the high barrier until the gap drops below target
    upper, prev = None, lo
    for f in np.linspace(0.55, hi, 24):
        if g(f) < 0:
            upper = f
            break
        prev = f
    if upper is None:
        raise TargetOutOfRangeError(
            f"target {target_ghz} GHz below the achievable minimum on the branch")
    root = brentq(g, prev, upper, xtol=1e-10)
    if abs(g(root)) > GAP_TOL_GHZ:
        raise TargetOutOfRangeError(
            f"root finding landed {abs(g(root)):.2e} GHz away from target")
    return float(root)
