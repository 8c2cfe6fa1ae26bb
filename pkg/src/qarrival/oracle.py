"""Independent grid propagator for the Schrodinger equation with complex V.

Space: continuous Lagrange finite elements of degree P on Gauss-Lobatto
nodes, element edges aligned with every discontinuity of V, consistent mass
matrix, Dirichlet ends behind optional absorbing pads.

Time: the diagonal Pade approximant of exp(-i dt H/hbar) in factored form,

    psi <- (M - i dt H/(hbar rho_k))^-1 (M + i dt H/(hbar rho_k)) psi,  k = 1..m,

where rho_k are the roots of the Pade numerator.  m = 1 is Crank-Nicolson.
Every factor is A-stable, and for real V the whole step is unitary in the
M-inner product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy import sparse
from scipy.sparse.linalg import splu

from .capscatter import LayeredPotential
from .wavepacket import ATOMIC, Units


class OracleAccuracyError(RuntimeError):
    """Step halving changed the result by more than the tolerance."""


@dataclass(frozen=True)
class GridSpec:
    x_min: float = -2.4
    x_max: float = 0.8
    h: float = 0.0025  # element size
    degree: int = 8
    dt: float = 1e-6
    pad: float = 0.1  # absorbing pad width at each end
    pad_strength: float = 5e4  # |Im V| at the outer end of a pad (quadratic ramp)
    pade: int = 4  # m of the diagonal (m, m) approximant; 1 is Crank-Nicolson

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("need x_min < x_max")
        if self.h <= 0 or self.dt <= 0 or self.degree < 1 or self.pade < 1:
            raise ValueError("h, dt, degree and pade must be positive")
        if 2 * self.pad >= self.x_max - self.x_min:
            raise ValueError("pads cover the whole domain")

    def node_spacing(self) -> float:
        return self.h / self.degree

    def resolves(self, p_hi: float, hbar: float = 1.0) -> bool:
        """Mean node spacing <= 2 pi hbar/(10 p_hi)."""
        return self.node_spacing() <= 2.0 * math.pi * hbar / (10.0 * p_hi)

    def halved(self) -> GridSpec:
        return GridSpec(self.x_min, self.x_max, self.h / 2, self.degree, self.dt / 2, self.pad,
                        self.pad_strength, self.pade)


def pade_roots(m: int) -> np.ndarray:
    """Roots of the numerator of the (m, m) Pade approximant of exp(z)."""
    coef = [math.factorial(2 * m - j) * math.factorial(m)
            / (math.factorial(2 * m) * math.factorial(j) * math.factorial(m - j))
            for j in range(m + 1)]
    return np.roots(coef[::-1])


def _gll_nodes(p: int) -> np.ndarray:
    inner = npleg.Legendre.basis(p).deriv().roots()
    return np.concatenate([[-1.0], np.sort(inner.real), [1.0]])


class _Reference:
    """Lagrange basis on GLL nodes, tabulated at Gauss points."""

    def __init__(self, degree: int, nquad: int):
        self.nodes = _gll_nodes(degree)
        inv = np.linalg.inv(npleg.legvander(self.nodes, degree))
        self.inv = inv
        self.gx, self.gw = npleg.leggauss(nquad)
        self.phi = self.values(self.gx)
        self.dphi = self.derivs(self.gx)

    def values(self, s):
        return npleg.legvander(np.asarray(s), len(self.nodes) - 1) @ self.inv

    def derivs(self, s):
        n = len(self.nodes) - 1
        out = np.zeros((np.size(s), n + 1))
        for j in range(n + 1):
            out[:, j] = npleg.legval(s, npleg.legder(self.inv[:, j]))
        return out


def _mesh(grid: GridSpec, pot: LayeredPotential, extra=()):
    brk = {grid.x_min, grid.x_max, grid.x_min + grid.pad, grid.x_max - grid.pad}
    brk.update(float(e) for e in pot.edges)
    brk.update(float(e) for e in extra if grid.x_min < e < grid.x_max)
    brk = np.array(sorted(brk))
    edges = [brk[:1]]
    for a, b in zip(brk[:-1], brk[1:]):
        n = max(1, int(math.ceil((b - a) / grid.h - 1e-9)))
        edges.append(np.linspace(a, b, n + 1)[1:])
    return np.concatenate(edges)


@dataclass
class OracleResult:
    times: np.ndarray
    states: list  # coefficient vectors at the requested times
    norms: np.ndarray
    pad_loss: float  # probability absorbed by the boundary pads up to the last time
    propagator: FemPropagator = field(repr=False)

    def evaluate(self, k: int, x):
        return self.propagator.evaluate(self.states[k], x)


class FemPropagator:
    def __init__(self, grid: GridSpec, pot: LayeredPotential, units: Units = ATOMIC,
                 breakpoints=()):
        self.grid = grid
        self.pot = pot
        self.units = units
        self.edges = _mesh(grid, pot, breakpoints)
        self.ref = _Reference(grid.degree, grid.degree + 3)
        p = grid.degree
        ne = self.edges.size - 1
        self.n_dof = ne * p + 1
        self.h_el = np.diff(self.edges)
        mid = 0.5 * (self.edges[:-1] + self.edges[1:])
        # quadrature points per element
        self.qx = mid[:, None] + 0.5 * self.h_el[:, None] * self.ref.gx[None, :]
        self.qw = 0.5 * self.h_el[:, None] * self.ref.gw[None, :]
        self.dofs = np.arange(p + 1)[None, :] + p * np.arange(ne)[:, None]

        vq = self.potential(self.qx)
        phi, dphi = self.ref.phi, self.ref.dphi
        m_loc = np.einsum("eq,qi,qj->eij", self.qw, phi, phi)
        k_loc = np.einsum("eq,qi,qj->eij", self.qw * (2.0 / self.h_el[:, None]) ** 2, dphi, dphi)
        v_loc = np.einsum("eq,qi,qj->eij", self.qw * vq, phi, phi)
        imv_cap = np.where((self.qx >= 0) & (self.qx <= pot.length), -vq.imag, 0.0)
        imv_pad = np.where((self.qx < 0) | (self.qx > pot.length), -vq.imag, 0.0)
        rows = np.repeat(self.dofs, p + 1, axis=1).ravel()
        cols = np.tile(self.dofs, (1, p + 1)).ravel()

        def assemble(loc):
            return sparse.csc_matrix((loc.ravel(), (rows, cols)), shape=(self.n_dof,) * 2)

        kin = units.hbar**2 / (2.0 * units.mass)
        self.mass = assemble(m_loc.astype(complex))
        self.ham = assemble(kin * k_loc + v_loc)
        self.cap_mass = assemble(np.einsum("eq,qi,qj->eij", self.qw * imv_cap, phi, phi))
        self.pad_mass = assemble(np.einsum("eq,qi,qj->eij", self.qw * imv_pad, phi, phi))
        self.inner = slice(1, self.n_dof - 1)  # Dirichlet ends removed
        self._factors = None

    def potential(self, x):
        """Absorber layers inside [0, L], quadratic imaginary pads at the ends."""
        g, pot = self.grid, self.pot
        x = np.asarray(x, dtype=float)
        v = np.zeros(x.shape, dtype=complex)
        inside = (x >= 0) & (x <= pot.length)
        j = np.clip((x[inside] / pot.width).astype(int), 0, pot.n - 1)
        v[inside] = pot.array[j]
        lpad = x < g.x_min + g.pad
        rpad = x > g.x_max - g.pad
        v[lpad] += -1j * g.pad_strength * ((g.x_min + g.pad - x[lpad]) / g.pad) ** 2
        v[rpad] += -1j * g.pad_strength * ((x[rpad] - g.x_max + g.pad) / g.pad) ** 2
        return v

    # projection and evaluation
    def project(self, fn) -> np.ndarray:
        """L2 projection of a callable amplitude (vectorized in x)."""
        vals = fn(self.qx.ravel()).reshape(self.qx.shape)
        loc = np.einsum("eq,qi->ei", self.qw * vals, self.ref.phi)
        rhs = np.zeros(self.n_dof, dtype=complex)
        np.add.at(rhs, self.dofs, loc)
        c = np.zeros(self.n_dof, dtype=complex)
        mi = self.mass[self.inner][:, self.inner]
        c[self.inner] = splu(mi.tocsc()).solve(rhs[self.inner])
        return c

    def evaluate(self, c, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        e = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.edges.size - 2)
        s = 2.0 * (x - self.edges[e]) / self.h_el[e] - 1.0
        basis = self.ref.values(s)
        return np.einsum("ni,ni->n", basis, c[self.dofs[e]])

    def norm(self, c) -> float:
        return float(np.real(np.vdot(c, self.mass @ c)))

    def absorber_rate(self, c) -> float:
        """(2/hbar) int_0^L |Im V| |psi|^2 dx."""
        return float(2.0 / self.units.hbar * np.real(np.vdot(c, self.cap_mass @ c)))

    def pad_rate(self, c) -> float:
        return float(2.0 / self.units.hbar * np.real(np.vdot(c, self.pad_mass @ c)))

    def l2_diff(self, c, fn, a: float, b: float) -> float:
        """L2 norm over [a, b] of the grid solution minus ``fn`` (a, b on element edges)."""
        sel = (self.edges[:-1] >= a - 1e-12) & (self.edges[1:] <= b + 1e-12)
        qx, qw = self.qx[sel], self.qw[sel]
        fem = np.einsum("qi,ei->eq", self.ref.phi, c[self.dofs[sel]])
        ref = fn(qx.ravel()).reshape(qx.shape)
        return float(np.sqrt(np.sum(qw * np.abs(fem - ref) ** 2)))

    def l2_norm(self, c, a: float, b: float) -> float:
        return self.l2_diff(c, lambda x: np.zeros_like(x, dtype=complex), a, b)

    # time stepping
    def _build_factors(self):
        dt, hb = self.grid.dt, self.units.hbar
        m = self.mass[self.inner][:, self.inner]
        h = self.ham[self.inner][:, self.inner]
        facs = []
        for rho in pade_roots(self.grid.pade):
            lhs = (m - (1j * dt / (hb * rho)) * h).tocsc()
            rhs = (m + (1j * dt / (hb * rho)) * h).tocsr()
            facs.append((splu(lhs), rhs))
        self._factors = facs

    def step(self, c) -> np.ndarray:
        if self._factors is None:
            self._build_factors()
        y = c[self.inner]
        for lu, rhs in self._factors:
            y = lu.solve(rhs @ y)
        out = np.zeros_like(c)
        out[self.inner] = y
        return out

    def run(self, c0, times) -> OracleResult:
        times = np.asarray(times, dtype=float)
        steps = np.rint(times / self.grid.dt).astype(int)
        if np.any(np.abs(steps * self.grid.dt - times) > 1e-9 * np.maximum(times, self.grid.dt)):
            raise ValueError("checkpoint times must be multiples of the time step")
        if np.any(np.diff(steps) < 0) or np.any(steps < 0):
            raise ValueError("checkpoint times must be non-negative and increasing")
        c = c0.copy()
        states, norms = [], []
        pad_loss = 0.0
        pr_prev = self.pad_rate(c)
        n = 0
        for target in steps:
            while n < target:
                c = self.step(c)
                n += 1
                pr = self.pad_rate(c)
                pad_loss += 0.5 * (pr + pr_prev) * self.grid.dt
                pr_prev = pr
            states.append(c.copy())
            norms.append(self.norm(c))
        return OracleResult(times, states, np.array(norms), pad_loss, self)


def propagate(grid: GridSpec, pot: LayeredPotential, initial, times, units: Units = ATOMIC,
              breakpoints=()) -> OracleResult:
    """Project ``initial`` (callable of x) onto the grid and evolve to ``times``."""
    fem = FemPropagator(grid, pot, units, breakpoints)
    c0 = fem.project(initial)
    return fem.run(c0, times)


def smooth_window(x, lo: float, hi: float, ramp: float):
    """C-infinity window: 1 on [lo + ramp, hi - ramp], 0 outside [lo, hi]."""
    def step(u):
        u = np.clip(u, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
            b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
        return a / (a + b)

    x = np.asarray(x, dtype=float)
    return step((x - lo) / ramp) * step((hi - x) / ramp)


def write_checkpoint(path, x, psi) -> None:
    """One line per grid point: x Re(psi) Im(psi), 17 significant digits."""
    with open(path, "w") as fh:
        for xi, v in zip(np.ravel(x), np.ravel(psi)):
            fh.write(f"{xi:.17g} {v.real:.17g} {v.imag:.17g}\n")


def read_checkpoint(path):
    data = np.loadtxt(path, ndmin=2)
    return data[:, 0], data[:, 1] + 1j * data[:, 2]
