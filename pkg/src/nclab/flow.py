"""Classical dynamics on T^n x R^n with H = p^2/2 + V(q) for trigonometric V:
Stormer-Verlet integration, free-flow pullback, dynamics comparison, Fejer
smoothing and the Gronwall estimate.  The torus is R^n / Z^n."""

from dataclasses import dataclass, field

import numpy as np

from nclab.linalg import ContractError

TWO_PI = 2.0 * np.pi


@dataclass
class PhasePoint:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.q = np.mod(np.atleast_1d(np.asarray(self.q, dtype=float)), 1.0)
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if self.q.shape != self.p.shape:
            raise ContractError("q and p differ in dimension")


def torus_delta(q1, q2):
    """Componentwise signed difference in [-1/2, 1/2)."""
    return np.mod(np.asarray(q1) - np.asarray(q2) + 0.5, 1.0) - 0.5


def distance(x: PhasePoint, y: PhasePoint) -> float:
    """sqrt(torus distance^2 + |p - p'|^2)."""
    return float(np.sqrt(np.sum(torus_delta(x.q, y.q) ** 2) + np.sum((x.p - y.p) ** 2)))


@dataclass
class TrigPotential:
    """V(q) = sum_b a_b exp(2 pi i b.q) with a_{-b} = conj(a_b)."""
    coeffs: dict
    dim: int = None

    def __post_init__(self):
        self.coeffs = {tuple(int(x) for x in np.atleast_1d(b)): complex(c)
                       for b, c in self.coeffs.items() if c != 0}
        if self.dim is None:
            if not self.coeffs:
                raise ContractError("empty potential needs an explicit dimension")
            self.dim = len(next(iter(self.coeffs)))
        for b, c in self.coeffs.items():
            if len(b) != self.dim:
                raise ContractError("mode dimension mismatch")
            mb = tuple(-x for x in b)
            if abs(self.coeffs.get(mb, 0) - np.conj(c)) > 1e-14 * max(1.0, abs(c)):
                raise ContractError(f"potential is not real: a_{mb} != conj(a_{b})")
        self._B = np.array(list(self.coeffs), dtype=float).reshape(-1, self.dim)
        self._c = np.array(list(self.coeffs.values()), dtype=complex)

    @classmethod
    def zero(cls, n: int):
        return cls({}, n)

    @classmethod
    def cosine(cls, b, amplitude: float = 1.0):
        """amplitude * cos(2 pi b.q)."""
        b = tuple(np.atleast_1d(b))
        return cls({b: amplitude / 2, tuple(-x for x in b): amplitude / 2})

    def _phases(self, q):
        return np.exp(TWO_PI * 1j * np.atleast_2d(q) @ self._B.T)

    def __call__(self, q) -> np.ndarray:
        if not self.coeffs:
            return np.zeros(np.atleast_2d(q).shape[0])
        return (self._phases(q) @ self._c).real

    def grad(self, q) -> np.ndarray:
        """Gradient at points q of shape (..., n); returns shape (m, n)."""
        if not self.coeffs:
            return np.zeros(np.atleast_2d(q).shape)
        return ((self._phases(q) * (TWO_PI * 1j * self._c)) @ self._B).real

    def without(self, b) -> "TrigPotential":
        """V - V_b with V_b = a_b e_b + a_{-b} e_{-b}."""
        b = tuple(np.atleast_1d(b))
        mb = tuple(-x for x in b)
        return TrigPotential({k: c for k, c in self.coeffs.items() if k not in (b, mb)}, self.dim)

    def part(self, b) -> "TrigPotential":
        b = tuple(np.atleast_1d(b))
        mb = tuple(-x for x in b)
        return TrigPotential({k: c for k, c in self.coeffs.items() if k in (b, mb)}, self.dim)

    def grad_lipschitz(self) -> float:
        """Upper bound sum |a_b| (2 pi)^2 |b|^2 on the Hessian norm."""
        return float(np.sum(np.abs(self._c) * TWO_PI ** 2 * np.sum(self._B ** 2, axis=1)))

    def grad_sup_bound(self) -> float:
        """Upper bound sum |a_b| 2 pi |b| on sup |grad V|."""
        return float(np.sum(np.abs(self._c) * TWO_PI * np.linalg.norm(self._B, axis=1)))


def random_potential(rng, n: int, n_modes: int = 3, bmax: int = 2, scale: float = 1.0):
    coeffs = {}
    while len(coeffs) < 2 * n_modes:
        b = tuple(int(x) for x in rng.integers(-bmax, bmax + 1, n))
        if not any(b):
            continue
        c = scale * (rng.normal() + 1j * rng.normal()) / np.sqrt(2)
        coeffs[b] = c
        coeffs[tuple(-x for x in b)] = np.conj(c)
    return TrigPotential(coeffs, n)


def energy(x: PhasePoint, V: TrigPotential) -> float:
    return float(0.5 * x.p @ x.p + V(x.q)[0])


def integrate(start: PhasePoint, V: TrigPotential, t: float, dt: float = 1e-3,
              trajectory: bool = False):
    """Stormer-Verlet (kick-drift-kick) with torus wrap.  The step is shrunk
    so that an integer number of steps covers [0, t]; negative t runs
    backwards."""
    if dt <= 0:
        raise ContractError("dt must be positive")
    steps = max(1, int(np.ceil(abs(t) / dt - 1e-12)))
    h = t / steps
    q, p = start.q.copy(), start.p.copy()
    g = V.grad(q)[0]
    traj = [(q.copy(), p.copy())] if trajectory else None
    for _ in range(steps):
        p = p - 0.5 * h * g
        q = np.mod(q + h * p, 1.0)
        g = V.grad(q)[0]
        p = p - 0.5 * h * g
        if trajectory:
            traj.append((q.copy(), p.copy()))
    end = PhasePoint(q, p)
    if trajectory:
        return end, [PhasePoint(a, b) for a, b in traj]
    return end


def free_flow(start: PhasePoint, t: float) -> PhasePoint:
    return PhasePoint(start.q + t * start.p, start.p)


# free pullback ------------------------------------------------------------------

@dataclass
class RGenerator:
    """e_b(q) exp(i xi.p) g(P_U p) with U spanned by orthonormal columns of
    ``U`` (shape (n, k), k may be 0) and xi in the complement of U."""
    b: np.ndarray
    U: np.ndarray
    xi: np.ndarray
    g: callable = field(default=lambda p: np.ones(np.atleast_2d(p).shape[0], dtype=complex))

    def __post_init__(self):
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        n = self.b.size
        self.U = np.asarray(self.U, dtype=float).reshape(n, -1)
        self.xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if self.U.shape[1] and np.abs(self.U.T @ self.U - np.eye(self.U.shape[1])).max() > 1e-12:
            raise ContractError("U must have orthonormal columns")
        if self.U.shape[1] and np.abs(self.U.T @ self.xi).max() > 1e-12:
            raise ContractError("xi must be orthogonal to U")

    def P_U(self, v):
        return np.atleast_2d(v) @ self.U @ self.U.T

    def __call__(self, q, p):
        q, p = np.atleast_2d(q), np.atleast_2d(p)
        return np.exp(TWO_PI * 1j * q @ self.b) * np.exp(1j * p @ self.xi) * self.g(self.P_U(p))


def free_pullback(x: RGenerator, t: float = 1.0) -> RGenerator:
    """(Phi_0^t)^* in closed form: xi -> xi + 2 pi t P_{U-perp}(b) and
    g -> exp(2 pi i t P_U(b).p) g."""
    PUb = x.P_U(x.b)[0]
    xi = x.xi + TWO_PI * t * (x.b - PUb)
    g0 = x.g
    g = lambda p: np.exp(TWO_PI * 1j * t * np.atleast_2d(p) @ PUb) * g0(p)
    return RGenerator(x.b, x.U, xi, g)


def pullback_residual(x: RGenerator, t: float, rng, n_points: int = 100) -> float:
    """max |x(Phi_0^t(q,p)) - free_pullback(x)(q,p)| over random phase points."""
    n = x.b.size
    q = rng.uniform(0, 1, (n_points, n))
    p = rng.normal(0, 3, (n_points, n))
    y = free_pullback(x, t)
    return float(np.abs(x(q + t * p, p) - y(q, p)).max())


# dynamics comparison ------------------------------------------------------------

@dataclass
class DecayTable:
    b: tuple
    scales: list      # |b.p0|
    distances: list
    slope: float


def _fit_slope(xs, ys):
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    ok = ys > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs[ok]), np.log(ys[ok]), 1)[0])


def dynamics_comparison(V: TrigPotential, b, q0s, direction, scales=(8, 16, 32, 64, 128),
                        t: float = 1.0, steps_per_period: int = 40, fit: bool = True) -> DecayTable:
    """d(Phi_V, Phi_{V - V_b}) at time t for p0 = s direction / (b.direction),
    maximized over the starting positions q0s (uniformity in q0)."""
    b = np.atleast_1d(b)
    direction = np.atleast_1d(np.asarray(direction, dtype=float))
    bd = float(b @ direction)
    W = V.without(b)
    dists = []
    for s in scales:
        if abs(bd) < 1e-14:
            p0 = s * direction
        else:
            p0 = s * direction / abs(bd)
        # resolve the fast phase 2 pi |b.p0| t
        dt = min(1e-3, 1.0 / (steps_per_period * max(1.0, abs(b @ p0))))
        worst = 0.0
        for q0 in q0s:
            x0 = PhasePoint(q0, p0)
            worst = max(worst, distance(integrate(x0, V, t, dt), integrate(x0, W, t, dt)))
        dists.append(worst)
    slope = _fit_slope(scales, dists) if fit and abs(bd) > 1e-14 else float("nan")
    return DecayTable(tuple(int(x) for x in b), list(scales), dists, slope)


# Fejer smoothing and Gronwall ----------------------------------------------------

def fejer_smooth(V: TrigPotential, m: int) -> TrigPotential:
    """a_k -> a_k prod_e max(0, 1 - |k_e|/m)."""
    if m < 1:
        raise ContractError("m must be >= 1")
    out = {}
    for k, c in V.coeffs.items():
        w = float(np.prod([max(0.0, 1.0 - abs(x) / m) for x in k]))
        if w:
            out[k] = c * w
    return TrigPotential(out, V.dim)


def grad_sup_distance(V: TrigPotential, W: TrigPotential, rng=None, n: int = 20000) -> float:
    """Sampled sup |grad V - grad W| (lower estimate)."""
    rng = np.random.default_rng(0) if rng is None else rng
    q = rng.uniform(0, 1, (n, V.dim))
    return float(np.linalg.norm(V.grad(q) - W.grad(q), axis=1).max())


def coefficient_distance(V: TrigPotential, W: TrigPotential) -> float:
    """Upper bound sum |a_b - a'_b| 2 pi |b| on sup |grad V - grad W|."""
    keys = set(V.coeffs) | set(W.coeffs)
    return float(sum(abs(V.coeffs.get(k, 0) - W.coeffs.get(k, 0)) * TWO_PI * np.linalg.norm(k)
                     for k in keys))


@dataclass
class GronwallReport:
    eps: float
    c: float
    max_ratio: float      # max over s > 0 of distance / bound
    holds: bool
    final_distance: float


def lipschitz_constant(V: TrigPotential) -> float:
    """Lipschitz bound of (q,p) -> (p, -grad V(q)): max(1, ||Hess V||)."""
    return max(1.0, V.grad_lipschitz())


def gronwall_check(V: TrigPotential, W: TrigPotential, y0: PhasePoint, z0: PhasePoint,
                   t: float = 1.0, dt: float = 1e-3, eps: float = None, c: float = None) -> GronwallReport:
    """Integrate y' = (p, -grad V), z' = (p, -grad W) and test
    d(y(s), z(s)) <= (d(y0, z0) + s eps) e^{s c} at every step."""
    eps = coefficient_distance(V, W) if eps is None else eps
    c = lipschitz_constant(V) if c is None else c
    _, ys = integrate(y0, V, t, dt, trajectory=True)
    _, zs = integrate(z0, W, t, dt, trajectory=True)
    d0 = distance(y0, z0)
    s = np.linspace(0.0, t, len(ys))
    d = np.array([distance(a, b) for a, b in zip(ys, zs)])
    bound = (d0 + s * eps) * np.exp(s * c)
    ratio = np.where(bound > 0, d / np.where(bound > 0, bound, 1.0), np.where(d > 0, np.inf, 0.0))
    return GronwallReport(eps, c, float(ratio[1:].max(initial=0.0)), bool(np.all(d <= bound + 1e-15)), float(d[-1]))


def energy_drift(V: TrigPotential, x0: PhasePoint, t: float, dts) -> list:
    """max |H(x(s)) - H(x0)| over the trajectory for each dt."""
    out = []
    for dt in dts:
        _, traj = integrate(x0, V, t, dt, trajectory=True)
        e0 = energy(x0, V)
        out.append(max(abs(energy(x, V) - e0) for x in traj))
    return out
