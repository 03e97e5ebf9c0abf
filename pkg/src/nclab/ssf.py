"""Spectral shift at matrix scale: eta_1 as a difference of eigenvalue counting
functions and trace-formula residuals."""

from dataclasses import dataclass

import numpy as np

from nclab import linalg
from nclab.funcs import TestFunction
from nclab.moi import taylor_remainder


@dataclass
class SteppedFunction:
    """Right-continuous piecewise constant function.

    ``values[j]`` holds on [breakpoints[j], breakpoints[j+1]); the function is
    0 left of the first and right of the last breakpoint.
    """
    breakpoints: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        j = np.searchsorted(self.breakpoints, x, side="right") - 1
        vals = np.append(self.values, 0)
        out = np.where(j >= 0, vals[np.clip(j, 0, None)], 0)
        return out

    def intervals(self):
        """(left, right, value) for each constancy interval with nonzero value."""
        b = self.breakpoints
        return [(b[j], b[j + 1], self.values[j]) for j in range(len(b) - 1) if self.values[j]]

    def integrate_derivative(self, f: TestFunction) -> complex:
        """int f'(x) eta(x) dx = sum over intervals value * (f(right) - f(left))."""
        total = 0.0 + 0.0j
        for l, r, v in self.intervals():
            fl, fr = f.deriv(0, [l, r])
            total += v * (fr - fl)
        return complex(total)

    def weighted_l1(self, eps: float) -> float:
        """int |eta| (1+|x|)^(-1-eps) dx, in closed form per interval."""
        def F(x):
            # antiderivative of (1+|x|)^(-1-eps), odd in x
            return np.sign(x) * (1.0 - (1.0 + abs(x)) ** (-eps)) / eps
        return float(sum(abs(v) * (F(r) - F(l)) for l, r, v in self.intervals()))


def counting(lam, x):
    """#{lam_j <= x}."""
    return np.searchsorted(np.sort(lam), x, side="right")


def eta_one(H, V) -> SteppedFunction:
    """eta_1(x) = #{lam(H) <= x} - #{lam(H+V) <= x}."""
    H = linalg.hermitian(H)
    V = linalg.hermitian(V)
    a = np.linalg.eigvalsh(H)
    b = np.linalg.eigvalsh(H + V)
    bp = np.unique(np.concatenate([a, b]))
    vals = counting(a, bp) - counting(b, bp)
    return SteppedFunction(bp, vals[:-1] if len(bp) else vals)


@dataclass
class TraceFormulaReport:
    n: int
    lhs: complex
    rhs: complex
    residual: float
    scale: float


def trace_formula_check(H, V, f: TestFunction, n: int = 1) -> TraceFormulaReport:
    """n = 1: Tr(f(H+V) - f(H)) against int f' eta_1 (exact telescoping).
    n >= 2: traces of the two remainder representations."""
    H = linalg.hermitian(H)
    V = linalg.hermitian(V)
    if n == 1:
        lhs = complex(linalg.trace_f(H + V, f) - linalg.trace_f(H, f))
        rhs = eta_one(H, V).integrate_derivative(f)
    else:
        direct, other = taylor_remainder(H, V, f, n)
        lhs, rhs = complex(np.trace(direct)), complex(np.trace(other))
    return TraceFormulaReport(n, lhs, rhs, abs(lhs - rhs), max(1.0, abs(lhs), abs(rhs)))


def relative_schatten_norm(H, V, p: float) -> float:
    """|| V (H - i)^{-1} ||_p."""
    if p < 1:
        raise linalg.ContractError("Schatten index must be >= 1")
    H = linalg.hermitian(H)
    return linalg.schatten_norm(linalg.as_matrix(V) @ linalg.resolvent(H), p)


def eta_weight_ratio(H, V, eps: float = 0.5) -> float:
    """int|eta_1|(1+|x|)^(-1-eps) / ((1 + ||V||) ||V(H-i)^{-1}||_1); fitted, never asserted."""
    den = (1.0 + linalg.op_norm(V)) * relative_schatten_norm(H, V, 1)
    return eta_one(H, V).weighted_l1(eps) / den if den else 0.0
