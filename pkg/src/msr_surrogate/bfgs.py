"""Full-batch BFGS on the inverse Hessian with a pluggable line search.

The default search enforces the strong Wolfe conditions by bracketing and
zooming with safeguarded cubic interpolation. ``initial_step`` is the
first trial step whenever the curvature model is the identity (the very
first iteration and after every reset); otherwise the quasi-Newton step
of length 1 is tried first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

ObjectiveGrad = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


@dataclass
class LineSearchResult:
    ok: bool
    alpha: float
    x: np.ndarray
    f: float
    g: np.ndarray
    evals: int


class LineSearch(Protocol):
    def __call__(self, fg: ObjectiveGrad, x: np.ndarray, f0: float, g0: np.ndarray,
                 p: np.ndarray, alpha0: float) -> LineSearchResult: ...


class _Ray:
    """``phi(a) = f(x + a p)`` with an evaluation counter."""

    def __init__(self, fg, x, p):
        self.fg, self.x, self.p = fg, x, p
        self.evals = 0

    def __call__(self, a):
        self.evals += 1
        xa = self.x + a * self.p
        fa, ga = self.fg(xa)
        return xa, float(fa), ga, float(ga @ self.p)


def _cubic_min(a, fa, da, b, fb, db):
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


@dataclass
class StrongWolfe:
    """Bracketing/zoom search for ``phi(a) = f(x + a p)`` satisfying

        phi(a) <= phi(0) + c1 a phi'(0)   and   |phi'(a)| <= c2 |phi'(0)|.
    """

    c1: float = 1e-4
    c2: float = 0.9
    max_evals: int = 40
    alpha_max: float = 1e10
    expand: float = 2.0

    def __call__(self, fg, x, f0, g0, p, alpha0) -> LineSearchResult:
        d0 = float(g0 @ p)
        ray = _Ray(fg, x, p)
        if not d0 < 0:
            return LineSearchResult(False, 0.0, x, f0, g0, 0)

        a_prev, f_prev, d_prev = 0.0, f0, d0
        a = min(alpha0, self.alpha_max)
        while ray.evals < self.max_evals:
            xa, fa, ga, da = ray(a)
            if not math.isfinite(fa) or fa > f0 + self.c1 * a * d0 or (a_prev > 0 and fa >= f_prev):
                return self._zoom(ray, f0, g0, d0, (a_prev, f_prev, d_prev), (a, fa, da))
            if abs(da) <= -self.c2 * d0:
                return LineSearchResult(True, a, xa, fa, ga, ray.evals)
            if da >= 0:
                return self._zoom(ray, f0, g0, d0, (a, fa, da), (a_prev, f_prev, d_prev))
            if a >= self.alpha_max:
                break
            a_prev, f_prev, d_prev = a, fa, da
            a = min(self.expand * a, self.alpha_max)
        return LineSearchResult(False, 0.0, x, f0, g0, ray.evals)

    def _zoom(self, ray, f0, g0, d0, lo, hi) -> LineSearchResult:
        # lo satisfies sufficient decrease and has the lowest value seen so far
        (a_lo, f_lo, d_lo), (a_hi, f_hi, d_hi) = lo, hi
        while ray.evals < self.max_evals:
            left, right = min(a_lo, a_hi), max(a_lo, a_hi)
            width = right - left
            if width <= 1e-16 * max(1.0, right):
                break
            a = None
            if math.isfinite(f_hi) and math.isfinite(d_hi):
                a = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
            if a is None or not (left + 0.1 * width <= a <= right - 0.1 * width):
                a = 0.5 * (a_lo + a_hi)
            xa, fa, ga, da = ray(a)
            if not math.isfinite(fa) or fa > f0 + self.c1 * a * d0 or fa >= f_lo:
                a_hi, f_hi, d_hi = a, fa, da
                continue
            if abs(da) <= -self.c2 * d0:
                return LineSearchResult(True, a, xa, fa, ga, ray.evals)
            if da * (a_hi - a_lo) >= 0:
                a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
            a_lo, f_lo, d_lo = a, fa, da
        return LineSearchResult(False, 0.0, ray.x, f0, g0, ray.evals)


@dataclass
class ExactQuadraticSearch:
    """Exact minimizer along ``p`` of ``0.5 x'Ax - b'x`` (test double)."""

    A: np.ndarray

    def __call__(self, fg, x, f0, g0, p, alpha0) -> LineSearchResult:
        curv = float(p @ self.A @ p)
        if not curv > 0 or not float(g0 @ p) < 0:
            return LineSearchResult(False, 0.0, x, f0, g0, 0)
        alpha = -float(g0 @ p) / curv
        xa = x + alpha * p
        fa, ga = fg(xa)
        return LineSearchResult(True, alpha, xa, fa, ga, 1)


@dataclass
class StepInfo:
    accepted: bool
    f: float
    alpha: float
    evals: int
    reset: bool  # curvature model was reset to the identity during this step


@dataclass
class BFGS:
    """Stateful minimizer; each :meth:`step` attempts one quasi-Newton update."""

    fg: ObjectiveGrad
    x0: np.ndarray
    initial_step: float = 1.0
    line_search: LineSearch = field(default_factory=StrongWolfe)
    curvature_tol: float = 1e-10

    def __post_init__(self):
        self.x = np.array(self.x0, dtype=float)
        f, g = self.fg(self.x)
        self.f, self.g = float(f), np.asarray(g, dtype=float)
        self.H: np.ndarray | None = None  # None stands for the identity
        self.resets = 0

    def _direction(self):
        return -self.g if self.H is None else -(self.H @ self.g)

    def _search(self):
        alpha0 = self.initial_step if self.H is None else 1.0
        return self.line_search(self.fg, self.x, self.f, self.g, self._direction(), alpha0)

    def step(self) -> StepInfo:
        res = self._search()
        reset = False
        if not res.ok and self.H is not None:
            # lost descent or curvature: fall back to steepest descent once
            self.H, reset = None, True
            self.resets += 1
            evals = res.evals
            res = self._search()
            res.evals += evals
        if not res.ok:
            return StepInfo(False, self.f, 0.0, res.evals, reset)

        s = res.x - self.x
        y = res.g - self.g
        sy = float(s @ y)
        if sy <= self.curvature_tol * np.linalg.norm(s) * np.linalg.norm(y):
            if self.H is not None:
                self.resets += 1
                reset = True
            self.H = None
        else:
            if self.H is None:
                self.H = np.eye(s.size) * (sy / float(y @ y))
            rho = 1.0 / sy
            Hy = self.H @ y
            self.H += (rho * rho * float(y @ Hy) + rho) * np.outer(s, s) - rho * (np.outer(Hy, s) + np.outer(s, Hy))
        self.x, self.f, self.g = res.x, float(res.f), np.asarray(res.g, dtype=float)
        return StepInfo(True, self.f, res.alpha, res.evals, reset)


@dataclass
class MinimizeResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int
    converged: bool


def minimize(fg: ObjectiveGrad, x0, *, gtol: float = 1e-10, max_iter: int = 1000,
             initial_step: float = 1.0, line_search: LineSearch | None = None) -> MinimizeResult:
    """Run BFGS until ``||g||_inf <= gtol``, ``max_iter`` updates or a failed search."""
    opt = BFGS(fg, x0, initial_step=initial_step, line_search=line_search or StrongWolfe())
    it = 0
    while it < max_iter and np.max(np.abs(opt.g)) > gtol:
        if not opt.step().accepted:
            break
        it += 1
    return MinimizeResult(opt.x, opt.f, opt.g, it, bool(np.max(np.abs(opt.g)) <= gtol))
