"""Limited-memory BFGS with a strong-Wolfe line search."""
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..errors import LineSearchError


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    grad_norm: float
    iterations: int
    evaluations: int
    converged: bool


def _cubic_min(a, fa, ga, b, fb, gb):
    # minimiser of the cubic interpolating (a, fa, ga), (b, fb, gb); None if ill-posed
    if a == b or not np.isfinite(fa + fb + ga + gb):
        return None
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    den = gb - ga + 2.0 * d2
    if den == 0 or not np.isfinite(den):
        return None
    return b - (b - a) * (gb + d2 - d1) / den


def strong_wolfe(fg, x, f0, g0, d, step=1.0, c1=1e-4, c2=0.9, max_steps=60, f_noise=1e-12):
    """Step length satisfying the strong Wolfe conditions (bracket then zoom).

    Near a minimiser the decrease in ``f`` drops below round-off; a step is
    then also accepted under the approximate Wolfe conditions
    ``(2 c1 - 1) g0.d >= g.d >= c2 g0.d`` provided ``f`` rose by no more than
    ``f_noise * |f0|``.

    Returns ``(alpha, f, g, evaluations)``; raises :class:`LineSearchError`
    after ``max_steps`` bracketing/bisection rounds.
    """
    dg0 = float(np.dot(g0, d))
    if dg0 >= 0:
        raise LineSearchError("search direction is not a descent direction", x=x)
    slack = f_noise * abs(f0)

    def approx_wolfe(f, dg):
        return f <= f0 + slack and (2.0 * c1 - 1.0) * dg0 >= dg >= c2 * dg0

    evals = 0
    a_prev, f_prev, dg_prev = 0.0, f0, dg0
    a = step
    lo = hi = None
    for _ in range(max_steps):
        f, g = fg(x + a * d)
        evals += 1
        dg = float(np.dot(g, d))
        if approx_wolfe(f, dg):
            return a, f, g, evals
        if f > f0 + c1 * a * dg0 or (lo is None and f >= f_prev and a_prev > 0):
            lo, hi = (a_prev, f_prev, dg_prev), (a, f, dg)
            break
        if abs(dg) <= -c2 * dg0:
            return a, f, g, evals
        if dg >= 0:
            lo, hi = (a, f, dg), (a_prev, f_prev, dg_prev)
            break
        a_prev, f_prev, dg_prev = a, f, dg
        a *= 2.0
    else:
        raise LineSearchError("could not bracket a step", x=x)

    for _ in range(max_steps):
        (al, fl, gl), (ah, fh, gh) = lo, hi
        lo_b, hi_b = min(al, ah), max(al, ah)
        a = _cubic_min(al, fl, gl, ah, fh, gh)
        width = hi_b - lo_b
        if a is None or not (lo_b + 0.1 * width <= a <= hi_b - 0.1 * width):
            a = 0.5 * (al + ah)
        if width <= 1e-16 * max(1.0, hi_b):
            break
        f, g = fg(x + a * d)
        evals += 1
        dg = float(np.dot(g, d))
        if approx_wolfe(f, dg):
            return a, f, g, evals
        if f > f0 + c1 * a * dg0 or f >= fl:
            hi = (a, f, dg)
        else:
            if abs(dg) <= -c2 * dg0:
                return a, f, g, evals
            if dg * (ah - al) >= 0:
                hi = lo
            lo = (a, f, dg)
    al, fl, _ = lo
    if al > 0 and fl < f0:
        # sufficient decrease held at the low end; accept rather than stall at round-off
        f, g = fg(x + al * d)
        return al, f, g, evals + 1
    raise LineSearchError("line search failed to find an acceptable step", x=x)


def minimize_lbfgs(fg, x0, grad_tol=1e-8, max_iter=1000, memory=10, c1=1e-4, c2=0.9, precond=None):
    """Minimise a smooth function given ``fg(x) -> (f, grad)``.

    ``precond``, if given, is an SPD map ``v -> M v`` used as the initial
    inverse-Hessian approximation (scaled each iteration).  Stops when
    ``||grad|| <= grad_tol * max(1, |f|)`` or after ``max_iter`` iterations
    (``converged`` is then False).
    """
    M = precond if precond is not None else (lambda v: v)
    x = np.array(x0, dtype=np.float64)
    f, g = fg(x)
    evals = 1
    S = deque(maxlen=memory)
    Y = deque(maxlen=memory)
    gnorm = float(np.linalg.norm(g))
    it = 0
    while it < max_iter:
        if gnorm <= grad_tol * max(1.0, abs(f)):
            return LbfgsResult(x, f, gnorm, it, evals, True)
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(S), reversed(Y)):
            rho = 1.0 / np.dot(y, s)
            a = rho * np.dot(s, q)
            q -= a * y
            alphas.append((rho, a))
        if S:
            My = M(Y[-1])
            gamma = np.dot(S[-1], Y[-1]) / np.dot(Y[-1], My)
            step = 1.0
            r = gamma * M(q)
        else:
            r = M(q)
            step = min(1.0, 1.0 / np.linalg.norm(r))
        for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
            r += (a - rho * np.dot(y, r)) * s
        d = -r
        if np.dot(d, g) >= 0:
            S.clear()
            Y.clear()
            d = -M(g)
            step = min(1.0, 1.0 / np.linalg.norm(d))
        try:
            alpha, f_new, g_new, ne = strong_wolfe(fg, x, f, g, d, step, c1, c2)
        except LineSearchError as exc:
            exc.details.update(iterations=it, grad_norm=gnorm)
            exc.last_iterate = x
            raise
        evals += ne
        s = alpha * d
        y = g_new - g
        if np.dot(s, y) > 1e-300:
            S.append(s)
            Y.append(y)
        x = x + s
        f, g = f_new, g_new
        gnorm = float(np.linalg.norm(g))
        it += 1
    return LbfgsResult(x, f, gnorm, it, evals, gnorm <= grad_tol * max(1.0, abs(f)))
