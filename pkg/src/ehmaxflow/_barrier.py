"""Small dense log-barrier interior-point method for ``max c.x`` over convex constraint blocks.

Each block exposes ``slack(x) > 0`` on the interior and the gradient/Hessian of its
barrier ``-sum(log(slack))``.  At the end of centering with parameter ``t`` the
barrier dual point certifies a duality gap of ``m / t`` (``m`` = number of constraints).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LN2 = np.log(2.0)


class Linear:
    """Rows ``A x <= b``."""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.m = len(self.b)

    def slack(self, x):
        return self.b - self.A @ x

    def barrier(self, x, s):
        w = 1.0 / s
        return self.A.T @ w, (self.A.T * (w * w)) @ self.A

    def max_step(self, s, dx):
        rate = self.A @ dx
        pos = rate > 0
        if not pos.any():
            return np.inf
        return float(np.min(s[pos] / rate[pos]))


class ExpSum:
    """Per group ``g``: ``sum_{e in g} (2**x_e - 1) <= cap_g``; ``M`` is the 0/1 group-by-variable mask."""

    def __init__(self, M: np.ndarray, cap: np.ndarray):
        self.M = np.asarray(M, dtype=float)
        self.cap = np.asarray(cap, dtype=float)
        self.m = len(self.cap)

    def slack(self, x):
        return self.cap - self.M @ np.expm1(x * LN2)

    def barrier(self, x, s):
        u = LN2 * np.exp2(x)
        q = self.M.T @ (1.0 / s)
        J = self.M * u
        H = (J.T * (1.0 / s**2)) @ J
        H.flat[::len(x) + 1] += LN2 * u * q
        return u * q, H

    def max_step(self, s, dx):
        return np.inf


class LogCap:
    """Rows ``A x - log2(1 + B x) <= 0`` (``B x >= 0`` on the domain)."""

    def __init__(self, A: np.ndarray, B: np.ndarray):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.m = len(self.A)

    def slack(self, x):
        z = 1.0 + self.B @ x
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(z > 0, np.log2(np.maximum(z, 1e-300)), -np.inf) - self.A @ x
        return s

    def barrier(self, x, s):
        z = 1.0 + self.B @ x
        Dh = self.A - self.B / (z * LN2)[:, None]
        w = 1.0 / s
        g = Dh.T @ w
        H = (Dh.T * (w * w)) @ Dh + (self.B.T * (w / (z * z * LN2))) @ self.B
        return g, H

    def max_step(self, s, dx):
        return np.inf


@dataclass
class BarrierResult:
    x: np.ndarray
    gap: float
    iterations: int
    converged: bool


def maximize(c: np.ndarray, blocks: list, x0: np.ndarray, eps: float = 1e-6,
             max_iter: int = 100_000, mu: float = 100.0, t0: float | None = None) -> BarrierResult:
    """Maximize ``c.x`` from a strictly feasible ``x0``; stop when ``m / t <= eps``."""
    c = np.asarray(c, dtype=float)
    x = np.array(x0, dtype=float)
    m = sum(b.m for b in blocks)
    if any(np.any(b.slack(x) <= 0) for b in blocks):
        raise ValueError("starting point is not strictly feasible")
    t = t0 if t0 is not None else max(1.0, m / max(1.0, abs(c @ x)))
    it = 0

    def fval(x, t):
        ss = [b.slack(x) for b in blocks]
        for s in ss:
            if not s.min() > 0:
                return np.inf, ss
        return -t * (c @ x) - sum(np.log(s).sum() for s in ss), ss

    f, slacks = fval(x, t)
    while True:
        # centering by damped Newton
        inner = 0
        while it < max_iter and inner < 100:
            it += 1
            inner += 1
            g = -t * c
            H = np.zeros((len(x), len(x)))
            for b, s in zip(blocks, slacks):
                gb, Hb = b.barrier(x, s)
                g += gb
                H += Hb
            try:
                dx = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(H, g, rcond=None)[0]
            dec = -(g @ dx)
            if dec <= 1e-12:
                break
            step = 1.0
            for b, s in zip(blocks, slacks):
                step = min(step, 0.99 * b.max_step(s, dx))
            if dec < 1e-6 and step == 1.0:
                # quadratic region: a full step stays interior, Armijo would only see rounding noise
                fn, sn = fval(x + dx, t)
                if np.isfinite(fn):
                    x, f, slacks = x + dx, fn, sn
                    if dec < 1e-10:
                        break
                    continue
            while True:
                fn, sn = fval(x + step * dx, t)
                if fn <= f - 0.25 * step * dec:
                    break
                step *= 0.5
                if step < 1e-14:
                    break
            if step < 1e-14:
                break
            x = x + step * dx
            f, slacks = fn, sn
        if m / t <= eps:
            return BarrierResult(x, m / t, it, True)
        if it >= max_iter:
            return BarrierResult(x, m / t, it, False)
        t *= mu
        f, slacks = fval(x, t)
