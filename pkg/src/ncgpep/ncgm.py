"""Nonlinear conjugate gradient scheme with exact line search.

    gamma_k = argmin_gamma f(x_k - gamma d_k)
    x_{k+1} = x_k - gamma_k d_k
    beta_k  = (||g_{k+1}||^2 - eta <g_{k+1}, g_k>) / ||g_k||^2
    d_{k+1} = g_{k+1} + beta_k d_k

PRP uses eta = 1, FR eta = 0; GDEL forces beta = 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .function_model import LineSearchError, Oracle, exact_line_search

RULES = ("PRP", "FR", "GDEL", "FIXED")


class ConvergedSignal(Exception):
    """Raised when a CG update is requested at a zero gradient."""


def beta_update(g_next: np.ndarray, g_prev: np.ndarray, eta: float) -> float:
    nprev = float(g_prev @ g_prev)
    if nprev == 0.0:
        raise ConvergedSignal("previous gradient is zero")
    return (float(g_next @ g_next) - eta * float(g_next @ g_prev)) / nprev


@dataclass
class MethodConfig:
    rule: str = "PRP"
    max_iters: int = 10
    fixed_betas: Sequence[float] | None = None
    d0: np.ndarray | None = None  # None means d_0 = g_0

    def __post_init__(self) -> None:
        self.rule = self.rule.upper()
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")
        if self.rule == "FIXED":
            if self.fixed_betas is None or len(self.fixed_betas) < self.max_iters - 1:
                raise ValueError("FIXED rule needs at least max_iters - 1 parameters")

    @property
    def eta(self) -> float | None:
        return {"PRP": 1.0, "FR": 0.0}.get(self.rule)

    @classmethod
    def fixed(cls, betas: Sequence[float], **kw) -> "MethodConfig":
        return cls("FIXED", max_iters=kw.pop("max_iters", len(betas) + 1), fixed_betas=list(betas), **kw)


@dataclass
class RunTrace:
    x: list[np.ndarray] = field(default_factory=list)
    g: list[np.ndarray] = field(default_factory=list)
    f: list[float] = field(default_factory=list)
    d: list[np.ndarray] = field(default_factory=list)
    gamma: list[float] = field(default_factory=list)
    beta: list[float] = field(default_factory=list)
    stopped: str = ""

    def __len__(self) -> int:
        return len(self.x)

    @property
    def c(self) -> list[float]:
        return [float(d @ d) / float(g @ g) for d, g in zip(self.d, self.g)]

    @property
    def sin_theta(self) -> list[float]:
        return [math.sqrt(max(0.0, 1.0 - 1.0 / c)) for c in self.c]

    def identity_residuals(self) -> dict[str, float]:
        """Worst relative violation of the exact-line-search identities."""
        out = {"<g_k+1,d_k>": 0.0, "<g_k+1,x_k-x_k+1>": 0.0, "<g_k,d_k>-||g_k||^2": 0.0}
        for k in range(len(self.gamma)):
            if k + 1 >= len(self.x):
                break
            gn, d, g = self.g[k + 1], self.d[k], self.g[k]
            dx = self.x[k] - self.x[k + 1]
            out["<g_k+1,d_k>"] = max(out["<g_k+1,d_k>"],
                                     abs(gn @ d) / (np.linalg.norm(gn) * np.linalg.norm(d) + 1e-300))
            out["<g_k+1,x_k-x_k+1>"] = max(out["<g_k+1,x_k-x_k+1>"],
                                           abs(gn @ dx) / (np.linalg.norm(gn) * np.linalg.norm(dx) + 1e-300))
        for g, d in zip(self.g, self.d):
            out["<g_k,d_k>-||g_k||^2"] = max(out["<g_k,d_k>-||g_k||^2"], abs(g @ d - g @ g) / (g @ g))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "f_k", "norm_g_k", "gamma_k", "beta_k", "c_k", "sin_theta_k"])
        cs, ss = self.c, self.sin_theta
        for k in range(len(self.x)):
            gam = self.gamma[k] if k < len(self.gamma) else ""
            bet = self.beta[k] if k < len(self.beta) else ""
            w.writerow([k, repr(self.f[k]), repr(float(np.linalg.norm(self.g[k]))),
                        repr(gam) if gam != "" else "", repr(bet) if bet != "" else "",
                        repr(cs[k]) if k < len(cs) else "", repr(ss[k]) if k < len(ss) else ""])
        return buf.getvalue()


def run(oracle: Oracle, x0: np.ndarray, cfg: MethodConfig, *, stop: float = 1e-10, L: float = 1.0) -> RunTrace:
    """Run ``cfg.max_iters`` steps (fewer if the gradient vanishes)."""
    tr = RunTrace()
    x = np.asarray(x0, dtype=float).copy()
    f, g = oracle(x)
    g0norm = float(np.linalg.norm(g))
    thresh = stop * max(1.0, g0norm)
    d = g.copy() if cfg.d0 is None else np.asarray(cfg.d0, dtype=float).copy()
    tr.x.append(x)
    tr.g.append(g)
    tr.f.append(f)
    tr.d.append(d)
    for k in range(cfg.max_iters):
        if np.linalg.norm(g) <= thresh:
            tr.stopped = "gradient"
            tr.d.pop()
            break
        try:
            gam, x_new = exact_line_search(oracle, x, d, L=L)
        except LineSearchError:
            # only round-off near convergence breaks descent under exact line search
            tr.stopped = "non-descent"
            tr.d.pop()
            break
        f_new, g_new = oracle(x_new)
        tr.gamma.append(gam)
        tr.x.append(x_new)
        tr.g.append(g_new)
        tr.f.append(f_new)
        if np.linalg.norm(g_new) <= thresh:
            tr.stopped = "gradient"
            break
        if k == cfg.max_iters - 1:
            tr.stopped = "iterations"
            break
        if cfg.rule == "GDEL":
            beta = 0.0
        elif cfg.rule == "FIXED":
            beta = float(cfg.fixed_betas[k])
        else:
            beta = beta_update(g_new, g, cfg.eta)
        tr.beta.append(beta)
        d = g_new + beta * d
        tr.d.append(d)
        x, g = x_new, g_new
    else:
        tr.stopped = "iterations"
    return tr


def direction_quality(trace: RunTrace, k: int) -> tuple[float, float]:
    g, d = trace.g[k], trace.d[k]
    ng = float(g @ g)
    if ng == 0.0:
        raise ZeroDivisionError("zero gradient")
    c = float(d @ d) / ng
    return c, math.sqrt(max(0.0, 1.0 - 1.0 / c))


def infer_initial_direction(x0: np.ndarray, x1: np.ndarray, g0: np.ndarray) -> np.ndarray:
    """The direction d_0 parallel to ``x0 - x1`` with ``<g0, d0> = ||g0||^2``.

    Counter-example triplets carry no search directions; the first one is
    recovered from the first step, up to the scaling fixed by the identity.
    """
    s = np.asarray(x0, dtype=float) - np.asarray(x1, dtype=float)
    den = float(g0 @ s)
    if den <= 0.0:
        raise ValueError("x0 - x1 is not a descent step")
    return s * float(g0 @ g0) / den
