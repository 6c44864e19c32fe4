"""Worst-case functions from PEP solutions, and their validation by replay."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .function_model import (
    ClassParams,
    Extension,
    Oracle,
    TripletSet,
    interpolation_residuals,
)
from .ncgm import MethodConfig, RunTrace, infer_initial_direction, run
from .pep.builders import problem_basis
from .pep.qcqp import QcqpProblem

FEAS_TOL = 1e-6


def extract_triplets(prob: QcqpProblem, z: np.ndarray, tol: float = 1e-6) -> TripletSet:
    """Points, gradients and values encoded by a problem point.

    The Gram matrix is factored with its numerically zero modes dropped, so
    the dimension is the rank of G (at most the Gram size).
    """
    G = np.asarray(prob.gram_matrix(z), dtype=float)
    G = 0.5 * (G + G.T)
    w, V = np.linalg.eigh(G)
    scale = max(1.0, float(np.abs(w).max()))
    if w[0] < -tol * scale:
        raise ValueError(f"Gram matrix indefinite beyond tolerance (min eigenvalue {w[0]:.3e})")
    keep = w > 1e-12 * scale
    if not keep.any():
        keep[-1] = True
    H = np.sqrt(np.clip(w[keep], 0.0, None))[:, None] * V[:, keep].T
    b = problem_basis(prob)
    F = z[np.asarray(prob.meta["f_index"], dtype=int)]
    X, Gr, vals = [], [], []
    for lab in b.labels:
        X.append(H @ b.x[lab].evaluate(z))
        Gr.append(H @ b.g[lab].evaluate(z))
        vals.append(float(b.f[lab] @ F))
    return TripletSet.from_arrays(X, Gr, vals, b.labels)


def extension_oracle(S: TripletSet, p: ClassParams, **kw) -> Oracle:
    ext = Extension(S, p, **kw)

    def oracle(x: np.ndarray) -> tuple[float, np.ndarray]:
        r = ext.solve(x)
        return r.value, r.gradient

    return oracle


def replay(S: TripletSet, p: ClassParams, rule: str, steps: int, *, start: str = "0",
           d0: str = "infer", betas=None) -> RunTrace:
    """Run the method on the extension of ``S`` from the point labelled ``start``.

    ``d0`` is ``"gradient"`` (d_0 = g_0) or ``"infer"`` (recovered from the
    next point, which the triplets must contain).
    """
    x0 = S[start].x
    oracle = extension_oracle(S, p, check=False)
    if d0 == "gradient":
        d = None
    elif d0 == "infer":
        nxt = str(int(start) + 1)
        d = infer_initial_direction(x0, S[nxt].x, oracle(x0)[1])
    else:
        raise ValueError("d0 must be 'gradient' or 'infer'")
    if rule.upper() == "FIXED":
        cfg = MethodConfig.fixed(betas, max_iters=steps, d0=d)
    else:
        cfg = MethodConfig(rule, max_iters=steps, d0=d)
    return run(oracle, x0, cfg, L=p.L)


@dataclass
class Validation:
    ok: bool
    min_residual: float
    worst_pair: tuple[str, str]
    replay_f: list[float] = field(default_factory=list)
    stored_f: list[float] = field(default_factory=list)
    ratio: float = float("nan")
    deviation: float = float("nan")
    message: str = ""

    def to_dict(self) -> dict:
        return {"ok": self.ok, "min_residual": self.min_residual, "worst_pair": list(self.worst_pair),
                "replay_f": self.replay_f, "stored_f": self.stored_f, "ratio": self.ratio,
                "deviation": self.deviation, "message": self.message}


def validate_counterexample(S: TripletSet, p: ClassParams, rule: str = "PRP", steps: int | None = None, *,
                            d0: str = "infer", tol: float = FEAS_TOL, replay_tol: float = 1e-3) -> Validation:
    """Interpolation check, then a replay of ``rule`` on the extension.

    Fails on a residual below ``-tol`` (reporting the pair) or when the
    replayed values leave the stored ones by more than ``replay_tol``.
    """
    r = interpolation_residuals(S, p)
    np.fill_diagonal(r, np.inf)
    i, j = np.unravel_index(np.argmin(r), r.shape)
    worst = float(r[i, j])
    pair = (S.labels[i], S.labels[j])
    iterates = sorted((lab for lab in S.labels if lab.isdigit()), key=int)
    if worst < -tol:
        return Validation(False, worst, pair, message=f"not interpolable at pair {pair}: {worst:.3e}")
    steps = len(iterates) - 1 if steps is None else steps
    tr = replay(S, p, rule, steps, start=iterates[0], d0=d0)
    stored = [S[lab].f - S["*"].f if "*" in S.labels else S[lab].f for lab in iterates[: steps + 1]]
    got = [f - (S["*"].f if "*" in S.labels else 0.0) for f in tr.f]
    n = min(len(stored), len(got))
    dev = max(abs(a - b) / max(abs(b), 1e-12) for a, b in zip(got[:n], stored[:n]))
    ok = n == len(stored) and dev <= replay_tol
    ratio = got[n - 1] / got[0] if got[0] else float("nan")
    msg = "" if ok else f"replay deviates by {dev:.3e}"
    return Validation(ok, worst, pair, got, stored, ratio, dev, msg)


def load_example1() -> tuple[TripletSet, ClassParams]:
    """The bundled two-step PRP worst case (mu = 1/2, L = 1)."""
    text = resources.files("ncgpep").joinpath("data/example1.json").read_text()
    return TripletSet.from_json_dict(json.loads(text))
