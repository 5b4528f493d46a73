"""Deterministic solvers for max-of-block-quadratics objectives.

The unpenalized problem is min_beta max_i f_i(beta) with
f_i(beta) = beta'A_i beta - 2 b_i'beta + c_i, the mean squared residual of
block i.  The penalized variant adds lam * ||beta||_1.

Both solvers run a subgradient loop on the max term (gradient of the active
block, lowest index on ties): Polyak steps against the best-known lower bound
for the plain problem, diminishing steps followed by a soft-threshold
proximal map for the penalized one.  The lower bound starts at
max_i min f_i and is tightened by dual ascent over convex block weights,
where each dual evaluation min_beta sum_i w_i f_i (+ penalty) also yields a
primal candidate; the gap therefore closes from both sides.  A long
single-block active streak triggers a polish with that block's exact
(penalized) minimizer, which certifies global optimality whenever the
polished point still attains the maximum on that block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BlockPartition

ACTIVE_TIE_TOL = 1e-12
POLISH_STREAK = 50


@dataclass
class BlockQuadratics:
    """Per-block quadratic coefficients of the block mean squared residuals."""

    a: np.ndarray  # (m, p, p)
    b: np.ndarray  # (m, p)
    c: np.ndarray  # (m,)

    @classmethod
    def from_data(
        cls,
        y: np.ndarray,
        x: np.ndarray,
        blocks: BlockPartition,
        shift: float = 0.0,
    ) -> "BlockQuadratics":
        m = blocks.m
        p = x.shape[1]
        a = np.empty((m, p, p))
        b = np.empty((m, p))
        c = np.empty(m)
        for i, idx in enumerate(blocks.blocks):
            xi = x[idx]
            ri = y[idx] - shift
            n_i = idx.size
            a[i] = xi.T @ xi / n_i
            b[i] = xi.T @ ri / n_i
            c[i] = ri @ ri / n_i
        return cls(a, b, c)

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def p(self) -> int:
        return self.a.shape[1]

    def values(self, beta: np.ndarray) -> np.ndarray:
        """f_i(beta) for every block."""
        quad = np.einsum("mpq,p,q->m", self.a, beta, beta)
        return quad - 2.0 * self.b @ beta + self.c

    def grad(self, i: int, beta: np.ndarray) -> np.ndarray:
        return 2.0 * (self.a[i] @ beta - self.b[i])

    def block_minimum(self, i: int) -> tuple[np.ndarray, float]:
        """Minimizer and minimum value of f_i (least-norm on rank deficiency)."""
        beta_i = _solve_psd(self.a[i], self.b[i])
        val = float(beta_i @ self.a[i] @ beta_i - 2.0 * self.b[i] @ beta_i + self.c[i])
        return beta_i, max(val, 0.0)

    def lipschitz(self) -> float:
        """Upper bound on the gradient Lipschitz constant across blocks."""
        return float(max(2.0 * np.linalg.eigvalsh(ai)[-1] for ai in self.a))


@dataclass
class SolverOutput:
    beta: np.ndarray
    objective: float
    active_block: int  # 0-based here; callers translate to 1-based
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def _solve_psd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(a, b, rcond=None)[0]


def _active_index(values: np.ndarray) -> tuple[int, int]:
    """Lowest-index block attaining the max within tolerance, plus tie count."""
    vmax = values.max()
    ties = np.flatnonzero(values >= vmax - ACTIVE_TIE_TOL)
    return int(ties[0]), int(ties.size)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    cond = u - css / ind > 0
    rho = np.flatnonzero(cond)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _fista(
    a: np.ndarray,
    b: np.ndarray,
    lam: float,
    beta0: np.ndarray,
    max_iterations: int = 2000,
    tol: float = 1e-13,
) -> np.ndarray:
    """Accelerated proximal gradient for beta'A beta - 2b'beta + lam||beta||_1."""
    lip = 2.0 * float(np.linalg.eigvalsh(a)[-1])
    if lip <= 0.0:
        return np.zeros_like(beta0)
    step = 1.0 / lip
    beta = beta0.copy()
    z = beta.copy()
    t_acc = 1.0
    for _ in range(max_iterations):
        g = 2.0 * (a @ z - b)
        beta_new = soft_threshold(z - step * g, step * lam)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc**2))
        z = beta_new + ((t_acc - 1.0) / t_new) * (beta_new - beta)
        delta = float(np.max(np.abs(beta_new - beta)))
        beta, t_acc = beta_new, t_new
        if delta <= tol * max(1.0, float(np.max(np.abs(beta)))):
            break
    return beta


class _State:
    """Best primal/dual pair shared by the subgradient loop and refinements."""

    def __init__(self, quads: BlockQuadratics, lam: float, beta: np.ndarray):
        self.quads = quads
        self.lam = lam
        self.lower = max(quads.block_minimum(i)[1] for i in range(quads.m))
        self.best_beta = np.array(beta, dtype=float)
        self.best_val = np.inf
        self.best_active = 0
        self._support: np.ndarray | None = None
        self._w: np.ndarray | None = None
        self.consider(self.best_beta)

    def objective(self, beta: np.ndarray) -> float:
        val = float(self.quads.values(beta).max())
        if self.lam > 0.0:
            val += self.lam * float(np.abs(beta).sum())
        return val

    def consider(self, beta: np.ndarray) -> float:
        """Track the best-seen point; returns its objective."""
        vals = self.quads.values(beta)
        act, _ = _active_index(vals)
        obj = float(vals[act])
        if self.lam > 0.0:
            obj += self.lam * float(np.abs(beta).sum())
        if obj < self.best_val:
            self.best_val = obj
            self.best_beta = beta.copy()
            self.best_active = act
        return obj

    @property
    def gap(self) -> float:
        return self.best_val - self.lower

    def converged(self, tolerance: float) -> bool:
        return self.gap <= tolerance * max(1.0, abs(self.best_val))

    def weighted_minimum(self, w_full: np.ndarray) -> tuple[np.ndarray, float]:
        """argmin and value of sum_i w_i f_i + lam||.||_1 at simplex weights."""
        aw = np.tensordot(w_full, self.quads.a, axes=1)
        bw = w_full @ self.quads.b
        cw = float(w_full @ self.quads.c)
        if self.lam > 0.0:
            beta_w = _fista(aw, bw, self.lam, self.best_beta)
            val = float(beta_w @ aw @ beta_w - 2.0 * bw @ beta_w) + cw
            val += self.lam * float(np.abs(beta_w).sum())
        else:
            beta_w = _solve_psd(aw, bw)
            val = float(beta_w @ aw @ beta_w - 2.0 * bw @ beta_w) + cw
        return beta_w, val

    def _newton_direction(self, w: np.ndarray, beta_w: np.ndarray,
                          g: np.ndarray) -> np.ndarray | None:
        """Simplex-constrained Newton ascent direction for the dual.

        The dual q(w) = min_beta sum w_i f_i has gradient f(beta_w) and
        Hessian -0.5 G A(w)^{-1} G' with G the stacked block gradients; the
        step solves the equality-constrained maximization on the support,
        dropping weights that a full step would drive negative.
        """
        quads = self.quads
        m = quads.m
        grads = 2.0 * (np.einsum("mpq,q->mp", quads.a, beta_w) - quads.b)
        aw = np.tensordot(w, quads.a, axes=1)
        try:
            half = np.linalg.solve(aw, grads.T)  # (p, m)
        except np.linalg.LinAlgError:
            return None
        hess = -0.5 * grads @ half
        support = np.flatnonzero(w > 0)
        support = np.union1d(support, [int(np.argmax(g))])
        zeroed = np.setdiff1d(np.arange(m), support)
        for _ in range(m + 1):
            s = support.size
            if s == 0:
                return None
            # Weights forced to zero move by -w_j; their mass is redistributed
            # through the sum constraint and their Hessian cross terms.
            d_zero = -w[zeroed]
            rhs_lin = g[support]
            if zeroed.size:
                rhs_lin = rhs_lin + hess[np.ix_(support, zeroed)] @ d_zero
            kkt = np.zeros((s + 1, s + 1))
            kkt[:s, :s] = hess[np.ix_(support, support)]
            kkt[:s, s] = 1.0
            kkt[s, :s] = 1.0
            rhs = np.concatenate([-rhs_lin, [float(w[zeroed].sum())]])
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            w_new = np.zeros(m)
            w_new[support] = w[support] + sol[:s]
            neg = support[w_new[support] < -1e-15]
            if neg.size == 0:
                w_new = np.maximum(w_new, 0.0)
                total = w_new.sum()
                return w_new / total if total > 0 else None
            worst = neg[int(np.argmin(w_new[neg]))]
            support = np.setdiff1d(support, [worst])
            zeroed = np.union1d(zeroed, [worst])
        return None

    def refine(self, iters: int, tolerance: float) -> None:
        """Dual ascent over the simplex of block weights.

        Maximizes the concave dual q(w) = min_beta sum w_i f_i (+ penalty):
        Newton steps on the smooth unpenalized dual with a backtracking
        fallback to Polyak projected-gradient steps targeting the best primal
        value.  Every dual evaluation also yields a primal candidate, so the
        gap closes from both sides.  Weights persist across calls.
        """
        quads = self.quads
        m = quads.m
        if self._w is None:
            self._w = np.zeros(m)
            self._w[int(np.argmax(quads.values(self.best_beta)))] = 1.0
        q = None
        for _ in range(iters):
            beta_w, q = self.weighted_minimum(self._w)
            if q > self.lower:
                self.lower = q
            self.consider(beta_w)
            if self.converged(tolerance):
                return
            g = quads.values(beta_w)

            if self.lam == 0.0:
                w_new = self._newton_direction(self._w, beta_w, g)
                if w_new is not None:
                    _, q_new = self.weighted_minimum(w_new)
                    if q_new > q:
                        self._w = w_new
                        continue

            gt = g - g.mean()
            gn2 = float(gt @ gt)
            if gn2 <= 1e-30:
                # all blocks equalized: dual optimal
                continue
            step = max(self.best_val - q, 0.0) / gn2
            if step <= 0.0:
                return
            self._w = _project_simplex(self._w + step * g)


def solve_minimax(
    quads: BlockQuadratics,
    beta0: np.ndarray,
    max_iterations: int = 10000,
    tolerance: float = 1e-8,
    step_rule: str = "polyak",
) -> SolverOutput:
    """Minimize max_i f_i(beta) starting from beta0.

    Returns the best iterate seen, so the objective never exceeds the value
    at beta0.  Convergence is declared when the duality gap, or the iterate
    displacement, drops below ``tolerance`` relative to the objective scale.
    """
    state = _State(quads, 0.0, np.array(beta0, dtype=float))
    m = quads.m
    diag: dict = {"tie_events": 0, "polish_moves": 0, "dual_rounds": 0}

    # The asymptotically dominant case: some block's own minimizer still
    # attains the max, certifying it as the global solution.
    for i in range(m):
        beta_i, _ = quads.block_minimum(i)
        state.consider(beta_i)

    beta = np.array(beta0, dtype=float)
    converged = state.converged(tolerance)
    reason = "gap" if converged else ""
    step0 = None
    streak_block, streak = -1, 0
    refine_every = 25
    t = 0

    while not converged and t < max_iterations:
        t += 1
        vals = quads.values(beta)
        act, n_ties = _active_index(vals)
        if n_ties > 1:
            diag["tie_events"] += 1
        f = float(vals[act])
        state.consider(beta)
        if act == streak_block:
            streak += 1
        else:
            streak_block, streak = act, 1

        g = quads.grad(act, beta)
        gn2 = float(g @ g)
        if gn2 <= (1e-15 * max(1.0, abs(f))) ** 2:
            # stationary point of the active block: optimal
            converged, reason = True, "stationary"
            break

        if step_rule == "polyak":
            step = max(f - state.lower, 0.0) / gn2
            if step == 0.0:
                converged, reason = True, "gap"
                break
        else:  # diminishing
            if step0 is None:
                step0 = (f - state.lower) / gn2 if f > state.lower else gn2**-0.5
            step = step0 / np.sqrt(t)
        beta = beta - step * g

        if step * np.sqrt(gn2) <= tolerance * max(1.0, float(np.linalg.norm(beta))):
            converged, reason = True, "step"
            break

        if streak >= POLISH_STREAK and n_ties == 1:
            beta_i, _ = quads.block_minimum(streak_block)
            before = state.best_val
            if state.consider(beta_i) < before:
                beta = beta_i.copy()
                diag["polish_moves"] += 1
            streak = 0

        if t % refine_every == 0:
            state.refine(iters=10, tolerance=tolerance)
            diag["dual_rounds"] += 1
            beta = state.best_beta.copy()

        if state.converged(tolerance):
            converged, reason = True, "gap"
            break

    if not converged:
        state.refine(iters=200, tolerance=tolerance)
        diag["dual_rounds"] += 1
        if state.converged(tolerance):
            converged, reason = True, "gap"

    diag["lower_bound"] = state.lower
    diag["gap"] = state.gap
    diag["stop"] = reason if converged else "max_iterations"
    return SolverOutput(
        beta=state.best_beta,
        objective=max(state.best_val, 0.0),
        active_block=state.best_active,
        iterations=t,
        converged=converged,
        diagnostics=diag,
    )


def solve_penalized(
    quads: BlockQuadratics,
    lam: float,
    beta0: np.ndarray,
    max_iterations: int = 10000,
    tolerance: float = 1e-8,
) -> SolverOutput:
    """Minimize max_i f_i(beta) + lam ||beta||_1 by proximal subgradient.

    Diminishing steps c/sqrt(t) on the max term followed by the
    soft-threshold map, with c calibrated from the initial objective gap and
    capped at 1/L so the single-block case reduces to plain proximal
    gradient.  Periodic dual ascent as in `solve_minimax` (with the weighted
    subproblems solved by FISTA) supplies lower bounds and polished primal
    candidates.
    """
    state = _State(quads, lam, np.array(beta0, dtype=float))
    m = quads.m
    lip = quads.lipschitz()
    cap = 1.0 / lip if lip > 0 else 1.0
    diag: dict = {"tie_events": 0, "polish_moves": 0, "dual_rounds": 0}

    beta = np.array(beta0, dtype=float)
    vals = quads.values(beta)
    act, _ = _active_index(vals)
    g0 = quads.grad(act, beta)
    gn0 = float(g0 @ g0)
    c_step = min(cap, max(state.best_val - state.lower, 0.0) / gn0) if gn0 > 0 else cap
    if c_step <= 0:
        c_step = cap

    converged = state.converged(tolerance)
    reason = "gap" if converged else ""
    streak_block, streak = -1, 0
    refine_every = 100
    t = 0

    while not converged and t < max_iterations:
        t += 1
        vals = quads.values(beta)
        act, n_ties = _active_index(vals)
        if n_ties > 1:
            diag["tie_events"] += 1
        g = quads.grad(act, beta)
        step = min(cap, c_step / np.sqrt(t))
        beta = soft_threshold(beta - step * g, step * lam)
        state.consider(beta)

        if act == streak_block:
            streak += 1
        else:
            streak_block, streak = act, 1

        if streak >= POLISH_STREAK and n_ties == 1:
            polished = _fista(
                quads.a[streak_block],
                quads.b[streak_block],
                lam,
                state.best_beta,
                max_iterations=5000,
            )
            pol_vals = quads.values(polished)
            pol_act, pol_ties = _active_index(pol_vals)
            before = state.best_val
            if state.consider(polished) < before:
                beta = polished.copy()
                diag["polish_moves"] += 1
                if pol_ties == 1 and pol_act == streak_block:
                    # Exact minimizer of the only active block's penalized
                    # objective still dominates: certified optimum, since any
                    # beta satisfies max_j f_j + lam|.| >= f_i + lam|.| >= here.
                    state.lower = max(state.lower, state.best_val)
                    converged, reason = True, "polish"
                    break
            streak = 0

        if t % refine_every == 0:
            state.refine(iters=10, tolerance=tolerance)
            diag["dual_rounds"] += 1
            beta = state.best_beta.copy()

        if state.converged(tolerance):
            converged, reason = True, "gap"
            break

    if m == 1 and not converged:
        polished = _fista(quads.a[0], quads.b[0], lam, state.best_beta,
                          max_iterations=10000)
        state.consider(polished)
        converged, reason = True, "polish"

    if not converged:
        state.refine(iters=100, tolerance=tolerance)
        diag["dual_rounds"] += 1
        if state.converged(tolerance):
            converged, reason = True, "gap"

    diag["lower_bound"] = state.lower
    diag["gap"] = state.gap
    diag["stop"] = reason if converged else "max_iterations"
    return SolverOutput(
        beta=state.best_beta,
        objective=max(state.best_val, 0.0),
        active_block=state.best_active,
        iterations=t,
        converged=converged,
        diagnostics=diag,
    )
