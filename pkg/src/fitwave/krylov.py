"""Matrix-free Krylov solvers for the shifted wave operator.

All methods share the same contract:

* zero initial guess; iteration stops when the *relative* residual
  ``||b - op(x)|| / ||b||`` falls below ``tol`` (default 1e-12) or
  ``max_iter`` is reached;
* every inner product goes through the operator engine's deterministic
  layer-partial reduction, so runs are bitwise reproducible for any worker
  count;
* recurrence breakdowns (zero denominators, nonfinite quantities) are
  reported with the iteration index instead of raising — indefiniteness
  surfaces as a diagnosed non-convergence, never as a silently wrong answer;
* when a recurrence residual first claims convergence the solver recomputes
  the explicit residual once; if the claim does not hold, the recurrence is
  restarted from the true residual and iteration continues.

Symmetric methods (``cg``, ``cr``) use the *unconjugated* bilinear form so
they remain valid on complex-symmetric (lossy) systems; norms and the
general nonsymmetric methods (``bcgs``, ``gmres``, ``cgs``) use the ordinary
sesquilinear product.  Preconditioning is applied as ``z = M r`` inside the
symmetric recurrences (the split-symmetric square-root form expressed through
true-residual recurrences, so CG's symmetry requirement survives) and from
the right for ``bcgs``/``gmres``/``cgs`` (which keeps their recurrence
residuals equal to the true residuals).

Apply-count bookkeeping with ``x0 = 0`` and no replacement restarts:
``cg`` k iterations -> k applies (+1 verification at convergence);
``cr`` -> k+1; ``bcgs`` -> 2k (half-step exit: 2k-1); ``gmres`` -> k inner
steps + one apply per restart cycle after the first.  ``cgs`` is gated
behind ``enable_cgs`` — its squared residual polynomial is known to
oscillate and can lose accuracy; it ships for comparison runs only.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "METHODS",
    "SolveReport",
    "JacobiPreconditioner",
    "jacobi_apply",
    "solve",
]

METHODS = ("cg", "bcgs", "cr", "gmres", "cgs")

_MAX_REPLACEMENTS = 10


@dataclass
class SolveReport:
    """Outcome of one linear solve."""

    x: np.ndarray
    converged: bool
    iterations: int
    residual_history: list[float] = field(default_factory=list)
    method: str = ""
    breakdown: str | None = None
    final_residual: float = np.nan
    applies: int = 0
    mults_consumed: int = 0

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        state = "converged" if self.converged else (self.breakdown or "not converged")
        return (
            f"{self.method}: {state} in {self.iterations} iterations, "
            f"relative residual {self.final_residual:.3e}"
        )


def jacobi_apply(P: np.ndarray, omega: float, r: np.ndarray) -> np.ndarray:
    """One Jacobi application: z_i = r_i / max(|P_ii - omega^2|, floor).

    ``floor`` is machine epsilon times ``max |P_ii|``; masked slots
    (``P_ii == 0`` exactly) return 0 regardless of the shifted denominator.
    """
    P = np.asarray(P)
    pmax = float(np.max(np.abs(P))) if P.size else 0.0
    if pmax == 0.0:
        return np.zeros_like(r)
    floor = np.finfo(np.float64).eps * pmax
    denom = np.maximum(np.abs(P - omega * omega), floor)
    z = r / denom
    z[P == 0] = 0
    return z


class JacobiPreconditioner:
    """Diagonal preconditioner |diag(A) - omega^2| with masked zeros.

    Precomputes the reciprocal denominators once per frequency so each
    application is a single pointwise multiply.
    """

    def __init__(self, P: np.ndarray, omega: float, engine=None):
        P = np.asarray(P)
        pmax = float(np.max(np.abs(P))) if P.size else 0.0
        inv = np.zeros(P.shape, dtype=np.float64)
        if pmax > 0.0:
            floor = np.finfo(np.float64).eps * pmax
            denom = np.maximum(np.abs(P - omega * omega), floor)
            np.divide(1.0, denom, out=inv)
            inv[P == 0] = 0.0
        self.inv_denominator = inv
        self.omega = float(omega)
        self._engine = engine

    def __call__(self, r: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty_like(r)
        if self._engine is not None:
            self._engine.diag_mult(self.inv_denominator, r, out)
        else:
            np.multiply(self.inv_denominator, r, out=out)
        return out


class _Ctx:
    """Shared solver state: engine shorthands and apply/precondition hooks."""

    def __init__(self, op, b, precond, tol, max_iter, restart):
        self.op = op
        self.b = b
        self.eng = op.engine
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.restart = int(restart)
        self.precond = precond
        self.bnorm = self.eng.norm(b)
        self.history: list[float] = []
        self.replacements = 0

    # vector helpers ---------------------------------------------------------
    def dot(self, x, y):
        """Unconjugated bilinear form (symmetric methods)."""
        return self.eng.dot(x, y, conjugate=False)

    def dotc(self, x, y):
        """Sesquilinear form conj(x).y."""
        return self.eng.dot(x, y, conjugate=True)

    def norm(self, x):
        return self.eng.norm(x)

    def axpby(self, a, x, b, y, out):
        return self.eng.axpby(a, x, b, y, out)

    def apply(self, x, out=None):
        return self.op.apply(x, out)

    def prec(self, r, out):
        if self.precond is None:
            np.copyto(out, r)
            return out
        z = self.precond(r, out) if isinstance(self.precond, JacobiPreconditioner) \
            else self.precond(r)
        if z is not out:
            np.copyto(out, z)
        return out

    def true_residual(self, x, out):
        """out = b - op(x); returns its relative norm (counts one apply)."""
        self.apply(x, out)
        self.axpby(1.0, self.b, -1.0, out, out)
        return self.norm(out) / self.bnorm


def _report(ctx, x, converged, iters, method, breakdown=None, final=None):
    if final is None:
        scratch = np.empty_like(x)
        final = ctx.true_residual(x, scratch)
    return SolveReport(
        x=x,
        converged=bool(converged),
        iterations=iters,
        residual_history=ctx.history,
        method=method,
        breakdown=breakdown,
        final_residual=float(final),
    )


def _bad(value) -> bool:
    return not bool(np.isfinite(value))


# --------------------------------------------------------------------------- #
# conjugate gradients (unconjugated bilinear form)
# --------------------------------------------------------------------------- #


def _cg(ctx: _Ctx) -> SolveReport:
    n = ctx.b.size
    dtype = ctx.b.dtype
    x = np.zeros(n, dtype=dtype)
    r = ctx.b.copy()
    z = np.empty_like(r)
    ctx.prec(r, z)
    p = z.copy()
    q = np.empty_like(r)
    rt = np.empty_like(r)
    rz = ctx.dot(r, z)
    ctx.history.append(1.0)
    k = 0
    while k < ctx.max_iter:
        k += 1
        ctx.apply(p, q)
        pq = ctx.dot(p, q)
        if pq == 0 or _bad(pq) or rz == 0:
            return _report(ctx, x, False, k, "cg",
                           breakdown=f"zero curvature denominator at iteration {k}")
        alpha = rz / pq
        ctx.axpby(alpha, p, 1.0, x, x)
        ctx.axpby(-alpha, q, 1.0, r, r)
        res = ctx.norm(r) / ctx.bnorm
        ctx.history.append(res)
        if not np.isfinite(res):
            return _report(ctx, x, False, k, "cg",
                           breakdown=f"nonfinite residual at iteration {k}")
        if res < ctx.tol:
            res_true = ctx.true_residual(x, rt)
            if res_true < ctx.tol:
                return _report(ctx, x, True, k, "cg", final=res_true)
            ctx.replacements += 1
            if ctx.replacements > _MAX_REPLACEMENTS:
                return _report(ctx, x, False, k, "cg",
                               breakdown=f"residual replacement stagnation at iteration {k}",
                               final=res_true)
            np.copyto(r, rt)
            ctx.prec(r, z)
            np.copyto(p, z)
            rz = ctx.dot(r, z)
            continue
        ctx.prec(r, z)
        rz_new = ctx.dot(r, z)
        beta = rz_new / rz
        rz = rz_new
        ctx.axpby(1.0, z, beta, p, p)
    return _report(ctx, x, False, k, "cg")


# --------------------------------------------------------------------------- #
# conjugate residuals (unconjugated bilinear form)
# --------------------------------------------------------------------------- #


def _cr(ctx: _Ctx) -> SolveReport:
    n = ctx.b.size
    dtype = ctx.b.dtype
    x = np.zeros(n, dtype=dtype)
    r = ctx.b.copy()
    z = np.empty_like(r)
    ctx.prec(r, z)
    p = z.copy()
    Az = ctx.apply(z)
    Ap = Az.copy()
    mAp = np.empty_like(r)
    rt = np.empty_like(r)
    rho = ctx.dot(z, Az)
    ctx.history.append(1.0)
    k = 0
    while k < ctx.max_iter:
        k += 1
        ctx.prec(Ap, mAp)
        den = ctx.dot(Ap, mAp)
        if den == 0 or rho == 0:
            return _report(ctx, x, False, k, "cr",
                           breakdown=f"zero denominator at iteration {k}")
        alpha = rho / den
        ctx.axpby(alpha, p, 1.0, x, x)
        ctx.axpby(-alpha, Ap, 1.0, r, r)
        ctx.axpby(-alpha, mAp, 1.0, z, z)
        res = ctx.norm(r) / ctx.bnorm
        ctx.history.append(res)
        if not np.isfinite(res):
            return _report(ctx, x, False, k, "cr",
                           breakdown=f"nonfinite residual at iteration {k}")
        if res < ctx.tol:
            res_true = ctx.true_residual(x, rt)
            if res_true < ctx.tol:
                return _report(ctx, x, True, k, "cr", final=res_true)
            ctx.replacements += 1
            if ctx.replacements > _MAX_REPLACEMENTS:
                return _report(ctx, x, False, k, "cr",
                               breakdown=f"residual replacement stagnation at iteration {k}",
                               final=res_true)
            np.copyto(r, rt)
            ctx.prec(r, z)
            np.copyto(p, z)
            ctx.apply(z, Az)
            np.copyto(Ap, Az)
            rho = ctx.dot(z, Az)
            continue
        ctx.apply(z, Az)
        rho_new = ctx.dot(z, Az)
        beta = rho_new / rho
        rho = rho_new
        ctx.axpby(1.0, z, beta, p, p)
        ctx.axpby(1.0, Az, beta, Ap, Ap)
    return _report(ctx, x, False, k, "cr")


# --------------------------------------------------------------------------- #
# stabilized biconjugate gradients (right preconditioned)
# --------------------------------------------------------------------------- #


def _bcgs(ctx: _Ctx) -> SolveReport:
    n = ctx.b.size
    dtype = ctx.b.dtype
    x = np.zeros(n, dtype=dtype)
    r = ctx.b.copy()
    rhat = r.copy()
    v = np.zeros_like(r)
    p = np.zeros_like(r)
    ph = np.empty_like(r)
    sh = np.empty_like(r)
    t = np.empty_like(r)
    rt = np.empty_like(r)
    rho = 1.0 + 0.0j if dtype.kind == "c" else 1.0
    alpha = rho
    w = rho
    ctx.history.append(1.0)
    k = 0

    def restart_from(r_new):
        nonlocal rho, alpha, w
        np.copyto(r, r_new)
        np.copyto(rhat, r)
        v[:] = 0
        p[:] = 0
        rho = alpha = w = type(rho)(1)

    while k < ctx.max_iter:
        k += 1
        rho_new = ctx.dotc(rhat, r)
        if rho == 0 or w == 0 or rho_new == 0:
            return _report(ctx, x, False, k, "bcgs",
                           breakdown=f"shadow-residual orthogonality breakdown at iteration {k}")
        beta = (rho_new / rho) * (alpha / w)
        rho = rho_new
        # p = r + beta * (p - w * v)
        ctx.axpby(1.0, p, -w, v, p)
        ctx.axpby(1.0, r, beta, p, p)
        ctx.prec(p, ph)
        ctx.apply(ph, v)
        den = ctx.dotc(rhat, v)
        if den == 0:
            return _report(ctx, x, False, k, "bcgs",
                           breakdown=f"zero search denominator at iteration {k}")
        alpha = rho / den
        # s lives in r: r <- r - alpha v
        ctx.axpby(-alpha, v, 1.0, r, r)
        res_half = ctx.norm(r) / ctx.bnorm
        if res_half < ctx.tol:
            ctx.axpby(alpha, ph, 1.0, x, x)
            ctx.history.append(res_half)
            res_true = ctx.true_residual(x, rt)
            if res_true < ctx.tol:
                return _report(ctx, x, True, k, "bcgs", final=res_true)
            ctx.replacements += 1
            if ctx.replacements > _MAX_REPLACEMENTS:
                return _report(ctx, x, False, k, "bcgs",
                               breakdown=f"residual replacement stagnation at iteration {k}",
                               final=res_true)
            restart_from(rt)
            continue
        ctx.prec(r, sh)
        ctx.apply(sh, t)
        tt = ctx.dotc(t, t)
        if tt == 0:
            return _report(ctx, x, False, k, "bcgs",
                           breakdown=f"zero stabilization denominator at iteration {k}")
        w = ctx.dotc(t, r) / tt
        ctx.axpby(alpha, ph, 1.0, x, x)
        ctx.axpby(w, sh, 1.0, x, x)
        ctx.axpby(-w, t, 1.0, r, r)
        res = ctx.norm(r) / ctx.bnorm
        ctx.history.append(res)
        if not np.isfinite(res):
            return _report(ctx, x, False, k, "bcgs",
                           breakdown=f"nonfinite residual at iteration {k}")
        if res < ctx.tol:
            res_true = ctx.true_residual(x, rt)
            if res_true < ctx.tol:
                return _report(ctx, x, True, k, "bcgs", final=res_true)
            ctx.replacements += 1
            if ctx.replacements > _MAX_REPLACEMENTS:
                return _report(ctx, x, False, k, "bcgs",
                               breakdown=f"residual replacement stagnation at iteration {k}",
                               final=res_true)
            restart_from(rt)
            continue
        if w == 0:
            return _report(ctx, x, False, k, "bcgs",
                           breakdown=f"stagnating stabilization weight at iteration {k}")
    return _report(ctx, x, False, k, "bcgs")


# --------------------------------------------------------------------------- #
# restarted GMRES (modified Gram-Schmidt, right preconditioned)
# --------------------------------------------------------------------------- #


def _givens(a, b):
    if b == 0:
        return 1.0, 0.0 * b
    if a == 0:
        return 0.0, 1.0 + 0.0 * b
    mag = np.hypot(abs(a), abs(b))
    c = abs(a) / mag
    s = (a / abs(a)) * np.conj(b) / mag
    return c, s


def _gmres(ctx: _Ctx) -> SolveReport:
    n = ctx.b.size
    dtype = ctx.b.dtype
    m = max(1, ctx.restart)
    x = np.zeros(n, dtype=dtype)
    r = np.empty_like(ctx.b)
    zbuf = np.empty_like(ctx.b)
    V = np.zeros((m + 1, n), dtype=dtype)
    H = np.zeros((m + 1, m), dtype=dtype)
    cs = np.zeros(m, dtype=np.float64)
    sn = np.zeros(m, dtype=dtype)
    g = np.zeros(m + 1, dtype=dtype)
    ctx.history.append(1.0)
    total = 0
    first = True
    while total < ctx.max_iter:
        if first:
            np.copyto(r, ctx.b)
            first = False
        else:
            ctx.apply(x, r)
            ctx.axpby(1.0, ctx.b, -1.0, r, r)
        beta = ctx.norm(r)
        res = beta / ctx.bnorm
        if res < ctx.tol:
            return _report(ctx, x, True, total, "gmres", final=res)
        if beta == 0:
            return _report(ctx, x, True, total, "gmres", final=0.0)
        ctx.axpby(1.0 / beta, r, 0.0, r, V[0])
        H[:] = 0
        g[:] = 0
        g[0] = beta
        j = -1
        happy = False
        for j in range(m):
            if total >= ctx.max_iter:
                j -= 1
                break
            total += 1
            ctx.prec(V[j], zbuf)
            w = V[j + 1]  # build the new direction in place
            ctx.apply(zbuf, w)
            for i in range(j + 1):
                hij = ctx.dotc(V[i], w)
                H[i, j] = hij
                ctx.axpby(-hij, V[i], 1.0, w, w)
            hnext = ctx.norm(w)
            H[j + 1, j] = hnext
            for i in range(j):
                tmp = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = tmp
            c, s = _givens(H[j, j], H[j + 1, j])
            cs[j], sn[j] = c, s
            H[j, j] = c * H[j, j] + s * H[j + 1, j]
            H[j + 1, j] = 0
            g[j + 1] = -np.conj(s) * g[j]
            g[j] = c * g[j]
            res = abs(g[j + 1]) / ctx.bnorm
            ctx.history.append(float(res))
            if hnext != 0:
                ctx.axpby(1.0 / hnext, w, 0.0, w, V[j + 1])
            else:
                happy = True
            if res < ctx.tol or happy:
                break
        if j < 0:
            break
        jj = j + 1
        y = np.zeros(jj, dtype=dtype)
        for i in range(jj - 1, -1, -1):
            acc = g[i] - H[i, i + 1 : jj] @ y[i + 1 : jj]
            if H[i, i] == 0:
                return _report(ctx, x, False, total, "gmres",
                               breakdown=f"singular projected system at iteration {total}")
            y[i] = acc / H[i, i]
        update = y @ V[:jj]
        ctx.prec(update, zbuf)
        x += zbuf
        if happy:
            final = ctx.true_residual(x, r)
            return _report(ctx, x, final < ctx.tol, total, "gmres", final=final)
    final = ctx.true_residual(x, r)
    return _report(ctx, x, final < ctx.tol, total, "gmres", final=final)


# --------------------------------------------------------------------------- #
# squared conjugate gradients (gated; irregular convergence)
# --------------------------------------------------------------------------- #


def _cgs(ctx: _Ctx) -> SolveReport:
    n = ctx.b.size
    dtype = ctx.b.dtype
    x = np.zeros(n, dtype=dtype)
    r = ctx.b.copy()
    rhat = r.copy()
    u = np.zeros_like(r)
    p = np.zeros_like(r)
    q = np.zeros_like(r)
    vh = np.empty_like(r)
    uq = np.empty_like(r)
    tmp = np.empty_like(r)
    rt = np.empty_like(r)
    rho = 1.0 + 0.0j if dtype.kind == "c" else 1.0
    ctx.history.append(1.0)
    k = 0
    while k < ctx.max_iter:
        k += 1
        rho_new = ctx.dotc(rhat, r)
        if rho_new == 0:
            return _report(ctx, x, False, k, "cgs",
                           breakdown=f"shadow-residual orthogonality breakdown at iteration {k}")
        if k == 1:
            np.copyto(u, r)
            np.copyto(p, u)
        else:
            beta = rho_new / rho
            ctx.axpby(1.0, r, beta, q, u)
            ctx.axpby(1.0, q, beta, p, tmp)
            ctx.axpby(1.0, u, beta, tmp, p)
        rho = rho_new
        ctx.prec(p, tmp)
        ctx.apply(tmp, vh)
        den = ctx.dotc(rhat, vh)
        if den == 0:
            return _report(ctx, x, False, k, "cgs",
                           breakdown=f"zero search denominator at iteration {k}")
        alpha = rho / den
        ctx.axpby(1.0, u, -alpha, vh, q)
        ctx.axpby(1.0, u, 1.0, q, uq)
        ctx.prec(uq, tmp)
        ctx.axpby(alpha, tmp, 1.0, x, x)
        ctx.apply(tmp, vh)
        ctx.axpby(-alpha, vh, 1.0, r, r)
        res = ctx.norm(r) / ctx.bnorm
        ctx.history.append(res)
        if not np.isfinite(res):
            return _report(ctx, x, False, k, "cgs",
                           breakdown=f"nonfinite residual at iteration {k}")
        if res < ctx.tol:
            res_true = ctx.true_residual(x, rt)
            if res_true < ctx.tol:
                return _report(ctx, x, True, k, "cgs", final=res_true)
            ctx.replacements += 1
            if ctx.replacements > _MAX_REPLACEMENTS:
                return _report(ctx, x, False, k, "cgs",
                               breakdown=f"residual replacement stagnation at iteration {k}",
                               final=res_true)
            np.copyto(r, rt)
            np.copyto(rhat, r)
            u[:] = 0
            p[:] = 0
            q[:] = 0
            rho = type(rho)(1)
            continue
    return _report(ctx, x, False, k, "cgs")


_DISPATCH = {"cg": _cg, "cr": _cr, "bcgs": _bcgs, "gmres": _gmres, "cgs": _cgs}


def solve(
    op,
    b: np.ndarray,
    method: str = "bcgs",
    precond=None,
    tol: float = 1e-12,
    max_iter: int = 10000,
    restart: int = 30,
    enable_cgs: bool = False,
) -> SolveReport:
    """Solve ``(A - omega^2 I) x = b`` with the chosen Krylov method.

    Parameters
    ----------
    op : WaveOperator
        The operator; supplies ``apply`` and the deterministic engine.
    b : ndarray
        Right-hand side, same dtype as the operator (a real rhs is promoted
        automatically when the operator is complex).
    method : {"cg", "bcgs", "cr", "gmres", "cgs"}
    precond : callable or JacobiPreconditioner, optional
        Maps a residual to a preconditioned residual.
    restart : int
        GMRES restart depth (ignored by the other methods).
    enable_cgs : bool
        ``cgs`` is refused unless this is set (irregular convergence).
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if method == "cgs":
        if not enable_cgs:
            raise ValueError(
                "cgs is experimental (irregular convergence and roundoff "
                "amplification); pass enable_cgs=True (CLI: --enable-cgs) to use it"
            )
        warnings.warn(
            "cgs: residual history may oscillate strongly and the attainable "
            "accuracy is limited by squared-residual roundoff",
            RuntimeWarning,
            stacklevel=2,
        )
    b = np.ascontiguousarray(b)
    if b.dtype != op.dtype:
        if op.dtype.kind == "c" and b.dtype.kind == "f":
            b = b.astype(op.dtype)
        else:
            raise TypeError(
                f"rhs dtype {b.dtype} does not match operator dtype {op.dtype}; "
                "lossless operators are real — solve with the real pattern and "
                "scale by the complex source factor afterwards"
            )
    if b.shape != (op.n,):
        raise ValueError(f"b has shape {b.shape}, expected ({op.n},)")

    applies0 = op.counters.applies
    mults0 = op.counters.mults
    ctx = _Ctx(op, b, precond, tol, max_iter, restart)
    if ctx.bnorm == 0.0:
        report = SolveReport(
            x=np.zeros_like(b), converged=True, iterations=0,
            residual_history=[0.0], method=method, final_residual=0.0,
        )
    else:
        report = _DISPATCH[method](ctx)
    report.applies = op.counters.applies - applies0
    report.mults_consumed = op.counters.mults - mults0
    return report
