"""Random-intercept linear mixed-effects models fit by REML.

The model is y = X beta + sum_g Z_g u_g + e with u_g ~ N(0, sigma2_g I) and
e ~ N(0, sigma2 I): one fixed categorical factor (treatment-coded against
its first level) plus intercept-only random effects.  Nested groupings use
the ``outer/inner`` syntax, expanding to ``outer`` and ``outer:inner``.

Fitting maximizes the restricted log-likelihood over log-variances with
multi-start Nelder-Mead (convergence tolerance 1e-8; every probed point is
tracked and the best one wins, so the returned optimum is never worse than
anything evaluated).  The Woodbury identity keeps each evaluation at
O(q^3) in the total number of group levels q: with M = sigma2 D^{-1} +
Z'Z, V^{-1} = sigma^{-2}(I - Z M^{-1} Z'), log|V| = n log sigma2 +
sum_g q_g log sigma2_g - q log sigma2 + log|M|, and the group offsets
(BLUPs) are u_hat = M^{-1} Z'(y - X beta_hat).

Wald p-values use the between-within degrees-of-freedom approximation
df = n - rank([X Z]), and the method is named in the fit so reported
p-values are reproducible.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize, stats

CONVERGENCE_TOL = 1e-8
LOG_VARIANCE_BOUND = 30.0
DF_METHOD = "between-within"
# Default bin width when grouping target length in characters.
LENGTH_BIN_WIDTH = 176


@dataclass(frozen=True)
class MixedModelSpec:
    """response ~ fixed + (1 | g) for each g in random_groups.

    ``fixed=None`` fits an intercept-only mean (the one-way random model).
    """

    response: str
    fixed: str | None
    random_groups: tuple[str, ...] = ()

    def expanded_groups(self) -> tuple[str, ...]:
        """Nested a/b groupings expand to a and a:b."""
        out: list[str] = []
        for group in self.random_groups:
            if "/" in group:
                outer, inner = group.split("/", 1)
                out.append(outer)
                out.append(f"{outer}:{inner}")
            else:
                out.append(group)
        return tuple(dict.fromkeys(out))


@dataclass(frozen=True)
class MixedFit:
    spec: MixedModelSpec
    fixed_effects: dict[str, float]
    standard_errors: dict[str, float]
    variance_components: dict[str, float]
    group_intercepts: dict[str, dict[str, float]]
    reml_loglik: float
    p_values: dict[str, float]
    df: float
    df_method: str
    n_obs: int

    def to_report(self) -> dict:
        return {
            "response": self.spec.response,
            "fixed": self.spec.fixed,
            "random_groups": list(self.spec.random_groups),
            "fixed_effects": self.fixed_effects,
            "standard_errors": self.standard_errors,
            "variance_components": self.variance_components,
            "group_intercepts": self.group_intercepts,
            "reml_loglik": self.reml_loglik,
            "p_values": self.p_values,
            "df": self.df,
            "df_method": self.df_method,
            "n_obs": self.n_obs,
        }


@dataclass(frozen=True)
class SignificanceDecision:
    contrast: str
    estimate: float
    se: float
    statistic: float
    df: float
    df_method: str
    p: float
    alpha_level: float
    significant: bool


class _Design:
    """Precomputed sufficient statistics for fast REML evaluations."""

    def __init__(self, spec: MixedModelSpec, rows: Sequence[dict]) -> None:
        if not rows:
            raise ValueError("empty data table")
        groups = spec.expanded_groups()
        needed = {spec.response}
        if spec.fixed is not None:
            needed.add(spec.fixed)
        for group in groups:
            needed.update(group.split(":"))
        for col in needed:
            if any(col not in row for row in rows):
                raise ValueError(f"column {col!r} missing from data")

        try:
            self.y = np.array([float(row[spec.response]) for row in rows])
        except (TypeError, ValueError) as exc:
            raise ValueError(f"response {spec.response!r} must be numeric") from exc
        if not np.all(np.isfinite(self.y)):
            raise ValueError("response contains non-finite values")

        n = len(rows)
        if spec.fixed is None:
            self.fixed_levels: list[str] = []
            self.X = np.ones((n, 1))
            self.effect_names = ["(Intercept)"]
        else:
            fixed_values = [str(row[spec.fixed]) for row in rows]
            self.fixed_levels = sorted(set(fixed_values))
            if len(self.fixed_levels) < 2:
                raise ValueError(
                    f"fixed factor {spec.fixed!r} needs at least 2 levels"
                )
            self.X = np.zeros((n, len(self.fixed_levels)))
            self.X[:, 0] = 1.0
            level_index = {lvl: i for i, lvl in enumerate(self.fixed_levels)}
            for i, value in enumerate(fixed_values):
                j = level_index[value]
                if j > 0:
                    self.X[i, j] = 1.0
            self.effect_names = ["(Intercept)"] + [
                f"{spec.fixed}[{lvl}]" for lvl in self.fixed_levels[1:]
            ]
        p = self.X.shape[1]
        if np.linalg.matrix_rank(self.X) < p:
            raise ValueError("singular design: fixed-effect columns are collinear")

        def group_value(row: dict, group: str) -> str:
            return ":".join(str(row[part]) for part in group.split(":"))

        self.group_names = groups
        self.group_levels: dict[str, list[str]] = {}
        z_blocks = []
        for group in groups:
            values = [group_value(row, group) for row in rows]
            levels = sorted(set(values))
            self.group_levels[group] = levels
            block = np.zeros((n, len(levels)))
            index = {lvl: j for j, lvl in enumerate(levels)}
            for i, value in enumerate(values):
                block[i, index[value]] = 1.0
            z_blocks.append(block)
        self.q_sizes = tuple(len(self.group_levels[g]) for g in groups)
        self.Z = np.hstack(z_blocks) if z_blocks else np.zeros((n, 0))

        self.n, self.p, self.q = n, p, self.Z.shape[1]
        self.ZtZ = self.Z.T @ self.Z
        self.ZtX = self.Z.T @ self.X
        self.Zty = self.Z.T @ self.y
        self.XtX = self.X.T @ self.X
        self.Xty = self.X.T @ self.y
        self.yty = float(self.y @ self.y)
        self.rank_xz = int(np.linalg.matrix_rank(np.hstack([self.X, self.Z])))

    def _d_inverse_diag(self, group_vars: np.ndarray) -> np.ndarray:
        return np.repeat(1.0 / group_vars, self.q_sizes)

    def loglik(self, theta: np.ndarray) -> float:
        """Restricted log-likelihood at log-variances theta.

        theta = (log sigma2_g per grouping ..., log sigma2_residual).
        """
        theta = np.clip(theta, -LOG_VARIANCE_BOUND, LOG_VARIANCE_BOUND)
        group_vars = np.exp(theta[:-1])
        resid_var = float(np.exp(theta[-1]))

        if self.q:
            M = resid_var * np.diag(self._d_inverse_diag(group_vars)) + self.ZtZ
            sign, logdet_m = np.linalg.slogdet(M)
            if sign <= 0:
                return -np.inf
            MiZtX = np.linalg.solve(M, self.ZtX)
            MiZty = np.linalg.solve(M, self.Zty)
            xtvx = (self.XtX - self.ZtX.T @ MiZtX) / resid_var
            xtvy = (self.Xty - self.ZtX.T @ MiZty) / resid_var
            ytvy = (self.yty - self.Zty @ MiZty) / resid_var
            logdet_v = (
                self.n * math.log(resid_var)
                + float(np.dot(self.q_sizes, theta[:-1]))
                - self.q * math.log(resid_var)
                + logdet_m
            )
        else:
            xtvx = self.XtX / resid_var
            xtvy = self.Xty / resid_var
            ytvy = self.yty / resid_var
            logdet_v = self.n * math.log(resid_var)

        sign_x, logdet_x = np.linalg.slogdet(xtvx)
        if sign_x <= 0:
            return -np.inf
        try:
            beta = np.linalg.solve(xtvx, xtvy)
        except np.linalg.LinAlgError:
            return -np.inf
        rss = ytvy - float(beta @ xtvy)
        if rss <= 0:
            rss = max(rss, 1e-300)
        return -0.5 * (
            (self.n - self.p) * math.log(2 * math.pi) + logdet_v + logdet_x + rss
        )

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        """Gradient of the restricted log-likelihood in log-variance scale.

        Uses d l / d s_k = -0.5 [tr(P V_k) - y' P V_k P y] with
        V_k = Z_k Z_k' per grouping and V_k = I for the residual, then
        scales by s_k for the log parametrization.  Every term reduces to
        the precomputed q- and p-dimensional blocks.
        """
        theta = np.clip(theta, -LOG_VARIANCE_BOUND, LOG_VARIANCE_BOUND)
        group_vars = np.exp(theta[:-1])
        s2 = float(np.exp(theta[-1]))
        grad = np.zeros(len(theta))

        if self.q:
            d_diag = np.repeat(group_vars, self.q_sizes)
            M = s2 * np.diag(1.0 / d_diag) + self.ZtZ
            MiA = np.linalg.solve(M, self.ZtZ)
            MiB = np.linalg.solve(M, self.ZtX)
            Mic = np.linalg.solve(M, self.Zty)
            W = (self.XtX - self.ZtX.T @ MiB) / s2
            v = (self.Xty - self.ZtX.T @ Mic) / s2
        else:
            W = self.XtX / s2
            v = self.Xty / s2
        beta = np.linalg.solve(W, v)
        rtr = float(
            self.yty - 2.0 * beta @ self.Xty + beta @ (self.XtX @ beta)
        )

        if self.q:
            t = self.Zty - self.ZtX @ beta
            s_vec = np.linalg.solve(M, t)
            vinv_r_sq = (
                rtr - 2.0 * float(t @ s_vec) + float(s_vec @ (self.ZtZ @ s_vec))
            ) / s2**2
            zvz = (self.ZtZ - self.ZtZ @ MiA) / s2
            G = (self.ZtX.T - MiB.T @ self.ZtZ) / s2
            WiG = np.linalg.solve(W, G)
            w_vec = s_vec / d_diag
            offset = 0
            for k, size in enumerate(self.q_sizes):
                sl = slice(offset, offset + size)
                trace_k = float(np.trace(zvz[sl, sl])) - float(
                    (G[:, sl] * WiG[:, sl]).sum()
                )
                quad_k = float(w_vec[sl] @ w_vec[sl])
                grad[k] = -0.5 * group_vars[k] * (trace_k - quad_k)
                offset += size
            tr_vinv = (self.n - float(np.trace(MiA))) / s2
            xv2x = (
                self.XtX
                - 2.0 * self.ZtX.T @ MiB
                + MiB.T @ (self.ZtZ @ MiB)
            ) / s2**2
        else:
            vinv_r_sq = rtr / s2**2
            tr_vinv = self.n / s2
            xv2x = self.XtX / s2**2
        trace_resid = tr_vinv - float(np.trace(np.linalg.solve(W, xv2x)))
        grad[-1] = -0.5 * s2 * (trace_resid - vinv_r_sq)
        return grad

    def solution_at(self, theta: np.ndarray):
        """beta, cov(beta), and BLUPs at the given log-variances."""
        theta = np.clip(theta, -LOG_VARIANCE_BOUND, LOG_VARIANCE_BOUND)
        group_vars = np.exp(theta[:-1])
        resid_var = float(np.exp(theta[-1]))
        if self.q:
            M = resid_var * np.diag(self._d_inverse_diag(group_vars)) + self.ZtZ
            MiZtX = np.linalg.solve(M, self.ZtX)
            MiZty = np.linalg.solve(M, self.Zty)
            xtvx = (self.XtX - self.ZtX.T @ MiZtX) / resid_var
            xtvy = (self.Xty - self.ZtX.T @ MiZty) / resid_var
        else:
            M = np.zeros((0, 0))
            xtvx = self.XtX / resid_var
            xtvy = self.Xty / resid_var
        beta = np.linalg.solve(xtvx, xtvy)
        cov = np.linalg.inv(xtvx)
        if self.q:
            blups = np.linalg.solve(M, self.Zty - self.ZtX @ beta)
        else:
            blups = np.zeros(0)
        return beta, cov, blups


def _fd_jacobian(fn, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    d = len(theta)
    jac = np.zeros((d, d))
    for i in range(d):
        step = np.zeros(d)
        step[i] = h
        jac[:, i] = (fn(theta + step) - fn(theta - step)) / (2 * h)
    return 0.5 * (jac + jac.T)


def _newton_polish(design: _Design, theta: np.ndarray, max_steps: int = 30):
    """Drive the analytic gradient toward zero from the best probed point.

    The simplex search resolves the optimum only to the float resolution of
    the objective; Newton steps on the analytic gradient (accepted while the
    gradient norm shrinks) pin the interior optimum to near machine
    precision.  Boundary components (variances collapsing to zero) leave the
    Hessian singular, in which case the incoming point is kept.
    """
    grad = design.gradient(theta)
    gnorm = float(np.max(np.abs(grad)))
    for _ in range(max_steps):
        if not np.isfinite(gnorm) or gnorm < 1e-11:
            break
        hess = _fd_jacobian(design.gradient, theta)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        accepted = False
        for scale in (1.0, 0.5, 0.25, 0.1):
            candidate = np.clip(
                theta - scale * step, -LOG_VARIANCE_BOUND, LOG_VARIANCE_BOUND
            )
            candidate_grad = design.gradient(candidate)
            candidate_norm = float(np.max(np.abs(candidate_grad)))
            if np.isfinite(candidate_norm) and candidate_norm < gnorm:
                theta, grad, gnorm = candidate, candidate_grad, candidate_norm
                accepted = True
                break
        if not accepted:
            break
    return theta, design.loglik(theta)


def fit_reml(
    spec: MixedModelSpec,
    rows: Sequence[dict],
    tol: float = CONVERGENCE_TOL,
    max_restarts: int = 3,
) -> MixedFit:
    """Fit the model, returning estimates at the best probed REML value."""
    design = _Design(spec, rows)
    n_params = len(design.group_names) + 1

    ols_beta, *_ = np.linalg.lstsq(design.X, design.y, rcond=None)
    base_var = float(np.var(design.y - design.X @ ols_beta))
    base_var = max(base_var, 1e-8)

    probes: list[tuple[float, np.ndarray]] = []

    def objective(theta: np.ndarray) -> float:
        value = design.loglik(theta)
        probes.append((value, np.clip(theta, -LOG_VARIANCE_BOUND, LOG_VARIANCE_BOUND)))
        return -value

    starts = [
        np.log(np.full(n_params, base_var / n_params)),
        np.concatenate([np.full(n_params - 1, np.log(base_var / 20)), [np.log(base_var)]]),
        np.concatenate([np.full(n_params - 1, np.log(base_var)), [np.log(base_var / 10)]]),
    ]
    for start in starts[: max_restarts + 1]:
        optimize.minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={"xatol": tol * 1e-2, "fatol": tol * 1e-2, "maxiter": 4000},
        )

    finite = [(value, theta) for value, theta in probes if np.isfinite(value)]
    if not finite:
        raise RuntimeError(
            "REML optimization failed: no finite objective value probed "
            f"(n={design.n}, q={design.q}, starts={len(starts)})"
        )
    best_value, best_theta = max(finite, key=lambda item: item[0])
    polished_theta, polished_value = _newton_polish(design, best_theta)
    if np.isfinite(polished_value) and polished_value >= best_value - 1e-9:
        best_theta, best_value = polished_theta, polished_value

    beta, cov, blups = design.solution_at(best_theta)
    ses = np.sqrt(np.diag(cov))
    df = float(design.n - design.rank_xz)
    p_values = {}
    for name, estimate, se in zip(design.effect_names[1:], beta[1:], ses[1:]):
        t_stat = estimate / se
        p_values[name] = float(2.0 * stats.t.sf(abs(t_stat), df))

    variance_components = {
        group: float(np.exp(best_theta[i])) for i, group in enumerate(design.group_names)
    }
    variance_components["residual"] = float(np.exp(best_theta[-1]))

    group_intercepts: dict[str, dict[str, float]] = {}
    offset = 0
    for group, size in zip(design.group_names, design.q_sizes):
        levels = design.group_levels[group]
        group_intercepts[group] = {
            level: float(blups[offset + j]) for j, level in enumerate(levels)
        }
        offset += size

    return MixedFit(
        spec=spec,
        fixed_effects=dict(zip(design.effect_names, map(float, beta))),
        standard_errors=dict(zip(design.effect_names, map(float, ses))),
        variance_components=variance_components,
        group_intercepts=group_intercepts,
        reml_loglik=float(best_value),
        p_values=p_values,
        df=df,
        df_method=DF_METHOD,
        n_obs=design.n,
    )


def reml_loglik_at(
    spec: MixedModelSpec, rows: Sequence[dict], variances: dict[str, float]
) -> float:
    """The restricted log-likelihood at explicit variance components."""
    design = _Design(spec, rows)
    theta = np.log(
        [variances[g] for g in design.group_names] + [variances["residual"]]
    )
    return design.loglik(theta)


def rank_group_intercepts(fit: MixedFit, grouping: str) -> list[str]:
    """Levels of one grouping ordered by predicted offset, descending."""
    if grouping not in fit.group_intercepts:
        raise ValueError(f"unknown grouping {grouping!r}")
    offsets = fit.group_intercepts[grouping]
    return sorted(offsets, key=lambda level: -offsets[level])


def significance(
    fit: MixedFit, contrast: str, alpha_level: float = 0.01
) -> SignificanceDecision:
    """Wald test of one fixed contrast at the fit's degrees of freedom."""
    if contrast not in fit.p_values:
        raise ValueError(f"unknown contrast {contrast!r}")
    estimate = fit.fixed_effects[contrast]
    se = fit.standard_errors[contrast]
    p = fit.p_values[contrast]
    return SignificanceDecision(
        contrast=contrast,
        estimate=estimate,
        se=se,
        statistic=estimate / se,
        df=fit.df,
        df_method=fit.df_method,
        p=p,
        alpha_level=alpha_level,
        significant=p < alpha_level,
    )


def bin_length(value: float, width: int = LENGTH_BIN_WIDTH) -> str:
    """Categorical label for a length binned at the given width."""
    if value < 0:
        raise ValueError("length must be non-negative")
    lo = int(value // width) * width
    return f"{lo}-{lo + width - 1}"


def apply_length_bins(
    rows: Iterable[dict], column: str, width: int = LENGTH_BIN_WIDTH, out_column: str | None = None
) -> list[dict]:
    """Copy rows with a binned categorical version of a numeric column."""
    out_column = out_column or f"{column}_bin"
    binned = []
    for row in rows:
        new_row = dict(row)
        new_row[out_column] = bin_length(float(row[column]), width)
        binned.append(new_row)
    return binned


def read_table(path: str | Path) -> list[dict]:
    """Load a CSV or JSONL data table as a list of row dicts."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            return [dict(row) for row in csv.DictReader(fh)]
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_table(rows: Sequence[dict], path: str | Path) -> None:
    """Write rows as CSV or JSONL depending on the file extension."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if not rows:
            raise ValueError("cannot infer CSV header from empty rows")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        return
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
