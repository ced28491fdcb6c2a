"""Conditional independence tests: pooled partial correlation and a graph oracle.

The partial-correlation test residualizes both sides on the conditioning
design (intercept included) and tests the residual Pearson correlation
against a Student-t law.  Multi-component variables (the one-hot dummy
blocks) are handled component-wise: the statistic is the maximum absolute
correlation over component pairs, and p-values are Bonferroni-combined.

The oracle test answers the same queries exactly from a ground-truth graph:
a dummy inside the conditioning set stands for all context variables of its
kind (observed and latent), and a dummy as a tested endpoint is independent
of a system node iff every latent context of its kind is d-separated from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .graph import GroundTruthGraph, VariableRole, d_separated, observed_variables


class QueryError(ValueError):
    """Raised for malformed CI queries or violated sample-size preconditions."""


@dataclass(frozen=True)
class CITestResult:
    statistic: float
    p_value: float
    n_effective: int
    degenerate: bool = False


@dataclass(frozen=True)
class CIQuery:
    """A conditional independence query over ``(var, lag)`` column selectors."""
    x: tuple
    y: tuple
    z: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(tuple(s) for s in self.x))
        object.__setattr__(self, "y", tuple(tuple(s) for s in self.y))
        object.__setattr__(self, "z", tuple(tuple(s) for s in self.z))
        xs, ys, zs = set(self.x), set(self.y), set(self.z)
        if not self.x or not self.y:
            raise QueryError("x and y must be non-empty")
        if xs & ys:
            raise QueryError("x and y overlap")
        if (xs | ys) & zs:
            raise QueryError("conditioning set overlaps the tested pair")


_VARANCE_EPS = 1e-12


def _demean_by_groups(a, labels, n_groups):
    """Exact projection of columns of ``a`` onto group-mean complements."""
    sums = np.zeros((n_groups, a.shape[1]))
    np.add.at(sums, labels, a)
    counts = np.bincount(labels, minlength=n_groups).astype(float)
    occupied = counts > 0
    counts[~occupied] = 1.0
    means = sums / counts[:, None]
    return a - means[labels], int(occupied.sum())


def _residualize(values, z_selectors, data, rows):
    """Residuals of ``values`` w.r.t. the conditioning design, plus its rank.

    One-hot dummy blocks in ``z`` are projected out by exact group demeaning
    (the two blocks only share the intercept direction on a balanced panel,
    so ranks add up to one shared dimension); remaining scalar columns plus
    an intercept are removed by minimum-norm least squares.
    """
    n = values.shape[0]
    group_blocks = []
    plain = []
    for (var, lag) in z_selectors:
        role = data.var_roles[var]
        if role is VariableRole.TIME_DUMMY:
            group_blocks.append((data.time_index[rows] - data.tau_max,
                                 data.T - data.tau_max))
        elif role is VariableRole.SPACE_DUMMY:
            group_blocks.append((data.dataset_index[rows], data.M))
        else:
            plain.append((var, lag))

    design_cols = [np.ones((n, 1))]
    if plain:
        design_cols.append(np.hstack(
            [data._column_block(var, lag, rows) for (var, lag) in plain]))
    design = np.hstack(design_cols)

    work = np.hstack([values, design])
    rank = 0
    for k, (labels, n_groups) in enumerate(group_blocks):
        work, occupied = _demean_by_groups(work, labels, n_groups)
        rank += occupied if k == 0 else occupied - 1
    resid_values = work[:, :values.shape[1]]
    resid_design = work[:, values.shape[1]:]
    norms = np.linalg.norm(resid_design, axis=0)
    resid_design = resid_design[:, norms > _VARANCE_EPS * max(1.0, np.sqrt(n))]
    if resid_design.shape[1]:
        sol, _, lstsq_rank, _ = np.linalg.lstsq(resid_design, resid_values, rcond=None)
        resid_values = resid_values - resid_design @ sol
        rank += lstsq_rank
    return resid_values, rank


def _z_column_count(z_selectors, data):
    return sum(data.n_components(var) for (var, lag) in z_selectors)


def parcorr_test(query, data, correction="bonferroni"):
    """Component-wise partial correlation test on pooled data.

    For every (x-component, y-component) pair the Pearson correlation ``r``
    of the conditioning residuals is transformed to
    ``t = r * sqrt(df / (1 - r^2))`` and tested two-sidedly against a
    Student-t law with ``df = n - rank(design) - 1`` degrees of freedom,
    where the design includes the intercept (numerical rank, not column
    count).  The reported statistic is ``max |r|``; the p-value is the
    Bonferroni-combined minimum (``correction="none"`` reports the raw
    minimum instead).

    Tested variables flagged degenerate (constant dummy blocks) or residuals
    with zero variance yield an independence verdict with ``p_value = 1`` and
    the degenerate flag set.
    """
    if correction not in ("bonferroni", "none"):
        raise ValueError("correction must be 'bonferroni' or 'none'")
    if any(data.is_degenerate(var) for (var, _) in query.x + query.y):
        return CITestResult(0.0, 1.0, data.n_rows, degenerate=True)

    all_sel = list(query.x) + list(query.y) + list(query.z)
    _, rows = data.extract_aligned(all_sel)
    n = len(rows)
    n_z_cols = _z_column_count(query.z, data)
    if n <= n_z_cols + 3:
        raise QueryError(
            f"too few samples: n={n} with {n_z_cols} conditioning columns "
            f"(query x={query.x} y={query.y} z={query.z})")

    x_block = np.hstack([data._column_block(v, l, rows) for (v, l) in query.x])
    y_block = np.hstack([data._column_block(v, l, rows) for (v, l) in query.y])
    kx, ky = x_block.shape[1], y_block.shape[1]
    resid, rank = _residualize(np.hstack([x_block, y_block]), query.z, data, rows)
    rx, ry = resid[:, :kx], resid[:, kx:]
    df = n - rank - 1
    if df < 1:
        return CITestResult(0.0, 1.0, n, degenerate=True)

    sx = rx.std(axis=0)
    sy = ry.std(axis=0)
    ok_x, ok_y = sx > _VARANCE_EPS, sy > _VARANCE_EPS
    if not ok_x.any() or not ok_y.any():
        return CITestResult(0.0, 1.0, n, degenerate=True)

    corr = (rx - rx.mean(axis=0)).T @ (ry - ry.mean(axis=0)) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = corr / np.outer(np.where(ok_x, sx, 1.0), np.where(ok_y, sy, 1.0))
    corr = np.where(np.outer(ok_x, ok_y), corr, 0.0)
    corr = np.clip(corr, -1 + 1e-15, 1 - 1e-15)

    tvals = corr * np.sqrt(df / (1.0 - corr ** 2))
    pvals = 2.0 * stats.t.sf(np.abs(tvals), df)
    pvals = np.where(np.outer(ok_x, ok_y), pvals, 1.0)

    statistic = float(np.max(np.abs(corr)))
    min_p = float(np.min(pvals))
    n_pairs = kx * ky
    p_value = min(1.0, min_p * n_pairs) if correction == "bonferroni" else min_p
    return CITestResult(statistic, p_value, n, degenerate=False)


def centered_parcorr_test(x, y, data, groups="dataset"):
    """Group-demeaned unconditional correlation test.

    Demeans both columns within each dataset (or time step) and correlates
    the residuals; degrees of freedom account for the absorbed group means
    (``n - M - 1``), which makes the decision identical to conditioning on
    the full one-hot dummy block.
    """
    x_col = data.extract([x])
    y_col = data.extract([y])
    if groups == "dataset":
        labels, n_groups = data.dataset_index, data.M
    elif groups == "time":
        labels, n_groups = data.time_index - data.tau_max, data.T - data.tau_max
    else:
        raise ValueError("groups must be 'dataset' or 'time'")
    n = data.n_rows
    rx, occ = _demean_by_groups(x_col, labels, n_groups)
    ry, _ = _demean_by_groups(y_col, labels, n_groups)
    df = n - occ - 1
    if rx.std() < _VARANCE_EPS or ry.std() < _VARANCE_EPS or df < 1:
        return CITestResult(0.0, 1.0, n, degenerate=True)
    r = float(np.corrcoef(rx[:, 0], ry[:, 0])[0, 1])
    r = float(np.clip(r, -1 + 1e-15, 1 - 1e-15))
    t = r * np.sqrt(df / (1.0 - r ** 2))
    p = float(2.0 * stats.t.sf(abs(t), df))
    return CITestResult(abs(r), p, n)


class ParCorrCI:
    """Callable CI test bound to a pooled dataset; selector columns are cached."""

    def __init__(self, data, correction="bonferroni"):
        self.data = data
        self.correction = correction
        self.var_roles = list(data.var_roles)
        self.n_tests = 0

    def __call__(self, x, y, z=()):
        self.n_tests += 1
        query = CIQuery(x=(tuple(x),), y=(tuple(y),), z=tuple(z))
        return parcorr_test(query, self.data, correction=self.correction)


class GraphOracle:
    """Exact CI oracle over a ground-truth graph, in discovery index space.

    Queries use the observed-variable indexing (system, observed temporal
    contexts, observed spatial contexts) followed by the time and space
    dummy.  Conditioning on a dummy is realized by substituting all context
    nodes of its kind at every lag inside the unrolled window; testing a
    dummy against a system node quantifies d-separation over the latent
    contexts of its kind.
    """

    def __init__(self, graph, tau_max, unroll_depth=None):
        if not isinstance(graph, GroundTruthGraph):
            raise QueryError("the oracle needs a ground-truth graph")
        self.graph = graph
        self.tau_max = tau_max
        self.depth = unroll_depth or 4 * max(graph.tau_max, tau_max, 1)
        obs = observed_variables(graph)
        self.obs_map = obs
        self.n_observed = len(obs)
        self.time_dummy = self.n_observed
        self.space_dummy = self.n_observed + 1
        self.var_roles = [graph.roles[v] for v in obs]
        self.var_roles += [VariableRole.TIME_DUMMY, VariableRole.SPACE_DUMMY]

        roles = graph.roles
        self._latent = {
            "time": [v for v, r in enumerate(roles)
                     if r is VariableRole.LATENT_TEMPORAL_CONTEXT],
            "space": [v for v, r in enumerate(roles)
                      if r is VariableRole.LATENT_SPATIAL_CONTEXT],
        }
        self._time_substitution = [
            (v, lag) for v, r in enumerate(roles) if r.is_context and r.is_temporal_kind
            for lag in range(self.depth + 1)]
        self._space_substitution = [
            (v, 0) for v, r in enumerate(roles) if r.is_context and r.is_spatial_kind]
        self._cache = {}
        self.n_tests = 0

    def _dummy_kind(self, var):
        if var == self.time_dummy:
            return "time"
        if var == self.space_dummy:
            return "space"
        return None

    def _to_graph_node(self, sel):
        var, lag = sel
        if not (0 <= var < self.n_observed):
            raise QueryError(f"selector {sel} is not an observed variable")
        gvar = self.obs_map[var]
        if not self.graph.roles[gvar].is_time_indexed and lag != 0:
            raise QueryError(f"selector {sel} must have lag 0")
        if lag > self.depth:
            raise QueryError(f"lag {lag} outside the unrolled window {self.depth}")
        return (gvar, lag)

    def _substituted_z(self, z):
        out = []
        for sel in z:
            kind = self._dummy_kind(sel[0])
            if kind == "time":
                out.extend(self._time_substitution)
            elif kind == "space":
                out.extend(self._space_substitution)
            else:
                out.append(self._to_graph_node(sel))
        return frozenset(out)

    def __call__(self, x, y, z=()):
        x, y = tuple(x), tuple(y)
        key = (x, y, frozenset(tuple(s) for s in z))
        if key in self._cache:
            return self._cache[key]
        self.n_tests += 1
        x_kind, y_kind = self._dummy_kind(x[0]), self._dummy_kind(y[0])
        if x_kind and y_kind:
            raise QueryError("a dummy may appear on one side of the query only")
        zsub = self._substituted_z(z)
        if x_kind or y_kind:
            kind = x_kind or y_kind
            node = self._to_graph_node(y if x_kind else x)
            independent = True
            for latent in self._latent[kind]:
                lags = (range(self.depth + 1)
                        if self.graph.roles[latent].is_time_indexed else (0,))
                for lag in lags:
                    if (latent, lag) == node or (latent, lag) in zsub:
                        continue
                    if not d_separated(self.graph, (latent, lag), node, zsub,
                                       unroll_depth=self.depth):
                        independent = False
                        break
                if not independent:
                    break
        else:
            gx, gy = self._to_graph_node(x), self._to_graph_node(y)
            independent = d_separated(self.graph, gx, gy, zsub,
                                      unroll_depth=self.depth)
        result = (CITestResult(0.0, 1.0, 0) if independent
                  else CITestResult(1.0, 0.0, 0))
        self._cache[key] = result
        return result


def oracle_test(graph, query, tau_max=None, unroll_depth=None):
    """One-shot oracle evaluation of a CIQuery (single-selector x and y)."""
    if len(query.x) != 1 or len(query.y) != 1:
        raise QueryError("oracle queries test single variables on each side")
    tau_max = tau_max if tau_max is not None else graph.tau_max
    oracle = GraphOracle(graph, tau_max, unroll_depth=unroll_depth)
    return oracle(query.x[0], query.y[0], query.z)
