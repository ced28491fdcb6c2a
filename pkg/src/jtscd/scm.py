"""Random linear time-dependent SCMs over multiple datasets, and their simulation.

Variables are indexed as: system variables ``0..N-1``, then temporal
contexts, then spatial contexts.  Each system variable is a linear function
of an autoregressive term, lagged/contemporaneous system parents, temporal
context parents (possibly lagged) and spatial context parents (always
contemporaneous), plus unit-variance Gaussian noise.  Context variables are
exogenous: temporal contexts are i.i.d. over time and shared by all
datasets, spatial contexts are drawn once per dataset and constant in time.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import GroundTruthGraph, VariableRole


class GenerationError(RuntimeError):
    """No stable coefficient draw found within the attempt budget."""


class SimulationError(RuntimeError):
    """Simulated values blew up (non-finite)."""


@dataclass(frozen=True)
class LinearTerm:
    """One linear parent term: ``coeff * value(var, t - lag)``."""
    var: int
    lag: int
    coeff: float


@dataclass
class SCMSpec:
    """Structural specification of a linear joint SCM.

    ``autocorr[i]`` is the lag-1 self coefficient of system variable ``i``
    (0 disables it); ``terms[i]`` lists its remaining parents.  The context
    block of ``observed_mask`` follows variable order: temporal contexts
    first, then spatial contexts.
    """
    n_system: int
    n_temporal_ctx: int
    n_spatial_ctx: int
    autocorr: tuple
    terms: tuple
    noise_std: tuple
    observed_mask: tuple

    @property
    def n_contexts(self):
        return self.n_temporal_ctx + self.n_spatial_ctx

    @property
    def n_vars(self):
        return self.n_system + self.n_contexts

    def temporal_ctx_var(self, k):
        return self.n_system + k

    def spatial_ctx_var(self, k):
        return self.n_system + self.n_temporal_ctx + k

    def role_of(self, v):
        if v < self.n_system:
            return VariableRole.SYSTEM
        k = v - self.n_system
        observed = self.observed_mask[k]
        if k < self.n_temporal_ctx:
            return (VariableRole.TEMPORAL_CONTEXT if observed
                    else VariableRole.LATENT_TEMPORAL_CONTEXT)
        return (VariableRole.SPATIAL_CONTEXT if observed
                else VariableRole.LATENT_SPATIAL_CONTEXT)

    def roles(self):
        return [self.role_of(v) for v in range(self.n_vars)]

    @property
    def max_lag(self):
        lags = [1] if any(a != 0.0 for a in self.autocorr) else [0]
        lags += [t.lag for terms in self.terms for t in terms]
        return max(lags)

    def validate(self):
        if len(self.autocorr) != self.n_system or len(self.terms) != self.n_system:
            raise ValueError("autocorr/terms must have one entry per system variable")
        if len(self.noise_std) != self.n_system:
            raise ValueError("noise_std must have one entry per system variable")
        if len(self.observed_mask) != self.n_contexts:
            raise ValueError("observed_mask must have one entry per context")
        for i, terms in enumerate(self.terms):
            for t in terms:
                if t.coeff == 0.0:
                    raise ValueError("zero-coefficient terms are not allowed")
                if not (0 <= t.var < self.n_vars):
                    raise ValueError(f"term parent {t.var} out of range")
                single = (self.n_system + self.n_temporal_ctx <= t.var)
                if single and t.lag != 0:
                    raise ValueError("spatial context parents must have lag 0")
                if t.lag < 0:
                    raise ValueError("negative lags are not allowed")
        self.to_graph().validate()
        return self

    def to_graph(self):
        g = GroundTruthGraph(self.roles(), self.max_lag)
        for i in range(self.n_system):
            if self.autocorr[i] != 0.0:
                g.add_edge(i, i, 1)
            for t in self.terms[i]:
                g.add_edge(t.var, i, t.lag)
        return g

    def to_dict(self):
        return {
            "n_system": self.n_system,
            "n_temporal_ctx": self.n_temporal_ctx,
            "n_spatial_ctx": self.n_spatial_ctx,
            "autocorr": list(self.autocorr),
            "terms": [[[t.var, t.lag, t.coeff] for t in terms] for terms in self.terms],
            "noise_std": list(self.noise_std),
            "observed_mask": list(self.observed_mask),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            n_system=d["n_system"],
            n_temporal_ctx=d["n_temporal_ctx"],
            n_spatial_ctx=d["n_spatial_ctx"],
            autocorr=tuple(d["autocorr"]),
            terms=tuple(tuple(LinearTerm(*t) for t in terms) for terms in d["terms"]),
            noise_std=tuple(d["noise_std"]),
            observed_mask=tuple(bool(b) for b in d["observed_mask"]),
        ).validate()


@dataclass
class DatasetCollection:
    """M simulated datasets plus the shared and per-dataset context values.

    ``system`` has shape (M, T, n_system); ``temporal_ctx`` (T, n_temporal_ctx)
    is shared by every dataset; ``spatial_ctx`` (M, n_spatial_ctx) is constant
    over time within a dataset.  The ``noise`` array and the ``*_scale``
    factors are simulation diagnostics that allow reconstructing the raw
    (pre-rescaling) values.
    """
    system: np.ndarray
    temporal_ctx: np.ndarray
    spatial_ctx: np.ndarray
    observed_mask: tuple
    noise: np.ndarray | None = None
    system_scale: np.ndarray | None = None
    temporal_scale: np.ndarray | None = None
    spatial_scale: np.ndarray | None = None

    @property
    def M(self):
        return self.system.shape[0]

    @property
    def T(self):
        return self.system.shape[1]

    @property
    def n_system(self):
        return self.system.shape[2]

    @property
    def n_temporal_ctx(self):
        return self.temporal_ctx.shape[1]

    @property
    def n_spatial_ctx(self):
        return self.spatial_ctx.shape[1]

    def observed_temporal_indices(self):
        return [k for k in range(self.n_temporal_ctx) if self.observed_mask[k]]

    def observed_spatial_indices(self):
        return [k for k in range(self.n_spatial_ctx)
                if self.observed_mask[self.n_temporal_ctx + k]]

    def observed_roles(self):
        """Roles of the observed variables in discovery order (no dummies)."""
        roles = [VariableRole.SYSTEM] * self.n_system
        roles += [VariableRole.TEMPORAL_CONTEXT] * len(self.observed_temporal_indices())
        roles += [VariableRole.SPATIAL_CONTEXT] * len(self.observed_spatial_indices())
        return roles

    def mask_all_latent(self):
        """Same data with every context variable treated as unobserved."""
        return DatasetCollection(
            system=self.system, temporal_ctx=self.temporal_ctx,
            spatial_ctx=self.spatial_ctx,
            observed_mask=tuple(False for _ in self.observed_mask),
            noise=self.noise, system_scale=self.system_scale,
            temporal_scale=self.temporal_scale, spatial_scale=self.spatial_scale)

    # -- serialization -----------------------------------------------------

    def dataset_csv(self, m):
        """CSV text of dataset ``m`` with t, system, temporal and spatial columns."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = (["t"] + [f"X{i}" for i in range(self.n_system)]
                  + [f"Ctime{k}" for k in range(self.n_temporal_ctx)]
                  + [f"Cspace{k}" for k in range(self.n_spatial_ctx)])
        writer.writerow(header)
        for t in range(self.T):
            row = [str(t)]
            row += [f"{v:.17g}" for v in self.system[m, t]]
            row += [f"{v:.17g}" for v in self.temporal_ctx[t]]
            row += [f"{v:.17g}" for v in self.spatial_ctx[m]]
            writer.writerow(row)
        return buf.getvalue()

    def to_dir(self, path, spec=None, seed=None):
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        for m in range(self.M):
            (path / f"data_{m:03d}.csv").write_text(self.dataset_csv(m))
        meta = {
            "M": self.M, "T": self.T,
            "n_system": self.n_system,
            "n_temporal_ctx": self.n_temporal_ctx,
            "n_spatial_ctx": self.n_spatial_ctx,
            "observed_mask": list(self.observed_mask),
            "seed": seed,
            "spec": spec.to_dict() if spec is not None else None,
        }
        (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_dir(cls, path):
        path = Path(path)
        meta = json.loads((path / "meta.json").read_text())
        M, T = meta["M"], meta["T"]
        n_sys, n_t, n_s = meta["n_system"], meta["n_temporal_ctx"], meta["n_spatial_ctx"]
        system = np.zeros((M, T, n_sys))
        temporal = np.zeros((T, n_t))
        spatial = np.zeros((M, n_s))
        for m in range(M):
            rows = list(csv.reader((path / f"data_{m:03d}.csv").read_text().splitlines()))
            body = rows[1:]
            if len(body) != T:
                raise ValueError(f"dataset {m} has {len(body)} rows, expected {T}")
            for t, row in enumerate(body):
                vals = [float(v) for v in row[1:]]
                system[m, t] = vals[:n_sys]
                temporal_row = vals[n_sys:n_sys + n_t]
                if m == 0:
                    temporal[t] = temporal_row
                elif not np.array_equal(temporal[t], np.asarray(temporal_row)):
                    raise ValueError("temporal context differs across datasets")
                if t == 0:
                    spatial[m] = vals[n_sys + n_t:]
        return cls(system=system, temporal_ctx=temporal, spatial_ctx=spatial,
                   observed_mask=tuple(bool(b) for b in meta["observed_mask"]))


def _contemporaneous_order(spec):
    """Topological order of system variables w.r.t. lag-0 links."""
    children = {i: [] for i in range(spec.n_system)}
    indeg = {i: 0 for i in range(spec.n_system)}
    for i in range(spec.n_system):
        for t in spec.terms[i]:
            if t.lag == 0 and t.var < spec.n_system:
                children[t.var].append(i)
                indeg[i] += 1
    order = [i for i in range(spec.n_system) if indeg[i] == 0]
    head = 0
    while head < len(order):
        v = order[head]
        head += 1
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                order.append(c)
    if len(order) != spec.n_system:
        raise ValueError("contemporaneous assignments contain a cycle")
    return order


def spectral_radius(spec):
    """Spectral radius of the reduced-form VAR companion matrix."""
    N = spec.n_system
    p = max(spec.max_lag, 1)
    B = np.zeros((p + 1, N, N))
    for i in range(N):
        if spec.autocorr[i] != 0.0:
            B[1, i, i] += spec.autocorr[i]
        for t in spec.terms[i]:
            if t.var < N:
                B[t.lag, i, t.var] += t.coeff
    lhs = np.eye(N) - B[0]
    reduced = [np.linalg.solve(lhs, B[k]) for k in range(1, p + 1)]
    companion = np.zeros((N * p, N * p))
    companion[:N, :] = np.hstack(reduced)
    if p > 1:
        companion[N:, :-N] = np.eye(N * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(companion))))


def generate_random_model(n_system=5, n_temporal_ctx=2, n_spatial_ctx=1,
                          frac_observed=0.5, seed=0, max_lag=3,
                          contemp_frac=0.5, n_system_parents=1,
                          ctx_link_prob=1.0, autocorr_range=(0.3, 0.8),
                          coeff_range=(0.5, 0.9), lag_free=False,
                          stability_radius=0.95, max_attempts=100):
    """Draw a random SCM spec together with its ground-truth graph.

    Each system variable gets an autocorrelation coefficient, a fixed number
    of system parents (half contemporaneous, the rest at lags drawn uniformly
    from ``1..max_lag``) and at most one context parent.  The observed subset
    of contexts has size ``ceil(frac_observed * n_contexts)``.  Coefficient
    draws are rejected until the reduced-form VAR companion matrix has
    spectral radius below ``stability_radius``.

    With ``lag_free=True`` all links are contemporaneous and autocorrelation
    is disabled (requires ``n_temporal_ctx == 0``): the i.i.d. multi-dataset
    setting.
    """
    if n_system < 1:
        raise ValueError("need at least one system variable")
    if not (0.0 <= frac_observed <= 1.0):
        raise ValueError("frac_observed must lie in [0, 1]")
    if lag_free and n_temporal_ctx > 0:
        raise ValueError("lag-free models cannot have temporal contexts")
    n_ctx = n_temporal_ctx + n_spatial_ctx
    rng = np.random.default_rng(seed)

    for _ in range(max_attempts):
        order = list(rng.permutation(n_system))
        pos = {v: k for k, v in enumerate(order)}
        autocorr = ([0.0] * n_system if lag_free
                    else list(rng.uniform(*autocorr_range, size=n_system)))
        terms = [[] for _ in range(n_system)]
        for i in range(n_system):
            used = {(i, 1)}
            for _ in range(n_system_parents):
                for _retry in range(20):
                    contemp = lag_free or rng.random() < contemp_frac
                    earlier = [v for v in range(n_system) if pos[v] < pos[i]]
                    if contemp and not earlier:
                        if lag_free:
                            break
                        contemp = False
                    if contemp:
                        parent = int(earlier[rng.integers(len(earlier))])
                        lag = 0
                    else:
                        others = [v for v in range(n_system) if v != i]
                        if not others:
                            break
                        parent = int(others[rng.integers(len(others))])
                        lag = int(rng.integers(1, max_lag + 1))
                    if (parent, lag) not in used:
                        used.add((parent, lag))
                        # random sign keeps the rejection sampler viable:
                        # all-positive cross couplings on top of autocorrelation
                        # are almost surely explosive
                        sign = -1.0 if rng.random() < 0.5 else 1.0
                        terms[i].append(LinearTerm(
                            parent, lag, sign * float(rng.uniform(*coeff_range))))
                        break
            if n_ctx > 0 and rng.random() < ctx_link_prob:
                c = int(rng.integers(n_ctx))
                if c < n_temporal_ctx:
                    var = n_system + c
                    lag = 0 if (lag_free or rng.random() < contemp_frac) \
                        else int(rng.integers(1, max_lag + 1))
                else:
                    var = n_system + c
                    lag = 0
                terms[i].append(LinearTerm(var, lag, float(rng.uniform(*coeff_range))))
        n_observed = int(np.ceil(frac_observed * n_ctx)) if n_ctx else 0
        mask = [False] * n_ctx
        if n_observed:
            for k in rng.choice(n_ctx, size=n_observed, replace=False):
                mask[int(k)] = True
        spec = SCMSpec(
            n_system=n_system, n_temporal_ctx=n_temporal_ctx,
            n_spatial_ctx=n_spatial_ctx, autocorr=tuple(autocorr),
            terms=tuple(tuple(t) for t in terms),
            noise_std=tuple(1.0 for _ in range(n_system)),
            observed_mask=tuple(mask))
        if lag_free or spectral_radius(spec) < stability_radius:
            spec.validate()
            return spec, spec.to_graph()
    raise GenerationError(
        f"no stable model found in {max_attempts} attempts "
        f"(radius threshold {stability_radius})")


def simplified_preset():
    """Fixed 2-system / 4-context model with one latent context of each kind.

    Both system variables share all four context parents with coefficient
    0.5 (spatial ones contemporaneous, temporal ones at lag 1); X0 also has
    the contemporaneous parent X1, and X1 has autocorrelation 0.5.  One
    spatial and one temporal context are unobserved.
    """
    x0, x1, ct0, ct1, cs0, cs1 = range(6)
    terms_x0 = (LinearTerm(x1, 0, 0.5),
                LinearTerm(ct0, 1, 0.5), LinearTerm(ct1, 1, 0.5),
                LinearTerm(cs0, 0, 0.5), LinearTerm(cs1, 0, 0.5))
    terms_x1 = (LinearTerm(ct0, 1, 0.5), LinearTerm(ct1, 1, 0.5),
                LinearTerm(cs0, 0, 0.5), LinearTerm(cs1, 0, 0.5))
    spec = SCMSpec(
        n_system=2, n_temporal_ctx=2, n_spatial_ctx=2,
        autocorr=(0.0, 0.5),
        terms=(terms_x0, terms_x1),
        noise_std=(1.0, 1.0),
        observed_mask=(True, False, True, False))
    spec.validate()
    return spec, spec.to_graph()


def simulate(spec, M, T, burn_in=100, seed=0, rescale=True):
    """Simulate ``M`` datasets of length ``T`` from a linear SCM spec.

    Contexts and noises are standard normal; contemporaneous assignments are
    evaluated in topological order; the first ``burn_in`` steps are dropped.
    Afterwards every system variable is divided by its standard deviation
    pooled over all datasets (and, for comparability, context variables by
    theirs), so pooled variances are one.
    """
    spec.validate()
    if T <= spec.max_lag:
        raise ValueError(f"T={T} must exceed the maximum lag {spec.max_lag}")
    rng = np.random.default_rng(seed)
    N, Kt, Ks = spec.n_system, spec.n_temporal_ctx, spec.n_spatial_ctx
    total = T + burn_in
    ctx_t = rng.standard_normal((total, Kt)) if Kt else np.zeros((total, 0))
    ctx_s = rng.standard_normal((M, Ks)) if Ks else np.zeros((M, 0))
    noise = rng.standard_normal((M, total, N)) * np.asarray(spec.noise_std)

    order = _contemporaneous_order(spec)
    X = np.zeros((M, total, N))
    for t in range(total):
        for i in order:
            acc = noise[:, t, i].copy()
            if spec.autocorr[i] != 0.0 and t >= 1:
                acc += spec.autocorr[i] * X[:, t - 1, i]
            for term in spec.terms[i]:
                if term.var < N:
                    if t - term.lag >= 0:
                        acc += term.coeff * X[:, t - term.lag, term.var]
                elif term.var < N + Kt:
                    if t - term.lag >= 0:
                        acc += term.coeff * ctx_t[t - term.lag, term.var - N]
                else:
                    acc += term.coeff * ctx_s[:, term.var - N - Kt]
            X[:, t, i] = acc
    if not np.all(np.isfinite(X)):
        raise SimulationError("simulation produced non-finite values")

    system = X[:, burn_in:, :].copy()
    noise_kept = noise[:, burn_in:, :].copy()
    temporal = ctx_t[burn_in:, :].copy()
    spatial = ctx_s.copy()

    def pooled_std(a, axes):
        s = a.std(axis=axes) if a.size else np.ones(a.shape[-1])
        return np.where(s < 1e-12, 1.0, s)

    if rescale:
        s_sys = pooled_std(system, (0, 1))
        s_t = pooled_std(temporal, (0,)) if Kt else np.ones(0)
        s_s = pooled_std(spatial, (0,)) if Ks and M > 1 else np.ones(Ks)
        system /= s_sys
        if Kt:
            temporal /= s_t
        if Ks:
            spatial /= s_s
    else:
        s_sys, s_t, s_s = np.ones(N), np.ones(Kt), np.ones(Ks)

    return DatasetCollection(
        system=system, temporal_ctx=temporal, spatial_ctx=spatial,
        observed_mask=tuple(spec.observed_mask), noise=noise_kept,
        system_scale=s_sys, temporal_scale=s_t, spatial_scale=s_s)
