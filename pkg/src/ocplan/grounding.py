"""Signal-to-symbol mapping: paired density models per predicate.

Each evaluated predicate owns two density models over the 9-dim relative
state z = z1 - z2: one for physical configurations labeled true, one for
false. From the densities, the expected numbers of similar positive/negative
experiences are

    n+ = V_z * n_T+ * p+(z),      n- = V_z * n_T- * p-(z),

and the count-regularized probability and confidence are

    missing     n0 = max(0, n_c - (n+ + n-))
    p_true      (n+ + n0 * c) / (n+ + n- + n0)
    p_false     (n- + n0 * (1 - c)) / (n+ + n- + n0)
    confidence  (n+ + n-) / (n+ + n- + n0)

The estimator is density-backend agnostic: the online Gaussian mixture and
the stored-sample KDE baseline both just provide density(z) and n_total.

Mixture updates are sequential EM over per-component sufficient statistics
(mass, first and second moment). A new component is generated whenever the
pre-update density at the sample falls below thr_dens; the generation event
consumes the sample (the new component carries unit mass, so its weight is
exactly 1/(n_T + 1) after renormalization). Covariance eigenvalues are
floored after every material update.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .model import AIR, HAND, Atom, SymbolicState, make_sample
from .simworld import GeometryConfig, Scenario, evaluated_predicates, label_oracle

_LOG_2PI = float(np.log(2.0 * np.pi))


@njit(cache=True)
def _gmm_component_densities(z, means, invs, lognorm, weights, covdiag, skip_at):
    """weight_i * N(z; mu_i, cov_i) per component.

    Components whose contribution provably underflows float64 are skipped
    exactly: for positive-definite cov, quad >= max_a diff_a^2 / cov_aa, so
    0.5 * bound + lognorm - log(weight) > skip_at implies exp(...) == 0.0.
    """
    k, d = means.shape
    out = np.empty(k)
    for i in range(k):
        bound = 0.0
        for a in range(d):
            da = z[a] - means[i, a]
            q = da * da / covdiag[i, a]
            if q > bound:
                bound = q
        if weights[i] <= 0.0 or 0.5 * bound + lognorm[i] + skip_at[i] > 745.0:
            out[i] = 0.0
            continue
        quad = 0.0
        for a in range(d):
            da = z[a] - means[i, a]
            row = 0.0
            for b in range(d):
                row += invs[i, a, b] * (z[b] - means[i, b])
            quad += da * row
        out[i] = weights[i] * np.exp(-0.5 * quad - lognorm[i])
    return out


@njit(cache=True)
def _kde_density(z, rows, factor, floors):
    """Diagonal-bandwidth Gaussian KDE; per-dim scales re-derived every call."""
    n, d = rows.shape
    if n == 0:
        return 0.0
    h = np.empty(d)
    if n < 2:
        for j in range(d):
            h[j] = factor
    else:
        for j in range(d):
            mean = 0.0
            for i in range(n):
                mean += rows[i, j]
            mean /= n
            var = 0.0
            for i in range(n):
                diff = rows[i, j] - mean
                var += diff * diff
            scale = np.sqrt(var / n)
            if scale < floors[j]:
                scale = floors[j]
            h[j] = factor * scale
    total = 0.0
    for i in range(n):
        quad = 0.0
        for j in range(d):
            w = (rows[i, j] - z[j]) / h[j]
            quad += w * w
        total += np.exp(-0.5 * quad)
    norm = n * np.exp(0.5 * d * _LOG_2PI)
    for j in range(d):
        norm *= h[j]
    return total / norm


class ConfigurationError(ValueError):
    pass


class ModelCorruptError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parameters

@dataclass
class EstimatorParams:
    """Scalar knobs plus the per-dimension scales everything derives from."""

    dim: int
    v_z: float
    sigma_init: np.ndarray          # diagonal of a fresh component's covariance
    lambda_floor: float
    kde_scale_floor: np.ndarray     # per-dim lower bound for KDE bandwidth scales
    n_conf: float = 20.0            # samples needed for full confidence
    prior_c: float = 0.5            # a-priori probability of a positive
    thr_dens: float = 5e-4          # Gaussian generation threshold
    thr_conf: float = 0.7           # instruction gate on the confidence index
    p_thr: float = 0.8              # classification threshold
    # Silverman's rule over-smooths clustered data badly; the stored-sample
    # baseline uses this fraction of the Silverman factor by default
    kde_shrink: float = 0.5

    # Fresh-component widths, meters/radians per difference dimension. The
    # generation rule fires roughly sqrt(2 ln(peak/thr_dens)) ~ 8 sigma from
    # an existing component, so these sit between the placement jitter
    # (~1 cm, absorbed into one component) and the smallest real cluster
    # separation (~10 cm between support levels, which must spawn new ones).
    SIGMA_INIT_DEFAULT = (0.02, 0.02, 0.012, 0.12, 0.12, 0.12, 0.008, 0.008, 0.008)

    @classmethod
    def from_geometry(cls, cfg: GeometryConfig, v_z_fraction: float = 1e-9) -> "EstimatorParams":
        """Derive scales from the workspace box.

        V_T is the fixed hypervolume of the physical box one object lives in
        (pose and size ranges). A box measured from observed samples would
        collapse: several difference dimensions are exactly constant in
        planar scenes.
        """
        extents = cfg.sample_extents()
        v_t = float(np.prod(cfg.physical_extents()))
        sigma_init = np.asarray(cls.SIGMA_INIT_DEFAULT, dtype=float) ** 2
        return cls(
            dim=len(extents),
            v_z=v_z_fraction * v_t,
            sigma_init=sigma_init,
            lambda_floor=1e-8 * float(sigma_init.mean()),
            kde_scale_floor=0.01 * extents,
        )

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "v_z": self.v_z,
            "sigma_init": list(map(float, self.sigma_init)),
            "lambda_floor": self.lambda_floor,
            "kde_scale_floor": list(map(float, self.kde_scale_floor)),
            "n_conf": self.n_conf,
            "prior_c": self.prior_c,
            "thr_dens": self.thr_dens,
            "thr_conf": self.thr_conf,
            "p_thr": self.p_thr,
            "kde_shrink": self.kde_shrink,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorParams":
        return cls(
            dim=d["dim"],
            v_z=d["v_z"],
            sigma_init=np.asarray(d["sigma_init"]),
            lambda_floor=d["lambda_floor"],
            kde_scale_floor=np.asarray(d["kde_scale_floor"]),
            n_conf=d["n_conf"],
            prior_c=d["prior_c"],
            thr_dens=d["thr_dens"],
            thr_conf=d["thr_conf"],
            p_thr=d["p_thr"],
            kde_shrink=d.get("kde_shrink", 0.5),
        )


def default_params(cfg: GeometryConfig | None = None) -> EstimatorParams:
    return EstimatorParams.from_geometry(cfg or GeometryConfig())


# ---------------------------------------------------------------------------
# Gaussian mixture with online updates

class MixtureDensity:
    """Weighted Gaussian mixture with sequential sufficient-statistic updates.

    Components carry masses (responsibility totals); weights are masses
    normalized. A fresh model holds one zero-mass component, so K=1, the
    density is identically zero, and the first sample always triggers the
    generation rule.
    """

    def __init__(self, params: EstimatorParams):
        self.params = params
        d = params.dim
        self.n_total = 0
        self.masses = np.zeros(1)
        self.means = np.zeros((1, d))
        self.covs = np.diag(params.sigma_init)[None, :, :].copy()
        self.s1 = np.zeros((1, d))
        self.s2 = self.covs.copy()
        self._refresh_cache(range(1))

    @property
    def k(self) -> int:
        return len(self.masses)

    @property
    def weights(self) -> np.ndarray:
        total = self.masses.sum()
        if total <= 0:
            return np.zeros_like(self.masses)
        return self.masses / total

    def _refresh_cache(self, idxs):
        if not hasattr(self, "_inv"):
            k, d = self.means.shape
            self._inv = np.zeros((k, d, d))
            self._lognorm = np.zeros(k)
        for i in idxs:
            try:
                w, v = np.linalg.eigh(self.covs[i])
            except np.linalg.LinAlgError as e:
                raise ModelCorruptError(f"covariance of component {i} is corrupt") from e
            w = np.maximum(w, self.params.lambda_floor)
            self.covs[i] = (v * w) @ v.T
            self._inv[i] = (v / w) @ v.T
            d = self.means.shape[1]
            self._lognorm[i] = 0.5 * (d * _LOG_2PI + float(np.log(w).sum()))
        total = self.masses.sum()
        self._wcache = self.masses / total if total > 0 else np.zeros_like(self.masses)
        self._covdiag = np.ascontiguousarray(np.diagonal(self.covs, axis1=1, axis2=2))
        with np.errstate(divide="ignore"):
            self._skip_at = np.where(self._wcache > 0, -np.log(self._wcache), np.inf)

    def component_densities(self, z: np.ndarray) -> np.ndarray:
        """weight_i * N(z; mu_i, cov_i) for every component."""
        return _gmm_component_densities(
            z, self.means, self._inv, self._lognorm, self._wcache,
            self._covdiag, self._skip_at,
        )

    def density(self, z) -> float:
        if not isinstance(z, np.ndarray):
            z = np.asarray(z, dtype=float)
        val = float(self.component_densities(z).sum())
        if not np.isfinite(val) or val < 0:
            raise ModelCorruptError(f"non-finite density {val}")
        return val

    def _append_component(self, z: np.ndarray):
        d = len(z)
        sigma = np.diag(self.params.sigma_init[:d] if len(self.params.sigma_init) >= d
                        else np.full(d, self.params.sigma_init.mean()))
        self.masses = np.append(self.masses, 1.0)
        self.means = np.vstack([self.means, z[None, :]])
        self.covs = np.vstack([self.covs, sigma[None, :, :]])
        self.s1 = np.vstack([self.s1, z[None, :]])
        self.s2 = np.vstack([self.s2, (sigma + np.outer(z, z))[None, :, :]])
        k, dd = self.means.shape
        inv = np.zeros((k, dd, dd))
        inv[:-1] = self._inv
        self._inv = inv
        self._lognorm = np.append(self._lognorm, 0.0)
        self._refresh_cache([k - 1])

    def absorb(self, z) -> None:
        """One labeled sample: generation rule or a responsibility-weighted step."""
        z = np.asarray(z, dtype=float)
        if self.n_total == 0 or self.density(z) < self.params.thr_dens:
            self._append_component(z)
        else:
            comp = self.component_densities(z)
            total = comp.sum()
            r = comp / total
            self.masses = self.masses + r
            self.s1 = self.s1 + r[:, None] * z[None, :]
            self.s2 = self.s2 + r[:, None, None] * np.outer(z, z)[None, :, :]
            touched = np.nonzero(r > 1e-12)[0]
            for i in touched:
                c = self.masses[i]
                mu = self.s1[i] / c
                self.means[i] = mu
                cov = self.s2[i] / c - np.outer(mu, mu)
                self.covs[i] = 0.5 * (cov + cov.T)
            self._refresh_cache(touched)
        self.n_total += 1

    def to_dict(self) -> dict:
        return {
            "kind": "gmm",
            "k": self.k,
            "n_total": self.n_total,
            "masses": self.masses.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covs.tolist(),
            "s1": self.s1.tolist(),
            "s2": self.s2.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, params: EstimatorParams) -> "MixtureDensity":
        m = cls.__new__(cls)
        m.params = params
        m.n_total = d["n_total"]
        m.masses = np.asarray(d["masses"], dtype=float)
        m.means = np.asarray(d["means"], dtype=float)
        m.covs = np.asarray(d["covariances"], dtype=float)
        m.s1 = np.asarray(d["s1"], dtype=float)
        m.s2 = np.asarray(d["s2"], dtype=float)
        m._refresh_cache(range(len(m.masses)))
        return m


class KdeDensity:
    """Stored-sample Gaussian KDE (the memory-based baseline).

    Kernels are isotropic in per-dimension standardized units: the effective
    width along dimension d is bandwidth * scale_d, where scale_d is the
    sample standard deviation floored by the configured per-dim minimum
    (1.0 when fewer than two samples are stored). bandwidth defaults to the
    Silverman factor (4/(d+2))^(1/(d+4)) * n^(-1/(d+4)).
    """

    def __init__(self, params: EstimatorParams, bandwidth: float | None = None):
        self.params = params
        self.bandwidth = bandwidth
        self._buf = np.empty((16, params.dim))
        self._n = 0

    @property
    def n_total(self) -> int:
        return self._n

    @property
    def samples(self) -> np.ndarray:
        return self._buf[: self._n]

    def absorb(self, z) -> None:
        z = np.asarray(z, dtype=float)
        if self._n == len(self._buf):
            grown = np.empty((2 * len(self._buf), self.params.dim))
            grown[: self._n] = self._buf[: self._n]
            self._buf = grown
        self._buf[self._n] = z
        self._n += 1

    def _scales(self) -> np.ndarray:
        # re-derived from the sample store on every estimate, as the
        # memory-based method prescribes (no summary statistics are kept)
        n = self._n
        if n < 2:
            return np.ones(self.params.dim)
        rows = self._buf[:n]
        return np.maximum(rows.std(axis=0), self.params.kde_scale_floor[: self.params.dim])

    def _factor(self) -> float:
        if self.bandwidth is not None:
            return self.bandwidth
        n, d = max(self.n_total, 1), self.params.dim
        silverman = (4.0 / (d + 2.0)) ** (1.0 / (d + 4.0)) * n ** (-1.0 / (d + 4.0))
        return float(self.params.kde_shrink * silverman)

    def density(self, z) -> float:
        n = self._n
        if n == 0:
            return 0.0
        if not isinstance(z, np.ndarray):
            z = np.asarray(z, dtype=float)
        return float(_kde_density(
            z, self._buf[:n], self._factor(),
            self.params.kde_scale_floor[: self.params.dim],
        ))

    def to_dict(self) -> dict:
        return {
            "kind": "kde",
            "n_total": self.n_total,
            "bandwidth": self.bandwidth,
            "samples": self.samples.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, params: EstimatorParams) -> "KdeDensity":
        m = cls(params, bandwidth=d["bandwidth"])
        for row in d["samples"]:
            m.absorb(np.asarray(row, dtype=float))
        return m


# ---------------------------------------------------------------------------
# the predicate-level estimator (Eq. 1 / Eq. 2 layer)

@dataclass
class Estimate:
    p_true: float
    p_false: float
    delta: float
    n_plus: float
    n_minus: float
    n_empty: float


@dataclass
class PredicateModel:
    """Positive/negative density pair plus the count-regularization scalars."""

    name: str
    kind: str
    pos: MixtureDensity | KdeDensity
    neg: MixtureDensity | KdeDensity
    params: EstimatorParams

    @classmethod
    def fresh(cls, name: str, params: EstimatorParams, kind: str = "gmm",
              bandwidth: float | None = None) -> "PredicateModel":
        if kind == "gmm":
            return cls(name, kind, MixtureDensity(params), MixtureDensity(params), params)
        if kind == "kde":
            return cls(name, kind, KdeDensity(params, bandwidth), KdeDensity(params, bandwidth), params)
        raise ConfigurationError(f"unknown model kind {kind!r}")


def estimate_counts(pm: PredicateModel, z) -> tuple[float, float]:
    """Expected numbers of similar positive/negative experiences near z."""
    z = np.asarray(z, dtype=float)
    n_plus = pm.params.v_z * pm.pos.n_total * pm.pos.density(z)
    n_minus = pm.params.v_z * pm.neg.n_total * pm.neg.density(z)
    return n_plus, n_minus


def probability_from_counts(n_plus: float, n_minus: float, n_conf: float, prior_c: float) -> Estimate:
    n_empty = max(0.0, n_conf - (n_plus + n_minus))
    denom = n_plus + n_minus + n_empty
    if denom <= 0.0:
        raise ConfigurationError("degenerate estimate: no evidence and n_conf = 0")
    p_true = (n_plus + n_empty * prior_c) / denom
    p_false = (n_minus + n_empty * (1.0 - prior_c)) / denom
    delta = (n_plus + n_minus) / denom
    return Estimate(p_true, p_false, min(delta, 1.0), n_plus, n_minus, n_empty)


def probability(pm: PredicateModel, z) -> Estimate:
    n_plus, n_minus = estimate_counts(pm, z)
    return probability_from_counts(n_plus, n_minus, pm.params.n_conf, pm.params.prior_c)


def classify(pm: PredicateModel, z, p_thr: float | None = None):
    """(True | False | None, Estimate); None is 'unclassified'. Inclusive thresholds."""
    p_thr = pm.params.p_thr if p_thr is None else p_thr
    if not (0.5 < p_thr <= 1.0):
        raise ConfigurationError(f"p_thr must be in (0.5, 1], got {p_thr}")
    est = probability(pm, z)
    if est.p_true >= p_thr:
        return True, est
    if est.p_false >= p_thr:
        return False, est
    return None, est


def update(pm: PredicateModel, z, label: bool) -> PredicateModel:
    """Absorb one labeled sample into the matching polarity's density model."""
    (pm.pos if label else pm.neg).absorb(z)
    return pm


def kde_estimate(samples_pos, samples_neg, z, bandwidth: float | None = None,
                 params: EstimatorParams | None = None) -> Estimate:
    """Eq. 1/Eq. 2 over KDE densities built from raw stored samples.

    Shares the whole estimator layer above the density backends; only the
    density representation differs from the mixture path.
    """
    if bandwidth is not None and bandwidth <= 0:
        raise ConfigurationError("bandwidth must be positive")
    z = np.asarray(z, dtype=float)
    if params is None:
        params = default_params()
    if params.dim != len(z):
        params = _redim(params, len(z))
    pm = PredicateModel.fresh("kde", params, kind="kde", bandwidth=bandwidth)
    for row in samples_pos:
        pm.pos.absorb(np.asarray(row, dtype=float))
    for row in samples_neg:
        pm.neg.absorb(np.asarray(row, dtype=float))
    return probability(pm, z)


def _redim(params: EstimatorParams, dim: int) -> EstimatorParams:
    reps = int(np.ceil(dim / len(params.sigma_init)))
    return EstimatorParams(
        dim=dim,
        v_z=params.v_z,
        sigma_init=np.tile(params.sigma_init, reps)[:dim],
        lambda_floor=params.lambda_floor,
        kde_scale_floor=np.tile(params.kde_scale_floor, reps)[:dim],
        n_conf=params.n_conf,
        prior_c=params.prior_c,
        thr_dens=params.thr_dens,
        thr_conf=params.thr_conf,
        p_thr=params.p_thr,
        kde_shrink=params.kde_shrink,
    )


# ---------------------------------------------------------------------------
# the online abstraction loop (one scenario)

@dataclass
class ScenarioStats:
    scenario_index: int
    n_evaluated: int = 0
    corrects: int = 0
    misclassified: int = 0
    instructed: int = 0
    low_probability: int = 0        # inferences where neither p reached p_thr
    inference_time_s: float = 0.0

    @property
    def performance_index(self) -> float:
        return self.corrects / self.n_evaluated if self.n_evaluated else 0.0

    @property
    def instruction_ratio(self) -> float:
        return self.instructed / self.n_evaluated if self.n_evaluated else 0.0

    @property
    def misclassification_ratio(self) -> float:
        return self.misclassified / self.n_evaluated if self.n_evaluated else 0.0

    @property
    def inference_time_us(self) -> float:
        return 1e6 * self.inference_time_s / self.n_evaluated if self.n_evaluated else 0.0


_FACE_OF_PRED = {"on": "ocon", "under": "ocunder"}


def abstraction_step(
    models: dict[str, PredicateModel],
    sc: Scenario,
    oracle=label_oracle,
    p_thr: float | None = None,
    record=None,
    scenario_index: int = 0,
) -> SymbolicState:
    """Evaluate every predicate instance of one scenario, asking when unsure.

    Low-confidence estimates (delta below the model's thr_conf) query the
    oracle, count as instructions, and train the model with the labeled
    sample. Confident estimates are inferred (argmax of Eq. 1; an exact tie
    reads as false) and scored against the ground truth. Returns the
    resulting symbolic state; per-scenario statistics go to ``record``.
    """
    stats = ScenarioStats(scenario_index=scenario_index)
    truths: list[Atom] = []
    held_inferred = None
    for pred, o1, o2 in evaluated_predicates(sc):
        pm = models[pred]
        z = make_sample(sc.objects[o1], sc.objects[o2])
        t0 = time.perf_counter()
        est = probability(pm, z)
        stats.inference_time_s += time.perf_counter() - t0
        stats.n_evaluated += 1
        if est.delta < pm.params.thr_conf:
            value = oracle(pred, o1, o2, sc)
            update(pm, z, value)
            stats.instructed += 1
        else:
            value = est.p_true > est.p_false
            actual = oracle(pred, o1, o2, sc)
            thr = p_thr if p_thr is not None else pm.params.p_thr
            if max(est.p_true, est.p_false) < thr:
                stats.low_probability += 1
            if value == actual:
                stats.corrects += 1
            else:
                stats.misclassified += 1
        if value:
            if pred == "in":
                held_inferred = o2
                truths.append(Atom("in", (HAND, o2)))
            else:
                truths.append(Atom("oc", (_FACE_OF_PRED[pred], o1, o2)))
    if held_inferred is None:
        truths.append(Atom("in", (HAND, AIR)))
    if record is not None:
        record(stats)
    return SymbolicState(truths)


# ---------------------------------------------------------------------------
# model file I/O

MODEL_SCHEMA = "ocplan-models/1"


def models_to_json(models: dict[str, PredicateModel], params: EstimatorParams) -> str:
    return json.dumps(
        {
            "schema": MODEL_SCHEMA,
            "params": params.to_dict(),
            "predicates": {
                name: {"kind": pm.kind, "pos": pm.pos.to_dict(), "neg": pm.neg.to_dict()}
                for name, pm in sorted(models.items())
            },
        },
        indent=1,
    )


def models_from_json(text: str) -> tuple[dict[str, PredicateModel], EstimatorParams]:
    data = json.loads(text)
    if data.get("schema") != MODEL_SCHEMA:
        raise ConfigurationError(f"unsupported model schema {data.get('schema')!r}")
    params = EstimatorParams.from_dict(data["params"])
    models = {}
    for name, entry in data["predicates"].items():
        loader = MixtureDensity if entry["kind"] == "gmm" else KdeDensity
        models[name] = PredicateModel(
            name=name,
            kind=entry["kind"],
            pos=loader.from_dict(entry["pos"], params),
            neg=loader.from_dict(entry["neg"], params),
            params=params,
        )
    return models, params
