"""Synthetic trajectory datasets and the fixed-step solvers behind them.

Five generators: logistic growth, a six-compartment pharmacokinetic model
(plasma concentration of an absorbed drug), a general ODE whose right-hand
side is a Gaussian-mixture density surface, a delay differential equation
(Mackey-Glass), and an integro-differential equation.  All are solved with
classical fixed-step RK4 on grids that contain the observation times
exactly; the delayed term uses cubic Hermite interpolation into the stored
past, which keeps the solver's step-halving error at the 1e-8 level.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

DEFAULT_STEPS = 1000  # RK4 substeps per trajectory span


@dataclass(frozen=True)
class Sample:
    """One observed trajectory: initial condition, times, noisy values."""

    x0: float
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise DomainError("times and values must be matching 1-D arrays")
        if len(t) >= 2 and not np.all(np.diff(t) > 0):
            raise DomainError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


@dataclass
class Dataset:
    samples: list
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def x0s(self) -> np.ndarray:
        return np.array([s.x0 for s in self.samples])

    def times_matrix(self) -> np.ndarray:
        return np.stack([s.times for s in self.samples])

    def values_matrix(self) -> np.ndarray:
        return np.stack([s.values for s in self.samples])

    def subset(self, indices) -> "Dataset":
        return Dataset([self.samples[i] for i in indices], dict(self.metadata))

    # -- CSV + sidecar metadata ------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "x0", "t", "y"])
            for i, s in enumerate(self.samples):
                for t, y in zip(s.times, s.values):
                    writer.writerow([i, repr(s.x0), repr(float(t)), repr(float(y))])
        with open(str(path) + ".meta.json", "w") as fh:
            json.dump(self.metadata, fh, indent=1, sort_keys=True)

    @staticmethod
    def from_csv(path) -> "Dataset":
        rows: dict = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                rows.setdefault(int(row["sample_id"]), []).append(
                    (float(row["x0"]), float(row["t"]), float(row["y"]))
                )
        samples = []
        for sid in sorted(rows):
            entries = rows[sid]
            samples.append(
                Sample(entries[0][0], [e[1] for e in entries], [e[2] for e in entries])
            )
        meta = {}
        try:
            with open(str(path) + ".meta.json") as fh:
                meta = json.load(fh)
        except OSError:
            pass
        return Dataset(samples, meta)


# ---------------------------------------------------------------------------
# solvers


def rk4_solve(f, y0: np.ndarray, obs_times: np.ndarray, n_steps: int = DEFAULT_STEPS) -> np.ndarray:
    """Classical RK4 for y' = f(t, y), vectorized over the leading axis of
    ``y0``; returns the states at ``obs_times`` (which land on grid nodes).

    ``obs_times[0]`` is the initial time.
    """
    obs = np.asarray(obs_times, dtype=float)
    span = obs[-1] - obs[0]
    if span <= 0:
        raise DomainError("observation window must have positive length")
    per_seg = max(1, math.ceil(n_steps * (obs[1:] - obs[:-1]).min() / span))
    out = np.empty((len(obs),) + np.shape(y0), dtype=float)
    y = np.array(y0, dtype=float)
    out[0] = y
    for k in range(len(obs) - 1):
        seg = obs[k + 1] - obs[k]
        m = max(1, math.ceil((seg / span) * n_steps))
        h = seg / m
        t = obs[k]
        for _ in range(m):
            k1 = f(t, y)
            k2 = f(t + h / 2, y + h / 2 * k1)
            k3 = f(t + h / 2, y + h / 2 * k2)
            k4 = f(t + h, y + h * k3)
            y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        out[k + 1] = y
    return out


def dde_rk4_solve(
    f,
    history,
    tau: float,
    x0: np.ndarray,
    obs_times: np.ndarray,
    n_steps: int = 3000,
) -> np.ndarray:
    """Fixed-step RK4 for x'(t) = f(t, x(t), x(t - tau)) with a constant
    pre-history; cubic Hermite interpolation serves the delayed argument.

    ``history(t)`` supplies x for t <= t0.  Vectorized over samples.
    """
    obs = np.asarray(obs_times, dtype=float)
    t0 = obs[0]
    span = obs[-1] - t0
    h = span / n_steps
    grid = t0 + h * np.arange(n_steps + 1)

    xs = np.empty((n_steps + 1,) + np.shape(x0))
    ds = np.empty_like(xs)
    xs[0] = np.asarray(x0, dtype=float)

    def delayed(t):
        if t <= t0:
            return history(t)
        # Hermite cubic on the step containing t, using stored derivatives
        i = min(int((t - t0) / h), len(grid) - 2)
        if ds_valid[i + 1]:
            u = (t - grid[i]) / h
            h00 = (1 + 2 * u) * (1 - u) ** 2
            h10 = u * (1 - u) ** 2
            h01 = u * u * (3 - 2 * u)
            h11 = u * u * (u - 1)
            return h00 * xs[i] + h * h10 * ds[i] + h01 * xs[i + 1] + h * h11 * ds[i + 1]
        return xs[i]

    def rhs(t, x):
        return f(t, x, delayed(t - tau))

    ds_valid = np.zeros(n_steps + 1, dtype=bool)
    ds[0] = rhs(t0, xs[0])
    ds_valid[0] = True
    for i in range(n_steps):
        t, x = grid[i], xs[i]
        k1 = ds[i]
        k2 = rhs(t + h / 2, x + h / 2 * k1)
        k3 = rhs(t + h / 2, x + h / 2 * k2)
        k4 = rhs(t + h, x + h * k3)
        xs[i + 1] = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        ds[i + 1] = rhs(grid[i + 1], xs[i + 1])
        ds_valid[i + 1] = True

    idx = np.rint((obs - t0) / h).astype(int)
    if not np.allclose(grid[idx], obs, atol=1e-9 * max(1.0, span)):
        # observations not on the grid: fall back to Hermite interpolation
        return np.stack([delayed(max(t, t0 + 1e-15)) if t > t0 else xs[0] for t in obs])
    return xs[idx]


# ---------------------------------------------------------------------------
# noise and splits


def add_noise(dataset: Dataset, sigma: float, seed: int) -> Dataset:
    """Additive Gaussian noise, one independent seed stream per sample."""
    if sigma == 0.0:
        return Dataset(list(dataset.samples), dict(dataset.metadata))
    streams = np.random.SeedSequence(seed).spawn(len(dataset.samples))
    out = []
    for s, ss in zip(dataset.samples, streams):
        rng = np.random.default_rng(ss)
        out.append(Sample(s.x0, s.times, s.values + rng.normal(0.0, sigma, size=len(s.values))))
    meta = dict(dataset.metadata)
    meta.update(noise_sigma=sigma, noise_seed=seed)
    return Dataset(out, meta)


def split(dataset: Dataset, ratios=(0.7, 0.15, 0.15), seed: int = 0) -> tuple:
    """Random split into len(ratios) disjoint datasets covering everything."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DomainError("split ratios must sum to 1")
    n = len(dataset)
    perm = np.random.default_rng(seed).permutation(n)
    sizes = [int(round(r * n)) for r in ratios[:-1]]
    sizes.append(n - sum(sizes))
    parts, pos = [], 0
    for sz in sizes:
        parts.append(dataset.subset(sorted(perm[pos : pos + sz])))
        pos += sz
    return tuple(parts)


# ---------------------------------------------------------------------------
# generators


def logistic_dataset(
    n: int = 200, noise: float = 0.01, seed: int = 0, capacity: float = 2.0
) -> Dataset:
    """Logistic growth x' = x (1 - x / capacity), initial conditions equally
    spaced on [0.2, 4], 20 observation times on [0, 5]."""
    x0s = np.linspace(0.2, 4.0, n)
    obs = np.linspace(0.0, 5.0, 20)
    sol = rk4_solve(lambda t, x: x * (1.0 - x / capacity), x0s, obs)
    samples = [Sample(float(x0s[i]), obs, sol[:, i]) for i in range(n)]
    ds = Dataset(
        samples,
        {"system": "logistic", "capacity": capacity, "seed": seed, "scale_x": 1.0, "scale_t": 1.0},
    )
    return add_noise(ds, noise, seed)


PK_PARAMS = {"CL": 80.247, "V1": 486.0, "Q": 79.0, "V2": 271.0, "k_tr": 3.34, "C_depot0": 10.0}


def _pk_rhs(params):
    CL, V1, Q, V2, k = (params[k] for k in ("CL", "V1", "Q", "V2", "k_tr"))

    def f(t, y):
        depot, tr1, tr2, tr3, cent, peri = (y[..., i] for i in range(6))
        out = np.empty_like(y)
        out[..., 0] = -k * depot
        out[..., 1] = k * depot - k * tr1
        out[..., 2] = k * tr1 - k * tr2
        out[..., 3] = k * tr2 - k * tr3
        out[..., 4] = k * tr3 - (CL + Q) * cent / V1 + Q * peri / V2
        out[..., 5] = Q * cent / V1 - Q * peri / V2
        return out

    return f


def pk_dataset(
    n: int = 100, noise: float = 0.01, seed: int = 0, out_domain: bool = False
) -> Dataset:
    """Drug plasma concentration from a six-compartment absorption model.

    Only the (rescaled) central compartment is observed: concentrations are
    divided by 20 and times by 24.  The out-domain variant observes the
    initial instant plus 20 points with scaled time in (1, 2].
    """
    p = PK_PARAMS
    x0s = np.linspace(0.0, 20.0, n)
    y0 = np.zeros((n, 6))
    y0[:, 0] = p["C_depot0"]
    y0[:, 4] = x0s * (p["V1"] / 1000.0)
    y0[:, 5] = (p["V2"] / p["V1"]) * y0[:, 4]

    if out_domain:
        late = 24.0 + (24.0 / 20.0) * np.arange(1, 21)
        obs_raw = np.concatenate([[0.0], late])
    else:
        obs_raw = np.linspace(0.0, 24.0, 20)
    # the depot absorption transient is fast relative to the window, so the
    # compartment system gets a finer grid than the scalar problems
    steps = DEFAULT_STEPS * (8 if out_domain else 4)
    sol = rk4_solve(_pk_rhs(p), y0, obs_raw, n_steps=steps)
    concentration = sol[:, :, 4] * (1000.0 / p["V1"])

    obs = obs_raw / 24.0
    values = concentration / 20.0
    samples = [Sample(float(x0s[i] / 20.0), obs, values[:, i]) for i in range(n)]
    meta = {
        "system": "pk",
        "seed": seed,
        "scale_x": 20.0,
        "scale_t": 24.0,
        "out_domain": out_domain,
        **{k: float(v) for k, v in p.items()},
    }
    return add_noise(Dataset(samples, meta), noise, seed)


GAUSSIAN_MIXTURE = (
    (0.4, (0.0, 0.0), (1.0, 1.0)),
    (-0.3, (3.0, 3.0), (1.0, 1.0)),
    (0.3, (-1.0, -2.0), (2.0, 2.0)),
)


def mixture_density(x, t) -> np.ndarray:
    """Signed Gaussian-mixture density over the (x, t) plane."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for w, mu, var in GAUSSIAN_MIXTURE:
        norm = 1.0 / (2.0 * np.pi * math.sqrt(var[0] * var[1]))
        q = (x - mu[0]) ** 2 / var[0] + (t - mu[1]) ** 2 / var[1]
        total = total + w * norm * np.exp(-q / 2.0)
    return total


def general_ode_dataset(n: int = 200, noise: float = 0.01, seed: int = 0) -> Dataset:
    """x' = f(x, t) with f a Gaussian-mixture density surface scaled by 50;
    the dataset is rescaled by x/3 and t/5."""
    x0s = np.linspace(-3.0, 3.0, n)
    obs_raw = np.linspace(0.0, 5.0, 20)
    sol = rk4_solve(lambda t, x: 50.0 * mixture_density(x, t), x0s, obs_raw)
    obs = obs_raw / 5.0
    samples = [Sample(float(x0s[i] / 3.0), obs, sol[:, i] / 3.0) for i in range(n)]
    meta = {"system": "general_ode", "seed": seed, "scale_x": 3.0, "scale_t": 5.0}
    return add_noise(Dataset(samples, meta), noise, seed)


MACKEY_GLASS_PARAMS = {"theta": 1.0, "beta": 0.4, "tau": 4.0, "n": 4, "gamma": 0.2}


def mackey_glass_dataset(
    n: int = 200, noise: float = 0.01, seed: int = 0, gamma: float | None = None
) -> Dataset:
    """Delayed feedback system with constant pre-history x(t) = x0 for
    t <= 0; rescaled by x/3 and t/30.

    The decay rate defaults to 0.2, which puts the equilibrium at x = 1,
    the bottom of the initial-condition range.
    """
    p = dict(MACKEY_GLASS_PARAMS)
    if gamma is not None:
        p["gamma"] = gamma
    x0s = np.linspace(1.0, 3.0, n)
    obs_raw = np.linspace(0.0, 30.0, 20)

    th_n = p["theta"] ** p["n"]

    def f(t, x, x_delayed):
        return p["beta"] * th_n * x_delayed / (th_n + x_delayed ** p["n"]) - p["gamma"] * x

    sol = dde_rk4_solve(f, lambda t: x0s, p["tau"], x0s, obs_raw)
    obs = obs_raw / 30.0
    samples = [Sample(float(x0s[i] / 3.0), obs, sol[:, i] / 3.0) for i in range(n)]
    meta = {"system": "mackey_glass", "seed": seed, "scale_x": 3.0, "scale_t": 30.0, **p}
    return add_noise(Dataset(samples, meta), noise, seed)


def integro_dataset(n: int = 100, noise: float = 0.01, seed: int = 0) -> Dataset:
    """x'(t) = -2 x(t) - 5 * integral of x from 0 to t, solved through the
    standard augmentation z' = x."""
    x0s = np.linspace(-1.0, 1.0, n)
    obs = np.linspace(0.0, 5.0, 20)
    y0 = np.stack([x0s, np.zeros_like(x0s)], axis=-1)

    def f(t, y):
        out = np.empty_like(y)
        out[..., 0] = -2.0 * y[..., 0] - 5.0 * y[..., 1]
        out[..., 1] = y[..., 0]
        return out

    sol = rk4_solve(f, y0, obs)
    samples = [Sample(float(x0s[i]), obs, sol[:, i, 0]) for i in range(n)]
    meta = {"system": "integro", "seed": seed, "scale_x": 1.0, "scale_t": 1.0}
    return add_noise(Dataset(samples, meta), noise, seed)


def quadrature_integro_solver(x0s: np.ndarray, obs: np.ndarray, n_steps: int = 50000) -> np.ndarray:
    """Independent integro-DE solver: Heun steps with a trapezoid running
    integral (no state augmentation); used to cross-check the main path."""
    x0s = np.asarray(x0s, dtype=float)
    obs = np.asarray(obs, dtype=float)
    span = obs[-1] - obs[0]
    x = x0s.copy()
    integral = np.zeros_like(x0s)
    out = [x.copy()]
    for k in range(len(obs) - 1):
        seg = obs[k + 1] - obs[k]
        m = max(1, math.ceil((seg / span) * n_steps))
        h = seg / m
        for _ in range(m):
            dx1 = -2.0 * x - 5.0 * integral
            x_pred = x + h * dx1
            integral_pred = integral + 0.5 * h * (x + x_pred)
            dx2 = -2.0 * x_pred - 5.0 * integral_pred
            x_new = x + 0.5 * h * (dx1 + dx2)
            integral = integral + 0.5 * h * (x + x_new)
            x = x_new
        out.append(x.copy())
    return np.stack(out)


GENERATORS = {
    "logistic": logistic_dataset,
    "pk": pk_dataset,
    "general_ode": general_ode_dataset,
    "mackey_glass": mackey_glass_dataset,
    "integro": integro_dataset,
}


def generate(system: str, n: int | None = None, noise: float = 0.01, seed: int = 0, **kw) -> Dataset:
    if system not in GENERATORS:
        raise DomainError(f"unknown system {system!r}; choose from {sorted(GENERATORS)}")
    gen = GENERATORS[system]
    if n is None:
        return gen(noise=noise, seed=seed, **kw)
    return gen(n=n, noise=noise, seed=seed, **kw)
