"""Architecture and hyperparameter search: random sampling and GP-EI Bayesian optimization.

Configurations live in a 7-dimensional unit cube:
``(n_layers, n1, n2, n3, n4, log lr, log epochs)``. Integer coordinates are
relaxed to [0, 1] and rounded when decoded; neuron slots beyond
``n_layers`` are inactive and encoded as 0, so every configuration has one
canonical encoding.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.stats import norm, qmc

from msr_surrogate import seeding
from msr_surrogate.errors import SurrogateError
from msr_surrogate.neural import NetworkConfig

log = logging.getLogger(__name__)

DIM = 7
MAX_LAYERS = 4
LOG_EPS = 1e-12  # floor added before taking the log of an objective value


@dataclass(frozen=True)
class SearchSpace:
    layers: tuple[int, int] = (1, 4)
    neurons: tuple[int, int] = (1, 8)
    learning_rate: tuple[float, float] = (1e-4, 1e-1)
    epochs: tuple[int, int] = (100, 40000)

    def __post_init__(self):
        if not 1 <= self.layers[0] <= self.layers[1] <= MAX_LAYERS:
            raise ValueError(f"layer range must lie in [1, {MAX_LAYERS}]")
        if not (1 <= self.neurons[0] <= self.neurons[1]):
            raise ValueError("neuron range must be positive")
        if not (0 < self.learning_rate[0] < self.learning_rate[1]):
            raise ValueError("learning-rate range must be positive and increasing")
        if not (1 <= self.epochs[0] <= self.epochs[1]):
            raise ValueError("epoch range must be positive and increasing")

    # -- sampling and encoding -----------------------------------------------

    def sample(self, rng: np.random.Generator, seed: int = 0) -> NetworkConfig:
        """One i.i.d. draw: uniform integers, log-uniform learning rate."""
        n_layers = int(rng.integers(self.layers[0], self.layers[1] + 1))
        hidden = tuple(int(h) for h in rng.integers(self.neurons[0], self.neurons[1] + 1, size=n_layers))
        lo, hi = np.log(self.learning_rate)
        lr = float(np.exp(rng.uniform(lo, hi)))
        epochs = int(rng.integers(self.epochs[0], self.epochs[1] + 1))
        return NetworkConfig(hidden, lr, epochs, seed)

    @staticmethod
    def _unit(v, lo, hi):
        return 0.0 if hi == lo else (v - lo) / (hi - lo)

    @staticmethod
    def _from_unit(u, lo, hi):
        return lo + min(max(float(u), 0.0), 1.0) * (hi - lo)

    def encode(self, config: NetworkConfig) -> np.ndarray:
        u = np.zeros(DIM)
        u[0] = self._unit(len(config.hidden_sizes), *self.layers)
        for i, h in enumerate(config.hidden_sizes):
            u[1 + i] = self._unit(h, *self.neurons)
        u[5] = self._unit(math.log(config.learning_rate), *np.log(self.learning_rate))
        u[6] = self._unit(math.log(config.max_epochs), *np.log(self.epochs))
        return u

    def decode(self, u, seed: int = 0) -> NetworkConfig:
        n_layers = int(round(self._from_unit(u[0], *self.layers)))
        hidden = tuple(int(round(self._from_unit(u[1 + i], *self.neurons))) for i in range(n_layers))
        lr = math.exp(self._from_unit(u[5], *np.log(self.learning_rate)))
        epochs = int(round(math.exp(self._from_unit(u[6], *np.log(self.epochs)))))
        epochs = min(max(epochs, self.epochs[0]), self.epochs[1])
        return NetworkConfig(hidden, lr, epochs, seed)

    def canonical(self, u) -> np.ndarray:
        return self.encode(self.decode(u))

    def contains(self, config: NetworkConfig) -> bool:
        h = config.hidden_sizes
        return (self.layers[0] <= len(h) <= self.layers[1]
                and all(self.neurons[0] <= n <= self.neurons[1] for n in h)
                and self.learning_rate[0] * (1 - 1e-12) <= config.learning_rate <= self.learning_rate[1] * (1 + 1e-12)
                and self.epochs[0] <= config.max_epochs <= self.epochs[1])


# -- trials ----------------------------------------------------------------------


@dataclass
class Outcome:
    val_mse: float
    test_mse: float | None = None
    pearson: float | None = None
    spearman: float | None = None


Objective = Callable[[NetworkConfig], Outcome]


@dataclass
class Trial:
    index: int
    config: NetworkConfig
    objective: float  # validation MSE; NaN for failed trials
    outcome: Outcome | None
    status: str  # "ok" or "failed"
    duration: float

    @property
    def n_params(self) -> int:
        return self.config.n_params()

    @property
    def ok(self) -> bool:
        return self.status == "ok"


TRIAL_LOG_COLUMNS = ("trial_id", "n_layers", "n1", "n2", "n3", "n4", "lr", "epochs", "seed",
                     "val_mse", "test_mse", "pearson", "spearman", "status", "wall_s")


def trial_log_row(t: Trial) -> str:
    def cell(v):
        return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(v)

    h = list(t.config.hidden_sizes) + [0] * (MAX_LAYERS - len(t.config.hidden_sizes))
    o = t.outcome or Outcome(math.nan)
    fields = [t.index, len(t.config.hidden_sizes), *h, cell(t.config.learning_rate), t.config.max_epochs,
              t.config.seed, cell(t.objective), cell(o.test_mse), cell(o.pearson), cell(o.spearman),
              t.status, f"{t.duration:.3f}"]
    return ",".join(str(f) for f in fields)


def run_trial(index: int, config: NetworkConfig, objective: Objective) -> Trial:
    start = time.perf_counter()
    try:
        outcome = objective(config)
        value = float(outcome.val_mse)
        if not (math.isfinite(value) and value >= 0):
            raise SurrogateError(f"objective returned {value}")
        status = "ok"
    except SurrogateError as exc:
        log.warning("trial %d failed: %s", index, exc)
        outcome, value, status = None, math.nan, "failed"
    return Trial(index, config, value, outcome, status, time.perf_counter() - start)


def rank_key(t: Trial):
    return (t.objective, t.n_params, t.index)


def leaderboard(trials: Sequence[Trial]) -> list[Trial]:
    """Completed trials by validation MSE, then fewer parameters, then index."""
    done = [t for t in trials if t.ok]
    if not done:
        raise SurrogateError("no completed trials to rank")
    return sorted(done, key=rank_key)


def leaderboard_text(trials: Sequence[Trial]) -> str:
    def f(v):
        return "-" if v is None else f"{v:.4g}"

    lines = [f"{'rank':>4} {'trial':>5} {'hidden':<12} {'lr':>10} {'epochs':>6} {'val_mse':>11} "
             f"{'test_mse':>11} {'pearson':>8} {'spearman':>8}"]
    for rank, t in enumerate(leaderboard(trials), 1):
        o = t.outcome
        hidden = "-".join(map(str, t.config.hidden_sizes))
        lines.append(f"{rank:>4} {t.index:>5} {hidden:<12} {t.config.learning_rate:>10.3g} "
                     f"{t.config.max_epochs:>6} {t.objective:>11.4e} {f(o.test_mse):>11} "
                     f"{f(o.pearson):>8} {f(o.spearman):>8}")
    return "\n".join(lines)


@dataclass
class SearchResult:
    trials: list[Trial]
    best: Trial
    notes: list[str] = field(default_factory=list)


def _trial_seed(seed: int, index: int) -> int:
    return seeding.child_seed(seed, "search", 1, index)


def random_search(space: SearchSpace, n_trials: int, seed: int, objective: Objective,
                  on_trial: Callable[[Trial], None] | None = None) -> SearchResult:
    """``n_trials`` i.i.d. configurations; best by validation MSE."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = seeding.substream(seed, "search", 0)
    trials = []
    for i in range(n_trials):
        config = space.sample(rng, _trial_seed(seed, i))
        trials.append(run_trial(i, config, objective))
        if on_trial:
            on_trial(trials[-1])
    return SearchResult(trials, leaderboard(trials)[0])


# -- Gaussian-process surrogate ----------------------------------------------------


@dataclass
class GaussianProcess:
    """Zero-mean GP on centred targets with a fixed-length-scale SE kernel."""

    X: np.ndarray
    y: np.ndarray
    length_scale: float = 0.3
    noise_rel: float = 1e-6
    jitter: float = 1e-10

    def __post_init__(self):
        self.mean = float(np.mean(self.y))
        var = float(np.var(self.y))
        self.signal = var if var > 0 else 1.0
        K = self.kernel(self.X, self.X)
        K[np.diag_indices_from(K)] += self.noise_rel * self.signal + self.jitter
        self.chol = cho_factor(K, lower=True)  # raises LinAlgError when not positive definite
        self.alpha = cho_solve(self.chol, self.y - self.mean)

    def kernel(self, A, B):
        d2 = np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2.0 * A @ B.T
        return self.signal * np.exp(-np.maximum(d2, 0.0) / (2.0 * self.length_scale**2))

    def predict(self, Xq):
        Ks = self.kernel(np.atleast_2d(Xq), self.X)
        mu = self.mean + Ks @ self.alpha
        v = cho_solve(self.chol, Ks.T)
        var = np.maximum(self.signal - np.sum(Ks * v.T, axis=1), 0.0)
        return mu, np.sqrt(var)


def expected_improvement(mu, sigma, best):
    """EI for minimization; zero where the posterior is certain."""
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    ei = np.zeros_like(mu)
    pos = sigma > 0
    z = (best - mu[pos]) / sigma[pos]
    ei[pos] = (best - mu[pos]) * norm.cdf(z) + sigma[pos] * norm.pdf(z)
    ei[~pos] = np.maximum(best - mu[~pos], 0.0)
    return np.maximum(ei, 0.0)


def fit_gp(X, y, length_scale=0.3, max_jitter=1e-4):
    """Fit with escalating jitter (x10 from 1e-10); ``None`` if all attempts fail."""
    jitter = 1e-10
    while jitter <= max_jitter * (1 + 1e-9):
        try:
            return GaussianProcess(X, y, length_scale, jitter=jitter)
        except (LinAlgError, np.linalg.LinAlgError, ValueError):
            log.info("GP factorization failed at jitter %.0e; escalating", jitter)
            jitter *= 10.0
    return None


def bayes_search(space: SearchSpace, max_evals: int, seed: int, objective: Objective, *,
                 n_warmup: int = 8, n_candidates: int = 2048, length_scale: float = 0.3,
                 on_trial: Callable[[Trial], None] | None = None) -> SearchResult:
    """Sobol warm-up followed by GP expected-improvement proposals.

    ``max_evals`` counts the warm-up trials.
    """
    if max_evals < 5:
        raise ValueError("max_evals must be >= 5")
    rng = seeding.substream(seed, "search", 0)
    sobol = qmc.Sobol(DIM, scramble=True, seed=seeding.substream(seed, "search", 2))
    warm = sobol.random(n_warmup)[:max_evals]
    trials: list[Trial] = []
    notes: list[str] = []

    def record(config):
        trials.append(run_trial(len(trials), config, objective))
        if on_trial:
            on_trial(trials[-1])

    for u in warm:
        record(space.decode(u, _trial_seed(seed, len(trials))))

    while len(trials) < max_evals:
        i = len(trials)
        done = [t for t in trials if t.ok]
        gp = None
        if len(done) >= 2:
            X = np.array([space.encode(t.config) for t in done])
            y = np.log(np.array([t.objective for t in done]) + LOG_EPS)
            gp = fit_gp(X, y, length_scale)
        if gp is None:
            msg = f"trial {i}: GP unavailable, random proposal"
            log.warning(msg)
            notes.append(msg)
            record(space.decode(rng.uniform(size=DIM), _trial_seed(seed, i)))
            continue
        best = float(np.min(gp.y))
        seen = {space.encode(t.config).tobytes() for t in trials}
        for attempt in range(2):
            cand = np.array([space.canonical(u) for u in rng.uniform(size=(n_candidates, DIM))])
            mu, sd = gp.predict(cand)
            u = cand[int(np.argmax(expected_improvement(mu, sd, best)))]
            if u.tobytes() not in seen:
                break
        record(space.decode(u, _trial_seed(seed, i)))
    return SearchResult(trials, leaderboard(trials)[0], notes)


# -- objectives --------------------------------------------------------------------


def benchmark_objective(config: NetworkConfig) -> Outcome:
    """Cheap deterministic stand-in for training, minimized at lr=0.01 and 5 neurons per layer."""
    value = (math.log10(config.learning_rate) + 2.0) ** 2
    value += sum((n - 5) ** 2 for n in config.hidden_sizes) / 64.0
    return Outcome(value)


class TrainingObjective:
    """Train on a corpus and report validation MSE plus test-set metrics."""

    def __init__(self, corpus, restarts: int = 1, screen_epochs: int = 500):
        from msr_surrogate import metrics, neural

        self._metrics, self._neural = metrics, neural
        self.corpus = corpus
        self.train = corpus.arrays("train")
        self.val = corpus.arrays("val")
        self.restarts, self.screen_epochs = restarts, screen_epochs
        self.models: dict[int, object] = {}

    def __call__(self, config: NetworkConfig) -> Outcome:
        net, report = self._neural.train_restarts(config, self.train, self.val, self.corpus.scaler,
                                                  restarts=self.restarts, screen_epochs=self.screen_epochs)
        val_mse = report.val_loss[-1] if report.val_loss else report.train_loss[-1]
        test = self._metrics.evaluate(net, self.corpus.test)
        self.models[config.seed] = net
        return Outcome(val_mse, test.mse, test.pearson_mean, test.spearman_mean)
