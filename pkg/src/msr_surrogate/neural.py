"""Feed-forward surrogate: 5 scaled inputs, log-sigmoid hidden layers, softmax output.

Parameters are stored per layer as ``W`` of shape (fan_in, fan_out) and a
bias vector; ``flatten`` concatenates ``W0, b0, W1, b1, ...`` row-major.
Losses and gradients are means over records and output components, so a
dataset repeated k times yields the same loss and gradient.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from msr_surrogate import seeding
from msr_surrogate.bfgs import BFGS, LineSearch, StrongWolfe
from msr_surrogate.dataset import Scaler
from msr_surrogate.errors import DataError, NumericalError
from msr_surrogate.state import DRY_SPECIES, INPUT_NAMES, GasComposition

log = logging.getLogger(__name__)

N_IN = len(INPUT_NAMES)
N_OUT = len(DRY_SPECIES)
SCHEMA_VERSION = 1
LR_RANGE = (1e-4, 1e-1)
DEFAULT_PATIENCE = 6
STOP_REASONS = ("max_epochs", "patience", "line-search-failure")


@dataclass(frozen=True)
class NetworkConfig:
    hidden_sizes: tuple[int, ...] = (6, 8, 6)
    learning_rate: float = 0.001
    max_epochs: int = 20000
    seed: int = 0
    patience: int | None = None  # None disables validation early stopping

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not 1 <= len(self.hidden_sizes) <= 4 or any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"hidden_sizes must be 1-4 positive integers, got {self.hidden_sizes}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1 or None")
        if any(h > 8 for h in self.hidden_sizes):
            log.warning("hidden layer wider than the search range (8): %s", self.hidden_sizes)
        if not LR_RANGE[0] <= self.learning_rate <= LR_RANGE[1]:
            log.warning("learning rate %g outside the search range %s", self.learning_rate, LR_RANGE)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (N_IN, *self.hidden_sizes, N_OUT)

    def n_params(self) -> int:
        s = self.layer_sizes
        return sum((a + 1) * b for a, b in zip(s, s[1:]))


@dataclass
class Network:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: NetworkConfig
    scaler: Scaler | None = None
    train_epochs: int = 0
    init_restart: int = 0

    def __post_init__(self):
        sizes = self.config.layer_sizes
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
                raise ValueError(f"layer {k}: shapes {W.shape}, {b.shape} do not chain {sizes}")
        if len(self.weights) != len(sizes) - 1:
            raise ValueError("layer count does not match hidden_sizes")

    # -- parameter vector ------------------------------------------------------

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for W, b in zip(self.weights, self.biases) for a in (W, b)])

    def with_params(self, theta) -> "Network":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.config.n_params(),):
            raise ValueError(f"expected {self.config.n_params()} parameters, got {theta.shape}")
        weights, biases, i = [], [], 0
        for W in self.weights:
            fi, fo = W.shape
            weights.append(theta[i:i + fi * fo].reshape(fi, fo).copy())
            i += fi * fo
            biases.append(theta[i:i + fo].copy())
            i += fo
        return Network(weights, biases, self.config, self.scaler, self.train_epochs, self.init_restart)

    # -- evaluation ------------------------------------------------------------

    def _forward(self, Z):
        acts = [np.atleast_2d(np.asarray(Z, dtype=float))]
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            acts.append(expit(acts[-1] @ W + b))
        logits = acts[-1] @ self.weights[-1] + self.biases[-1]
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        Y = e / e.sum(axis=1, keepdims=True)
        return acts, Y / Y.sum(axis=1, keepdims=True)

    def forward(self, Z) -> np.ndarray:
        """Outputs for already-scaled inputs, shape (n, 4)."""
        return self._forward(Z)[1]

    def predict(self, X) -> np.ndarray:
        """Outputs for physical inputs ordered as ``INPUT_NAMES``."""
        if self.scaler is None:
            raise ValueError("network has no input scaler")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n_out = int(self.scaler.outside(X).sum())
        if n_out:
            log.warning("%d input row(s) outside the training hull; extrapolating", n_out)
        return self.forward(self.scaler.transform(X))

    def composition(self, x) -> GasComposition:
        return GasComposition(*(float(v) for v in self.predict(x)[0]))


def init_network(config: NetworkConfig, scaler: Scaler | None = None, restart: int = 0) -> Network:
    """Uniform initialization in +-sqrt(6 / (fan_in + fan_out)), zero biases.

    ``restart`` selects an independent draw from the same seed.
    """
    rng = seeding.substream(config.seed, "init", restart)
    sizes = config.layer_sizes
    weights, biases = [], []
    for fi, fo in zip(sizes, sizes[1:]):
        bound = math.sqrt(6.0 / (fi + fo))
        weights.append(rng.uniform(-bound, bound, size=(fi, fo)))
        biases.append(np.zeros(fo))
    return Network(weights, biases, config, scaler, init_restart=restart)


def _check_data(Z, Y):
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Z.shape[0] == 0:
        raise DataError("loss of an empty dataset is undefined")
    if Z.shape[0] != Y.shape[0] or Z.shape[1] != N_IN or Y.shape[1] != N_OUT:
        raise DataError(f"data shapes {Z.shape}, {Y.shape} do not match a {N_IN}->{N_OUT} network")
    return Z, Y


def loss(net: Network, Z, Y) -> float:
    """Mean squared error over records and components."""
    Z, Y = _check_data(Z, Y)
    return float(np.mean((net.forward(Z) - Y) ** 2))


def loss_and_gradient(net: Network, Z, Y) -> tuple[float, np.ndarray]:
    Z, Y = _check_data(Z, Y)
    acts, P = net._forward(Z)
    err = P - Y
    value = float(np.mean(err**2))

    dP = 2.0 * err / err.size
    # softmax Jacobian-vector product
    delta = P * (dP - np.sum(dP * P, axis=1, keepdims=True))
    grads = []
    for k in range(len(net.weights) - 1, -1, -1):
        A = acts[k]
        grads.append((A.T @ delta).ravel())
        grads.append(delta.sum(axis=0))
        if k:
            delta = (delta @ net.weights[k].T) * A * (1.0 - A)
    # collected last layer first as (W, b) pairs; flatten order is W0, b0, W1, ...
    pairs = [(grads[i], grads[i + 1]) for i in range(0, len(grads), 2)][::-1]
    return value, np.concatenate([a for pair in pairs for a in pair])


def gradient(net: Network, Z, Y) -> np.ndarray:
    return loss_and_gradient(net, Z, Y)[1]


# -- training ------------------------------------------------------------------


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)  # index 0 is the initial loss
    val_loss: list[float] = field(default_factory=list)
    stop_reason: str = "max_epochs"
    epochs: int = 0
    wall_time: float = 0.0
    resets: int = 0
    screen: list[float] = field(default_factory=list)  # per-restart screening loss

    def history_csv(self) -> str:
        lines = ["epoch,train_mse,val_mse"]
        for i, tr in enumerate(self.train_loss):
            va = repr(self.val_loss[i]) if i < len(self.val_loss) else ""
            lines.append(f"{i},{tr!r},{va}")
        return "\n".join(lines) + "\n"


class TrainingDiverged(NumericalError):
    def __init__(self, message, report: TrainReport):
        super().__init__(message)
        self.report = report


def train_bfgs(net: Network, train, val=None, config: NetworkConfig | None = None,
               line_search: LineSearch | None = None) -> tuple[Network, TrainReport]:
    """Full-batch BFGS; one epoch is one accepted quasi-Newton update.

    ``train`` and ``val`` are ``(Z, Y)`` pairs of scaled inputs and targets.
    Stops at ``max_epochs``, after ``patience`` consecutive validation-loss
    increases (when enabled), or when the line search cannot progress.
    """
    config = config or net.config
    Z, Y = _check_data(*train)
    has_val = val is not None and len(val[0]) > 0
    if has_val:
        Zv, Yv = _check_data(*val)

    def fg(theta):
        return loss_and_gradient(net.with_params(theta), Z, Y)

    report = TrainReport()
    start = time.perf_counter()
    opt = BFGS(fg, net.flatten(), initial_step=config.learning_rate,
               line_search=line_search or StrongWolfe())

    def val_loss(theta):
        return loss(net.with_params(theta), Zv, Yv) if has_val else None

    def finish(reason):
        report.stop_reason = reason
        report.wall_time = time.perf_counter() - start
        report.resets = opt.resets
        trained = net.with_params(opt.x)
        trained.train_epochs = net.train_epochs + report.epochs
        return trained, report

    def check(value, what):
        if not math.isfinite(value):
            report.wall_time = time.perf_counter() - start
            raise TrainingDiverged(f"non-finite {what} loss after {report.epochs} epochs", report)

    check(opt.f, "training")
    report.train_loss.append(opt.f)
    if has_val:
        report.val_loss.append(val_loss(opt.x))
    worse = 0
    while report.epochs < config.max_epochs:
        info = opt.step()
        if not info.accepted:
            return finish("line-search-failure")
        report.epochs += 1
        check(info.f, "training")
        report.train_loss.append(info.f)
        if has_val:
            v = val_loss(opt.x)
            check(v, "validation")
            worse = worse + 1 if v > report.val_loss[-1] else 0
            report.val_loss.append(v)
            if config.patience is not None and worse >= config.patience:
                return finish("patience")
    return finish("max_epochs")


def train_restarts(config: NetworkConfig, train, val, scaler: Scaler | None = None, *,
                   restarts: int = 8, screen_epochs: int = 500,
                   line_search: LineSearch | None = None) -> tuple[Network, TrainReport]:
    """Screen ``restarts`` seeded initializations, then train the best one fully.

    Each candidate runs ``screen_epochs`` updates; the one with the lowest
    validation loss (training loss without validation data, lower index on
    ties) is retrained from its initialization for ``config.max_epochs``.
    Small sigmoid networks on this problem often settle on plateaus that a
    single start cannot leave.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    has_val = val is not None and len(val[0]) > 0
    scores = []
    if restarts > 1:
        short = NetworkConfig(config.hidden_sizes, config.learning_rate,
                              min(screen_epochs, config.max_epochs), config.seed, None)
        for r in range(restarts):
            try:
                _, rep = train_bfgs(init_network(short, scaler, r), train, val, short, line_search)
            except TrainingDiverged:
                scores.append(math.inf)
                continue
            scores.append((rep.val_loss if has_val else rep.train_loss)[-1])
        log.info("restart screening losses: %s", ", ".join(f"{v:.3e}" for v in scores))
    best = int(np.argmin(scores)) if scores else 0
    net, report = train_bfgs(init_network(config, scaler, best), train, val, config, line_search)
    report.screen = scores
    return net, report


# -- model file ----------------------------------------------------------------


def model_to_dict(net: Network) -> dict:
    if net.scaler is None:
        raise ValueError("cannot save a network without its input scaler")
    return {
        "schema_version": SCHEMA_VERSION,
        "hidden_sizes": list(net.config.hidden_sizes),
        "scaler": net.scaler.to_dict(),
        "weights": [W.tolist() for W in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "seed": net.config.seed,
        "train_epochs": net.train_epochs,
        "init_restart": net.init_restart,
        "learning_rate": net.config.learning_rate,
    }


def model_from_dict(d: dict, source: str = "<model>") -> Network:
    if not isinstance(d, dict) or d.get("schema_version") != SCHEMA_VERSION:
        found = d.get("schema_version") if isinstance(d, dict) else None
        raise DataError(f"{source}: unsupported model schema_version {found!r} (expected {SCHEMA_VERSION})")
    try:
        config = NetworkConfig(hidden_sizes=tuple(d["hidden_sizes"]), seed=int(d["seed"]),
                               learning_rate=float(d.get("learning_rate", 0.001)))
        weights = [np.array(W, dtype=float) for W in d["weights"]]
        biases = [np.array(b, dtype=float) for b in d["biases"]]
        net = Network(weights, biases, config, Scaler.from_dict(d["scaler"]), int(d["train_epochs"]),
                      int(d.get("init_restart", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{source}: malformed model file: {exc}") from None
    if not np.all(np.isfinite(net.flatten())):
        raise DataError(f"{source}: non-finite parameters")
    return net


def save_model(net: Network, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(net), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> Network:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a model file ({exc})") from None
    return model_from_dict(d, str(path))
