"""Single-hidden-layer perceptron trained by Levenberg-Marquardt with Bayesian regularization.

The network computes ``y = W2 @ tanh(W1 @ x + b1) + b2`` (tansig hidden layer,
purelin output). Its parameters are flattened in a fixed order, used by the
Jacobian, the trainer and the serialized form:

    row-major W1, then b1, then row-major W2, then b2

Training minimises ``F = beta * E_D + alpha * E_W`` with
``E_D = 0.5 * sum(residual**2)`` and ``E_W = 0.5 * w @ w``. The
hyperparameters are re-estimated after every accepted step with the
Gauss-Newton evidence approximation (see :func:`train_br`).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .sigproc import RngStream

log = logging.getLogger(__name__)

INIT_STD = 0.5
# floor on M - gamma when there are fewer residuals than effective parameters
_MIN_DOF = 1e-12


class TrainingDiverged(RuntimeError):
    pass


def tansig(x):
    """Hyperbolic-tangent sigmoid, ``2 / (1 + exp(-2x)) - 1``."""
    # tanh is the same function without the overflow in exp(-2x) for x << 0
    return np.tanh(x)


def purelin(x):
    return x


@dataclass(frozen=True)
class MlpConfig:
    n_in: int
    n_hidden: int
    n_out: int
    hidden_activation: str = "tansig"
    output_activation: str = "purelin"

    def __post_init__(self):
        for name in ("n_in", "n_hidden", "n_out"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.hidden_activation != "tansig" or self.output_activation != "purelin":
            raise ValueError("only tansig hidden / purelin output layers are supported")

    @property
    def n_weights(self) -> int:
        return self.n_hidden * (self.n_in + 1) + self.n_out * (self.n_hidden + 1)

    def __str__(self):
        return f"{self.n_in}-{self.n_hidden}-{self.n_out}"


@dataclass(frozen=True, eq=False)
class MlpNetwork:
    config: MlpConfig
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        cfg = self.config
        shapes = {
            "w1": (cfg.n_hidden, cfg.n_in),
            "b1": (cfg.n_hidden,),
            "w2": (cfg.n_out, cfg.n_hidden),
            "b2": (cfg.n_out,),
        }
        for name, shape in shapes.items():
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_vector(cls, config: MlpConfig, w) -> "MlpNetwork":
        w = np.asarray(w, dtype=float)
        if w.shape != (config.n_weights,):
            raise ValueError(f"weight vector has shape {w.shape}, expected ({config.n_weights},)")
        h, i, o = config.n_hidden, config.n_in, config.n_out
        cut = np.cumsum([h * i, h, o * h])
        w1, b1, w2, b2 = np.split(w, cut)
        return cls(config, w1.reshape(h, i), b1, w2.reshape(o, h), b2)

    @classmethod
    def zeros(cls, config: MlpConfig) -> "MlpNetwork":
        return cls.from_vector(config, np.zeros(config.n_weights))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def predict(self, inputs) -> np.ndarray:
        """Batch forward pass; ``inputs`` has shape ``(n_samples, n_in)``."""
        x = np.asarray(inputs, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.config.n_in:
            raise ValueError(f"inputs must have shape (n, {self.config.n_in}), got {x.shape}")
        hidden = tansig(x @ self.w1.T + self.b1)
        return purelin(hidden @ self.w2.T + self.b2)

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "config": {
                "n_in": cfg.n_in,
                "n_hidden": cfg.n_hidden,
                "n_out": cfg.n_out,
                "hidden_activation": cfg.hidden_activation,
                "output_activation": cfg.output_activation,
            },
            "weight_order": "w1_row_major,b1,w2_row_major,b2",
            # repr() of a Python float is the shortest decimal that round-trips exactly
            "weights": [float(v) for v in self.to_vector()],
        }

    @classmethod
    def from_dict(cls, record: dict) -> "MlpNetwork":
        config = MlpConfig(**record["config"])
        return cls.from_vector(config, np.array(record["weights"], dtype=float))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "MlpNetwork":
        return cls.from_dict(json.loads(text))


def forward(net: MlpNetwork, x) -> np.ndarray:
    """Output vector of ``net`` for a single input vector of length ``n_in``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.config.n_in,):
        raise ValueError(f"input must have shape ({net.config.n_in},), got {x.shape}")
    return net.predict(x[None, :])[0]


def init_weights(config: MlpConfig, rng: RngStream, std: float = INIT_STD) -> MlpNetwork:
    """Network with all weights and biases drawn i.i.d. from ``Normal(0, std²)``."""
    w = rng.generator().normal(0.0, std, size=config.n_weights)
    return MlpNetwork.from_vector(config, w)


@dataclass(frozen=True)
class TrainingSet:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        t = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if np.ndim(self.inputs) == 1:
            x = x.T
        if np.ndim(self.targets) == 1:
            t = t.T
        if x.shape[0] != t.shape[0]:
            raise ValueError(f"inputs have {x.shape[0]} rows but targets have {t.shape[0]}")
        if x.shape[0] < 1:
            raise ValueError("training set is empty")
        if not (np.isfinite(x).all() and np.isfinite(t).all()):
            raise ValueError("training set contains non-finite values")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", t)

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]


def _check_dims(net: MlpNetwork, training: TrainingSet):
    cfg = net.config
    if training.inputs.shape[1] != cfg.n_in or training.targets.shape[1] != cfg.n_out:
        raise ValueError(
            f"training set is {training.inputs.shape[1]}-in/{training.targets.shape[1]}-out, "
            f"network is {cfg}"
        )


def residuals(net: MlpNetwork, training: TrainingSet) -> np.ndarray:
    """Flattened ``y(x_n) - t_n``, sample-major (row ``n * n_out + o``)."""
    _check_dims(net, training)
    return (net.predict(training.inputs) - training.targets).ravel()


def jacobian(net: MlpNetwork, training: TrainingSet) -> np.ndarray:
    """Analytic Jacobian of :func:`residuals` with respect to the weight vector.

    Rows follow the residual ordering, columns the documented weight ordering.
    """
    _check_dims(net, training)
    x = training.inputs
    n, (h, i, o) = x.shape[0], (net.config.n_hidden, net.config.n_in, net.config.n_out)
    hidden = tansig(x @ net.w1.T + net.b1)  # (n, h)
    # d y_o / d a_j for hidden pre-activation a_j: W2[o, j] * (1 - h_j^2)
    back = net.w2[None, :, :] * (1.0 - hidden**2)[:, None, :]  # (n, o, h)
    jac = np.empty((n, o, net.config.n_weights))
    jac[:, :, : h * i] = (back[:, :, :, None] * x[:, None, None, :]).reshape(n, o, h * i)
    jac[:, :, h * i : h * i + h] = back
    start = h * i + h
    eye = np.eye(o)
    jac[:, :, start : start + o * h] = (eye[None, :, :, None] * hidden[:, None, None, :]).reshape(
        n, o, o * h
    )
    jac[:, :, start + o * h :] = eye[None, :, :]
    return jac.reshape(n * o, net.config.n_weights)


@dataclass(frozen=True)
class TrainOptions:
    max_epochs: int = 200
    min_gradient: float = 1e-7
    mu_init: float = 1e-3
    mu_factor: float = 10.0
    mu_max: float = 1e10
    target_objective: float = 0.0
    # False freezes alpha = 0, beta = 1, i.e. plain Levenberg-Marquardt least squares
    bayesian: bool = True
    # accepted epochs of plain LM (alpha = 0, beta = 1) before the evidence updates
    # start. Updating from the first step lets weight decay lock a poor early fit
    # in place: the demodulator collapses to zero output under strong IMD, and a
    # third of y = 2x fits stall near E_D/M = 4e-6.
    warmup_epochs: int = 10

    def __post_init__(self):
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")
        if not (self.mu_init > 0 and self.mu_factor > 1 and self.mu_max > self.mu_init):
            raise ValueError("need mu_init > 0, mu_factor > 1 and mu_max > mu_init")
        if self.min_gradient < 0:
            raise ValueError("min_gradient must be non-negative")
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be non-negative")


@dataclass
class BrTrainerState:
    alpha: float
    beta: float
    gamma: float
    mu: float
    epoch: int
    objective: float
    sse: float = 0.0
    ssw: float = 0.0
    stop_reason: str = ""


@dataclass
class EpochRecord:
    """One accepted LM step.

    ``objective_before``/``objective_after`` are evaluated with the
    hyperparameters in force during the step; ``objective`` is the value after
    re-estimating them.
    """

    epoch: int
    objective_before: float
    objective_after: float
    objective: float
    alpha: float
    beta: float
    gamma: float
    mu: float
    sse: float
    ssw: float
    gradient_norm: float


@dataclass
class TrainingHistory:
    epochs: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.epochs)

    def __iter__(self):
        return iter(self.epochs)


def _effective_parameters(jtj_eigvals: np.ndarray, alpha: float, beta: float) -> float:
    # N_w - alpha * tr((beta H + alpha I)^-1) written in the eigenbasis of H
    lam = beta * jtj_eigvals
    if alpha == 0:
        return float(jtj_eigvals.size)
    return float(np.sum(lam / (lam + alpha)))


def train_br(
    net: MlpNetwork, training: TrainingSet, opts: TrainOptions | None = None
) -> tuple[MlpNetwork, BrTrainerState, TrainingHistory]:
    """Train ``net`` on ``training`` by Bayesian-regularized Levenberg-Marquardt.

    Each epoch solves ``(beta J'J + (alpha + mu) I) dw = -(beta J'e + alpha w)``
    and accepts the step if it lowers ``F`` for the current ``alpha, beta``;
    otherwise ``mu`` grows by ``mu_factor`` and the step is retried. After an
    accepted step ``mu`` shrinks by ``mu_factor`` and, when ``opts.bayesian``,

        gamma = N_w - alpha * tr((beta J'J + alpha I)^-1)
        alpha = gamma / (2 E_W)
        beta  = (M - gamma) / (2 E_D)

    with ``M`` the number of residuals. Training starts from ``alpha = 0,
    beta = 1``. The input network is not modified.

    Raises
    ------
    TrainingDiverged
        If the damped system stays singular or the objective becomes non-finite.
    """
    opts = opts or TrainOptions()
    _check_dims(net, training)
    config = net.config
    n_w = config.n_weights
    m = training.n_samples * config.n_out
    if training.n_samples < n_w:
        log.warning("training set has %d samples for %d weights", training.n_samples, n_w)

    w = net.to_vector().copy()
    alpha, beta, gamma = 0.0, 1.0, float(n_w)
    mu = opts.mu_init

    def evaluate(vec):
        candidate = MlpNetwork.from_vector(config, vec)
        e = residuals(candidate, training)
        return candidate, e, 0.5 * float(e @ e), 0.5 * float(vec @ vec)

    current, e, sse, ssw = evaluate(w)
    objective = beta * sse + alpha * ssw
    if not math.isfinite(objective):
        raise TrainingDiverged("non-finite objective at initial weights")

    history = TrainingHistory()
    stop_reason = "max_epochs"
    for epoch in range(1, opts.max_epochs + 1):
        if objective <= opts.target_objective:
            stop_reason = "target_objective"
            break
        jac = jacobian(current, training)
        grad = beta * (jac.T @ e) + alpha * w
        grad_norm = float(np.linalg.norm(grad))
        if not np.isfinite(grad_norm):
            raise TrainingDiverged("training diverged: non-finite gradient")
        if grad_norm < opts.min_gradient:
            stop_reason = "min_gradient"
            break
        # (beta J'J + (alpha + mu) I)^-1 in the eigenbasis of J'J; one decomposition serves
        # every damping retry and the effective-parameter count
        try:
            lam, vecs = np.linalg.eigh(jac.T @ jac)
        except np.linalg.LinAlgError as exc:
            raise TrainingDiverged(f"training diverged: {exc}") from exc
        lam = np.clip(lam, 0.0, None)
        grad_eig = vecs.T @ grad

        step_found = False
        while mu <= opts.mu_max:
            denom = beta * lam + alpha + mu
            w_new = w - vecs @ (grad_eig / denom)
            cand, e_new, sse_new, ssw_new = evaluate(w_new)
            obj_new = beta * sse_new + alpha * ssw_new
            if math.isfinite(obj_new) and obj_new < objective:
                step_found = True
                break
            mu *= opts.mu_factor
        if not step_found:
            stop_reason = "mu_max"
            break

        objective_before = objective
        w, current, e, sse, ssw = w_new, cand, e_new, sse_new, ssw_new
        objective_after = obj_new
        mu = mu / opts.mu_factor

        exact_fit = False
        if opts.bayesian and epoch > opts.warmup_epochs:
            gamma = _effective_parameters(lam, alpha, beta)
            if ssw > 0:
                alpha = gamma / (2.0 * ssw)
            if sse > 0:
                beta = max(m - gamma, _MIN_DOF) / (2.0 * sse)
            else:
                # beta would be infinite; keep it and stop
                exact_fit = True
        objective = beta * sse + alpha * ssw
        if not math.isfinite(objective):
            raise TrainingDiverged("training diverged: non-finite objective")
        history.epochs.append(
            EpochRecord(epoch, objective_before, objective_after, objective, alpha, beta,
                        gamma, mu, sse, ssw, grad_norm)
        )
        if exact_fit:
            stop_reason = "exact_fit"
            break

    state = BrTrainerState(
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        mu=mu,
        epoch=len(history),
        objective=objective,
        sse=sse,
        ssw=ssw,
        stop_reason=stop_reason,
    )
    return current, state, history


def train_op_count(config: MlpConfig, n_samples: int, epochs: int) -> int:
    """Matrix-multiplication count ``t * I * m * n * k`` for one training run."""
    if n_samples < 0 or epochs < 0:
        raise ValueError("sample and epoch counts must be non-negative")
    return int(n_samples) * int(epochs) * config.n_in * config.n_hidden * config.n_out
