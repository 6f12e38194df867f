"""Small fully-connected network with manual backprop and an Adam optimizer.

Parameters live in one flat float64 vector with per-layer views, so the
optimizer state and the serialization format are trivial.  Training is
single-threaded and bit-deterministic for a fixed (seed, data, config).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .evaluation import roc_auc
from .losses import LossEval, LossInputError, LossKind, constrained_mse, exact_likelihood, plain_ce, weighted_ce

MAGIC = b"SPML"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class MlpConfig:
    """Network shape and initialization seed.

    ``hidden`` follows the small-data default of three shrinking layers;
    ``l2_coefficient`` is applied by the trainer to the whole parameter
    vector.
    """

    input_dim: int
    hidden: tuple[int, ...] = (64, 32, 16)
    leaky_slope: float = 0.05
    seed: int = 0
    l2_coefficient: float = 0.0

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if len(self.hidden) == 0:
            raise ValueError("hidden layer list must be non-empty")
        if any(int(h) < 1 for h in self.hidden):
            raise ValueError(f"hidden widths must be >= 1, got {self.hidden}")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ValueError(f"leaky_slope must lie in (0, 1), got {self.leaky_slope}")
        if self.l2_coefficient < 0.0:
            raise ValueError(f"l2_coefficient must be >= 0, got {self.l2_coefficient}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 128
    total_steps: int = 20_000

    def __post_init__(self):
        # learning_rate 0 is allowed: a frozen optimizer is a useful no-op check
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.total_steps < 0:
            raise ValueError(f"total_steps must be >= 0, got {self.total_steps}")


@dataclass
class TrainReport:
    """Metric trace at each evaluation step, plus divergence bookkeeping."""

    method: str
    steps: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    train_loss: np.ndarray = field(default_factory=lambda: np.array([]))
    test_loss: np.ndarray = field(default_factory=lambda: np.array([]))
    test_auc: np.ndarray = field(default_factory=lambda: np.array([]))
    wall_time: np.ndarray = field(default_factory=lambda: np.array([]))
    aborted: bool = False
    abort_step: int | None = None
    abort_reason: str | None = None

    def to_csv(self, path) -> None:
        """Per-evaluation rows; wall-clock is kept out so identical runs write identical bytes."""
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("step,train_loss,test_loss,test_auc\n")
            for i in range(len(self.steps)):
                f.write(
                    f"{int(self.steps[i])},{format(self.train_loss[i], '.17g')},"
                    f"{format(self.test_loss[i], '.17g')},{format(self.test_auc[i], '.17g')}\n"
                )


class TrainingDiverged(RuntimeError):
    """Non-finite loss or gradient during training; carries the partial report."""

    def __init__(self, step: int, kind: LossKind, report: TrainReport, reason: str):
        super().__init__(f"training diverged at step {step} with loss {kind.value}: {reason}")
        self.step = step
        self.kind = kind
        self.report = report


class Mlp:
    """Leaky-ReLU MLP with a single linear logit output."""

    def __init__(self, cfg: MlpConfig):
        self.cfg = cfg
        self.dims = (cfg.input_dim, *cfg.hidden, 1)
        shapes = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            shapes.append((fan_in, fan_out))
        self._shapes = shapes
        self.n_params = sum(fi * fo + fo for fi, fo in shapes)
        self.theta = np.zeros(self.n_params)
        self._weights, self._biases = self._views(self.theta)
        self._init_params()

    def _views(self, flat: np.ndarray):
        weights, biases = [], []
        offset = 0
        for fi, fo in self._shapes:
            weights.append(flat[offset : offset + fi * fo].reshape(fi, fo))
            offset += fi * fo
            biases.append(flat[offset : offset + fo])
            offset += fo
        return weights, biases

    def _init_params(self):
        # fan-in-scaled uniform; biases start at zero
        rng = np.random.default_rng(self.cfg.seed)
        for w, b in zip(self._weights, self._biases):
            limit = np.sqrt(6.0 / w.shape[0])
            w[...] = rng.uniform(-limit, limit, size=w.shape)
            b[...] = 0.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        z, _ = self._forward_cached(x)
        return z

    def _forward_cached(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.cfg.input_dim:
            raise ValueError(f"expected inputs of shape (n, {self.cfg.input_dim}), got {x.shape}")
        slope = self.cfg.leaky_slope
        activations = [x]
        pre_acts = []
        h = x
        for w, b in zip(self._weights[:-1], self._biases[:-1]):
            pre = h @ w + b
            pre_acts.append(pre)
            h = np.where(pre > 0.0, pre, slope * pre)
            activations.append(h)
        z = (h @ self._weights[-1] + self._biases[-1]).ravel()
        return z, (activations, pre_acts)

    def backward(self, cache, dz: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Gradient of ``sum_i dz_i * z_i`` w.r.t. the flat parameter vector.

        ``out`` may supply a reusable flat buffer; every entry is overwritten.
        """
        activations, pre_acts = cache
        slope = self.cfg.leaky_slope
        grad = np.empty(self.n_params) if out is None else out
        gw, gb = self._views(grad)

        d = dz[:, None]
        gw[-1][...] = activations[-1].T @ d
        gb[-1][...] = d.sum(axis=0)
        da = d @ self._weights[-1].T
        for layer in range(len(self._shapes) - 2, -1, -1):
            dpre = da * np.where(pre_acts[layer] > 0.0, 1.0, slope)
            gw[layer][...] = activations[layer].T @ dpre
            gb[layer][...] = dpre.sum(axis=0)
            if layer > 0:
                da = dpre @ self._weights[layer].T
        return grad

    def save(self, path) -> None:
        """Binary dump: magic, version, layer dims, then the flat parameters (little-endian)."""
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(np.uint32(FORMAT_VERSION).astype("<u4").tobytes())
            f.write(np.uint32(len(self.dims)).astype("<u4").tobytes())
            f.write(np.asarray(self.dims, dtype="<u4").tobytes())
            f.write(self.theta.astype("<f8").tobytes())

    @classmethod
    def load(cls, path, leaky_slope: float = 0.05, l2_coefficient: float = 0.0, seed: int = 0) -> "Mlp":
        with open(path, "rb") as f:
            blob = f.read()
        if blob[:4] != MAGIC:
            raise ValueError(f"not a model file: bad magic {blob[:4]!r}")
        version = int(np.frombuffer(blob, dtype="<u4", count=1, offset=4)[0])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        n_dims = int(np.frombuffer(blob, dtype="<u4", count=1, offset=8)[0])
        dims = np.frombuffer(blob, dtype="<u4", count=n_dims, offset=12).astype(int)
        cfg = MlpConfig(
            input_dim=int(dims[0]),
            hidden=tuple(int(d) for d in dims[1:-1]),
            leaky_slope=leaky_slope,
            seed=seed,
            l2_coefficient=l2_coefficient,
        )
        model = cls(cfg)
        theta = np.frombuffer(blob, dtype="<f8", offset=12 + 4 * n_dims)
        if theta.shape[0] != model.n_params:
            raise ValueError(f"parameter count mismatch: file has {theta.shape[0]}, dims imply {model.n_params}")
        model.theta[...] = theta
        return model


class Adam:
    """Adam with bias correction, acting in place on a flat parameter vector."""

    def __init__(self, cfg: AdamConfig, n_params: int):
        self.cfg = cfg
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        c = self.cfg
        self.t += 1
        self.m *= c.beta1
        self.m += (1.0 - c.beta1) * grad
        self.v *= c.beta2
        self.v += (1.0 - c.beta2) * grad * grad
        m_hat = self.m / (1.0 - c.beta1**self.t)
        v_hat = self.v / (1.0 - c.beta2**self.t)
        theta -= c.learning_rate * m_hat / (np.sqrt(v_hat) + c.epsilon)


_LOSS_FNS = {
    LossKind.CONSTRAINED_MSE: constrained_mse,
    LossKind.EXACT_LIKELIHOOD: exact_likelihood,
    LossKind.WEIGHTED_CE: weighted_ce,
    LossKind.PLAIN_CE: plain_ce,
}


def _loss_columns(kind: LossKind, ds) -> tuple[np.ndarray, ...]:
    """Pull the auxiliary columns a loss consumes out of a dataset."""
    missing = [c for c in kind.required_columns if getattr(ds, c, None) is None]
    if missing:
        raise LossInputError(f"{kind.value} requires dataset columns {missing}")
    if kind is LossKind.CONSTRAINED_MSE:
        return (ds.sweights[:, 0],)
    if kind is LossKind.WEIGHTED_CE:
        return (ds.sweights[:, 0], ds.sweights[:, 1])
    if kind is LossKind.EXACT_LIKELIHOOD:
        dead = np.flatnonzero((ds.ps <= 0) & (ds.pb <= 0))
        if dead.size:
            raise LossInputError(
                f"exact_likelihood: events with zero density under both species: indices {dead.tolist()[:20]}"
            )
        return (ds.ps, ds.pb)
    return (np.asarray(ds.y, dtype=float),)


def _eval_loss(kind: LossKind, z: np.ndarray, cols: tuple[np.ndarray, ...]) -> LossEval:
    return _LOSS_FNS[kind](z, *cols)


def train(
    model: Mlp,
    ds,
    kind: LossKind,
    opt: AdamConfig,
    *,
    eval_every: int = 500,
    test=None,
    auc_labels=None,
    method_name: str | None = None,
) -> TrainReport:
    """Run seeded mini-batch Adam and record the metric trace.

    Features are standardized with the train-split statistics.  Batches come
    from a seeded shuffle each epoch (the shuffle stream derives from the
    model seed, so runs sharing a seed also share the batch sequence).  The
    recorded train/test losses are per-event means plus the L2 term when
    ``model.cfg.l2_coefficient > 0``.  Test AUC is scored against
    ``auc_labels`` when given, else against the test split's own labels —
    pass the true labels here when the training labels are only proxies.

    Raises
    ------
    TrainingDiverged
        On a non-finite loss or gradient; the exception carries the partial
        report, so callers can keep the trace as a divergence record.
    """
    if eval_every < 1:
        raise ValueError(f"eval_every must be >= 1, got {eval_every}")
    method = method_name or kind.value
    cols = _loss_columns(kind, ds)

    mean = ds.X.mean(axis=0)
    std = ds.X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    x_train = (ds.X - mean) / std

    test_cols = None
    x_test = None
    test_labels = None
    if test is not None:
        x_test = (test.X - mean) / std
        try:
            test_cols = _loss_columns(kind, test)
        except LossInputError:
            test_cols = None
        test_labels = auc_labels if auc_labels is not None else test.y

    n = x_train.shape[0]
    l2 = model.cfg.l2_coefficient
    rng = np.random.default_rng([model.cfg.seed, 0x5EED])
    adam = Adam(opt, model.n_params)

    steps_rec: list[int] = []
    train_rec: list[float] = []
    test_rec: list[float] = []
    auc_rec: list[float] = []
    wall_rec: list[float] = []
    t0 = time.perf_counter()

    def record(step: int) -> None:
        z = model.forward(x_train)
        tr = _eval_loss(kind, z, cols).loss / n
        if l2 > 0:
            tr += l2 * float(model.theta @ model.theta)
        te = np.nan
        auc = np.nan
        if x_test is not None:
            zt = model.forward(x_test)
            if test_cols is not None:
                te = _eval_loss(kind, zt, test_cols).loss / x_test.shape[0]
                if l2 > 0:
                    te += l2 * float(model.theta @ model.theta)
            if test_labels is not None:
                auc = roc_auc(zt, test_labels).auc
        steps_rec.append(step)
        train_rec.append(tr)
        test_rec.append(te)
        auc_rec.append(auc)
        wall_rec.append(time.perf_counter() - t0)

    def make_report(aborted=False, abort_step=None, abort_reason=None) -> TrainReport:
        return TrainReport(
            method=method,
            steps=np.asarray(steps_rec, dtype=int),
            train_loss=np.asarray(train_rec),
            test_loss=np.asarray(test_rec),
            test_auc=np.asarray(auc_rec),
            wall_time=np.asarray(wall_rec),
            aborted=aborted,
            abort_step=abort_step,
            abort_reason=abort_reason,
        )

    record(0)
    order = np.array([], dtype=int)
    cursor = 0
    grad_buffer = np.empty(model.n_params)
    for step in range(1, opt.total_steps + 1):
        if cursor + opt.batch_size > len(order):
            order = rng.permutation(n)
            cursor = 0
        idx = order[cursor : cursor + opt.batch_size]
        cursor += opt.batch_size

        z, cache = model._forward_cached(x_train[idx])
        le = _eval_loss(kind, z, tuple(c[idx] for c in cols))
        if not np.isfinite(le.loss) or not np.all(np.isfinite(le.grad)):
            raise TrainingDiverged(step, kind, make_report(True, step, "non-finite batch loss or gradient"), "non-finite batch loss or gradient")
        grad = model.backward(cache, le.grad, out=grad_buffer)
        grad /= len(idx)
        if l2 > 0:
            grad += 2.0 * l2 * model.theta
        if not np.all(np.isfinite(grad)):
            raise TrainingDiverged(step, kind, make_report(True, step, "non-finite parameter gradient"), "non-finite parameter gradient")
        adam.step(model.theta, grad)

        if step % eval_every == 0 or step == opt.total_steps:
            record(step)

    return make_report()
