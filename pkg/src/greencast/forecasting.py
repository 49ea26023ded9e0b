"""Forecasters, rolling-origin evaluation, and forecast extension.

All models share one interface: fit on a set of monthly series, then map a
context window of the last seq_len observations to the next pred_len values.
Evaluation slides an origin across each series, pools every (prediction,
truth) pair, and micro-averages MAE / RMSE / sMAPE / rRMSE over the pool.

Conventions, also stamped into every report header: sMAPE is on a 0..200
scale with both-zero points contributing 0; rRMSE is RMSE divided by the
mean of the actuals and requires that mean to be positive.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, InputError

DEFAULT_SEQ_LEN = 4
DEFAULT_PRED_LEN = 3
DEFAULT_HORIZON = 6
DEFAULT_TRAIN_FRAC = 0.7

METRICS_NOTE = "sMAPE on a 0-200 scale (both-zero points count 0); rRMSE = RMSE / mean(actuals)"


@dataclass(frozen=True)
class WindowConfig:
    """Context length (seq_len) and forecast length (pred_len) in months."""

    seq_len: int = DEFAULT_SEQ_LEN
    pred_len: int = DEFAULT_PRED_LEN

    def __post_init__(self):
        if self.seq_len < 1:
            raise ConfigError(f"seq_len must be >= 1, got {self.seq_len}")
        if self.pred_len < 1:
            raise ConfigError(f"pred_len must be >= 1, got {self.pred_len}")


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings for trainable models."""

    epochs: int = 20
    batch_size: int = 1
    patience: int = 3
    learning_rate: float = 1e-4
    loss: str = "mse"
    moving_avg: int = 25

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 0:
            raise ConfigError("epochs/batch_size must be >= 1 and patience >= 0")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.loss != "mse":
            raise ConfigError(f"only mse loss is supported, got {self.loss!r}")
        if self.moving_avg < 1:
            raise ConfigError(f"moving_avg must be >= 1, got {self.moving_avg}")


# ---------------------------------------------------------------------------
# metrics


def _check_pair(y: np.ndarray, yhat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise InputError(f"metric inputs must be equal-length 1-D, got {y.shape} vs {yhat.shape}")
    if y.size == 0:
        raise InputError("metric inputs are empty")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yhat))):
        raise InputError("metric inputs must be finite")
    return y, yhat


def mae(y: np.ndarray, yhat: np.ndarray) -> float:
    y, yhat = _check_pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def rmse(y: np.ndarray, yhat: np.ndarray) -> float:
    y, yhat = _check_pair(y, yhat)
    return float(math.sqrt(np.mean((y - yhat) ** 2)))


def smape(y: np.ndarray, yhat: np.ndarray) -> float:
    """Symmetric MAPE on a 0..200 scale; points where both values are 0 add 0."""
    y, yhat = _check_pair(y, yhat)
    denom = np.abs(y) + np.abs(yhat)
    terms = np.where(denom == 0.0, 0.0, 200.0 * np.abs(y - yhat) / np.where(denom == 0.0, 1.0, denom))
    return float(np.mean(terms))


def rrmse(y: np.ndarray, yhat: np.ndarray) -> float:
    """RMSE relative to the mean actual; undefined when that mean is not positive."""
    y, yhat = _check_pair(y, yhat)
    mean_y = float(np.mean(y))
    if mean_y <= 0:
        raise InputError(f"rRMSE needs mean(actuals) > 0, got {mean_y}")
    return rmse(y, yhat) / mean_y


@dataclass(frozen=True)
class MetricSet:
    mae: float
    rmse: float
    smape: float
    rrmse: float

    @classmethod
    def compute(cls, y: np.ndarray, yhat: np.ndarray) -> "MetricSet":
        return cls(mae=mae(y, yhat), rmse=rmse(y, yhat), smape=smape(y, yhat), rrmse=rrmse(y, yhat))

    def as_dict(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "smape": self.smape, "rrmse": self.rrmse}


# ---------------------------------------------------------------------------
# windows


def origin_range(n_obs: int, cfg: WindowConfig) -> range:
    """Valid forecast origins for a series of n_obs points.

    An origin t is the count of observations already seen (1-based); the
    context is observations t-seq_len+1..t and the truth is t+1..t+pred_len.
    The count is max(0, n_obs - pred_len - seq_len + 1).
    """
    return range(cfg.seq_len, n_obs - cfg.pred_len + 1)


def build_windows(series: np.ndarray, cfg: WindowConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    """All (context, target) pairs for one series under the window config."""
    y = np.asarray(series, dtype=np.float64)
    return [(y[t - cfg.seq_len : t], y[t : t + cfg.pred_len]) for t in origin_range(len(y), cfg)]


def _standardize_context(ctx: np.ndarray) -> tuple[np.ndarray, float, float]:
    mu = float(np.mean(ctx))
    sd = float(np.std(ctx))
    if sd == 0.0:
        sd = 1.0
    return (ctx - mu) / sd, mu, sd


# ---------------------------------------------------------------------------
# forecasters


class Forecaster:
    """fit on a series set, then predict pred_len values from a context."""

    name = "base"
    family = "base"

    def fit(
        self,
        series_list: Sequence[np.ndarray],
        window: WindowConfig,
        train: TrainConfig | None = None,
    ) -> "Forecaster":
        self._window = window
        return self

    def predict(self, context: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_context(self, context: np.ndarray) -> np.ndarray:
        window = getattr(self, "_window", None)
        if window is None:
            raise ConfigError(f"{self.name}: fit must run before predict")
        ctx = np.asarray(context, dtype=np.float64)
        if ctx.shape != (window.seq_len,):
            raise InputError(
                f"{self.name}: context length {ctx.shape} does not match seq_len {window.seq_len}"
            )
        return ctx


class NaiveForecaster(Forecaster):
    """Repeat the last observed value."""

    name = "naive"
    family = "baseline"

    def predict(self, context: np.ndarray) -> np.ndarray:
        ctx = self._check_context(context)
        return np.full(self._window.pred_len, ctx[-1], dtype=np.float64)


class DriftForecaster(Forecaster):
    """Extrapolate the mean first difference of the context."""

    name = "drift"
    family = "baseline"

    def predict(self, context: np.ndarray) -> np.ndarray:
        ctx = self._check_context(context)
        slope = float(np.mean(np.diff(ctx))) if len(ctx) > 1 else 0.0
        steps = np.arange(1, self._window.pred_len + 1, dtype=np.float64)
        return ctx[-1] + slope * steps


class SesForecaster(Forecaster):
    """Level-only exponential smoothing; alpha picked by in-window grid search."""

    name = "ses"
    family = "baseline"

    ALPHA_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))  # 0.05 .. 0.95

    def __init__(self):
        self.alpha = 0.5  # only reachable default when seq_len == 1

    @staticmethod
    def _level(values: np.ndarray, alpha: float) -> float:
        level = float(values[0])
        for v in values[1:]:
            level = alpha * float(v) + (1.0 - alpha) * level
        return level

    def fit(self, series_list, window, train=None):
        super().fit(series_list, window, train)
        if window.seq_len < 2:
            return self
        windows = [w for s in series_list for w, _ in build_windows(np.asarray(s), window)]
        if not windows:
            return self
        best = (float("inf"), self.alpha)
        for alpha in self.ALPHA_GRID:
            total = 0.0
            for ctx in windows:
                level = float(ctx[0])
                for v in ctx[1:]:
                    total += (float(v) - level) ** 2
                    level = alpha * float(v) + (1.0 - alpha) * level
            if total < best[0]:
                best = (total, alpha)
        self.alpha = best[1]
        return self

    def predict(self, context: np.ndarray) -> np.ndarray:
        ctx = self._check_context(context)
        return np.full(self._window.pred_len, self._level(ctx, self.alpha), dtype=np.float64)


class RidgeARForecaster(Forecaster):
    """Linear map from seq_len lags to pred_len outputs, L2-penalized, no intercept.

    Weights come from the closed-form normal equations; with lam = 0 the
    minimum-norm least-squares solution is used instead so rank-deficient
    training designs (for example pure geometric series) stay solvable.
    """

    name = "ridge_ar"
    family = "linear"

    def __init__(self, lam: float = 1.0):
        if lam < 0:
            raise ConfigError(f"ridge penalty must be >= 0, got {lam}")
        self.lam = lam
        self.weights: np.ndarray | None = None

    def fit(self, series_list, window, train=None):
        super().fit(series_list, window, train)
        pairs = [wt for s in series_list for wt in build_windows(np.asarray(s), window)]
        if not pairs:
            raise InputError("ridge_ar: no training windows; series shorter than seq_len+pred_len")
        X = np.stack([c for c, _ in pairs])
        Y = np.stack([t for _, t in pairs])
        if self.lam > 0:
            gram = X.T @ X + self.lam * np.eye(window.seq_len)
            self.weights = np.linalg.solve(gram, X.T @ Y)
        else:
            self.weights, *_ = np.linalg.lstsq(X, Y, rcond=None)
        return self

    def predict(self, context: np.ndarray) -> np.ndarray:
        ctx = self._check_context(context)
        if self.weights is None:
            raise ConfigError("ridge_ar: fit must run before predict")
        return ctx @ self.weights


def decompose(window_values: np.ndarray, kernel: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a window into a moving-average trend and the residual around it.

    The kernel must be odd; the window is padded by repeating its first and
    last values so the trend has the same length as the input.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigError(f"decomposition kernel must be odd and >= 1, got {kernel}")
    x = np.asarray(window_values, dtype=np.float64)
    if kernel == 1:
        return x.copy(), np.zeros_like(x)
    half = (kernel - 1) // 2
    padded = np.concatenate([np.full(half, x[0]), x, np.full(half, x[-1])])
    trend = np.convolve(padded, np.full(kernel, 1.0 / kernel), mode="valid")
    return trend, x - trend


def clamp_kernel(moving_avg: int, seq_len: int) -> int:
    """Largest odd kernel that fits both the configured size and the window."""
    kernel = min(moving_avg, seq_len)
    if kernel % 2 == 0:
        kernel -= 1
    return max(kernel, 1)


class DLinearLikeForecaster(Forecaster):
    """Trend/residual decomposition with two linear heads, summed.

    Each head maps the seq_len-long component to pred_len outputs. Both are
    trained jointly by per-sample gradient descent on MSE with seeded shuffle
    order, early-stopped on held-out windows (the last window of each
    training series) with the configured patience.
    """

    name = "dlinear_like"
    family = "decomposition-linear"

    def __init__(self, seed: int = 42):
        self.seed = seed
        self.kernel = 1
        self.w_trend: np.ndarray | None = None
        self.b_trend: np.ndarray | None = None
        self.w_resid: np.ndarray | None = None
        self.b_resid: np.ndarray | None = None

    def _forward(self, ctx: np.ndarray) -> np.ndarray:
        trend, resid = decompose(ctx, self.kernel)
        return self.w_trend @ trend + self.b_trend + self.w_resid @ resid + self.b_resid

    def fit(self, series_list, window, train=None):
        super().fit(series_list, window, train)
        cfg = train or TrainConfig()
        self.kernel = clamp_kernel(cfg.moving_avg, window.seq_len)

        train_pairs: list[tuple[np.ndarray, np.ndarray]] = []
        val_pairs: list[tuple[np.ndarray, np.ndarray]] = []
        for s in series_list:
            pairs = build_windows(np.asarray(s), window)
            if len(pairs) >= 2:
                train_pairs.extend(pairs[:-1])
                val_pairs.append(pairs[-1])
            else:
                train_pairs.extend(pairs)
        if not train_pairs:
            raise InputError("dlinear_like: no training windows; series too short")

        k, h = window.seq_len, window.pred_len
        # 1/k init makes the untrained model predict the window mean
        self.w_trend = np.full((h, k), 1.0 / k)
        self.w_resid = np.full((h, k), 1.0 / k)
        self.b_trend = np.zeros(h)
        self.b_resid = np.zeros(h)

        decomposed = [(decompose(c, self.kernel), t) for c, t in train_pairs]
        rng = np.random.default_rng(self.seed)

        def val_loss() -> float:
            if not val_pairs:
                return float("nan")
            total = 0.0
            for ctx, target in val_pairs:
                err = self._forward(ctx) - target
                total += float(np.mean(err**2))
            return total / len(val_pairs)

        best = (float("inf"), None)
        stall = 0
        for _ in range(cfg.epochs):
            order = rng.permutation(len(decomposed))
            for start in range(0, len(order), cfg.batch_size):
                batch = order[start : start + cfg.batch_size]
                g_wt = np.zeros_like(self.w_trend)
                g_wr = np.zeros_like(self.w_resid)
                g_bt = np.zeros_like(self.b_trend)
                g_br = np.zeros_like(self.b_resid)
                for idx in batch:
                    (trend, resid), target = decomposed[idx]
                    pred = self.w_trend @ trend + self.b_trend + self.w_resid @ resid + self.b_resid
                    dpred = 2.0 * (pred - target) / h
                    g_wt += np.outer(dpred, trend)
                    g_wr += np.outer(dpred, resid)
                    g_bt += dpred
                    g_br += dpred
                scale = cfg.learning_rate / len(batch)
                self.w_trend -= scale * g_wt
                self.w_resid -= scale * g_wr
                self.b_trend -= scale * g_bt
                self.b_resid -= scale * g_br
            if val_pairs:
                loss = val_loss()
                if loss < best[0] - 1e-12:
                    best = (
                        loss,
                        (self.w_trend.copy(), self.b_trend.copy(), self.w_resid.copy(), self.b_resid.copy()),
                    )
                    stall = 0
                else:
                    stall += 1
                    if stall > cfg.patience:
                        break
        if best[1] is not None:
            self.w_trend, self.b_trend, self.w_resid, self.b_resid = best[1]
        return self

    def predict(self, context: np.ndarray) -> np.ndarray:
        ctx = self._check_context(context)
        if self.w_trend is None:
            raise ConfigError("dlinear_like: fit must run before predict")
        return self._forward(ctx)


FORECASTERS = {
    "naive": NaiveForecaster,
    "drift": DriftForecaster,
    "ses": SesForecaster,
    "ridge_ar": RidgeARForecaster,
    "dlinear_like": DLinearLikeForecaster,
}


def make_forecaster(name: str, seed: int = 42, ridge_lambda: float = 1.0) -> Forecaster:
    if name not in FORECASTERS:
        raise ConfigError(f"unknown forecaster {name!r}, want one of {sorted(FORECASTERS)}")
    if name == "dlinear_like":
        return DLinearLikeForecaster(seed=seed)
    if name == "ridge_ar":
        return RidgeARForecaster(lam=ridge_lambda)
    return FORECASTERS[name]()


# ---------------------------------------------------------------------------
# rolling-origin evaluation


@dataclass
class SeriesEval:
    window_count: int
    metrics: MetricSet


@dataclass
class EvalReport:
    model: str
    family: str
    seq_len: int
    pred_len: int
    train_frac: float
    window_count: int
    metrics: MetricSet
    per_series: dict = field(default_factory=dict)
    note: str = METRICS_NOTE

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "family": self.family,
            "seq_len": self.seq_len,
            "pred_len": self.pred_len,
            "train_frac": self.train_frac,
            "window_count": self.window_count,
            "metrics": self.metrics.as_dict(),
            "per_series": {
                str(key): {"window_count": ev.window_count, "metrics": ev.metrics.as_dict()}
                for key, ev in self.per_series.items()
            },
            "note": self.note,
        }


def _training_cut(n_obs: int, cfg: WindowConfig, train_frac: float) -> int:
    """Observations visible to fit(): enough for the first train_frac of origins."""
    n_origins = len(origin_range(n_obs, cfg))
    n_train = max(1, int(math.floor(train_frac * n_origins)))
    if train_frac >= 1.0:
        n_train = n_origins
    # origin k + n_train - 1 needs pred_len points beyond itself
    return cfg.seq_len + n_train - 1 + cfg.pred_len


def rolling_origin_eval(
    series_map: Mapping, model: Forecaster, cfg: WindowConfig,
    train: TrainConfig | None = None,
    train_frac: float = DEFAULT_TRAIN_FRAC,
    standardize: bool = False,
) -> EvalReport:
    """Slide an origin across every series, pool all pairs, micro-average.

    The model is fit once, on windows from the leading train_frac share of
    each series' origins; predictions are then collected at every origin
    from seq_len through n_obs - pred_len, so a 12-month series under
    seq_len 4 / pred_len 3 yields 6 origins and 18 pooled points.
    """
    if not series_map:
        raise InputError("rolling_origin_eval needs at least one series")
    if not 0.0 < train_frac <= 1.0:
        raise ConfigError(f"train_frac must be in (0, 1], got {train_frac}")
    arrays = {key: np.asarray(v, dtype=np.float64) for key, v in series_map.items()}
    for key, y in arrays.items():
        if len(y) < cfg.seq_len + cfg.pred_len:
            raise InputError(
                f"series {key!r} has {len(y)} points, needs >= {cfg.seq_len + cfg.pred_len}"
            )

    model.fit([y[: _training_cut(len(y), cfg, train_frac)] for y in arrays.values()], cfg, train)

    pooled_y: list[np.ndarray] = []
    pooled_hat: list[np.ndarray] = []
    per_series: dict = {}
    total_windows = 0
    for key, y in arrays.items():
        truths: list[np.ndarray] = []
        preds: list[np.ndarray] = []
        for t in origin_range(len(y), cfg):
            ctx = y[t - cfg.seq_len : t]
            if standardize:
                scaled, mu, sd = _standardize_context(ctx)
                hat = model.predict(scaled) * sd + mu
            else:
                hat = model.predict(ctx)
            truths.append(y[t : t + cfg.pred_len])
            preds.append(np.asarray(hat, dtype=np.float64))
        sy = np.concatenate(truths)
        shat = np.concatenate(preds)
        per_series[key] = SeriesEval(window_count=len(truths), metrics=MetricSet.compute(sy, shat))
        total_windows += len(truths)
        pooled_y.append(sy)
        pooled_hat.append(shat)

    overall = MetricSet.compute(np.concatenate(pooled_y), np.concatenate(pooled_hat))
    return EvalReport(
        model=model.name,
        family=model.family,
        seq_len=cfg.seq_len,
        pred_len=cfg.pred_len,
        train_frac=train_frac,
        window_count=total_windows,
        metrics=overall,
        per_series=per_series,
    )


# ---------------------------------------------------------------------------
# forecast extension


def extend_forecast(
    series: np.ndarray,
    model: Forecaster,
    cfg: WindowConfig,
    horizon: int = DEFAULT_HORIZON,
    standardize: bool = False,
    floor: float | None = None,
) -> np.ndarray:
    """Extend a series by horizon steps, feeding predictions back as context.

    Each iteration predicts pred_len values from the latest seq_len points
    (observed or already predicted) and appends them, so horizon 6 with
    pred_len 3 takes two iterations. Exactly horizon values come back.

    floor clamps every predicted value before it is returned or fed back as
    context; series that are proportions pass 0.0 so a downward-trending
    model cannot extrapolate below what the quantity can physically be.
    """
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    y = list(np.asarray(series, dtype=np.float64))
    if len(y) < cfg.seq_len:
        raise InputError(f"series has {len(y)} points, needs >= seq_len {cfg.seq_len}")
    extension: list[float] = []
    while len(extension) < horizon:
        ctx = np.asarray(y[-cfg.seq_len :], dtype=np.float64)
        if standardize:
            scaled, mu, sd = _standardize_context(ctx)
            step = model.predict(scaled) * sd + mu
        else:
            step = model.predict(ctx)
        step = np.asarray(step, dtype=np.float64)
        if floor is not None:
            step = np.maximum(step, floor)
        extension.extend(float(v) for v in step)
        y.extend(float(v) for v in step)
    return np.asarray(extension[:horizon], dtype=np.float64)


# ---------------------------------------------------------------------------
# imported predictions

PREDICTION_FIELDS = ("skill_id", "origin_t", "step", "value")


def read_predictions_csv(path: str | Path) -> dict:
    """Load externally produced predictions keyed by (skill_id, origin, step).

    origin_t is the 1-based count of observations the prediction was made
    from; step runs 1..pred_len.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"predictions file not found: {path}")
    out: dict = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(PREDICTION_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise InputError(f"predictions header missing columns {sorted(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                key = (str(row["skill_id"]), int(row["origin_t"]), int(row["step"]))
                value = float(row["value"])
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"line {line_no}: malformed prediction row ({exc})")
            if key in out:
                raise InputError(f"line {line_no}: duplicate prediction key {key}")
            out[key] = value
    return out


def score_imported(
    series_map: Mapping, predictions: Mapping, cfg: WindowConfig, model_name: str = "imported"
) -> EvalReport:
    """Score external predictions with the same pooling and metrics as builtins."""
    if not series_map:
        raise InputError("score_imported needs at least one series")
    pooled_y: list[np.ndarray] = []
    pooled_hat: list[np.ndarray] = []
    per_series: dict = {}
    total_windows = 0
    for key, values in series_map.items():
        y = np.asarray(values, dtype=np.float64)
        if len(y) < cfg.seq_len + cfg.pred_len:
            raise InputError(
                f"series {key!r} has {len(y)} points, needs >= {cfg.seq_len + cfg.pred_len}"
            )
        truths: list[np.ndarray] = []
        preds: list[np.ndarray] = []
        for t in origin_range(len(y), cfg):
            hat = np.empty(cfg.pred_len)
            for step in range(1, cfg.pred_len + 1):
                pkey = (str(key), t, step)
                if pkey not in predictions:
                    raise InputError(f"missing prediction for skill {key} origin {t} step {step}")
                hat[step - 1] = predictions[pkey]
            truths.append(y[t : t + cfg.pred_len])
            preds.append(hat)
        sy = np.concatenate(truths)
        shat = np.concatenate(preds)
        per_series[key] = SeriesEval(window_count=len(truths), metrics=MetricSet.compute(sy, shat))
        total_windows += len(truths)
        pooled_y.append(sy)
        pooled_hat.append(shat)
    overall = MetricSet.compute(np.concatenate(pooled_y), np.concatenate(pooled_hat))
    return EvalReport(
        model=model_name,
        family="imported",
        seq_len=cfg.seq_len,
        pred_len=cfg.pred_len,
        train_frac=1.0,
        window_count=total_windows,
        metrics=overall,
        per_series=per_series,
    )


# ---------------------------------------------------------------------------
# report serialization


def write_eval_reports_csv(reports: Sequence[EvalReport], path: str | Path) -> None:
    """Aggregate metrics table, one row per (model, window config)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {METRICS_NOTE}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["family", "model", "seq_len", "pred_len", "windows", "mae", "rmse", "smape", "rrmse"]
        )
        for r in reports:
            writer.writerow(
                [
                    r.family,
                    r.model,
                    r.seq_len,
                    r.pred_len,
                    r.window_count,
                    f"{r.metrics.mae:.6f}",
                    f"{r.metrics.rmse:.6f}",
                    f"{r.metrics.smape:.6f}",
                    f"{r.metrics.rrmse:.6f}",
                ]
            )


def write_eval_reports_json(reports: Sequence[EvalReport], path: str | Path) -> None:
    payload = {"note": METRICS_NOTE, "reports": [r.as_dict() for r in reports]}
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
