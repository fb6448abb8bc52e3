r"""Scalar and vector autoregressive prediction.

Scalar models follow ``x[n] = sum_i a_i x[n-i] + e[n]`` and are fitted with
the Levinson-Durbin recursion. Vector models follow

.. math::

    \vec{x}[n] = \sum_{i=1}^P A_i \vec{x}[n-i] + \vec{e}[n]

and are fitted with the Levinson-Whittle-Robinson (multichannel Levinson)
recursion, which runs a forward error filter ``A1`` and a backward error
filter ``A2`` side by side. Correlations are biased and unnormalized:
``R_i = sum_{n=0}^{N-i-1} x[n+i] x[n]^T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RCOND_MIN = 1e-12


class DegenerateInputError(ValueError):
    """Raised when a recursion hits a singular or non-positive error power."""

    def __init__(self, message, lag=None):
        super().__init__(message)
        self.lag = lag


@dataclass(frozen=True)
class ScalarArModel:
    coeffs: np.ndarray
    error_power: float = float("nan")
    reflection: np.ndarray | None = None

    @property
    def order(self):
        return self.coeffs.size


@dataclass(frozen=True)
class VectorArModel:
    """Vector AR model.

    ``matrices[i-1]`` is the prediction matrix ``A_i`` applied to ``x[n-i]``.
    ``error_filter`` (``A1``, leading identity) and ``backward_filter``
    (``A2``, trailing identity) are the raw outputs of the recursion, kept
    for diagnostics.
    """

    matrices: np.ndarray
    error_filter: np.ndarray | None = None
    backward_filter: np.ndarray | None = None
    error_cov: np.ndarray | None = None

    @property
    def order(self):
        return self.matrices.shape[0]

    @property
    def dim(self):
        return self.matrices.shape[1]


@dataclass(frozen=True)
class BlockCorrelation:
    lags: np.ndarray  # (P+1, m, m)
    n_vectors: int = field(default=0)

    @property
    def maxlag(self):
        return self.lags.shape[0] - 1

    @property
    def dim(self):
        return self.lags.shape[1]

    def lag(self, k):
        """R_k for any integer k, using R_{-k} = R_k^T."""
        return self.lags[k] if k >= 0 else self.lags[-k].T


def _lagged_products(X, maxlag):
    N = X.shape[0]
    return np.stack([X[i:].T @ X[:N - i] for i in range(maxlag + 1)])


def autocorrelation(samples, maxlag: int) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if maxlag < 0 or x.size < maxlag + 1:
        raise ValueError(f"need more than {maxlag} samples, got {x.size}")
    return _lagged_products(x[:, None], maxlag)[:, 0, 0]


def levinson_durbin(r, order: int | None = None, rel_floor: float = RCOND_MIN) -> ScalarArModel:
    """Solve the Toeplitz normal equations for the predictor coefficients.

    Parameters
    ----------
    r : array_like
        Autocorrelation ``r[0..P]``.
    order : int, optional
        Model order; defaults to ``len(r) - 1``.
    rel_floor : float
        The recursion fails when the prediction-error power falls to
        ``rel_floor * r[0]`` or below.
    """
    r = np.asarray(r, dtype=np.float64)
    P = r.size - 1 if order is None else order
    if P < 1 or r.size < P + 1:
        raise ValueError("need r[0..P] with P >= 1")
    if not r[0] > 0:
        raise DegenerateInputError("r[0] must be positive", lag=0)
    a = np.zeros(P)
    k = np.zeros(P)
    err = r[0]
    for i in range(P):
        acc = r[i + 1] - np.dot(a[:i], r[i:0:-1])
        k[i] = acc / err
        a_prev = a[:i].copy()
        a[:i] = a_prev - k[i] * a_prev[::-1]
        a[i] = k[i]
        err = err * (1.0 - k[i] * k[i])
        if not err > rel_floor * r[0]:
            raise DegenerateInputError(
                f"prediction error power vanished at order {i + 1}", lag=i + 1)
    return ScalarArModel(a, float(err), k)


def block_correlation(vectors, maxlag: int) -> BlockCorrelation:
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if maxlag < 0 or X.shape[0] < maxlag + 1:
        raise ValueError(f"need at least {maxlag + 1} vectors, got {X.shape[0]}")
    return BlockCorrelation(_lagged_products(X, maxlag), X.shape[0])


def _checked_inv(D, lag, name):
    cond = np.linalg.cond(D)
    if not np.isfinite(cond) or 1.0 / cond < RCOND_MIN:
        raise DegenerateInputError(f"{name} is singular at lag {lag}", lag=lag)
    return np.linalg.inv(D)


def levinson_whittle_robinson(R: BlockCorrelation, order: int | None = None) -> VectorArModel:
    """Fit a vector AR model of the given order from block correlations.

    The recursion is run as written (forward filter ``A1``, backward filter
    ``A2``, reflection matrices ``K1``/``K2``, error covariances ``D1``/``D2``)
    starting from ``A1_0 = A2_0 = I`` and ``D1 = D2 = R_0``. The forward error
    filter satisfies ``e[n] = sum_j A1_j x[n-j]``, so the prediction matrices
    are ``A_i = -A1_i``.
    """
    P = R.maxlag if order is None else order
    if P < 1 or P > R.maxlag:
        raise ValueError(f"order must lie in 1..{R.maxlag}")
    m = R.dim
    eye = np.eye(m)
    A1 = [eye.copy()]
    A2 = [eye.copy()]
    D1 = R.lags[0].copy()
    D2 = R.lags[0].copy()
    _checked_inv(D1, 0, "R_0")
    for i in range(P):
        F = sum(A1[j] @ R.lags[i + 1 - j] for j in range(i + 1))
        K1 = -F @ _checked_inv(D2, i, "D2")
        K2 = -F.T @ _checked_inv(D1, i, "D1")
        D1 = (eye - K1 @ K2) @ D1
        D2 = (eye - K2 @ K1) @ D2
        new1 = [None] * (i + 2)
        new2 = [None] * (i + 2)
        new1[0] = A1[0]
        new2[0] = K2 @ A1[0]
        new1[i + 1] = K1 @ A2[i]
        new2[i + 1] = A2[i]
        for j in range(1, i + 1):
            new1[j] = A1[j] + K1 @ A2[j - 1]
            new2[j] = A2[j - 1] + K2 @ A1[j]
        A1, A2 = new1, new2
    A1 = np.stack(A1)
    A2 = np.stack(A2)
    return VectorArModel(-A1[1:], error_filter=A1, backward_filter=A2, error_cov=D1)


def normal_equations_oracle(R: BlockCorrelation, order: int | None = None) -> VectorArModel:
    """Dense solve of the block Yule-Walker system (reference for tests).

    ``sum_i A_i R_{k-i} = R_k`` for ``k = 1..P``.
    """
    P = R.maxlag if order is None else order
    m = R.dim
    G = np.zeros((m * P, m * P))
    for i in range(P):
        for k in range(P):
            G[i * m:(i + 1) * m, k * m:(k + 1) * m] = R.lag(k - i)
    rhs = np.hstack([R.lags[k] for k in range(1, P + 1)])
    try:
        sol = np.linalg.solve(G.T, rhs.T).T
    except np.linalg.LinAlgError as exc:
        raise DegenerateInputError("block Toeplitz system is singular") from exc
    return VectorArModel(np.stack([sol[:, i * m:(i + 1) * m] for i in range(P)]))


def predict_scalar(model: ScalarArModel, history) -> float:
    """Prediction from the last P samples, newest last."""
    h = np.asarray(history, dtype=np.float64)
    if h.shape != (model.order,):
        raise ValueError(f"history must hold {model.order} samples")
    return float(np.dot(model.coeffs, h[::-1]))


def predict_vector(model: VectorArModel, history) -> np.ndarray:
    """Prediction from the last P vectors, newest last."""
    H = np.asarray(history, dtype=np.float64)
    if H.ndim == 1 and model.dim == 1:
        H = H[:, None]
    if H.shape != (model.order, model.dim):
        raise ValueError(f"history must be {model.order} vectors of dim {model.dim}")
    return np.einsum("ijk,ik->j", model.matrices, H[::-1])
