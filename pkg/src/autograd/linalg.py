"""Regularised orthogonal projection onto the column span of a basis.

For each batch element the projection `V (V^T V + eps I)^{-1} V^T X` is
evaluated through a Cholesky factorisation of the K x K Gram matrix; the
N x N projection matrix is never formed.
"""
import logging

import numpy as np
from scipy import linalg as sla

from src.autograd.tensor import Function, Tensor
from src.utils.errors import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)


def _cholesky(gram: np.ndarray, batch_index: int):
    if not np.all(np.isfinite(gram)):
        raise NumericalError("Gram matrix has non-finite entries", batch_index=batch_index)
    try:
        return sla.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Gram matrix is not positive definite: {e}", batch_index=batch_index) from None


class BatchedGramSolve(Function):
    def forward(self, V, X, eps=1e-4):
        if V.ndim != 3 or X.ndim != 3 or V.shape[:2] != X.shape[:2]:
            raise ConfigurationError(f"batched_gram_solve: incompatible shapes V{V.shape} and X{X.shape}")
        B, N, K = V.shape
        if K > N:
            raise ConfigurationError(f"batched_gram_solve: K={K} exceeds N={N}")
        eye = np.eye(K, dtype=V.dtype)
        gram = np.matmul(np.swapaxes(V, 1, 2), V) + eps * eye
        rhs = np.matmul(np.swapaxes(V, 1, 2), X)  # (B, K, C)
        factors = [_cholesky(gram[b], b) for b in range(B)]
        coeffs = np.stack([sla.cho_solve(factors[b], rhs[b], check_finite=False) for b in range(B)])
        coeffs = coeffs.astype(V.dtype, copy=False)

        self.V, self.X = V, X
        self.factors = factors
        self.coeffs = coeffs
        return np.matmul(V, coeffs)

    def backward(self, grad):
        # Y = V A, A = G^{-1} R, G = V^T V + eps I, R = V^T X
        V, X, A = self.V, self.X, self.coeffs
        grad_A = np.matmul(np.swapaxes(V, 1, 2), grad)
        grad_R = np.stack(
            [sla.cho_solve(self.factors[b], grad_A[b], check_finite=False) for b in range(V.shape[0])]
        ).astype(V.dtype, copy=False)
        grad_G = -np.matmul(grad_R, np.swapaxes(A, 1, 2))
        grad_V = (
            np.matmul(grad, np.swapaxes(A, 1, 2))
            + np.matmul(X, np.swapaxes(grad_R, 1, 2))
            + np.matmul(V, grad_G + np.swapaxes(grad_G, 1, 2))
        )
        grad_X = np.matmul(V, grad_R)
        return grad_V, grad_X


def batched_gram_solve(V: Tensor, X: Tensor, eps: float = 1e-4) -> Tensor:
    """Project every column of X[b] onto span(V[b]); differentiable in V and X."""
    return BatchedGramSolve.apply(V, X, eps=eps)
