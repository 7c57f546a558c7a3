"""Fourth-order tensor form of the first-vector objective (verification only)."""
import itertools

import numpy as np

from .errors import DimensionError

MAX_DIM = 20


def quartic_objective(cov, w, b):
    """Homogenised objective ``g(b) = -2 (b'b)(b'WSb) + (b'Wb)(b'Sb)``."""
    S = np.asarray(cov, dtype=np.float64)
    w = np.asarray(getattr(w, "values", w), dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(-2.0 * (b @ b) * (b @ (w * (S @ b))) + (b @ (w * b)) * (b @ S @ b))


def _outer(a, c):
    return np.einsum("ij,kl->ijkl", a, c)


def symmetrize(t):
    return sum(np.transpose(t, perm) for perm in itertools.permutations(range(4))) / 24.0


def build_quartic_tensor(cov, w):
    """Fourth-derivative tensor of :func:`quartic_objective`, fully symmetric.

    The unsymmetrised sum ``-4 I x M - 4 M x I + 4 W x S + 4 S x W`` with
    ``M = WS + SW`` contracts to ``8 g(b)``; symmetrising and scaling by 3
    gives the derivative tensor, which contracts to ``24 g(b)``.
    """
    S = np.asarray(cov, dtype=np.float64)
    m = S.shape[0]
    if m > MAX_DIM:
        raise DimensionError(f"dense quartic tensor capped at m <= {MAX_DIM}, got {m}")
    W = np.diag(np.asarray(getattr(w, "values", w), dtype=np.float64))
    I = np.eye(m)
    M = W @ S + S @ W
    raw = -4.0 * _outer(I, M) - 4.0 * _outer(M, I) + 4.0 * _outer(W, S) + 4.0 * _outer(S, W)
    return 3.0 * symmetrize(raw)


def contract(t, b):
    return float(np.einsum("ijkl,i,j,k,l->", t, b, b, b, b))
