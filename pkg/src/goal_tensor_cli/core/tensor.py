"""Dense tensor kernels: matricization, TTM, Khatri-Rao, MTTKRP, reconstructions.

Tutte le funzioni sono pure e non modificano gli input. Convenzioni:
modi 0-based, linearizzazione column-major (modo 0 più veloce), colonne di
X_(n) ordinate con i modi restanti in ordine crescente, il primo più veloce.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from functools import reduce

import numpy as np

from goal_tensor_cli.core.errors import DimensionError, NumericError
from goal_tensor_cli.core.models import DenseTensor, KruskalModel, TuckerModel

logger = logging.getLogger(__name__)


def _check_mode(ndims: int, n: int) -> int:
    if not 0 <= n < ndims:
        raise DimensionError(f"Mode {n} out of range for a {ndims}-way tensor")
    return n


def matricize(X: DenseTensor, n: int) -> np.ndarray:
    """Unfolding di modo n: matrice I_n x (prodotto delle altre dimensioni).

    Args:
        X: Tensore denso.
        n: Modo (0-based).

    Returns:
        X_(n); per n = 0 è una vista senza copia.

    Raises:
        DimensionError: Se n è fuori intervallo.
    """
    _check_mode(X.ndims, n)
    return np.moveaxis(X.data, n, 0).reshape(X.dims[n], -1, order="F")


def fold(matrix: np.ndarray, n: int, dims: Sequence[int]) -> DenseTensor:
    """Inverso di ``matricize``: ricostruisce il tensore di dimensioni ``dims``."""
    dims = tuple(int(k) for k in dims)
    _check_mode(len(dims), n)
    rest = dims[:n] + dims[n + 1 :]
    if matrix.shape != (dims[n], int(np.prod(rest, dtype=np.int64))):
        raise DimensionError(f"Matrix of shape {matrix.shape} cannot be folded into {dims}")
    return DenseTensor(np.moveaxis(matrix.reshape((dims[n],) + rest, order="F"), 0, n))


def ttm(X: DenseTensor, A: np.ndarray, n: int, transpose: bool = False) -> DenseTensor:
    """Prodotto di modo n: Y = X x_n A, cioè Y_(n) = A X_(n).

    Args:
        X: Tensore denso.
        A: Matrice con A.shape[1] == X.dims[n] (o A.shape[0] se ``transpose``).
        n: Modo.
        transpose: Usa A^T al posto di A.

    Raises:
        DimensionError: Se le dimensioni non combaciano.
    """
    _check_mode(X.ndims, n)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError("ttm needs a 2-D matrix")
    if transpose:
        A = A.T
    if A.shape[1] != X.dims[n]:
        raise DimensionError(
            f"Matrix with {A.shape[1]} columns cannot multiply mode {n} of size {X.dims[n]}"
        )
    Y = np.tensordot(A, X.data, axes=(1, n))
    return DenseTensor(np.moveaxis(Y, 0, n))


def multi_ttm(
    X: DenseTensor,
    matrices: Sequence[np.ndarray],
    skip: int | None = None,
    transpose: bool = False,
) -> DenseTensor:
    """Sequenza di TTM su tutti i modi (eventualmente saltando ``skip``)."""
    if len(matrices) != X.ndims:
        raise DimensionError(f"Expected {X.ndims} matrices, got {len(matrices)}")
    Y = X
    for k, A in enumerate(matrices):
        if k != skip:
            Y = ttm(Y, A, k, transpose=transpose)
    return Y


def khatri_rao(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Prodotto di Khatri-Rao colonna per colonna, secondo operando più veloce.

    Raises:
        DimensionError: Se il numero di colonne differisce.
    """
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise DimensionError(f"Khatri-Rao needs equal column counts, got {A.shape} and {B.shape}")
    return (A[:, None, :] * B[None, :, :]).reshape(A.shape[0] * B.shape[0], A.shape[1])


def khatri_rao_list(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Khatri-Rao di una lista, A_0 (.) A_1 (.) ...; l'ultimo operando è il più veloce."""
    if not matrices:
        raise DimensionError("Khatri-Rao of an empty list is undefined")
    return reduce(khatri_rao, matrices)


def mttkrp(X: DenseTensor, factors: Sequence[np.ndarray], n: int) -> np.ndarray:
    """MTTKRP: X_(n) (A_{d-1} (.) ... (.) A_{n+1} (.) A_{n-1} (.) ... (.) A_0).

    Il prodotto di Khatri-Rao non viene mai formato: i modi diversi da n vengono
    contratti uno alla volta, conservando l'indice di colonna r come asse finale.

    Args:
        X: Tensore denso.
        factors: d matrici (la n-esima è ignorata), la k-esima con I_k righe.
        n: Modo.

    Returns:
        Matrice I_n x R.

    Raises:
        DimensionError: Se numero o forma dei fattori non è coerente.
    """
    d = X.ndims
    _check_mode(d, n)
    if len(factors) != d:
        raise DimensionError(f"Expected {d} factor matrices, got {len(factors)}")
    others = [k for k in range(d) if k != n]
    rank = int(np.asarray(factors[others[0] if others else n]).shape[1])
    for k in others:
        shape = np.shape(factors[k])
        if len(shape) != 2 or shape != (X.dims[k], rank):
            raise DimensionError(f"Factor {k} has shape {shape}, expected ({X.dims[k]}, {rank})")

    if not others:
        return np.repeat(X.data[:, None], rank, axis=1)

    # Primo modo: prodotto matrice semplice, aggiunge l'asse r in coda
    last = others[-1]
    T = np.tensordot(X.data, factors[last], axes=(last, 0))
    axes = [k for k in range(d) if k != last]
    for k in reversed(others[:-1]):
        pos = axes.index(k)
        r_axis = T.ndim - 1
        keep = [a for a in range(T.ndim) if a != pos]
        T = np.einsum(T, list(range(T.ndim)), factors[k], [pos, r_axis], keep)
        axes.pop(pos)
    return np.ascontiguousarray(T)


def hadamard_gram(factors: Sequence[np.ndarray], skip: int | None = None) -> np.ndarray:
    """Prodotto di Hadamard delle Gram A_k^T A_k, per k != skip."""
    rank = factors[0].shape[1]
    V = np.ones((rank, rank))
    for k, A in enumerate(factors):
        if k != skip:
            V *= A.T @ A
    return V


def reconstruct_cp(model: KruskalModel) -> DenseTensor:
    """Tensore completo di un modello CP: somma di R prodotti esterni."""
    factors = model.factors
    if model.ndims == 1:
        return DenseTensor(factors[0].sum(axis=1))
    kr = khatri_rao_list(factors[:0:-1])
    return fold(factors[0] @ kr.T, 0, model.dims)


def reconstruct_tucker(model: TuckerModel) -> DenseTensor:
    """Tensore completo di un modello Tucker: G x_1 A_1 ... x_d A_d."""
    return multi_ttm(model.core, model.factors)


def reconstruct(model: KruskalModel | TuckerModel) -> DenseTensor:
    if isinstance(model, KruskalModel):
        return reconstruct_cp(model)
    return reconstruct_tucker(model)


def frob_norm(X: DenseTensor) -> float:
    return float(np.linalg.norm(X.values))


def frob_err(X: DenseTensor, M: DenseTensor) -> float:
    """Errore relativo |X - M|_F / |X|_F.

    Raises:
        DimensionError: Se le dimensioni differiscono.
        NumericError: Se |X|_F = 0.
    """
    if X.dims != M.dims:
        raise DimensionError(f"Cannot compare tensors of dims {X.dims} and {M.dims}")
    norm = frob_norm(X)
    if norm == 0.0:
        raise NumericError("Relative error undefined for a zero reference tensor")
    return float(np.linalg.norm(X.values - M.values)) / norm


def time_slice(X: DenseTensor, t: int) -> DenseTensor:
    """Fetta temporale X_t (l'ultimo modo è il tempo).

    Raises:
        DimensionError: Se t è fuori intervallo o il tensore ha un solo modo.
    """
    if X.ndims < 2:
        raise DimensionError("A time slice needs at least a 2-way tensor")
    tau = X.dims[-1]
    if not 0 <= t < tau:
        raise DimensionError(f"Time index {t} out of range [0, {tau})")
    return DenseTensor(X.data[..., t])

