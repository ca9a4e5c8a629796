"""Traditional solvers: CP-ALS and ST-HOSVD.

Forniscono il guess iniziale M~0 per la decomposizione orientata agli obiettivi.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from goal_tensor_cli.core.errors import DimensionError, NumericError
from goal_tensor_cli.core.models import AlsConfig, DenseTensor, KruskalModel, SthosvdConfig, TuckerModel
from goal_tensor_cli.core.tensor import frob_err, frob_norm, hadamard_gram, matricize, mttkrp, reconstruct_cp, ttm

logger = logging.getLogger(__name__)

SINGULAR_RIDGE = 1e-12


@dataclass(frozen=True)
class AlsResult:
    """Esito di CP-ALS.

    Attributes:
        model: Modello CP normalizzato (norme assorbite nel primo fattore).
        fit_history: Fit 1 - |X - M| / |X| dopo ogni sweep.
        iterations: Sweep eseguiti.
        singular_gram: True se almeno un sistema è stato risolto con pseudo-inversa.
    """

    model: KruskalModel
    fit_history: tuple[float, ...]
    iterations: int
    singular_gram: bool


def normalize_cp(model: KruskalModel) -> KruskalModel:
    """Normalizza le colonne in 2-norma e assorbe le norme nel primo fattore."""
    factors = [a.copy() for a in model.factors]
    weights = np.ones(model.rank)
    for k in range(1, model.ndims):
        norms = np.linalg.norm(factors[k], axis=0)
        safe = np.where(norms > 0, norms, 1.0)
        factors[k] /= safe
        weights *= safe
    factors[0] = factors[0] * weights
    return KruskalModel(tuple(factors))


def _solve_gram(rhs: np.ndarray, gram: np.ndarray) -> tuple[np.ndarray, bool]:
    """Risolve A V = rhs con V simmetrica; ridge + pseudo-inversa se singolare."""
    eigvals = np.linalg.eigvalsh(gram)
    if eigvals[-1] > 0 and eigvals[0] > SINGULAR_RIDGE * eigvals[-1]:
        try:
            factor = scipy.linalg.cho_factor(gram)
            return scipy.linalg.cho_solve(factor, rhs.T).T, False
        except np.linalg.LinAlgError:
            pass
    ridge = SINGULAR_RIDGE * max(float(np.trace(gram)), np.finfo(float).tiny)
    pinv = scipy.linalg.pinvh(gram + ridge * np.eye(gram.shape[0]))
    return rhs @ pinv, True


def cp_als(X: DenseTensor, cfg: AlsConfig) -> AlsResult:
    """CP per minimi quadrati alternati.

    Args:
        X: Tensore da approssimare (non nullo).
        cfg: Rango, tolleranza sul fit, iterazioni, seme.

    Returns:
        AlsResult con modello normalizzato e storia del fit.

    Raises:
        NumericError: Se X è il tensore nullo.
    """
    norm_x = frob_norm(X)
    if norm_x == 0.0:
        raise NumericError("CP-ALS needs a nonzero tensor")

    rng = np.random.default_rng(cfg.init_seed)
    factors = [rng.uniform(0.0, 1.0, size=(n, cfg.rank)) for n in X.dims]
    logger.info(f"CP-ALS: dims={X.dims}, rank={cfg.rank}, tol={cfg.fit_tolerance:g}")

    history: list[float] = []
    singular = False
    fit_old = 0.0
    iterations = 0
    for it in range(1, cfg.max_iterations + 1):
        for n in range(X.ndims):
            rhs = mttkrp(X, factors, n)
            gram = hadamard_gram(factors, skip=n)
            factors[n], flagged = _solve_gram(rhs, gram)
            singular = singular or flagged

        fit = 1.0 - frob_err(X, reconstruct_cp(KruskalModel(tuple(factors))))
        history.append(fit)
        iterations = it
        logger.debug(f"CP-ALS iter {it}: fit={fit:.12f}, delta={fit - fit_old:.3e}")
        if it > 1 and abs(fit - fit_old) < cfg.fit_tolerance:
            break
        fit_old = fit

    if singular:
        logger.warning("CP-ALS met a numerically singular Gram matrix; used ridge pseudo-inverse")
    logger.info(f"CP-ALS finished after {iterations} iterations, fit={history[-1]:.6f}")
    model = normalize_cp(KruskalModel(tuple(factors)))
    return AlsResult(model=model, fit_history=tuple(history), iterations=iterations, singular_gram=singular)


def _truncation_rank(eigvals: np.ndarray, threshold: float) -> int:
    """Rango minimo con somma degli autovalori scartati <= threshold; i pareggi arrotondano in su."""
    tails = np.concatenate([np.cumsum(eigvals[::-1])[::-1], [0.0]])
    rank = int(np.argmax(tails[1:] <= threshold)) + 1
    while (
        rank < eigvals.size
        and eigvals[rank] > 0.0
        and np.isclose(eigvals[rank - 1], eigvals[rank], rtol=1e-14, atol=0.0)
    ):
        rank += 1
    return rank


def sthosvd(X: DenseTensor, cfg: SthosvdConfig) -> TuckerModel:
    """HOSVD troncata sequenzialmente tramite autodecomposizione delle Gram.

    Args:
        X: Tensore da comprimere (non nullo).
        cfg: Ranghi espliciti o tolleranza relativa, ordine dei modi.

    Returns:
        TuckerModel con fattori a colonne ortonormali; in modalità tolleranza
        |X - M| / |X| <= epsilon.

    Raises:
        DimensionError: Ranghi espliciti fuori intervallo o ordine dei modi non valido.
        NumericError: Se X è il tensore nullo.
    """
    d = X.ndims
    order = cfg.mode_order if cfg.mode_order is not None else tuple(range(d))
    if sorted(order) != list(range(d)):
        raise DimensionError(f"Mode order {order} is not a permutation of 0..{d - 1}")
    if cfg.ranks is not None:
        if len(cfg.ranks) != d:
            raise DimensionError(f"Expected {d} Tucker ranks, got {len(cfg.ranks)}")
        for k, (r, n) in enumerate(zip(cfg.ranks, X.dims, strict=True)):
            if r > n:
                raise DimensionError(f"Rank {r} exceeds size {n} of mode {k}")

    norm_sq = frob_norm(X) ** 2
    if norm_sq == 0.0:
        raise NumericError("ST-HOSVD needs a nonzero tensor")
    threshold = (cfg.tolerance or 0.0) ** 2 * norm_sq / d

    factors: list[np.ndarray] = [np.empty((0, 0))] * d
    Y = X
    for n in order:
        Yn = matricize(Y, n)
        eigvals, eigvecs = scipy.linalg.eigh(Yn @ Yn.T)
        # eigh restituisce autovalori crescenti
        eigvals = eigvals[::-1]
        # autovalori a livello di arrotondamento contano come zero
        floor = max(float(eigvals[0]), 0.0) * eigvals.size * np.finfo(np.float64).eps
        eigvals = np.where(eigvals > floor, eigvals, 0.0)
        eigvecs = eigvecs[:, ::-1]
        rank = cfg.ranks[n] if cfg.ranks is not None else _truncation_rank(eigvals, threshold)
        factors[n] = np.ascontiguousarray(eigvecs[:, :rank])
        Y = ttm(Y, factors[n], n, transpose=True)
        logger.debug(f"ST-HOSVD mode {n}: rank {rank} of {X.dims[n]}")

    model = TuckerModel(core=Y, factors=tuple(factors))
    logger.info(f"ST-HOSVD: dims={X.dims}, ranks={model.ranks}")
    return model
