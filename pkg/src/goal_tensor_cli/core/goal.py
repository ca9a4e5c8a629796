"""Goal-oriented objective with analytic derivatives for CP and Tucker models.

f_go(v) = alpha_0 ||X~ - M~||_F^2 + sum_q alpha_q sum_{t in T_q} (g_q(S(X~_t)) - g_q(S(M~_t)))^2

dove S è la mappa di de-scalatura per variabile. Tutti i termini vengono riportati
allo spazio dei parametri tramite l'aggiunto della ricostruzione, una sola volta per
chiamata: i tensori derivata delle QoI vengono sommati prima della proiezione.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from goal_tensor_cli.core.errors import DimensionError, NumericError
from goal_tensor_cli.core.models import (
    DenseTensor,
    KruskalModel,
    ModelKind,
    ScalingInfo,
    ScalingMethod,
    TuckerModel,
)
from goal_tensor_cli.core.qoi import QoIDefinition
from goal_tensor_cli.core.tensor import (
    frob_norm,
    hadamard_gram,
    matricize,
    mttkrp,
    multi_ttm,
    reconstruct,
    ttm,
)

logger = logging.getLogger(__name__)

SCALE_FLOOR = 1e-14
RESIDUAL_FLOOR = 1e-30
PRECOND_RIDGE = 1e-12
DIAG_FLOOR = 1e-14

Model = KruskalModel | TuckerModel


# --- scaling -------------------------------------------------------------------------


def _broadcast(vector: np.ndarray, ndims: int, mode: int) -> np.ndarray:
    shape = [1] * ndims
    shape[mode] = vector.size
    return vector.reshape(shape)


def _check_variable_mode(X: DenseTensor, scaling: ScalingInfo) -> None:
    vm = scaling.variable_mode
    if vm >= X.ndims or X.dims[vm] != scaling.shift.size:
        raise DimensionError(
            f"Scaling for {scaling.shift.size} variables on mode {vm} does not fit dims {X.dims}"
        )


def compute_scaling(
    X: DenseTensor, variable_mode: int, method: ScalingMethod = "mean-std"
) -> ScalingInfo:
    """Centratura e scala per variabile.

    Args:
        X: Dato non scalato.
        variable_mode: Modo delle variabili.
        method: "mean-std" (media e deviazione standard di popolazione), "none"
            (identità) o "max-abs" (mu = 0, sigma = max |X| della variabile).

    Returns:
        ScalingInfo; sigma < 1e-14 viene sostituito da 1.

    Raises:
        DimensionError: Modo delle variabili fuori intervallo.
    """
    if not 0 <= variable_mode < X.ndims:
        raise DimensionError(f"Variable mode {variable_mode} out of range for {X.ndims} modes")
    n_vars = X.dims[variable_mode]
    if method == "none":
        return ScalingInfo(variable_mode, np.zeros(n_vars), np.ones(n_vars))

    slices = np.moveaxis(X.data, variable_mode, 0).reshape(n_vars, -1)
    if method == "mean-std":
        shift = slices.mean(axis=1)
        scale = slices.std(axis=1)
    elif method == "max-abs":
        shift = np.zeros(n_vars)
        scale = np.abs(slices).max(axis=1)
    else:
        raise DimensionError(f"Unknown scaling method '{method}'")
    scale = np.where(scale < SCALE_FLOOR, 1.0, scale)
    logger.debug(f"Scaling ({method}) on mode {variable_mode}: sigma range [{scale.min():.3g}, {scale.max():.3g}]")
    return ScalingInfo(variable_mode, shift, scale)


def apply_scaling(X: DenseTensor, scaling: ScalingInfo) -> DenseTensor:
    """X~ = (X - mu) / sigma lungo il modo delle variabili."""
    _check_variable_mode(X, scaling)
    vm = scaling.variable_mode
    mu = _broadcast(scaling.shift, X.ndims, vm)
    sigma = _broadcast(scaling.scale, X.ndims, vm)
    return DenseTensor((X.data - mu) / sigma)


def unscale_model_slice(M_scaled: DenseTensor, scaling: ScalingInfo) -> DenseTensor:
    """m = sigma(v) m~ + mu(v); vale per una fetta temporale o per il tensore intero."""
    _check_variable_mode(M_scaled, scaling)
    vm = scaling.variable_mode
    mu = _broadcast(scaling.shift, M_scaled.ndims, vm)
    sigma = _broadcast(scaling.scale, M_scaled.ndims, vm)
    return DenseTensor(sigma * M_scaled.data + mu)


def chain_scale_Z(Z: DenseTensor, scaling: ScalingInfo) -> DenseTensor:
    """Derivata rispetto al modello scalato: sigma(v) Z."""
    _check_variable_mode(Z, scaling)
    return DenseTensor(_broadcast(scaling.scale, Z.ndims, scaling.variable_mode) * Z.data)


def unscale_cp(model: KruskalModel, scaling: ScalingInfo) -> KruskalModel:
    """Forma CP di S(M~): rango R+1 con fattore variabile diag(sigma) A e colonna mu.

    Raises:
        DimensionError: Modello e scala incompatibili.
    """
    vm = scaling.variable_mode
    if vm >= model.ndims or model.dims[vm] != scaling.scale.size:
        raise DimensionError(f"Scaling does not fit a model of dims {model.dims}")
    factors = []
    for k, A in enumerate(model.factors):
        if k == vm:
            factors.append(np.column_stack([scaling.scale[:, None] * A, scaling.shift]))
        else:
            factors.append(np.column_stack([A, np.ones(A.shape[0])]))
    return KruskalModel(tuple(factors))


# --- parameter layout ----------------------------------------------------------------


@dataclass(frozen=True)
class ParamLayout:
    """Disposizione del vettore parametri.

    CP: [vec(A_0), ..., vec(A_{d-1})]; Tucker: [vec(G), vec(A_0), ..., vec(A_{d-1})],
    ogni blocco linearizzato column-major.

    Attributes:
        kind: Tipo di modello.
        dims: Dimensioni del tensore.
        ranks: (R,) per CP, (R_0, ..., R_{d-1}) per Tucker.
    """

    kind: ModelKind
    dims: tuple[int, ...]
    ranks: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.kind == "cp" and len(self.ranks) != 1:
            raise ValueError("A CP layout takes a single rank")
        if self.kind == "tucker" and len(self.ranks) != len(self.dims):
            raise ValueError("A Tucker layout needs one rank per mode")

    @classmethod
    def for_model(cls, model: Model) -> ParamLayout:
        if isinstance(model, KruskalModel):
            return cls("cp", model.dims, (model.rank,))
        return cls("tucker", model.dims, model.ranks)

    @property
    def factor_shapes(self) -> tuple[tuple[int, int], ...]:
        if self.kind == "cp":
            return tuple((n, self.ranks[0]) for n in self.dims)
        return tuple(zip(self.dims, self.ranks, strict=True))

    @property
    def core_size(self) -> int:
        return math.prod(self.ranks) if self.kind == "tucker" else 0

    @property
    def size(self) -> int:
        return self.core_size + sum(i * r for i, r in self.factor_shapes)

    def pack(self, model: Model) -> np.ndarray:
        """Vettore parametri del modello.

        Raises:
            DimensionError: Modello non compatibile con il layout.
        """
        if ParamLayout.for_model(model) != self:
            raise DimensionError(f"Model does not match parameter layout {self}")
        parts = [A.ravel(order="F") for A in model.factors]
        if isinstance(model, TuckerModel):
            parts.insert(0, model.core.values)
        return np.concatenate(parts)

    def split(self, v: np.ndarray) -> tuple[np.ndarray | None, list[np.ndarray]]:
        """(core o None, fattori) come viste sul vettore."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.size,):
            raise DimensionError(f"Parameter vector has shape {v.shape}, layout needs ({self.size},)")
        offset = self.core_size
        core = v[:offset].reshape(self.ranks, order="F") if self.kind == "tucker" else None
        factors = []
        for rows, cols in self.factor_shapes:
            factors.append(v[offset : offset + rows * cols].reshape((rows, cols), order="F"))
            offset += rows * cols
        return core, factors

    def unpack(self, v: np.ndarray) -> Model:
        core, factors = self.split(v)
        if core is None:
            return KruskalModel(tuple(factors))
        return TuckerModel(core=DenseTensor(core), factors=tuple(factors))

    def join(self, core: np.ndarray | None, factors: Sequence[np.ndarray]) -> np.ndarray:
        parts = [np.asarray(A).ravel(order="F") for A in factors]
        if core is not None:
            parts.insert(0, np.asarray(core).ravel(order="F"))
        return np.concatenate(parts)


# --- reconstruction adjoint and tangent ----------------------------------------------


def model_adjoint(layout: ParamLayout, v: np.ndarray, W: DenseTensor) -> np.ndarray:
    """J^T W: trasposta della derivata della ricostruzione applicata a un tensore W.

    CP: blocco n = MTTKRP(W, fattori, n). Tucker: G <- W x_k A_k^T su tutti i modi,
    A_n <- (W x_{k != n} A_k^T)_(n) G_(n)^T.
    """
    core, factors = layout.split(v)
    if core is None:
        return layout.join(None, [mttkrp(W, factors, n) for n in range(len(factors))])
    G = DenseTensor(core)
    grad_core = multi_ttm(W, factors, transpose=True)
    grads = []
    for n in range(len(factors)):
        partial = multi_ttm(W, factors, skip=n, transpose=True)
        grads.append(matricize(partial, n) @ matricize(G, n).T)
    return layout.join(grad_core.data, grads)


def model_tangent(layout: ParamLayout, v: np.ndarray, w: np.ndarray) -> DenseTensor:
    """Derivata direzionale della ricostruzione: somma dei modelli con un blocco sostituito."""
    core, factors = layout.split(v)
    dcore, dfactors = layout.split(w)
    terms: list[DenseTensor] = []
    if core is None:
        for n in range(len(factors)):
            replaced = list(factors)
            replaced[n] = dfactors[n]
            terms.append(reconstruct(KruskalModel(tuple(replaced))))
    else:
        assert dcore is not None
        terms.append(multi_ttm(DenseTensor(dcore), factors))
        G = DenseTensor(core)
        for n in range(len(factors)):
            replaced = list(factors)
            replaced[n] = dfactors[n]
            terms.append(multi_ttm(G, replaced))
    total = terms[0].data.copy()
    for term in terms[1:]:
        total += term.data
    return DenseTensor(total)


# --- weights and problem -------------------------------------------------------------


@dataclass(frozen=True)
class WeightSelection:
    """Pesi scelti al punto iniziale.

    Attributes:
        weights: (alpha_0, alpha_1, ..., alpha_Q) per le QoI tenute.
        kept: QoI che restano nell'obiettivo.
        dropped: Nomi delle QoI escluse perché già preservate.
        frobenius_initial: ||X~ - M~0||^2.
        qoi_initial: Somma dei residui al quadrato per QoI tenuta.
    """

    weights: tuple[float, ...]
    kept: tuple[QoIDefinition, ...]
    dropped: tuple[str, ...]
    frobenius_initial: float
    qoi_initial: tuple[float, ...]

    @property
    def lower_bound(self) -> float:
        return 1.0 / len(self.weights)


def _unscaled_values(qdef: QoIDefinition, M_scaled: DenseTensor, scaling: ScalingInfo) -> np.ndarray:
    return qdef.values(unscale_model_slice(M_scaled, scaling))


def choose_weights(
    X_scaled: DenseTensor,
    M0: Model | DenseTensor,
    qois: Sequence[QoIDefinition],
    scaling: ScalingInfo,
) -> WeightSelection:
    """alpha_0 = 1/((Q+1) f0), alpha_q = 1/((Q+1) G_q0): ogni termine vale 1/(Q+1) in M~0.

    Le QoI con residuo iniziale < 1e-30 vengono escluse (già preservate) e Q conta
    solo quelle tenute.

    Raises:
        NumericError: Se M~0 riproduce X~ esattamente (termine di Frobenius nullo).
    """
    M0_full = M0 if isinstance(M0, DenseTensor) else reconstruct(M0)
    if M0_full.dims != X_scaled.dims:
        raise DimensionError(f"Initial model dims {M0_full.dims} differ from data {X_scaled.dims}")
    frob = frob_norm(DenseTensor(X_scaled.data - M0_full.data)) ** 2
    if frob < RESIDUAL_FLOOR:
        raise NumericError("Initial model reproduces the data exactly; weights are undefined")

    kept: list[QoIDefinition] = []
    sse: list[float] = []
    dropped: list[str] = []
    for qdef in qois:
        diff = _unscaled_values(qdef, X_scaled, scaling) - _unscaled_values(qdef, M0_full, scaling)
        value = float(diff @ diff)
        if value < RESIDUAL_FLOOR:
            logger.warning(f"QoI '{qdef.name}' is already preserved by the initial model; dropping it")
            dropped.append(qdef.name)
            continue
        kept.append(qdef)
        sse.append(value)

    terms = len(kept) + 1
    weights = (1.0 / (terms * frob),) + tuple(1.0 / (terms * s) for s in sse)
    logger.info(f"Weights: {', '.join(f'{a:.4g}' for a in weights)} (dropped {len(dropped)} QoIs)")
    return WeightSelection(
        weights=weights,
        kept=tuple(kept),
        dropped=tuple(dropped),
        frobenius_initial=frob,
        qoi_initial=tuple(sse),
    )


@dataclass(frozen=True)
class ObjectiveTerms:
    """Termini non pesati dell'obiettivo in un punto."""

    frobenius: float
    qoi: tuple[float, ...]


@dataclass
class _Linearization:
    point: np.ndarray
    scaled_Z: tuple[np.ndarray, ...]


@dataclass(eq=False)
class GoalProblem:
    """Obiettivo goal-oriented assemblato.

    Attributes:
        X_scaled: Dato scalato X~.
        scaling: Informazioni di scala.
        qois: QoI nell'obiettivo (Q).
        weights: alpha_0, ..., alpha_Q.
        layout: Layout del vettore parametri.
    """

    X_scaled: DenseTensor
    scaling: ScalingInfo
    qois: tuple[QoIDefinition, ...]
    weights: tuple[float, ...]
    layout: ParamLayout
    targets: tuple[np.ndarray, ...] = field(init=False)
    times: tuple[tuple[int, ...], ...] = field(init=False)
    _cache: _Linearization | None = field(init=False, default=None, repr=False)
    _fixed_Z: dict[int, np.ndarray] = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        """Valida pesi e dimensioni, poi memorizza g_q(S(X~_t))."""
        if len(self.weights) != len(self.qois) + 1:
            raise ValueError(f"Expected {len(self.qois) + 1} weights, got {len(self.weights)}")
        if any(not a > 0 for a in self.weights):
            raise ValueError("Every weight must be positive")
        if self.layout.dims != self.X_scaled.dims:
            raise DimensionError(f"Layout dims {self.layout.dims} differ from data {self.X_scaled.dims}")
        _check_variable_mode(self.X_scaled, self.scaling)
        self.times = tuple(q.resolve_times(self.X_scaled) for q in self.qois)
        self.targets = tuple(_unscaled_values(q, self.X_scaled, self.scaling) for q in self.qois)
        X = unscale_model_slice(self.X_scaled, self.scaling)
        self._fixed_Z = {
            i: chain_scale_Z(q.derivative(X), self.scaling).data
            for i, q in enumerate(self.qois)
            if q.linear
        }

    @classmethod
    def from_selection(
        cls,
        X_scaled: DenseTensor,
        scaling: ScalingInfo,
        selection: WeightSelection,
        layout: ParamLayout,
    ) -> GoalProblem:
        return cls(X_scaled, scaling, selection.kept, selection.weights, layout)

    @property
    def lower_bound(self) -> float:
        return 1.0 / len(self.weights)

    def reconstruct(self, v: np.ndarray) -> DenseTensor:
        return reconstruct(self.layout.unpack(v))

    def residuals(self, M_scaled: DenseTensor) -> tuple[np.ndarray, ...]:
        """F_q = g_q(S(X~_t)) - g_q(S(M~_t)), uno per QoI."""
        M = unscale_model_slice(M_scaled, self.scaling)
        return tuple(target - q.values(M) for q, target in zip(self.qois, self.targets, strict=True))

    def _scaled_derivatives(self, M_scaled: DenseTensor) -> tuple[np.ndarray, ...]:
        """sigma Z_q in M~; le QoI lineari riusano Z calcolato una volta in __post_init__."""
        if len(self._fixed_Z) == len(self.qois):
            return tuple(self._fixed_Z[i] for i in range(len(self.qois)))
        M = unscale_model_slice(M_scaled, self.scaling)
        return tuple(
            self._fixed_Z[i]
            if q.linear
            else chain_scale_Z(q.derivative(M), self.scaling).data
            for i, q in enumerate(self.qois)
        )

    def linearization(self, v: np.ndarray) -> tuple[np.ndarray, ...]:
        """sigma Z_q nel punto v, con cache a un solo elemento."""
        cached = self._cache
        if cached is not None and np.array_equal(cached.point, v):
            return cached.scaled_Z
        scaled_Z = self._scaled_derivatives(self.reconstruct(v))
        self._cache = _Linearization(point=np.array(v, copy=True), scaled_Z=scaled_Z)
        return scaled_Z


def _time_weights(values: np.ndarray, times: tuple[int, ...], tau: int) -> np.ndarray:
    full = np.zeros(tau)
    full[list(times)] = values
    return full


def objective_terms(problem: GoalProblem, v: np.ndarray) -> ObjectiveTerms:
    """Termine di Frobenius e somme dei residui QoI, non pesati."""
    M = problem.reconstruct(v)
    frob = float(np.sum((problem.X_scaled.data - M.data) ** 2))
    qoi = tuple(float(F @ F) for F in problem.residuals(M))
    return ObjectiveTerms(frobenius=frob, qoi=qoi)


def objective(problem: GoalProblem, v: np.ndarray) -> float:
    """f_go(v); la ricostruzione è calcolata una sola volta.

    Raises:
        DimensionError: Vettore non conforme al layout.
        NumericError: Valore non finito.
    """
    terms = objective_terms(problem, v)
    alpha = problem.weights
    value = alpha[0] * terms.frobenius + sum(a * g for a, g in zip(alpha[1:], terms.qoi, strict=True))
    if not math.isfinite(value):
        raise NumericError("Goal-oriented objective is not finite")
    return float(value)


def gradient(problem: GoalProblem, v: np.ndarray) -> np.ndarray:
    """Gradiente analitico di f_go.

    Tensore combinato W = -2 alpha_0 (X~ - M~) - sum_q 2 alpha_q F_{q,t} sigma Z_{q,t},
    proiettato una volta con l'aggiunto della ricostruzione.
    """
    M = problem.reconstruct(v)
    alpha = problem.weights
    W = -2.0 * alpha[0] * (problem.X_scaled.data - M.data)
    tau = M.dims[-1]
    residuals = problem.residuals(M)
    scaled_Z = problem.linearization(v) if problem.qois else ()
    for a, F, times, Z in zip(alpha[1:], residuals, problem.times, scaled_Z, strict=True):
        W -= 2.0 * a * Z * _time_weights(F, times, tau)
    return model_adjoint(problem.layout, v, DenseTensor(W))


def gn_hess_vec(problem: GoalProblem, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Prodotto Gauss-Newton H w = 2 J^T J w per tutti i residui impilati.

    Con D = J_M w (tangente della ricostruzione):
    W = 2 alpha_0 D + sum_q 2 alpha_q sum_t <sigma Z_{q,t}, D_t> sigma Z_{q,t}, poi J_M^T W.

    Raises:
        NumericError: Risultato con NaN o infiniti.
    """
    D = model_tangent(problem.layout, v, w)
    alpha = problem.weights
    W = 2.0 * alpha[0] * D.data
    if problem.qois:
        spatial = tuple(range(D.ndims - 1))
        for a, Z in zip(alpha[1:], problem.linearization(v), strict=True):
            coupling = np.sum(Z * D.data, axis=spatial)
            W = W + 2.0 * a * Z * coupling
    result = model_adjoint(problem.layout, v, DenseTensor(W))
    if not np.all(np.isfinite(result)):
        raise NumericError("Gauss-Newton Hessian-vector product produced non-finite values")
    return result


# --- preconditioners -----------------------------------------------------------------


class Preconditioner(ABC):
    """Inversa approssimata dei blocchi Gauss-Newton del termine di Frobenius."""

    def __init__(self, layout: ParamLayout):
        self.layout = layout

    @abstractmethod
    def apply(self, r: np.ndarray) -> np.ndarray:
        """M^{-1} r."""


class CpBlockPreconditioner(Preconditioner):
    """Blocchi (hadamard delle Gram) (x) I per ogni modo, fattorizzati con Cholesky."""

    def __init__(self, layout: ParamLayout, factors: Sequence[np.ndarray]):
        super().__init__(layout)
        self.blocks = []
        for n in range(len(factors)):
            gram = hadamard_gram(factors, skip=n)
            ridge = PRECOND_RIDGE * max(float(np.trace(gram)), np.finfo(float).tiny)
            try:
                self.blocks.append(scipy.linalg.cho_factor(gram))
            except np.linalg.LinAlgError:
                logger.debug(f"Preconditioner block {n} singular; adding ridge {ridge:.3g}")
                self.blocks.append(scipy.linalg.cho_factor(gram + ridge * np.eye(gram.shape[0])))

    def apply(self, r: np.ndarray) -> np.ndarray:
        _, parts = self.layout.split(r)
        solved = [scipy.linalg.cho_solve(c, R.T).T for c, R in zip(self.blocks, parts, strict=True)]
        return self.layout.join(None, solved)


class DiagonalPreconditioner(Preconditioner):
    """Divisione per la diagonale del blocco di Frobenius (Tucker)."""

    def __init__(self, layout: ParamLayout, diagonal: np.ndarray):
        super().__init__(layout)
        self.diagonal = np.maximum(diagonal, DIAG_FLOOR)

    def apply(self, r: np.ndarray) -> np.ndarray:
        return np.asarray(r) / self.diagonal


def tucker_frobenius_diagonal(layout: ParamLayout, v: np.ndarray) -> np.ndarray:
    """Diagonale di J_M^T J_M per Tucker.

    Core: prodotto esterno delle norme al quadrato delle colonne dei fattori.
    Fattore n, voce (i, r): [G_(n) (kron delle Gram) G_(n)^T]_{rr}, uguale per ogni i.
    """
    core, factors = layout.split(v)
    assert core is not None
    norms = [np.sum(A**2, axis=0) for A in factors]
    diag_core = norms[0]
    for nk in norms[1:]:
        diag_core = np.multiply.outer(diag_core, nk)
    grams = [A.T @ A for A in factors]
    G = DenseTensor(core)
    parts = []
    for n, A in enumerate(factors):
        weighted = G
        for k, gram in enumerate(grams):
            if k != n:
                weighted = ttm(weighted, gram, k)
        block = np.sum(matricize(G, n) * matricize(weighted, n), axis=1)
        parts.append(np.broadcast_to(block, A.shape))
    return layout.join(np.asarray(diag_core), parts)


def precond_build(problem: GoalProblem, v: np.ndarray) -> Preconditioner:
    """Precondizionatore nel punto v (solo termine di Frobenius, non pesato)."""
    layout = problem.layout
    if layout.kind == "cp":
        _, factors = layout.split(v)
        return CpBlockPreconditioner(layout, factors)
    return DiagonalPreconditioner(layout, tucker_frobenius_diagonal(layout, v))


def precond_apply(P: Preconditioner, r: np.ndarray) -> np.ndarray:
    return P.apply(r)
