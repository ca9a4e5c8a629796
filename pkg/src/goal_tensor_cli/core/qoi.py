"""Quantity-of-interest definitions for time-dependent simulation tensors.

Una QoI è un funzionale scalare g_q valutato su ogni fetta temporale X_t (l'ultimo
modo è il tempo) per t in un insieme T_q. Il tensore derivata Z ha la stessa forma
del dato, con zeri fuori da (variabili usate, T_q).
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from goal_tensor_cli.core.errors import QoIError
from goal_tensor_cli.core.models import DenseTensor, DisplayTransform
from goal_tensor_cli.core.tensor import time_slice

logger = logging.getLogger(__name__)

ValuesFn = Callable[[DenseTensor, tuple[int, ...]], np.ndarray]
DerivativeFn = Callable[[DenseTensor, tuple[int, ...]], DenseTensor]


@dataclass(frozen=True)
class QoIDefinition:
    """Funzionale g_q con il suo insieme di tempi e la derivata.

    Attributes:
        name: Nome riportato nei risultati.
        values_fn: (X, tempi) -> vettore g(X_t) per ciascun tempo.
        derivative_fn: (X, tempi) -> tensore Z di forma X.dims, nullo fuori dai tempi.
        time_set: Indici temporali (0-based); None significa tutti.
        display: Trasformazione per i report ("sqrt" per il momento).
        linear: True se Z non dipende dai valori di X.
    """

    name: str
    values_fn: ValuesFn
    derivative_fn: DerivativeFn
    time_set: tuple[int, ...] | None = None
    display: DisplayTransform = "identity"
    linear: bool = False

    def resolve_times(self, X: DenseTensor) -> tuple[int, ...]:
        """Tempi effettivi per X, ordinati e validati.

        Raises:
            QoIError: Tensore senza modo temporale o indice fuori intervallo.
        """
        if X.ndims < 2:
            raise QoIError(f"QoI '{self.name}' needs a tensor with a time mode")
        tau = X.dims[-1]
        if self.time_set is None:
            return tuple(range(tau))
        times = tuple(sorted(set(self.time_set)))
        if not times:
            raise QoIError(f"QoI '{self.name}' has an empty time set")
        if times[0] < 0 or times[-1] >= tau:
            raise QoIError(f"QoI '{self.name}': time index out of range [0, {tau})")
        return times

    def values(self, X: DenseTensor) -> np.ndarray:
        """Traiettoria g(X_t) per t nei tempi della QoI."""
        return np.asarray(self.values_fn(X, self.resolve_times(X)), dtype=np.float64)

    def derivative(self, X: DenseTensor) -> DenseTensor:
        """Tensore derivata Z a forma piena."""
        return self.derivative_fn(X, self.resolve_times(X))

    def evaluate(self, X: DenseTensor, t: int) -> float:
        """g(X_t) per un singolo tempo."""
        self._check_time(X, t)
        return float(self.values_fn(X, (t,))[0])

    def derivative_at(self, X: DenseTensor, t: int) -> DenseTensor:
        """Z_t: derivata rispetto alla fetta X_t, di forma X.dims[:-1]."""
        self._check_time(X, t)
        return time_slice(self.derivative_fn(X, (t,)), t)

    def _check_time(self, X: DenseTensor, t: int) -> None:
        if t not in self.resolve_times(X):
            raise QoIError(f"Time {t} is not in the time set of QoI '{self.name}'")


def _check_variables(X: DenseTensor, variable_mode: int, indices: Sequence[int], name: str) -> None:
    if not 0 <= variable_mode < X.ndims - 1:
        raise QoIError(
            f"QoI '{name}': variable mode {variable_mode} must precede the time mode of a "
            f"{X.ndims}-way tensor"
        )
    n_vars = X.dims[variable_mode]
    for v in indices:
        if not 0 <= v < n_vars:
            raise QoIError(f"QoI '{name}': variable {v} out of range [0, {n_vars})")


def _slot(ndims: int, variable_mode: int, v: int, times: Sequence[int]) -> tuple[object, ...]:
    """Indice (variabile v tenuta come asse di lunghezza 1, tempi come lista)."""
    index: list[object] = [slice(None)] * ndims
    index[variable_mode] = slice(v, v + 1)
    index[-1] = list(times)
    return tuple(index)


def _spatial_sum(values: np.ndarray) -> np.ndarray:
    return values.sum(axis=tuple(range(values.ndim - 1)))


def qoi_variable_sum(
    var_indices: Sequence[int],
    coefficient: float = 1.0,
    *,
    name: str = "mass",
    time_set: Sequence[int] | None = None,
    variable_mode: int = 0,
    display: DisplayTransform = "identity",
) -> QoIDefinition:
    """Somma pesata di un gruppo di variabili su tutto il dominio (massa, densità).

    g(X_t) = coefficient * somma_{spazio} somma_{v in var_indices} X[..., v, ..., t].

    Raises:
        QoIError: Lista di variabili vuota.
    """
    variables = tuple(int(v) for v in var_indices)
    if not variables:
        raise QoIError(f"QoI '{name}' needs at least one variable")
    coeff = float(coefficient)

    def values(X: DenseTensor, times: tuple[int, ...]) -> np.ndarray:
        _check_variables(X, variable_mode, variables, name)
        block = X.data.take(list(variables), axis=variable_mode)[..., list(times)]
        return coeff * _spatial_sum(block)

    def derivative(X: DenseTensor, times: tuple[int, ...]) -> DenseTensor:
        _check_variables(X, variable_mode, variables, name)
        Z = np.zeros(X.dims, order="F")
        for v in variables:
            Z[_slot(X.ndims, variable_mode, v, times)] += coeff
        return DenseTensor(Z)

    return QoIDefinition(
        name=name,
        values_fn=values,
        derivative_fn=derivative,
        time_set=None if time_set is None else tuple(time_set),
        display=display,
        linear=True,
    )


def qoi_kinetic_energy(
    density_vars: Sequence[int],
    ux_var: int,
    uy_var: int,
    *,
    name: str = "kinetic_energy",
    time_set: Sequence[int] | None = None,
    variable_mode: int = 0,
    display: DisplayTransform = "identity",
) -> QoIDefinition:
    """Energia cinetica a somma: g(X_t) = somma_{spazio} D (U_x^2 + U_y^2).

    D è la somma delle variabili di densità; U_x e U_y sono le componenti di velocità.

    Raises:
        QoIError: Densità vuota, velocità ripetute o sovrapposte alla densità.
    """
    density = tuple(int(v) for v in density_vars)
    ux, uy = int(ux_var), int(uy_var)
    if not density:
        raise QoIError(f"QoI '{name}' needs at least one density variable")
    if ux == uy:
        raise QoIError(f"QoI '{name}': velocity components must be distinct variables")
    if ux in density or uy in density:
        raise QoIError(f"QoI '{name}': velocity variables overlap the density set")

    def fields(X: DenseTensor, times: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        _check_variables(X, variable_mode, density + (ux, uy), name)
        t = list(times)
        D = X.data.take(list(density), axis=variable_mode).sum(axis=variable_mode, keepdims=True)
        U = X.data.take([ux], axis=variable_mode)
        V = X.data.take([uy], axis=variable_mode)
        return D[..., t], U[..., t], V[..., t]

    def values(X: DenseTensor, times: tuple[int, ...]) -> np.ndarray:
        D, U, V = fields(X, times)
        return _spatial_sum(D * (U**2 + V**2))

    def derivative(X: DenseTensor, times: tuple[int, ...]) -> DenseTensor:
        D, U, V = fields(X, times)
        Z = np.zeros(X.dims, order="F")
        speed_sq = U**2 + V**2
        for v in density:
            Z[_slot(X.ndims, variable_mode, v, times)] += speed_sq
        Z[_slot(X.ndims, variable_mode, ux, times)] = 2.0 * D * U
        Z[_slot(X.ndims, variable_mode, uy, times)] = 2.0 * D * V
        return DenseTensor(Z)

    return QoIDefinition(
        name=name,
        values_fn=values,
        derivative_fn=derivative,
        time_set=None if time_set is None else tuple(time_set),
        display=display,
    )


def qoi_residual_sq(qdef: QoIDefinition, X: DenseTensor, M_recon: DenseTensor) -> float:
    """Somma su T_q di (g(X_t) - g(M_t))^2.

    Raises:
        QoIError: Se le dimensioni differiscono.
    """
    if X.dims != M_recon.dims:
        raise QoIError(f"Cannot compare QoI '{qdef.name}' on dims {X.dims} and {M_recon.dims}")
    diff = qdef.values(X) - qdef.values(M_recon)
    return float(diff @ diff)


def qoi_relative_error(reference: np.ndarray, approx: np.ndarray) -> float:
    """Errore relativo di traiettoria: somma (g_X - g_M)^2 / somma g_X^2.

    Con traiettoria di riferimento nulla restituisce la somma dei quadrati non normalizzata.
    """
    reference = np.asarray(reference, dtype=np.float64)
    diff = reference - np.asarray(approx, dtype=np.float64)
    sse = float(diff @ diff)
    denom = float(reference @ reference)
    if denom == 0.0:
        logger.warning("QoI trajectory of the data is identically zero; reporting absolute error")
        return sse
    return sse / denom
