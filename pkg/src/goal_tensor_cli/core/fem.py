"""Finite-element QoIs on hexahedral meshes with trilinear basis.

Il dato ha layout (x, y, z, variabile, tempo). Ogni elemento ha 8 nodi in ordine
tensoriale con x più veloce (nodo locale n = nx + 2 ny + 4 nz), coerente con
A = A1 (x) A1 (x) A1 e con i punti di Gauss +-1/sqrt(3) nello stesso ordine.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from goal_tensor_cli.core.errors import DensityError, MeshError, QoIError
from goal_tensor_cli.core.models import DenseTensor, DisplayTransform
from goal_tensor_cli.core.qoi import QoIDefinition

logger = logging.getLogger(__name__)

RHO_MIN = 1e-12
FE_ORDER = 5

# (E, Q, n_vars, n_times) -> (f: (E, Q, n_times), df/du: (E, Q, n_vars, n_times))
IntegrandFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True, eq=False)
class HexMesh:
    """Mesh di esaedri trilineari.

    Attributes:
        coords: Coordinate nodali, shape (N, 3).
        elements: Connettività, shape (E, 8), indici di nodo 0-based.
        tensor_index: Indici spaziali (i1, i2, i3) del nodo nel tensore, shape (N, 3).
    """

    coords: np.ndarray
    elements: np.ndarray
    tensor_index: np.ndarray

    def __post_init__(self) -> None:
        """Verifica forme, intervalli e iniettività di tensor_index."""
        coords = np.asarray(self.coords, dtype=np.float64)
        elements = np.asarray(self.elements, dtype=np.int64)
        tensor_index = np.asarray(self.tensor_index, dtype=np.int64)
        if coords.ndim != 2 or coords.shape[1] != 3 or coords.shape[0] == 0:
            raise MeshError(f"Node coordinates must have shape (N, 3), got {coords.shape}")
        if elements.ndim != 2 or elements.shape[1] != 8 or elements.shape[0] == 0:
            raise MeshError(f"Connectivity must have shape (E, 8), got {elements.shape}")
        if tensor_index.shape != coords.shape:
            raise MeshError("Every node needs exactly three tensor indices")
        bad = np.flatnonzero(np.any((elements < 0) | (elements >= coords.shape[0]), axis=1))
        if bad.size:
            raise MeshError("references a node out of range", element=int(bad[0]))
        if np.any(tensor_index < 0):
            raise MeshError("Tensor indices must be non-negative")
        if np.unique(tensor_index, axis=0).shape[0] != tensor_index.shape[0]:
            raise MeshError("Two nodes map to the same tensor position")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "tensor_index", tensor_index)

    @property
    def n_nodes(self) -> int:
        return int(self.coords.shape[0])

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    def check_spatial_dims(self, spatial_dims: Sequence[int]) -> None:
        """Verifica che ogni nodo cada dentro le dimensioni spaziali del tensore.

        Raises:
            MeshError: Se un indice tensoriale eccede le dimensioni.
        """
        limits = np.asarray(tuple(spatial_dims), dtype=np.int64)
        if limits.shape != (3,):
            raise MeshError(f"Finite-element data needs 3 spatial modes, got {tuple(spatial_dims)}")
        outside = np.flatnonzero(np.any(self.tensor_index >= limits, axis=1))
        if outside.size:
            raise MeshError(
                f"Node {int(outside[0])} has tensor index {tuple(self.tensor_index[outside[0]])} "
                f"outside spatial dims {tuple(limits)}"
            )


def structured_hex_mesh(
    shape: Sequence[int],
    spacing: Sequence[float] = (1.0, 1.0, 1.0),
    origin: Sequence[float] = (0.0, 0.0, 0.0),
) -> HexMesh:
    """Mesh strutturata di (n_x-1)(n_y-1)(n_z-1) esaedri su una griglia di nodi.

    Args:
        shape: Numero di nodi per direzione (>= 2 ciascuno).
        spacing: Passo h_x, h_y, h_z.
        origin: Coordinate del nodo (0, 0, 0).

    Raises:
        MeshError: Forma non valida o passo non positivo.
    """
    nx, ny, nz = (int(n) for n in shape)
    if min(nx, ny, nz) < 2:
        raise MeshError(f"A structured mesh needs >= 2 nodes per direction, got {(nx, ny, nz)}")
    h = np.asarray(spacing, dtype=np.float64)
    if h.shape != (3,) or np.any(h <= 0):
        raise MeshError(f"Spacing must be three positive numbers, got {tuple(spacing)}")

    # nodi enumerati con x più veloce
    ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    tensor_index = np.stack([a.ravel(order="F") for a in (ix, iy, iz)], axis=1)
    coords = np.asarray(origin, dtype=np.float64) + tensor_index * h

    node = np.arange(nx * ny * nz).reshape((nx, ny, nz), order="F")
    corners = [
        node[cx : nx - 1 + cx, cy : ny - 1 + cy, cz : nz - 1 + cz].ravel(order="F")
        for cz in (0, 1)
        for cy in (0, 1)
        for cx in (0, 1)
    ]
    elements = np.stack(corners, axis=1)
    return HexMesh(coords=coords, elements=elements, tensor_index=tensor_index)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Regola di quadratura su elemento di riferimento [-1, 1]^3.

    Attributes:
        interpolation: Matrice A (N_qp x N_n), valori delle funzioni di forma nei punti.
        weights: Pesi w (N_qp).
        points: Punti di quadratura, shape (N_qp, 3).
        gradients: Derivate delle funzioni di forma nei punti, shape (N_qp, N_n, 3).
    """

    interpolation: np.ndarray
    weights: np.ndarray
    points: np.ndarray
    gradients: np.ndarray

    def det_jac(self, element_coords: np.ndarray) -> np.ndarray:
        """Determinante dello Jacobiano in ogni punto di quadratura.

        Args:
            element_coords: Coordinate nodali per elemento, shape (E, N_n, 3).

        Returns:
            Array (E, N_qp).
        """
        jac = np.einsum("qnk,enj->eqjk", self.gradients, element_coords)
        return np.linalg.det(jac)


def _trilinear_shape(points: np.ndarray, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Funzioni di forma trilineari e loro gradienti, valutati nei punti dati."""
    # factors[q, n, k] = (1 + s_nk xi_qk) / 2
    factors = 0.5 * (1.0 + points[:, None, :] * nodes[None, :, :])
    values = factors.prod(axis=2)
    gradients = np.empty(factors.shape)
    for k in range(3):
        others = [j for j in range(3) if j != k]
        gradients[:, :, k] = 0.5 * nodes[None, :, k] * factors[:, :, others].prod(axis=2)
    return values, gradients


def trilinear_rule() -> QuadratureRule:
    """Base trilineare con quadratura di Gauss a 2 punti per direzione (8 punti, pesi 1)."""
    signs = np.array([[(n >> k) & 1 for k in range(3)] for n in range(8)], dtype=np.float64)
    nodes = 2.0 * signs - 1.0
    points = nodes / math.sqrt(3.0)
    a, b = 0.5 * (1.0 + 1.0 / math.sqrt(3.0)), 0.5 * (1.0 - 1.0 / math.sqrt(3.0))
    A1 = np.array([[a, b], [b, a]])
    interpolation = np.kron(np.kron(A1, A1), A1)
    _, gradients = _trilinear_shape(points, nodes)
    return QuadratureRule(
        interpolation=interpolation, weights=np.ones(8), points=points, gradients=gradients
    )


@dataclass(frozen=True)
class Integrand:
    """Integrando f(u) puntuale con la sua derivata.

    Attributes:
        name: Nome breve.
        n_vars: Numero di variabili attese, nell'ordine documentato dall'integrando.
        fn: Funzione vettorizzata che restituisce (f, df/du).
        linear: True se df/du non dipende da u.
    """

    name: str
    n_vars: int
    fn: IntegrandFn = field(repr=False)
    linear: bool = False


def _constant(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    shape = u.shape[:2] + u.shape[3:]
    return np.ones(shape), np.zeros(u.shape)


def _linear(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return u[:, :, 0, :].copy(), np.ones(u.shape)


def _kinetic(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rho, m = u[:, :, 0, :], u[:, :, 1:4, :]
    if np.any(rho <= RHO_MIN):
        raise DensityError(
            f"Density at a quadrature point is <= {RHO_MIN:g}; kinetic energy undefined"
        )
    m_sq = (m**2).sum(axis=2)
    df = np.empty(u.shape)
    df[:, :, 0, :] = -m_sq / (2.0 * rho**2)
    df[:, :, 1:4, :] = m / rho[:, :, None, :]
    return m_sq / (2.0 * rho), df


def _momentum(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return (u**2).sum(axis=2), 2.0 * u


def magnetic_energy(mu0: float = 1.0) -> Integrand:
    """ME: ||B||^2 / (2 mu0), variabili (B_x, B_y, B_z)."""
    if mu0 <= 0:
        raise QoIError("mu0 must be positive")

    def fn(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (u**2).sum(axis=2) / (2.0 * mu0), u / mu0

    return Integrand(name="magnetic_energy", n_vars=3, fn=fn)


def total_energy(mu0: float = 1.0) -> Integrand:
    """TE = IE + KE + ME, variabili (rho e, rho, m_x, m_y, m_z, B_x, B_y, B_z)."""
    magnetic = magnetic_energy(mu0)

    def fn(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        f_ie, df_ie = _linear(u[:, :, 0:1, :])
        f_ke, df_ke = _kinetic(u[:, :, 1:5, :])
        f_me, df_me = magnetic.fn(u[:, :, 5:8, :])
        return f_ie + f_ke + f_me, np.concatenate([df_ie, df_ke, df_me], axis=2)

    return Integrand(name="total_energy", n_vars=8, fn=fn)


CONSTANT = Integrand(name="constant", n_vars=0, fn=_constant, linear=True)
INTERNAL_ENERGY = Integrand(name="internal_energy", n_vars=1, fn=_linear, linear=True)
KINETIC_ENERGY = Integrand(name="kinetic_energy", n_vars=4, fn=_kinetic)
MOMENTUM = Integrand(name="momentum", n_vars=3, fn=_momentum)


def integrand_for(kind: str, mu0: float = 1.0) -> Integrand:
    """Integrando predefinito per un tipo di QoI "fe-*".

    Raises:
        QoIError: Tipo sconosciuto.
    """
    table: dict[str, Callable[[], Integrand]] = {
        "fe-constant": lambda: CONSTANT,
        "fe-internal-energy": lambda: INTERNAL_ENERGY,
        "fe-kinetic-energy": lambda: KINETIC_ENERGY,
        "fe-magnetic-energy": lambda: magnetic_energy(mu0),
        "fe-momentum": lambda: MOMENTUM,
        "fe-total-energy": lambda: total_energy(mu0),
    }
    if kind not in table:
        raise QoIError(f"Unknown finite-element QoI kind '{kind}'")
    return table[kind]()


def element_det_jac(mesh: HexMesh, rule: QuadratureRule) -> np.ndarray:
    """det J per elemento e punto, shape (E, N_qp).

    Raises:
        MeshError: Primo elemento con det J <= 0.
    """
    det = rule.det_jac(mesh.coords[mesh.elements])
    bad = np.flatnonzero(np.any(det <= 0.0, axis=1))
    if bad.size:
        raise MeshError("non-invertible element map (det J <= 0)", element=int(bad[0]))
    return det


def _check_fe_inputs(X: DenseTensor, mesh: HexMesh, integrand: Integrand, variables: Sequence[int]) -> None:
    if X.ndims != FE_ORDER:
        raise QoIError(
            f"Finite-element QoIs need a (x, y, z, variable, time) tensor, got {X.ndims} modes"
        )
    mesh.check_spatial_dims(X.dims[:3])
    if len(variables) != integrand.n_vars:
        raise QoIError(
            f"Integrand '{integrand.name}' needs {integrand.n_vars} variables, got {len(variables)}"
        )
    if len(set(variables)) != len(variables):
        raise QoIError(f"Integrand '{integrand.name}' got repeated variables {tuple(variables)}")
    for v in variables:
        if not 0 <= v < X.dims[3]:
            raise QoIError(f"Variable {v} out of range [0, {X.dims[3]})")


def fe_qoi_eval(
    X: DenseTensor,
    integrand: Integrand,
    mesh: HexMesh,
    rule: QuadratureRule,
    variables: Sequence[int],
    times: Sequence[int],
    det_jac: np.ndarray | None = None,
) -> tuple[np.ndarray, DenseTensor]:
    """Valuta una QoI integrale e il suo tensore derivata.

    Per ogni elemento raccoglie i valori nodali, li interpola nei punti di quadratura
    (V = A U), accumula g += sum_k w_k b_k f_k e distribuisce
    Z += sum_l w_l b_l a_lk df_l sui nodi. Tutti gli elementi sono trattati insieme;
    l'accumulo sui nodi condivisi usa ``np.add.at`` in ordine di elemento.

    Args:
        X: Dato (x, y, z, variabile, tempo).
        integrand: f(u) e df/du.
        mesh: Mesh compatibile con le dimensioni spaziali.
        rule: Regola di quadratura.
        variables: Indici di variabile, nell'ordine atteso dall'integrando.
        times: Indici temporali.
        det_jac: det J precalcolato (E, N_qp); calcolato se assente.

    Returns:
        (g per tempo, Z con zeri fuori da variabili/tempi).

    Raises:
        QoIError: Layout, variabili o integrando non validi.
        MeshError: Mesh incompatibile o elemento degenere.
    """
    variables = [int(v) for v in variables]
    times = [int(t) for t in times]
    _check_fe_inputs(X, mesh, integrand, variables)
    if det_jac is None:
        det_jac = element_det_jac(mesh, rule)

    ti = mesh.tensor_index
    node_idx = (
        ti[:, 0][:, None, None],
        ti[:, 1][:, None, None],
        ti[:, 2][:, None, None],
        np.asarray(variables, dtype=np.int64)[None, :, None],
        np.asarray(times, dtype=np.int64)[None, None, :],
    )
    nodal = X.data[node_idx]
    U = nodal[mesh.elements]
    V = np.einsum("qn,envt->eqvt", rule.interpolation, U)
    f, df = integrand.fn(V)

    wb = rule.weights[None, :] * det_jac
    g = np.einsum("eq,eqt->t", wb, f)

    dZ = np.einsum("eq,qn,eqvt->envt", wb, rule.interpolation, df)
    nodal_Z = np.zeros(nodal.shape)
    np.add.at(nodal_Z, mesh.elements, dZ)
    Z = np.zeros(X.dims, order="F")
    Z[node_idx] = nodal_Z
    return g, DenseTensor(Z)


def qoi_finite_element(
    integrand: Integrand,
    mesh: HexMesh,
    variables: Sequence[int],
    *,
    name: str | None = None,
    time_set: Sequence[int] | None = None,
    rule: QuadratureRule | None = None,
    display: DisplayTransform = "identity",
) -> QoIDefinition:
    """QoIDefinition integrale su mesh esaedrica.

    Raises:
        MeshError: Elemento con det J <= 0.
        QoIError: Numero di variabili diverso da quello richiesto dall'integrando.
    """
    rule = rule or trilinear_rule()
    variables = tuple(int(v) for v in variables)
    if len(variables) != integrand.n_vars:
        raise QoIError(
            f"Integrand '{integrand.name}' needs {integrand.n_vars} variables, got {len(variables)}"
        )
    det_jac = element_det_jac(mesh, rule)
    logger.debug(
        f"FE QoI '{name or integrand.name}': {mesh.n_elements} elements, "
        f"volume={float(det_jac.sum()):.6g}"
    )

    def values(X: DenseTensor, times: tuple[int, ...]) -> np.ndarray:
        g, _ = fe_qoi_eval(X, integrand, mesh, rule, variables, times, det_jac)
        return g

    def derivative(X: DenseTensor, times: tuple[int, ...]) -> DenseTensor:
        _, Z = fe_qoi_eval(X, integrand, mesh, rule, variables, times, det_jac)
        return Z

    return QoIDefinition(
        name=name or integrand.name,
        values_fn=values,
        derivative_fn=derivative,
        time_set=None if time_set is None else tuple(time_set),
        display=display,
        linear=integrand.linear,
    )
