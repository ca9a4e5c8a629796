"""Domain models for Goal Tensor CLI.

Aristotele: Definizioni chiare delle entità numeriche.

Tensori densi, modelli CP/Tucker, configurazioni dei solver e report di esecuzione.
Le matrici fattore sono ``numpy.ndarray`` 2-D in float64; gli indici sono 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

ModelKind = Literal["cp", "tucker"]
ScalingMethod = Literal["mean-std", "none", "max-abs"]
OptimizerName = Literal["tr-newton", "lbfgs"]
DisplayTransform = Literal["identity", "sqrt"]


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Tensore denso d-way di float64, memorizzato column-major (modo 0 più veloce).

    Attributes:
        data: Array numpy con shape (I_1, ..., I_d), Fortran-contiguo.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        """Normalizza dtype/layout e verifica le dimensioni."""
        data = np.asfortranarray(self.data, dtype=np.float64)
        if data.ndim < 1:
            raise ValueError("Tensor must have at least one mode")
        if any(n < 1 for n in data.shape):
            raise ValueError(f"Every dimension must be >= 1, got {data.shape}")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_values(cls, dims: tuple[int, ...] | list[int], values: Any) -> DenseTensor:
        """Costruisce un tensore da dimensioni e valori linearizzati (modo 0 più veloce)."""
        dims = tuple(int(n) for n in dims)
        flat = np.asarray(values, dtype=np.float64).ravel()
        if flat.size != math.prod(dims):
            raise ValueError(f"{flat.size} values do not fill dims {dims}")
        return cls(flat.reshape(dims, order="F"))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(int(n) for n in self.data.shape)

    @property
    def ndims(self) -> int:
        return int(self.data.ndim)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def values(self) -> np.ndarray:
        """Vista piatta dei valori nell'ordine di linearizzazione column-major."""
        return self.data.ravel(order="F")


@dataclass(frozen=True, eq=False)
class KruskalModel:
    """Modello CP rank-R senza pesi: M = [[A_1, ..., A_d]].

    Attributes:
        factors: Matrici fattore, la k-esima di shape (I_k, R).
    """

    factors: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        """Verifica che tutti i fattori abbiano lo stesso numero di colonne."""
        factors = tuple(np.asarray(a, dtype=np.float64) for a in self.factors)
        if not factors:
            raise ValueError("A Kruskal model needs at least one factor")
        if any(a.ndim != 2 for a in factors):
            raise ValueError("Factor matrices must be 2-D")
        ranks = {a.shape[1] for a in factors}
        if len(ranks) != 1 or ranks.pop() < 1:
            raise ValueError("All factors must share the same column count R >= 1")
        object.__setattr__(self, "factors", factors)

    @property
    def rank(self) -> int:
        return int(self.factors[0].shape[1])

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(int(a.shape[0]) for a in self.factors)

    @property
    def ndims(self) -> int:
        return len(self.factors)

    @property
    def parameter_count(self) -> int:
        return self.rank * sum(self.dims)


@dataclass(frozen=True, eq=False)
class TuckerModel:
    """Modello Tucker: M = [[G; A_1, ..., A_d]].

    Attributes:
        core: Tensore core di shape (R_1, ..., R_d).
        factors: Matrici fattore, la k-esima di shape (I_k, R_k).
    """

    core: DenseTensor
    factors: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        """Verifica la coerenza tra core e fattori."""
        factors = tuple(np.asarray(a, dtype=np.float64) for a in self.factors)
        if len(factors) != self.core.ndims:
            raise ValueError(
                f"Core has {self.core.ndims} modes but {len(factors)} factors were given"
            )
        for k, a in enumerate(factors):
            if a.ndim != 2 or a.shape[1] != self.core.dims[k]:
                raise ValueError(f"Factor {k} has shape {a.shape}, core needs {self.core.dims[k]} columns")
        object.__setattr__(self, "factors", factors)

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.core.dims

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(int(a.shape[0]) for a in self.factors)

    @property
    def ndims(self) -> int:
        return len(self.factors)

    @property
    def parameter_count(self) -> int:
        return math.prod(self.ranks) + sum(i * r for i, r in zip(self.dims, self.ranks, strict=True))


@dataclass(frozen=True, eq=False)
class ScalingInfo:
    """Centratura e scala per variabile: X~ = (X - mu(v)) / sigma(v).

    Attributes:
        variable_mode: Indice del modo delle variabili.
        shift: Vettore mu, uno per variabile.
        scale: Vettore sigma (> 0), uno per variabile.
    """

    variable_mode: int
    shift: np.ndarray
    scale: np.ndarray

    def __post_init__(self) -> None:
        """Verifica positività di sigma e coerenza delle lunghezze."""
        shift = np.asarray(self.shift, dtype=np.float64).ravel()
        scale = np.asarray(self.scale, dtype=np.float64).ravel()
        if self.variable_mode < 0:
            raise ValueError("variable_mode must be a non-negative mode index")
        if shift.shape != scale.shape:
            raise ValueError("shift and scale must have the same length")
        if np.any(scale <= 0):
            raise ValueError("Every scale entry must be > 0")
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "scale", scale)


@dataclass(frozen=True)
class AlsConfig:
    """Parametri di CP-ALS.

    Attributes:
        rank: Rango CP R.
        fit_tolerance: Soglia sulla variazione del fit per l'arresto.
        max_iterations: Numero massimo di sweep ALS.
        init_seed: Seme del generatore per l'inizializzazione uniforme(0, 1).
    """

    rank: int
    fit_tolerance: float = 1e-4
    max_iterations: int = 100
    init_seed: int = 0

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError("CP rank must be >= 1")
        if self.fit_tolerance < 0:
            raise ValueError("fit_tolerance must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class SthosvdConfig:
    """Parametri di ST-HOSVD: ranghi espliciti oppure tolleranza relativa.

    Attributes:
        ranks: Ranghi (R_1, ..., R_d), alternativi a ``tolerance``.
        tolerance: Errore relativo epsilon in (0, 1).
        mode_order: Ordine di elaborazione dei modi (default 0, ..., d-1).
    """

    ranks: tuple[int, ...] | None = None
    tolerance: float | None = None
    mode_order: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if (self.ranks is None) == (self.tolerance is None):
            raise ValueError("Give exactly one of ranks or tolerance")
        if self.tolerance is not None and not 0.0 < self.tolerance < 1.0:
            raise ValueError(f"tolerance must lie in (0, 1), got {self.tolerance}")
        if self.ranks is not None and any(r < 1 for r in self.ranks):
            raise ValueError("Tucker ranks must be >= 1")


@dataclass(frozen=True)
class OptConfig:
    """Parametri comuni a L-BFGS e trust-region Newton.

    Attributes:
        max_outer_iterations: Budget fisso di iterazioni esterne.
        lbfgs_memory: Coppie (s, y) conservate da L-BFGS.
        tcg_max_iterations: Limite di iterazioni del tCG (limitato anche dalla dimensione).
        tcg_tolerance: Tolleranza relativa sul residuo del tCG; None usa min(0.5, sqrt(|g|)).
        initial_radius: Raggio iniziale; None usa max(1, |v0| / 10).
        accept_ratio: Soglia di rho per accettare il passo.
        expand_ratio: Soglia di rho per espandere il raggio.
        shrink_factor: Fattore di contrazione del raggio.
        expand_factor: Fattore di espansione del raggio.
        max_radius_factor: Raggio massimo come multiplo del raggio iniziale.
        gradient_floor: Uscita anticipata quando |g| scende sotto questa soglia.
        wolfe_c1: Costante di decrescita sufficiente.
        wolfe_c2: Costante di curvatura (Wolfe forte).
    """

    max_outer_iterations: int = 20
    lbfgs_memory: int = 5
    tcg_max_iterations: int = 100
    tcg_tolerance: float | None = None
    initial_radius: float | None = None
    accept_ratio: float = 0.1
    expand_ratio: float = 0.75
    shrink_factor: float = 0.25
    expand_factor: float = 2.5
    max_radius_factor: float = 1e6
    gradient_floor: float = 1e-12
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9

    def __post_init__(self) -> None:
        if self.max_outer_iterations < 1 or self.lbfgs_memory < 1 or self.tcg_max_iterations < 1:
            raise ValueError("Iteration counts and memory must be positive")
        if not 0.0 < self.accept_ratio < self.expand_ratio < 1.0:
            raise ValueError("Trust-region thresholds must satisfy 0 < accept < expand < 1")
        if not 0.0 < self.shrink_factor < 1.0 < self.expand_factor:
            raise ValueError("Radius factors must satisfy 0 < shrink < 1 < expand")
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError("Wolfe constants must satisfy 0 < c1 < c2 < 1")
        if self.tcg_tolerance is not None and self.tcg_tolerance <= 0:
            raise ValueError("tcg_tolerance must be positive")
        if self.initial_radius is not None and self.initial_radius <= 0:
            raise ValueError("initial_radius must be positive")


@dataclass(frozen=True)
class TraceRecord:
    """Una riga della storia di convergenza (iterazione 0 = punto iniziale).

    Attributes:
        iteration: Indice dell'iterazione esterna.
        objective: Valore di f_go nel punto corrente.
        gradient_norm: Norma euclidea del gradiente.
        step_norm: Norma del passo proposto (0 per il punto iniziale).
        inner_iterations: Iterazioni tCG (trust region) o valutazioni della line search.
        accepted: Se il passo è stato accettato.
        radius: Raggio della trust region dopo l'aggiornamento (None per L-BFGS).
        frobenius_term: Termine alpha_0 f, se disponibile.
        qoi_terms: Termini alpha_q G_q, uno per QoI.
        note: Diagnostica breve (es. "line-search-failed", "negative-curvature").
    """

    iteration: int
    objective: float
    gradient_norm: float
    step_norm: float = 0.0
    inner_iterations: int = 0
    accepted: bool = True
    radius: float | None = None
    frobenius_term: float | None = None
    qoi_terms: tuple[float, ...] = ()
    note: str = ""


@dataclass(frozen=True)
class SynthSpec:
    """Generatore sintetico: CP casuale + rumore gaussiano.

    Attributes:
        dims: Dimensioni del tensore.
        rank: Rango vero del modello generatore.
        noise: Livello di rumore eta (>= 0).
        seed: Seme del generatore.
    """

    dims: tuple[int, ...]
    rank: int
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.dims or any(n < 1 for n in self.dims):
            raise ValueError("Synthetic dims must be a non-empty list of positive integers")
        if self.rank < 1:
            raise ValueError("Synthetic rank must be >= 1")
        if self.noise < 0:
            raise ValueError("Noise level must be >= 0")


QoIKind = Literal[
    "variable-sum",
    "kinetic-energy",
    "fe-constant",
    "fe-internal-energy",
    "fe-kinetic-energy",
    "fe-magnetic-energy",
    "fe-momentum",
    "fe-total-energy",
]


@dataclass(frozen=True)
class QoISpec:
    """Descrizione dichiarativa di una QoI letta dalla configurazione.

    Attributes:
        name: Nome riportato nei risultati.
        kind: Tipo di QoI.
        variables: Indici di variabile usati (somma, integrandi FE).
        times: Indici temporali; None significa tutti.
        coefficient: Coefficiente della somma di variabili.
        density: Variabili di densità per l'energia cinetica a somma.
        velocity: Coppia (u_x, u_y) per l'energia cinetica a somma.
        display: Trasformazione di visualizzazione.
    """

    name: str
    kind: QoIKind
    variables: tuple[int, ...] = ()
    times: tuple[int, ...] | None = None
    coefficient: float = 1.0
    density: tuple[int, ...] = ()
    velocity: tuple[int, ...] = ()
    display: DisplayTransform = "identity"

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise ValueError("QoI name cannot be empty")
        if self.times is not None and not self.times:
            raise ValueError(f"QoI '{self.name}' has an empty time set")

    @property
    def is_finite_element(self) -> bool:
        return self.kind.startswith("fe-")


@dataclass(frozen=True)
class RunConfig:
    """Configurazione completa di una esecuzione della pipeline.

    Attributes:
        model: Tipo di modello ("cp" o "tucker").
        input_path: Tensore GOTD da leggere (alternativo a ``synth``).
        synth: Specifica del generatore sintetico.
        rank: Rango CP.
        tolerance: Tolleranza ST-HOSVD.
        tucker_ranks: Ranghi Tucker espliciti.
        variable_mode: Modo delle variabili.
        scaling: Metodo di scala.
        qois: QoI da preservare.
        optimizer: Ottimizzatore.
        opt: Parametri dell'ottimizzatore.
        als_tolerance: Tolleranza sul fit di CP-ALS.
        als_max_iterations: Iterazioni massime di CP-ALS.
        seed: Seme per CP-ALS.
        output_dir: Directory dei risultati (None = nessun file).
        mesh_path: Mesh esaedrica per le QoI FE.
        mu0: Permeabilità magnetica per l'energia magnetica.
    """

    model: ModelKind
    input_path: Path | None = None
    synth: SynthSpec | None = None
    rank: int | None = None
    tolerance: float | None = None
    tucker_ranks: tuple[int, ...] | None = None
    variable_mode: int = 0
    scaling: ScalingMethod = "mean-std"
    qois: tuple[QoISpec, ...] = ()
    optimizer: OptimizerName = "tr-newton"
    opt: OptConfig = field(default_factory=OptConfig)
    als_tolerance: float = 1e-4
    als_max_iterations: int = 100
    seed: int = 0
    output_dir: Path | None = None
    mesh_path: Path | None = None
    mu0: float = 1.0

    def __post_init__(self) -> None:
        """Verifica che rango/tolleranza siano coerenti con il tipo di modello."""
        if (self.input_path is None) == (self.synth is None):
            raise ValueError("Give exactly one of input or synth.*")
        if self.model == "cp":
            if self.rank is None or self.tolerance is not None or self.tucker_ranks is not None:
                raise ValueError("A CP run needs 'rank' and no Tucker tolerance/ranks")
        elif self.model == "tucker":
            if self.rank is not None:
                raise ValueError("A Tucker run takes 'tol' or 'tucker.ranks', not 'rank'")
            if (self.tolerance is None) == (self.tucker_ranks is None):
                raise ValueError("A Tucker run needs exactly one of 'tol' or 'tucker.ranks'")
        else:
            raise ValueError(f"Unknown model kind '{self.model}'")
        names = [q.name for q in self.qois]
        if len(set(names)) != len(names):
            raise ValueError("QoI names must be unique")
        if self.mu0 <= 0:
            raise ValueError("mu0 must be positive")


@dataclass(frozen=True)
class QoIReport:
    """Traiettorie e errori relativi di una QoI.

    Attributes:
        name: Nome della QoI.
        display: Trasformazione di visualizzazione.
        times: Indici temporali valutati.
        data: g_q sul dato non scalato.
        initial_model: g_q sul modello iniziale M~0.
        final_model: g_q sul modello finale.
        relative_error_initial: Errore relativo iniziale.
        relative_error_final: Errore relativo finale.
        display_error_initial: Errore relativo della traiettoria trasformata (sqrt).
        display_error_final: Come sopra, per il modello finale.
    """

    name: str
    display: DisplayTransform
    times: tuple[int, ...]
    data: tuple[float, ...]
    initial_model: tuple[float, ...]
    final_model: tuple[float, ...]
    relative_error_initial: float
    relative_error_final: float
    display_error_initial: float | None = None
    display_error_final: float | None = None


@dataclass(frozen=True)
class RunReport:
    """Risultati di una esecuzione della pipeline.

    Attributes:
        model: Tipo di modello.
        optimizer: Ottimizzatore usato.
        ranks: Rango CP (tupla di un elemento) o ranghi Tucker.
        dims: Dimensioni del tensore.
        compression_ratio: Elementi del tensore / parametri del modello.
        error_scaled_initial: |X~ - M~0| / |X~|.
        error_scaled_final: |X~ - M~| / |X~|.
        error_unscaled_initial: |X - M0| / |X|.
        error_unscaled_final: |X - M| / |X|.
        objective_initial: f_go(M~0).
        objective_final: f_go finale.
        lower_bound: Riferimento 1/(Q+1).
        weights: Pesi alpha_0, ..., alpha_Q.
        dropped_qois: QoI escluse perché già preservate.
        qois: Report per QoI.
        trace: Storia dell'ottimizzatore.
        rejected_steps: Passi rifiutati dalla trust region.
    """

    model: ModelKind
    optimizer: OptimizerName
    ranks: tuple[int, ...]
    dims: tuple[int, ...]
    compression_ratio: float
    error_scaled_initial: float
    error_scaled_final: float
    error_unscaled_initial: float
    error_unscaled_final: float
    objective_initial: float
    objective_final: float
    lower_bound: float
    weights: tuple[float, ...]
    dropped_qois: tuple[str, ...]
    qois: tuple[QoIReport, ...]
    trace: tuple[TraceRecord, ...]
    rejected_steps: int = 0

    def summary(self) -> dict[str, Any]:
        """Scalari del report in forma serializzabile JSON."""
        return {
            "model": self.model,
            "optimizer": self.optimizer,
            "dims": list(self.dims),
            "ranks": list(self.ranks),
            "compression_ratio": self.compression_ratio,
            "relative_error": {
                "scaled_initial": self.error_scaled_initial,
                "scaled_final": self.error_scaled_final,
                "unscaled_initial": self.error_unscaled_initial,
                "unscaled_final": self.error_unscaled_final,
            },
            "objective": {
                "initial": self.objective_initial,
                "final": self.objective_final,
                "lower_bound": self.lower_bound,
            },
            "weights": list(self.weights),
            "dropped_qois": list(self.dropped_qois),
            "qois": [
                {
                    "name": q.name,
                    "display": q.display,
                    "relative_error_initial": q.relative_error_initial,
                    "relative_error_final": q.relative_error_final,
                    "display_error_initial": q.display_error_initial,
                    "display_error_final": q.display_error_final,
                }
                for q in self.qois
            ],
            "iterations": len(self.trace) - 1,
            "accepted_steps": sum(1 for r in self.trace[1:] if r.accepted),
            "rejected_steps": self.rejected_steps,
        }


@dataclass(frozen=True)
class ClassicReport:
    """Esito di un fit tradizionale (CP-ALS o ST-HOSVD) sul dato così com'è.

    Attributes:
        model: Tipo di modello.
        dims: Dimensioni del tensore.
        ranks: Rango CP (tupla di un elemento) o ranghi Tucker.
        compression_ratio: Elementi del tensore / parametri del modello.
        relative_error: |X - M| / |X|.
        iterations: Sweep ALS (0 per ST-HOSVD).
        fit_history: Fit dopo ogni sweep ALS.
        singular_gram: ALS ha usato la pseudo-inversa.
    """

    model: ModelKind
    dims: tuple[int, ...]
    ranks: tuple[int, ...]
    compression_ratio: float
    relative_error: float
    iterations: int = 0
    fit_history: tuple[float, ...] = ()
    singular_gram: bool = False

    def summary(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "dims": list(self.dims),
            "ranks": list(self.ranks),
            "compression_ratio": self.compression_ratio,
            "relative_error": self.relative_error,
            "iterations": self.iterations,
            "fit_history": list(self.fit_history),
            "singular_gram": self.singular_gram,
        }


@dataclass(frozen=True)
class SweepPoint:
    """Un punto della curva errore/compressione.

    L'errore "classic" è quello del guess iniziale (CP-ALS o ST-HOSVD), l'errore
    "goal" quello del modello ottimizzato, entrambi sul dato non scalato.
    """

    setting: float
    ranks: tuple[int, ...]
    compression_ratio: float
    classic_error: float
    goal_error: float
    qoi_classic: tuple[float, ...]
    qoi_goal: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.qoi_classic) != len(self.qoi_goal):
            raise ValueError("qoi_classic and qoi_goal must have one entry per QoI")

    @classmethod
    def from_report(cls, setting: float, report: RunReport) -> SweepPoint:
        return cls(
            setting=setting,
            ranks=report.ranks,
            compression_ratio=report.compression_ratio,
            classic_error=report.error_unscaled_initial,
            goal_error=report.error_unscaled_final,
            qoi_classic=tuple(q.relative_error_initial for q in report.qois),
            qoi_goal=tuple(q.relative_error_final for q in report.qois),
        )


@dataclass(frozen=True)
class SweepReport:
    """Fit tradizionale e goal-oriented per ogni rango (CP) o tolleranza (Tucker).

    Attributes:
        model: Tipo di modello.
        optimizer: Ottimizzatore usato in ogni punto.
        qoi_names: Nomi delle QoI, nell'ordine delle colonne.
        points: Un punto per impostazione, nell'ordine richiesto.
    """

    model: ModelKind
    optimizer: OptimizerName
    qoi_names: tuple[str, ...]
    points: tuple[SweepPoint, ...]

    def __post_init__(self) -> None:
        for p in self.points:
            if len(p.qoi_goal) != len(self.qoi_names):
                raise ValueError(f"Sweep point {p.setting:g} has {len(p.qoi_goal)} QoI errors")


@dataclass(frozen=True)
class QoIValues:
    """Traiettoria di una QoI sul dato."""

    name: str
    times: tuple[int, ...]
    values: tuple[float, ...]
