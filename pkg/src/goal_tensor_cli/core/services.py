"""Orchestrazione della pipeline goal-oriented.

Platone: Una sola pipeline, dal dato al report.

Carica o genera il dato, lo scala, calcola il guess iniziale tradizionale, sceglie i
pesi, ottimizza e riassume i risultati. Nessun output su terminale qui; la lettura
di file è delegata agli adapter.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import replace
from functools import partial
from pathlib import Path

import numpy as np

from goal_tensor_cli.adapters.mesh_io import read_hex_mesh
from goal_tensor_cli.adapters.tensor_io import read_tensor
from goal_tensor_cli.core.classic import cp_als, sthosvd
from goal_tensor_cli.core.errors import ConfigError
from goal_tensor_cli.core.fem import FE_ORDER, HexMesh, integrand_for, qoi_finite_element
from goal_tensor_cli.core.goal import (
    GoalProblem,
    ParamLayout,
    apply_scaling,
    choose_weights,
    compute_scaling,
    gn_hess_vec,
    gradient,
    objective,
    objective_terms,
    precond_build,
    unscale_model_slice,
)
from goal_tensor_cli.core.models import (
    AlsConfig,
    ClassicReport,
    DenseTensor,
    KruskalModel,
    QoIReport,
    QoISpec,
    QoIValues,
    RunConfig,
    RunReport,
    SthosvdConfig,
    SweepPoint,
    SweepReport,
    SynthSpec,
    TuckerModel,
)
from goal_tensor_cli.core.optimize import OptimizeResult, lbfgs_minimize, tr_newton_minimize
from goal_tensor_cli.core.qoi import (
    QoIDefinition,
    qoi_kinetic_energy,
    qoi_relative_error,
    qoi_variable_sum,
)
from goal_tensor_cli.core.tensor import frob_err, reconstruct

logger = logging.getLogger(__name__)

Model = KruskalModel | TuckerModel


def synth_generate(spec: SynthSpec) -> DenseTensor:
    """Tensore sintetico: CP casuale con voci uniformi(0, 1) più rumore gaussiano.

    X = X_lr + eta * |X_lr|_F / sqrt(N) * E, con E gaussiana standard. Fattori e
    rumore escono dallo stesso generatore seminato, in quest'ordine.
    """
    rng = np.random.default_rng(spec.seed)
    factors = tuple(rng.uniform(0.0, 1.0, size=(n, spec.rank)) for n in spec.dims)
    low_rank = reconstruct(KruskalModel(factors))
    noise = rng.standard_normal(low_rank.size).reshape(low_rank.dims, order="F")
    level = spec.noise * float(np.linalg.norm(low_rank.values)) / np.sqrt(low_rank.size)
    logger.info(f"Synthetic tensor: dims={spec.dims}, rank={spec.rank}, noise={spec.noise:g}")
    return DenseTensor(low_rank.data + level * noise)


def compression_ratio(dims: Sequence[int], model: Model) -> float:
    """Elementi del tensore diviso parametri del modello (core + fattori per Tucker)."""
    return float(np.prod(dims, dtype=np.float64)) / model.parameter_count


def build_qoi(
    spec: QoISpec, variable_mode: int, mesh: HexMesh | None = None, mu0: float = 1.0
) -> QoIDefinition:
    """QoIDefinition da una specifica dichiarativa.

    Raises:
        ConfigError: Campi mancanti o incoerenti, mesh assente per QoI FE.
    """
    key = f"qoi.{spec.name}"
    if spec.kind == "variable-sum":
        return qoi_variable_sum(
            spec.variables,
            spec.coefficient,
            name=spec.name,
            time_set=spec.times,
            variable_mode=variable_mode,
            display=spec.display,
        )
    if spec.kind == "kinetic-energy":
        if len(spec.velocity) != 2:
            raise ConfigError("kinetic-energy needs exactly two velocity variables", key)
        return qoi_kinetic_energy(
            spec.density,
            spec.velocity[0],
            spec.velocity[1],
            name=spec.name,
            time_set=spec.times,
            variable_mode=variable_mode,
            display=spec.display,
        )
    if mesh is None:
        raise ConfigError(f"QoI kind '{spec.kind}' needs a mesh ('mesh' key)", key)
    if variable_mode != FE_ORDER - 2:
        raise ConfigError(
            "finite-element QoIs need (x, y, z, variable, time) data with variable_mode = 3", key
        )
    return qoi_finite_element(
        integrand_for(spec.kind, mu0),
        mesh,
        spec.variables,
        name=spec.name,
        time_set=spec.times,
        display=spec.display,
    )


def _display_error(qdef: QoIDefinition, data: np.ndarray, approx: np.ndarray) -> float | None:
    if qdef.display != "sqrt":
        return None
    return qoi_relative_error(np.sqrt(np.maximum(data, 0.0)), np.sqrt(np.maximum(approx, 0.0)))


class GoalPipelineService:
    """Service per le decomposizioni tradizionali e goal-oriented.

    Aristotele: Definizione chiara - orchestra le fasi della pipeline ma non gestisce
    né terminale né formati di file.
    """

    def __init__(
        self,
        tensor_reader: Callable[[Path], DenseTensor] = read_tensor,
        mesh_reader: Callable[[Path], HexMesh] = read_hex_mesh,
    ):
        """Inizializza il service con i lettori di file.

        Args:
            tensor_reader: Lettore dei tensori GOTD.
            mesh_reader: Lettore delle mesh esaedriche.
        """
        self.tensor_reader = tensor_reader
        self.mesh_reader = mesh_reader

    def load_data(self, input_path: Path | None, synth: SynthSpec | None) -> DenseTensor:
        """Legge il tensore o lo genera.

        Raises:
            ConfigError: Nessuna sorgente indicata.
            FileSystemError, TensorFormatError: Dal lettore.
        """
        if input_path is not None:
            return self.tensor_reader(input_path)
        if synth is not None:
            return synth_generate(synth)
        raise ConfigError("Give either 'input' or the synth.* keys", "input")

    def build_qois(
        self,
        specs: Sequence[QoISpec],
        variable_mode: int,
        mesh_path: Path | None,
        mu0: float = 1.0,
    ) -> tuple[QoIDefinition, ...]:
        """Costruisce le QoI, leggendo la mesh solo se serve."""
        mesh = None
        if any(s.is_finite_element for s in specs):
            if mesh_path is None:
                raise ConfigError("finite-element QoIs need a mesh file", "mesh")
            mesh = self.mesh_reader(mesh_path)
        return tuple(build_qoi(s, variable_mode, mesh, mu0) for s in specs)

    def initial_model(self, X: DenseTensor, cfg: RunConfig) -> tuple[Model, ClassicReport]:
        """Fit tradizionale: CP-ALS per CP, ST-HOSVD per Tucker.

        Raises:
            ConfigError: Parametri del solver non validi.
        """
        if cfg.model == "cp":
            assert cfg.rank is not None
            try:
                als_cfg = AlsConfig(
                    rank=cfg.rank,
                    fit_tolerance=cfg.als_tolerance,
                    max_iterations=cfg.als_max_iterations,
                    init_seed=cfg.seed,
                )
            except ValueError as e:
                raise ConfigError(str(e), "rank") from e
            result = cp_als(X, als_cfg)
            return result.model, ClassicReport(
                model="cp",
                dims=X.dims,
                ranks=(result.model.rank,),
                compression_ratio=compression_ratio(X.dims, result.model),
                relative_error=frob_err(X, reconstruct(result.model)),
                iterations=result.iterations,
                fit_history=result.fit_history,
                singular_gram=result.singular_gram,
            )

        try:
            st_cfg = SthosvdConfig(ranks=cfg.tucker_ranks, tolerance=cfg.tolerance)
        except ValueError as e:
            raise ConfigError(str(e), "tol") from e
        tucker = sthosvd(X, st_cfg)
        return tucker, ClassicReport(
            model="tucker",
            dims=X.dims,
            ranks=tucker.ranks,
            compression_ratio=compression_ratio(X.dims, tucker),
            relative_error=frob_err(X, reconstruct(tucker)),
        )

    def classic(self, cfg: RunConfig) -> ClassicReport:
        """Solo il fit tradizionale, sul dato non scalato."""
        X = self.load_data(cfg.input_path, cfg.synth)
        _, report = self.initial_model(X, cfg)
        logger.info(f"Classic {cfg.model} fit: relative error {report.relative_error:.6g}")
        return report

    def evaluate_qois(
        self,
        X: DenseTensor,
        specs: Sequence[QoISpec],
        variable_mode: int,
        mesh_path: Path | None = None,
        mu0: float = 1.0,
    ) -> list[QoIValues]:
        """Traiettorie delle QoI configurate sul dato non scalato."""
        if not specs:
            raise ConfigError("no QoIs configured", "qoi")
        qois = self.build_qois(specs, variable_mode, mesh_path, mu0)
        return [
            QoIValues(name=q.name, times=q.resolve_times(X), values=tuple(q.values(X).tolist()))
            for q in qois
        ]

    def run(self, cfg: RunConfig) -> RunReport:
        """Pipeline completa: dato, scala, guess iniziale, pesi, ottimizzazione, report.

        Raises:
            ValidationError: Configurazione, dimensioni o QoI non validi.
            NumericError: Pesi non definiti o obiettivo non finito.
        """
        X = self.load_data(cfg.input_path, cfg.synth)
        qois = self.build_qois(cfg.qois, cfg.variable_mode, cfg.mesh_path, cfg.mu0)
        return self._run_on(X, qois, cfg)

    def _run_on(
        self, X: DenseTensor, qois: tuple[QoIDefinition, ...], cfg: RunConfig
    ) -> RunReport:
        scaling = compute_scaling(X, cfg.variable_mode, cfg.scaling)
        X_scaled = apply_scaling(X, scaling)

        model0, _ = self.initial_model(X_scaled, cfg)
        selection = choose_weights(X_scaled, model0, qois, scaling)
        layout = ParamLayout.for_model(model0)
        problem = GoalProblem.from_selection(X_scaled, scaling, selection, layout)
        v0 = layout.pack(model0)

        result = self._optimize(problem, v0, cfg)
        model = layout.unpack(result.x)
        return self._report(cfg, X, X_scaled, problem, qois, selection.dropped, model0, model, result)

    def sweep(self, cfg: RunConfig, settings: Sequence[float]) -> SweepReport:
        """Curva errore/compressione: un run goal-oriented per ogni impostazione.

        Dewey: Conseguenza pratica - la curva indica quale rango conviene.

        Il dato e le QoI vengono preparati una sola volta. Per CP ogni impostazione è
        un rango, per Tucker una tolleranza ST-HOSVD (i ranghi fissi vengono ignorati).

        Args:
            cfg: Configurazione di base; rank/tol vengono sostituiti punto per punto.
            settings: Ranghi (CP) o tolleranze (Tucker), nell'ordine del report.

        Returns:
            SweepReport con errori tradizionali e goal-oriented per punto.

        Raises:
            ConfigError: Lista vuota o impostazione non valida.
            NumericError: Come in ``run``.
        """
        if not settings:
            raise ConfigError("a sweep needs at least one rank or tolerance", "sweep")
        X = self.load_data(cfg.input_path, cfg.synth)
        qois = self.build_qois(cfg.qois, cfg.variable_mode, cfg.mesh_path, cfg.mu0)

        points = []
        for setting in settings:
            point_cfg = _sweep_config(cfg, setting)
            report = self._run_on(X, qois, point_cfg)
            points.append(SweepPoint.from_report(float(setting), report))
            logger.info(
                f"Sweep {cfg.model} {setting:g}: ratio {report.compression_ratio:.4g}, error "
                f"{report.error_unscaled_initial:.4g} (classic) vs {report.error_unscaled_final:.4g}"
            )
        return SweepReport(
            model=cfg.model,
            optimizer=cfg.optimizer,
            qoi_names=tuple(q.name for q in qois),
            points=tuple(points),
        )

    def _optimize(self, problem: GoalProblem, v0: np.ndarray, cfg: RunConfig) -> OptimizeResult:
        f = partial(objective, problem)
        grad = partial(gradient, problem)

        def describe(v: np.ndarray) -> tuple[float | None, tuple[float, ...]]:
            terms = objective_terms(problem, v)
            alpha = problem.weights
            weighted = tuple(a * g for a, g in zip(alpha[1:], terms.qoi, strict=True))
            return alpha[0] * terms.frobenius, weighted

        if cfg.optimizer == "lbfgs":
            return lbfgs_minimize(f, grad, v0, cfg.opt, describe)
        return tr_newton_minimize(
            f,
            grad,
            partial(gn_hess_vec, problem),
            lambda v: precond_build(problem, v).apply,
            v0,
            cfg.opt,
            describe,
        )

    def _report(
        self,
        cfg: RunConfig,
        X: DenseTensor,
        X_scaled: DenseTensor,
        problem: GoalProblem,
        qois: Sequence[QoIDefinition],
        dropped: tuple[str, ...],
        model0: Model,
        model: Model,
        result: OptimizeResult,
    ) -> RunReport:
        M0_scaled, M_scaled = reconstruct(model0), reconstruct(model)
        M0 = unscale_model_slice(M0_scaled, problem.scaling)
        M = unscale_model_slice(M_scaled, problem.scaling)

        qoi_reports = []
        for q in qois:
            data, initial, final = q.values(X), q.values(M0), q.values(M)
            qoi_reports.append(
                QoIReport(
                    name=q.name,
                    display=q.display,
                    times=q.resolve_times(X),
                    data=tuple(data.tolist()),
                    initial_model=tuple(initial.tolist()),
                    final_model=tuple(final.tolist()),
                    relative_error_initial=qoi_relative_error(data, initial),
                    relative_error_final=qoi_relative_error(data, final),
                    display_error_initial=_display_error(q, data, initial),
                    display_error_final=_display_error(q, data, final),
                )
            )

        ranks = (model.rank,) if isinstance(model, KruskalModel) else model.ranks
        report = RunReport(
            model=cfg.model,
            optimizer=cfg.optimizer,
            ranks=ranks,
            dims=X.dims,
            compression_ratio=compression_ratio(X.dims, model),
            error_scaled_initial=frob_err(X_scaled, M0_scaled),
            error_scaled_final=frob_err(X_scaled, M_scaled),
            error_unscaled_initial=frob_err(X, M0),
            error_unscaled_final=frob_err(X, M),
            objective_initial=result.trace[0].objective,
            objective_final=result.objective,
            lower_bound=problem.lower_bound,
            weights=problem.weights,
            dropped_qois=dropped,
            qois=tuple(qoi_reports),
            trace=result.trace,
            rejected_steps=result.rejected_steps,
        )
        logger.info(
            f"Goal-oriented {cfg.model} ({cfg.optimizer}): f_go {report.objective_initial:.6g} -> "
            f"{report.objective_final:.6g} (bound {report.lower_bound:.4g}), "
            f"unscaled error {report.error_unscaled_initial:.4g} -> {report.error_unscaled_final:.4g}"
        )
        return report


def _sweep_config(cfg: RunConfig, setting: float) -> RunConfig:
    try:
        if cfg.model == "cp":
            if int(setting) != setting:
                raise ValueError(f"CP rank {setting} is not an integer")
            return replace(cfg, rank=int(setting))
        return replace(cfg, tolerance=float(setting), tucker_ranks=None)
    except ValueError as e:
        raise ConfigError(str(e), "sweep") from e


def run_pipeline(cfg: RunConfig, service: GoalPipelineService | None = None) -> RunReport:
    """Esegue la pipeline goal-oriented completa."""
    return (service or GoalPipelineService()).run(cfg)
