"""Unconstrained minimizers over flat parameter vectors.

L-BFGS con ricerca di linea di Wolfe forte (scipy) e trust-region Newton con
gradiente coniugato troncato precondizionato (Steihaug-Toint). Entrambi eseguono
un budget fisso di iterazioni esterne; la soglia sul gradiente serve solo come
uscita anticipata.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections import deque
from collections.abc import Callable
from dataclasses import dataclass
from functools import partial

import numpy as np
import scipy.optimize

from goal_tensor_cli.core.errors import NumericError
from goal_tensor_cli.core.models import OptConfig, TraceRecord

logger = logging.getLogger(__name__)

ObjectiveFn = Callable[[np.ndarray], float]
GradientFn = Callable[[np.ndarray], np.ndarray]
HessVecFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
PrecondFactory = Callable[[np.ndarray], Callable[[np.ndarray], np.ndarray]]
DescribeFn = Callable[[np.ndarray], tuple[float | None, tuple[float, ...]]]

CURVATURE_SLACK = 1e-10


@dataclass(frozen=True)
class OptimizeResult:
    """Punto finale e storia.

    Attributes:
        x: Parametri finali (ultimo punto accettato).
        objective: f(x).
        trace: Record per il punto iniziale e per ogni iterazione tentata.
        rejected_steps: Passi rifiutati (solo trust region).
    """

    x: np.ndarray
    objective: float
    trace: tuple[TraceRecord, ...]
    rejected_steps: int = 0


@dataclass(frozen=True)
class TcgResult:
    """Esito del tCG.

    Attributes:
        step: Passo s.
        hessian_step: H s, accumulato durante le iterazioni.
        iterations: Prodotti Hessiano-vettore eseguiti.
        reason: "converged", "boundary", "negative-curvature" o "max-iterations".
        norm: ||s|| nella norma del precondizionatore.
    """

    step: np.ndarray
    hessian_step: np.ndarray
    iterations: int
    reason: str
    norm: float

    @property
    def on_boundary(self) -> bool:
        return self.reason in ("boundary", "negative-curvature")


def _terms(describe: DescribeFn | None, x: np.ndarray) -> tuple[float | None, tuple[float, ...]]:
    return describe(x) if describe is not None else (None, ())


def _boundary_tau(sMs: float, sMp: float, pMp: float, radius: float) -> float:
    """Radice positiva di ||s + tau p||_M = radius."""
    disc = sMp * sMp + pMp * (radius * radius - sMs)
    return (-sMp + math.sqrt(max(disc, 0.0))) / pMp


def steihaug_tcg(
    hvp: Callable[[np.ndarray], np.ndarray],
    g: np.ndarray,
    precond: Callable[[np.ndarray], np.ndarray],
    radius: float,
    tolerance: float,
    max_iterations: int,
) -> TcgResult:
    """Minimizza g^T s + 1/2 s^T H s con ||s||_M <= radius.

    Termina al bordo, su curvatura non positiva o quando ||r|| <= tolerance ||g||.
    Le norme ||s||_M e i prodotti s^T M p sono aggiornati per ricorrenza, così serve
    solo l'applicazione di M^{-1}.

    Raises:
        NumericError: Prodotto Hessiano-vettore non finito.
    """
    s = np.zeros_like(g)
    Hs = np.zeros_like(g)
    r = g.copy()
    z = precond(r)
    p = -z
    rz = float(r @ z)
    sMs, sMp, pMp = 0.0, 0.0, rz
    stop = tolerance * float(np.linalg.norm(g))

    for j in range(1, max_iterations + 1):
        Hp = hvp(p)
        if not np.all(np.isfinite(Hp)):
            raise NumericError(f"Hessian-vector product is not finite at tCG iteration {j}")
        kappa = float(p @ Hp)
        if kappa <= 0.0:
            tau = _boundary_tau(sMs, sMp, pMp, radius)
            return TcgResult(s + tau * p, Hs + tau * Hp, j, "negative-curvature", radius)

        alpha = rz / kappa
        sMs_next = sMs + 2.0 * alpha * sMp + alpha * alpha * pMp
        if sMs_next >= radius * radius:
            tau = _boundary_tau(sMs, sMp, pMp, radius)
            return TcgResult(s + tau * p, Hs + tau * Hp, j, "boundary", radius)

        s = s + alpha * p
        Hs = Hs + alpha * Hp
        r = r + alpha * Hp
        sMs = sMs_next
        if float(np.linalg.norm(r)) <= stop:
            return TcgResult(s, Hs, j, "converged", math.sqrt(sMs))

        z = precond(r)
        rz_next = float(r @ z)
        beta = rz_next / rz
        rz = rz_next
        p = -z + beta * p
        sMp = beta * (sMp + alpha * pMp)
        pMp = rz + beta * beta * pMp

    return TcgResult(s, Hs, max_iterations, "max-iterations", math.sqrt(sMs))


def tr_newton_minimize(
    f: ObjectiveFn,
    grad: GradientFn,
    hvp: HessVecFn,
    precond: PrecondFactory,
    x0: np.ndarray,
    cfg: OptConfig,
    describe: DescribeFn | None = None,
) -> OptimizeResult:
    """Trust-region Newton con passo interno tCG precondizionato.

    Ogni iterazione esterna propone un passo; rho = riduzione effettiva / prevista
    decide l'accettazione (rho >= accept_ratio). Un passo rifiutato riduce il raggio
    di shrink_factor; un passo accettato al bordo con rho > expand_ratio lo espande
    di expand_factor fino a max_radius_factor volte il raggio iniziale.

    Args:
        f: Obiettivo.
        grad: Gradiente.
        hvp: (x, w) -> H(x) w, simmetrico e semidefinito (Gauss-Newton).
        precond: x -> funzione che applica M^{-1}.
        x0: Punto iniziale.
        cfg: Parametri.
        describe: Termini dell'obiettivo da registrare nella traccia.

    Raises:
        NumericError: Obiettivo iniziale non finito o prodotti Hessiano non finiti.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    fx = f(x)
    if not math.isfinite(fx):
        raise NumericError("Objective is not finite at the initial point")
    g = grad(x)
    radius = cfg.initial_radius or max(1.0, float(np.linalg.norm(x)) / 10.0)
    max_radius = cfg.max_radius_factor * radius
    frob, qoi = _terms(describe, x)
    trace = [TraceRecord(0, fx, float(np.linalg.norm(g)), radius=radius, frobenius_term=frob, qoi_terms=qoi)]
    rejected = 0
    logger.info(f"Trust-region Newton: n={x.size}, f0={fx:.6g}, radius0={radius:.4g}")

    for it in range(1, cfg.max_outer_iterations + 1):
        g_norm = float(np.linalg.norm(g))
        if g_norm <= cfg.gradient_floor:
            logger.info(f"Gradient norm {g_norm:.3g} below floor; stopping at iteration {it - 1}")
            break
        apply_precond = precond(x)
        tolerance = cfg.tcg_tolerance if cfg.tcg_tolerance is not None else min(0.5, math.sqrt(g_norm))
        inner = steihaug_tcg(
            partial(hvp, x),
            g,
            apply_precond,
            radius,
            tolerance,
            min(cfg.tcg_max_iterations, x.size),
        )
        step_norm = float(np.linalg.norm(inner.step))
        predicted = -float(g @ inner.step + 0.5 * (inner.step @ inner.hessian_step))

        note = inner.reason
        if predicted <= 0.0 or not math.isfinite(predicted):
            rho = -math.inf
            note = "nonpositive-predicted-reduction"
            x_trial, f_trial = x, fx
        else:
            x_trial = x + inner.step
            f_trial = f(x_trial)
            rho = (fx - f_trial) / predicted if math.isfinite(f_trial) else -math.inf

        accepted = rho >= cfg.accept_ratio and f_trial < fx
        if accepted:
            x, fx = x_trial, f_trial
            g = grad(x)
            if rho > cfg.expand_ratio and inner.on_boundary:
                radius = min(cfg.expand_factor * radius, max_radius)
            frob, qoi = _terms(describe, x)
        else:
            rejected += 1
            radius *= cfg.shrink_factor
            frob, qoi = trace[-1].frobenius_term, trace[-1].qoi_terms

        trace.append(
            TraceRecord(
                iteration=it,
                objective=fx,
                gradient_norm=float(np.linalg.norm(g)),
                step_norm=step_norm,
                inner_iterations=inner.iterations,
                accepted=accepted,
                radius=radius,
                frobenius_term=frob,
                qoi_terms=qoi,
                note=note,
            )
        )
        logger.debug(
            f"TR iter {it}: f={fx:.10g}, rho={rho:.3g}, |s|={step_norm:.3g}, "
            f"tCG={inner.iterations} ({inner.reason}), radius={radius:.3g}, accepted={accepted}"
        )

    logger.info(f"Trust-region Newton finished: f={fx:.6g}, rejected steps={rejected}")
    return OptimizeResult(x=x, objective=fx, trace=tuple(trace), rejected_steps=rejected)


def _two_loop(g: np.ndarray, pairs: deque[tuple[np.ndarray, np.ndarray, float]]) -> np.ndarray:
    """Direzione -H g con la ricorsione a due cicli."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas), strict=True):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q


def _wolfe_search(
    f: ObjectiveFn,
    grad: GradientFn,
    x: np.ndarray,
    direction: np.ndarray,
    g: np.ndarray,
    fx: float,
    old_fx: float | None,
    cfg: OptConfig,
) -> tuple[float | None, int, float | None]:
    with warnings.catch_warnings():
        # LineSearchWarning deriva da RuntimeWarning
        warnings.simplefilter("ignore", RuntimeWarning)
        alpha, evals, _, f_new, _, _ = scipy.optimize.line_search(
            f,
            grad,
            x,
            direction,
            gfk=g,
            old_fval=fx,
            old_old_fval=old_fx,
            c1=cfg.wolfe_c1,
            c2=cfg.wolfe_c2,
        )
    return alpha, int(evals), f_new


def lbfgs_minimize(
    f: ObjectiveFn,
    grad: GradientFn,
    x0: np.ndarray,
    cfg: OptConfig,
    describe: DescribeFn | None = None,
) -> OptimizeResult:
    """L-BFGS a memoria limitata con ricerca di linea di Wolfe forte.

    Alla prima iterazione (o dopo un reset) il passo iniziale è scalato come in
    scipy BFGS; poi si prova sempre alpha = 1. Se la ricerca fallisce la memoria
    viene azzerata e si riprova lungo -g; un secondo fallimento termina il ciclo
    con nota "line-search-failed".

    Raises:
        NumericError: Obiettivo iniziale non finito.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    fx = f(x)
    if not math.isfinite(fx):
        raise NumericError("Objective is not finite at the initial point")
    g = grad(x)
    pairs: deque[tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=cfg.lbfgs_memory)
    frob, qoi = _terms(describe, x)
    trace = [TraceRecord(0, fx, float(np.linalg.norm(g)), frobenius_term=frob, qoi_terms=qoi)]
    logger.info(f"L-BFGS: n={x.size}, memory={cfg.lbfgs_memory}, f0={fx:.6g}")

    for it in range(1, cfg.max_outer_iterations + 1):
        g_norm = float(np.linalg.norm(g))
        if g_norm <= cfg.gradient_floor:
            logger.info(f"Gradient norm {g_norm:.3g} below floor; stopping at iteration {it - 1}")
            break

        direction = _two_loop(g, pairs)
        if float(g @ direction) >= 0.0:
            pairs.clear()
            direction = -g
        old_fx = fx + g_norm / 2.0 if not pairs else None
        alpha, evals, f_new = _wolfe_search(f, grad, x, direction, g, fx, old_fx, cfg)
        if alpha is None and pairs:
            logger.warning(f"L-BFGS line search failed at iteration {it}; retrying along -g")
            pairs.clear()
            direction = -g
            alpha, more, f_new = _wolfe_search(f, grad, x, direction, g, fx, fx + g_norm / 2.0, cfg)
            evals += more
        if alpha is None or f_new is None:
            logger.warning(f"L-BFGS line search failed at iteration {it}; stopping")
            trace.append(
                TraceRecord(
                    iteration=it,
                    objective=fx,
                    gradient_norm=g_norm,
                    inner_iterations=evals,
                    accepted=False,
                    frobenius_term=trace[-1].frobenius_term,
                    qoi_terms=trace[-1].qoi_terms,
                    note="line-search-failed",
                )
            )
            break

        step = alpha * direction
        x = x + step
        g_new = grad(x)
        y = g_new - g
        sy = float(step @ y)
        if sy > CURVATURE_SLACK * float(np.linalg.norm(step)) * float(np.linalg.norm(y)):
            pairs.append((step, y, 1.0 / sy))
        fx, g = float(f_new), g_new
        frob, qoi = _terms(describe, x)
        trace.append(
            TraceRecord(
                iteration=it,
                objective=fx,
                gradient_norm=float(np.linalg.norm(g)),
                step_norm=float(np.linalg.norm(step)),
                inner_iterations=evals,
                frobenius_term=frob,
                qoi_terms=qoi,
            )
        )
        logger.debug(f"L-BFGS iter {it}: f={fx:.10g}, |g|={np.linalg.norm(g):.3g}, alpha={alpha:.3g}")

    logger.info(f"L-BFGS finished: f={fx:.6g}")
    return OptimizeResult(x=x, objective=fx, trace=tuple(trace))
