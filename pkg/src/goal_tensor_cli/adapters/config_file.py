"""Flat key-value run configuration files.

Formato: una coppia ``key = value`` per riga, commenti con "#", righe vuote ignorate,
chiavi successive sovrascrivono le precedenti. Le QoI usano lo spazio di nomi
``qoi.<n>.<campo>``. Tutti gli indici sono 0-based.
"""

import logging
import os
from collections.abc import Callable, Mapping
from pathlib import Path
from typing import Any, TypeVar, cast, get_args

from goal_tensor_cli.core.errors import ConfigError, FileSystemError
from goal_tensor_cli.core.models import OptConfig, QoIKind, QoISpec, RunConfig, SynthSpec

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "GOAL_TENSOR_CONFIG"

RUN_KEYS = frozenset(
    {
        "input",
        "synth.dims",
        "synth.rank",
        "synth.noise",
        "synth.seed",
        "model",
        "rank",
        "tol",
        "tucker.ranks",
        "variable_mode",
        "scaling",
        "optimizer",
        "iters",
        "lbfgs.memory",
        "tcg.max_iterations",
        "tcg.tolerance",
        "als.tol",
        "als.max_iterations",
        "seed",
        "out",
        "mesh",
        "mu0",
        "sweep.ranks",
        "sweep.tols",
    }
)
QOI_FIELDS = frozenset(
    {"name", "kind", "variables", "times", "coefficient", "density", "velocity", "display"}
)

T = TypeVar("T")


def parse_config_text(text: str) -> dict[str, str]:
    """Coppie chiave/valore grezze, con validazione dei nomi di chiave.

    Raises:
        ConfigError: Riga senza "=", chiave sconosciuta o campo QoI sconosciuto.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"line {lineno} is not 'key = value': {line.strip()!r}")
        key, value = (part.strip() for part in content.split("=", 1))
        _check_key(key)
        raw[key] = value
    return raw


def _check_key(key: str) -> None:
    if key in RUN_KEYS:
        return
    parts = key.split(".")
    if len(parts) == 3 and parts[0] == "qoi" and parts[1] and parts[2] in QOI_FIELDS:
        return
    raise ConfigError("unknown configuration key", key)


def resolve_config_path(option: Path | None) -> Path | None:
    """Percorso esplicito oppure quello della variabile d'ambiente GOAL_TENSOR_CONFIG."""
    if option is not None:
        return option
    env = os.getenv(CONFIG_ENV_VAR)
    return Path(env) if env else None


def read_config_file(path: Path | None) -> dict[str, str]:
    """Legge il file di configurazione (dizionario vuoto se non indicato).

    Raises:
        FileSystemError: File non leggibile.
        ConfigError: Contenuto non valido.
    """
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise FileSystemError(f"Cannot read config file {path}: {e}") from e
    logger.info(f"Loaded config {path}")
    return parse_config_text(text)


def merge_overrides(raw: Mapping[str, str], overrides: Mapping[str, Any]) -> dict[str, str]:
    """Applica i flag della CLI (valori None ignorati) sopra il file."""
    merged = dict(raw)
    for key, value in overrides.items():
        if value is None:
            continue
        _check_key(key)
        merged[key] = str(value)
    return merged


def _convert(raw: Mapping[str, str], key: str, parse: Callable[[str], T]) -> T | None:
    if key not in raw:
        return None
    try:
        return parse(raw[key])
    except ValueError as e:
        raise ConfigError(f"invalid value {raw[key]!r} ({e})", key) from e


def parse_int_list(text: str) -> tuple[int, ...]:
    tokens = text.replace(",", " ").split()
    if not tokens:
        raise ValueError("empty list")
    return tuple(int(tok) for tok in tokens)


def parse_float_list(text: str) -> tuple[float, ...]:
    tokens = text.replace(",", " ").split()
    if not tokens:
        raise ValueError("empty list")
    return tuple(float(tok) for tok in tokens)


def parse_time_set(text: str) -> tuple[int, ...] | None:
    """"all" -> None, "a:b" -> range(a, b), altrimenti lista separata da virgole."""
    text = text.strip()
    if text == "all":
        return None
    if ":" in text:
        start, stop = (int(part) for part in text.split(":", 1))
        if stop <= start:
            raise ValueError(f"empty range {start}:{stop}")
        return tuple(range(start, stop))
    return parse_int_list(text)


def _choice(options: tuple[str, ...]) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def build_synth_spec(raw: Mapping[str, str]) -> SynthSpec | None:
    """Specifica del generatore sintetico, se presente.

    Raises:
        ConfigError: Chiavi synth.* incomplete o non valide.
    """
    # synth.seed da solo (es. --seed con dati da file) non attiva il generatore
    if not any(k.startswith("synth.") and k != "synth.seed" for k in raw):
        return None
    dims = _convert(raw, "synth.dims", parse_int_list)
    rank = _convert(raw, "synth.rank", int)
    if dims is None or rank is None:
        raise ConfigError("synthetic data needs synth.dims and synth.rank", "synth")
    try:
        return SynthSpec(
            dims=dims,
            rank=rank,
            noise=_convert(raw, "synth.noise", float) or 0.0,
            seed=_convert(raw, "synth.seed", int) or 0,
        )
    except ValueError as e:
        raise ConfigError(str(e), "synth") from e


def _qoi_sort_key(label: str) -> tuple[int, int | str]:
    return (0, int(label)) if label.isdigit() else (1, label)


def build_qoi_specs(raw: Mapping[str, str]) -> tuple[QoISpec, ...]:
    """Specifiche delle QoI, in ordine di etichetta <n>.

    Raises:
        ConfigError: Campo mancante o non valido; il messaggio nomina la chiave.
    """
    groups: dict[str, dict[str, str]] = {}
    for key, value in raw.items():
        if key.startswith("qoi."):
            _, label, name = key.split(".")
            groups.setdefault(label, {})[name] = value

    specs = []
    for label in sorted(groups, key=_qoi_sort_key):
        fields = {f"qoi.{label}.{k}": v for k, v in groups[label].items()}
        prefix = f"qoi.{label}"
        if f"{prefix}.kind" not in fields:
            raise ConfigError("missing QoI kind", f"{prefix}.kind")
        if fields[f"{prefix}.kind"] not in get_args(QoIKind):
            raise ConfigError(f"unknown QoI kind '{fields[f'{prefix}.kind']}'", f"{prefix}.kind")
        try:
            specs.append(
                QoISpec(
                    name=fields.get(f"{prefix}.name", f"qoi{label}"),
                    kind=cast(Any, fields[f"{prefix}.kind"]),
                    variables=_convert(fields, f"{prefix}.variables", parse_int_list) or (),
                    times=_convert(fields, f"{prefix}.times", parse_time_set),
                    coefficient=_fallback(_convert(fields, f"{prefix}.coefficient", float), 1.0),
                    density=_convert(fields, f"{prefix}.density", parse_int_list) or (),
                    velocity=_convert(fields, f"{prefix}.velocity", parse_int_list) or (),
                    display=cast(
                        Any,
                        _convert(fields, f"{prefix}.display", _choice(("identity", "sqrt")))
                        or "identity",
                    ),
                )
            )
        except ValueError as e:
            raise ConfigError(str(e), prefix) from e
    return tuple(specs)


def build_opt_config(raw: Mapping[str, str]) -> OptConfig:
    """Parametri dell'ottimizzatore; i valori assenti restano ai default."""
    values: dict[str, Any] = {
        "max_outer_iterations": _convert(raw, "iters", int),
        "lbfgs_memory": _convert(raw, "lbfgs.memory", int),
        "tcg_max_iterations": _convert(raw, "tcg.max_iterations", int),
        "tcg_tolerance": _convert(raw, "tcg.tolerance", float),
    }
    try:
        return OptConfig(**{k: v for k, v in values.items() if v is not None})
    except ValueError as e:
        raise ConfigError(str(e), "iters") from e


def build_run_config(raw: Mapping[str, str], model: str | None = None) -> RunConfig:
    """RunConfig completa; ``model`` (dal sottocomando) ha la precedenza sul file.

    Raises:
        ConfigError: Valori mancanti, incoerenti o fuori dominio.
    """
    kind = model or raw.get("model")
    if kind not in ("cp", "tucker"):
        raise ConfigError(f"expected 'cp' or 'tucker', got {kind!r}", "model")
    input_path = _convert(raw, "input", Path)
    out = _convert(raw, "out", Path)
    mesh = _convert(raw, "mesh", Path)
    try:
        return RunConfig(
            model=kind,
            input_path=input_path,
            synth=build_synth_spec(raw),
            rank=_convert(raw, "rank", int) if kind == "cp" else None,
            tolerance=_convert(raw, "tol", float) if kind == "tucker" else None,
            tucker_ranks=_convert(raw, "tucker.ranks", parse_int_list) if kind == "tucker" else None,
            variable_mode=_convert(raw, "variable_mode", int) or 0,
            scaling=cast(
                Any,
                _convert(raw, "scaling", _choice(("mean-std", "none", "max-abs"))) or "mean-std",
            ),
            qois=build_qoi_specs(raw),
            optimizer=cast(
                Any, _convert(raw, "optimizer", _choice(("tr-newton", "lbfgs"))) or "tr-newton"
            ),
            opt=build_opt_config(raw),
            als_tolerance=_fallback(_convert(raw, "als.tol", float), 1e-4),
            als_max_iterations=_convert(raw, "als.max_iterations", int) or 100,
            seed=_convert(raw, "seed", int) or 0,
            output_dir=out,
            mesh_path=mesh,
            mu0=_fallback(_convert(raw, "mu0", float), 1.0),
        )
    except ValueError as e:
        raise ConfigError(str(e), "config") from e


def build_sweep_settings(raw: Mapping[str, str], model: str) -> tuple[float, ...]:
    """Ranghi (sweep.ranks, per CP) o tolleranze (sweep.tols, per Tucker) dello sweep.

    Raises:
        ConfigError: Chiave assente o lista non valida.
    """
    if model == "cp":
        ranks = _convert(raw, "sweep.ranks", parse_int_list)
        if ranks is None:
            raise ConfigError("a CP sweep needs a list of ranks", "sweep.ranks")
        return tuple(float(r) for r in ranks)
    tols = _convert(raw, "sweep.tols", parse_float_list)
    if tols is None:
        raise ConfigError("a Tucker sweep needs a list of tolerances", "sweep.tols")
    return tols


def _fallback(value: float | None, default: float) -> float:
    return default if value is None else value
