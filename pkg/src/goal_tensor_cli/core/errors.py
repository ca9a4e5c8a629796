"""Custom exceptions for Goal Tensor CLI.

Aristotele: Ogni errore ha un significato preciso.

La CLI mappa le famiglie sui codici di uscita (2 per input non valido, 3 per
fallimenti numerici).
"""


class GoalTensorError(Exception):
    """Base exception per tutti gli errori dell'applicazione."""

    pass


class ValidationError(GoalTensorError):
    """Input utente o invarianti del dominio non rispettati."""

    pass


class ConfigError(ValidationError):
    """Chiave o valore di configurazione non valido."""

    def __init__(self, message: str, key: str | None = None):
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
        self.key = key


class DimensionError(ValidationError):
    """Dimensioni incompatibili o indice di modo fuori intervallo."""

    pass


class MeshError(ValidationError):
    """Mesh esaedrica inconsistente o elemento con Jacobiano non invertibile."""

    def __init__(self, message: str, element: int | None = None):
        if element is not None:
            message = f"element {element}: {message}"
        super().__init__(message)
        self.element = element


class QoIError(ValidationError):
    """Definizione di QoI non valida o valutazione fuori dominio."""

    pass


class TensorFormatError(GoalTensorError):
    """File tensore GOTD non leggibile."""

    pass


class BadMagicError(TensorFormatError):
    """I primi byte del file non sono 'GOTD'."""

    def __init__(self, found: bytes):
        super().__init__(f"Bad magic bytes: expected b'GOTD', found {found!r}")
        self.found = found


class TruncatedFileError(TensorFormatError):
    """Il file termina prima di header o payload."""

    pass


class NumericError(GoalTensorError):
    """Fallimento numerico: norma nulla, NaN, obiettivo non finito."""

    pass


class DensityError(QoIError, NumericError):
    """Densità non positiva in un punto di quadratura: energia cinetica non definita.

    Resta una QoIError per chi valuta le QoI, ma la CLI la tratta come fallimento
    numerico (codice 3).
    """

    pass


class FileSystemError(GoalTensorError):
    """Errore durante operazioni su file system."""

    pass
