"""Jerarquía de errores del laboratorio.

La CLI traduce cada familia a un código de salida:
0 éxito o inconcluso, 1 fallo de aserción, 2 error de uso/configuración.
"""


class QuestaError(Exception):
    """Error base de questa-lab"""

    exit_code: int = 2


class ConfigError(QuestaError, ValueError):
    """Configuración o argumentos inválidos"""

    @classmethod
    def from_validation(cls, error, source: str | None = None) -> "ConfigError":
        """Resume un pydantic.ValidationError con la ruta de cada campo"""
        problems = [
            f"{'.'.join(str(part) for part in item['loc']) or '<root>'}: {item['msg']}"
            for item in error.errors()
        ]
        prefix = f"{source}: " if source else ""
        return cls(prefix + "; ".join(problems))


class QuestionIndexError(QuestaError, IndexError):
    """Índice de pregunta o acción fuera de rango"""


class RecordError(QuestaError, ValueError):
    """Registro de corpus mal formado"""

    def __init__(self, message: str, line: int | None = None, record_id: str | None = None):
        self.line = line
        self.record_id = record_id
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class EmptySolutionError(RecordError):
    """La extracción de la solución dejó un texto vacío"""


class OracleError(QuestaError):
    """El oráculo de rollouts no pudo evaluar un registro"""


class FilterViolation(QuestaError, ValueError):
    """Un grupo con recompensas constantes llegó a la normalización de ventajas"""


class PreconditionError(QuestaError):
    """Un experimento teórico se niega a correr"""


class TargetUnreachable(QuestaError):
    """La búsqueda de eta por duplicación no alcanzó la masa objetivo"""

    exit_code = 1


class InvariantViolation(QuestaError, AssertionError):
    """Falló una observación de la prueba o una aserción estadística"""

    exit_code = 1
