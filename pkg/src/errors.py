"""
Error Taxonomy
--------------
Every failure the simulator reports derives from OptoloopError. The CLI maps
the class to an exit status: configuration 2, numerical 3 (I/O is 4, raised
as plain OSError).
"""


class OptoloopError(Exception):
    exit_code = 3


class ConfigError(OptoloopError):
    """Invalid run configuration or command line"""
    exit_code = 2


class ParameterError(ConfigError):
    """Physical parameters outside their valid range"""


class NumericalError(OptoloopError):
    exit_code = 3


class NonConvergence(NumericalError):
    def __init__(self, message, best_residual=float('nan'), iterations=0):
        super().__init__(message)
        self.best_residual = best_residual
        self.iterations = iterations


class DefectiveMatrix(NumericalError):
    def __init__(self, message, cond_u=float('inf')):
        super().__init__(message)
        self.cond_u = cond_u


class Unstable(NumericalError):
    def __init__(self, message, max_real=float('nan')):
        super().__init__(message)
        self.max_real = max_real


class QuadratureNotConverged(NumericalError):
    def __init__(self, message, rel_change=float('nan')):
        super().__init__(message)
        self.rel_change = rel_change


class NotFound(NumericalError):
    def __init__(self, message, best_measure=float('nan')):
        super().__init__(message)
        self.best_measure = best_measure


class BlowUp(NumericalError):
    def __init__(self, message, time=float('nan')):
        super().__init__(message)
        self.time = time
