"""Exception and warning types shared across the workbench."""


class AFZError(Exception):
    """Base class for every error raised by the workbench."""

    exit_code = 1


class ConfigError(AFZError):
    exit_code = 2


class NumericalError(AFZError):
    exit_code = 3


class NonPositiveValue(ConfigError, ValueError):
    def __init__(self, field, value=None, line=None):
        self.field = field
        self.value = value
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field} must be strictly positive, got {value!r}{where}")


class ConfigSyntaxError(ConfigError):
    def __init__(self, message, line, col):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, column {col}: {message}")


class UnknownKey(ConfigError, KeyError):
    def __init__(self, name, line=None, section=None):
        self.name = name
        self.line = line
        self.section = section
        where = f"[{section}] " if section else ""
        at = f" (line {line})" if line is not None else ""
        super().__init__(f"unknown key {where}{name!r}{at}")

    def __str__(self):
        return self.args[0]


class UnitViolation(ConfigError, ValueError):
    def __init__(self, key, unit, expected, line=None):
        self.key = key
        self.unit = unit
        self.expected = expected
        self.line = line
        at = f" (line {line})" if line is not None else ""
        want = f"'{expected}'" if expected else "no unit"
        super().__init__(f"{key}: unit {unit!r} is not compatible with {want}{at}")


class MissingSection(ConfigError):
    def __init__(self, sections, message=None):
        self.sections = tuple(sections)
        super().__init__(message or "missing required section(s): "
                         + ", ".join(f"[{s}]" for s in self.sections))


class IoError(AFZError, OSError):
    exit_code = 2


class DomainError(ConfigError, ValueError):
    pass


class DutyOutOfRange(DomainError):
    def __init__(self, duty, limit):
        self.duty = duty
        self.limit = limit
        super().__init__(f"duty cycle {duty:.6g} outside (0, {limit:.6g})")


class ResetImpossible(DomainError):
    def __init__(self, f_res, f_sw):
        self.f_res = f_res
        self.f_sw = f_sw
        super().__init__(
            f"resonant reset half-period exceeds the switching period "
            f"(f_res={f_res:.6g} Hz <= f_sw/2={f_sw / 2:.6g} Hz)")


class IntervalOverlap(DomainError):
    def __init__(self, duty, total, period):
        self.duty = duty
        self.total = total
        self.period = period
        super().__init__(
            f"interval durations {total:.6g} s exceed the switching period "
            f"{period:.6g} s at D={duty:.6g}")


class MissingLossParams(ConfigError):
    def __init__(self, fields):
        self.fields = tuple(fields)
        super().__init__("missing loss parameters: " + ", ".join(self.fields))


class NoConvergence(NumericalError):
    def __init__(self, iterations, residuals):
        self.iterations = iterations
        self.residuals = residuals
        super().__init__(f"no convergence after {iterations} iterations, residuals={residuals}")


class NonPhysicalRoot(NumericalError):
    pass


class UnreachableMode(NumericalError):
    pass


class EventStorm(NumericalError):
    pass


class NonFinite(NumericalError):
    pass


class NoSettle(NumericalError):
    def __init__(self, periods, delta):
        self.periods = periods
        self.delta = delta
        super().__init__(f"no periodic steady state after {periods} periods (last delta {delta:.3g})")


class FrequencyMismatch(AFZError, ValueError):
    pass


class VerificationFailed(AFZError):
    exit_code = 4


class ApproximationWarning(UserWarning):
    """Parasitic values large enough to break the small-parasitic approximations."""


class AliasWarning(UserWarning):
    pass


class DCMWarning(UserWarning):
    pass
