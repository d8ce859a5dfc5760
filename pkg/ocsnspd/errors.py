class OCSNSPDException(Exception):
    """Base ocsnspd exception.
    Use this to catch all exceptions raised by this library.
    """

    pass

class WavelengthRangeError(OCSNSPDException):
    """Wavelength Range Error.
    Raised when a wavelength lies outside the tabulated span of a material or an absorptance map.

    :param material_id: the material (or map) that was queried
    :param span: the valid ``(low, high)`` wavelength span in meters
    """

    def __init__(self, message: str, material_id: str = None, span: tuple[float, float] = None):
        super().__init__(message)
        self.material_id = material_id
        self.span = span

class MaterialNotFoundError(OCSNSPDException):
    """Material Not Found Error.
    Raised when no dispersion file exists for a material id.
    """

    pass

class MaterialFormatError(OCSNSPDException):
    """Material Format Error.
    Raised when a dispersion file is empty, unsorted, or holds non-physical values.
    """

    pass

class DomainError(OCSNSPDException, ValueError):
    """Domain Error.
    Raised when an argument lies outside the domain of the operation, such as a fill factor outside [0, 1].
    """

    pass

class ComputationError(OCSNSPDException):
    """Computation Error.
    Raised when numerics break down, for example a singular stack matrix or a non-finite objective.

    :param diagnostic: extra detail on the failing quantity
    """

    def __init__(self, message: str, diagnostic: str = None):
        super().__init__(message if diagnostic is None else f'{message} ({diagnostic})')
        self.diagnostic = diagnostic

class InternalConsistencyError(OCSNSPDException):
    """Internal Consistency Error.
    Raised when a physically impossible state is reached, such as a Gaussian beam parameter with Im(q) <= 0.
    """

    pass

class ExtrapolationError(OCSNSPDException):
    """Extrapolation Error.
    Raised when a dark-count target lies outside the span of a computed curve.
    """

    pass

class FitError(OCSNSPDException):
    """Fit Error.
    Raised when a calibration fit is underdetermined or does not converge.

    :param missing: degrees of freedom that the observations do not constrain
    :param best_parameters: best parameters found before giving up, if any
    """

    def __init__(self, message: str, missing: list[str] = None, best_parameters: dict = None):
        super().__init__(message)
        self.missing = missing or []
        self.best_parameters = best_parameters

class InfeasibleDesignError(OCSNSPDException):
    """Infeasible Design Error.
    Raised when no optimizer start satisfies the design constraints.

    :param candidate: the best infeasible candidate
    """

    def __init__(self, message: str, candidate=None):
        super().__init__(message)
        self.candidate = candidate

class ConfigurationError(OCSNSPDException):
    """Configuration Error.
    Raised when a configuration file or option is invalid.
    """

    pass

class UsageError(OCSNSPDException):
    """Usage Error.
    Raised by the command line frontend for invalid invocations.
    """

    pass
