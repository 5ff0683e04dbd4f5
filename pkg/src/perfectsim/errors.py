"""Exception types. Each carries a machine-parsable ``code``."""


class PerfectSimError(Exception):
    code = "error"


class UnsupportedKernel(PerfectSimError):
    code = "kernel.unsupported"


class InadmissibleHistory(PerfectSimError):
    code = "history.inadmissible"


class NegativeIncrement(PerfectSimError):
    code = "layout.negative_increment"


class NormalizationError(PerfectSimError):
    code = "layout.normalization"


class DepthCapExceeded(PerfectSimError):
    code = "cap.exceeded"


class DegenerateRegime(PerfectSimError):
    code = "hybrid.degenerate"


class NotFiniteMemory(PerfectSimError):
    code = "oracle.not_finite_memory"


class SupportMismatch(PerfectSimError):
    code = "verify.support_mismatch"


class ConfigError(PerfectSimError):
    code = "config.invalid"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code
