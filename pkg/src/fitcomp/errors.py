"""Exception hierarchy shared by every fitcomp module."""


class FitcompError(ValueError):
    """Base class. ``code`` is the machine-readable name used by the CLI."""

    code = "FitcompError"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"error": self.code, "message": str(self)}
        out.update({k: v for k, v in self.details.items() if v is not None})
        return out


def _make(name, doc):
    return type(name, (FitcompError,), {"code": name, "__doc__": doc})


EmptyInput = _make("EmptyInput", "No flow records were supplied.")
NegativeValue = _make("NegativeValue", "A flow value is negative.")
NonFiniteValue = _make("NonFiniteValue", "A flow value is NaN or infinite.")
AllPruned = _make("AllPruned", "Pruning or binarization removed every row or column.")
NotPruned = _make("NotPruned", "A zero row or column sum was found where positivity is required.")
DuplicateLabel = _make("DuplicateLabel", "Country or product identifiers repeat.")
ZeroFitness = _make("ZeroFitness", "A country score underflowed to exactly zero.")
MaxIterationsExceeded = _make("MaxIterationsExceeded", "Rank-stable stopping never fired.")
DegenerateDistribution = _make("DegenerateDistribution", "A vector has zero variance.")
EquivalenceViolation = _make("EquivalenceViolation", "Fitness and ECI+ iterates are not proportional.")
LengthMismatch = _make("LengthMismatch", "Paired vectors have different lengths.")
LabelMismatch = _make("LabelMismatch", "Two score files do not share the same label set.")
ParseError = _make("ParseError", "Malformed input file.")
ConfigError = _make("ConfigError", "Invalid algorithm configuration.")
