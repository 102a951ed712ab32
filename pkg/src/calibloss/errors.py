"""Exception types raised across the package.

All of them derive from :class:`CaliblossError`, which itself is a
``ValueError`` so callers that only care about bad input can catch that.
"""


class CaliblossError(ValueError):
    pass


class NegativeProbability(CaliblossError):
    pass


class SumOutOfTolerance(CaliblossError):
    def __init__(self, total):
        super().__init__(f"probabilities sum to {total!r}, not 1")
        self.total = total


class DomainMismatch(CaliblossError):
    pass


class InvalidPartition(CaliblossError):
    pass


class DomainTooLarge(CaliblossError):
    pass


class ZeroMassBucket(CaliblossError):
    pass


class ViolationAt(CaliblossError):
    def __init__(self, z, slack, what="left-strong concavity"):
        super().__init__(f"{what} violated at z={z!r} (slack {slack!r})")
        self.z = z
        self.slack = slack
        self.what = what


class MissingRate(CaliblossError):
    pass


class GrowthEnvelopeTooFast(CaliblossError):
    pass


class ParameterOutOfRange(CaliblossError):
    pass


class InsufficientSamples(CaliblossError):
    def __init__(self, m, required):
        super().__init__(f"{m} samples given, at least {required} required")
        self.m = m
        self.required = required


class DegenerateInput(CaliblossError):
    pass


class UndefinedGradient(CaliblossError):
    pass


class OddDomain(CaliblossError):
    pass


class InvalidShape(CaliblossError):
    pass


class EmptyCorpus(CaliblossError):
    pass


class BadLine(CaliblossError):
    def __init__(self, lineno, line):
        super().__init__(f"line {lineno}: cannot parse {line!r}")
        self.lineno = lineno


class AlphabetMismatch(CaliblossError):
    pass
