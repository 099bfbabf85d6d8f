"""Exception taxonomy.

Every rejection the library can emit is a named subclass of PgcError, so the
CLI can map failure classes to exit codes and tests can assert on the exact
failure mode instead of matching message strings.
"""


class PgcError(Exception):
    """Base class for all library errors."""


# ---------------------------------------------------------------------------
# algebra construction / elementwise
# ---------------------------------------------------------------------------

class EmptyAlgebra(PgcError):
    pass


class NonNormalizedTrace(PgcError):
    pass


class OwnerMismatch(PgcError):
    pass


class DimensionMismatch(PgcError):
    pass


class NotAnAlgebra(PgcError):
    pass


class NotNormal(PgcError):
    pass


# ---------------------------------------------------------------------------
# inclusion / tower
# ---------------------------------------------------------------------------

class DisconnectedDiagram(PgcError):
    pass


class ZeroRow(PgcError):
    pass


class LevelMismatch(PgcError):
    pass


class TraceNotMarkov(PgcError):
    pass


class BasisConstructionFailed(PgcError):
    pass


class NotPositive(PgcError):
    pass


class ExceedsDeskScale(PgcError):
    pass


# ---------------------------------------------------------------------------
# two-box spaces
# ---------------------------------------------------------------------------

class WrongSide(PgcError):
    pass


class SideMismatch(PgcError):
    pass


class TowerMismatch(PgcError):
    pass


class NotAProjection(PgcError):
    pass


class NotABiprojection(PgcError):
    pass


class NoStabilization(PgcError):
    pass


class NotFPositive(PgcError):
    pass


class NotNormalized(PgcError):
    pass


class GroupFitFailed(PgcError):
    pass


class DecompositionFailed(PgcError):
    pass


class PreconditionFailed(PgcError):
    pass


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------

class NotBimodular(PgcError):
    pass


class DoesNotPreserveM(PgcError):
    pass


class SpanningSetDeficient(PgcError):
    pass


class OracleDisagreement(PgcError):
    """Two independent routes to the same fact disagree: internal bug."""


class SingularUnit(PgcError):
    pass


class NotCP(PgcError):
    pass


# ---------------------------------------------------------------------------
# spectral program
# ---------------------------------------------------------------------------

class RouteDisagreement(OracleDisagreement):
    pass


class NotContractive(PgcError):
    pass


class RadiusNotOne(PgcError):
    pass


class NoPositiveEigenvector(PgcError):
    pass


class FPositiveSearchFailed(PgcError):
    def __init__(self, message, subspace=None):
        super().__init__(message)
        self.subspace = subspace


class NoInvariantState(PgcError):
    pass


class FixedAlgebraNotFactor(PgcError):
    pass


class PatchingFailed(PgcError):
    pass


class HypothesisUnmet(PgcError):
    pass


# ---------------------------------------------------------------------------
# harness
# ---------------------------------------------------------------------------

class SchemaError(PgcError):
    """Instance file failed validation; carries (path, message) pairs."""

    def __init__(self, issues):
        if isinstance(issues, str):
            issues = [("", issues)]
        self.issues = list(issues)
        super().__init__("; ".join(f"{p}: {m}" if p else m for p, m in self.issues))


class UnknownGenerator(PgcError):
    pass


class BadParams(PgcError):
    pass
