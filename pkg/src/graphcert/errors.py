"""Semantic exception hierarchy.

Every refusable condition gets its own class so callers (and the protocol's
diagnostic report) can distinguish "your input is malformed" from "no
certificate is available for this claim". All classes derive from
:class:`GraphCertError`, itself a ``ValueError``.
"""


class GraphCertError(ValueError):
    """Base class for all graphcert errors."""


# ---------------------------------------------------------------------------
# model construction / sampling

class OutOfRangeProbability(GraphCertError):
    """An edge probability produced by a model spec left [0, 1].

    Carries the offending index pair and value; the matrix is rejected,
    never clipped.
    """

    def __init__(self, i: int, j: int, value: float):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"P[{i},{j}] = {value!r} outside [0, 1]")


class MalformedMembership(GraphCertError):
    """A membership matrix row is not one-hot."""


class OddN(GraphCertError):
    """The equal-two-block closed form requires an even node count."""


# ---------------------------------------------------------------------------
# linear algebra

class NotSymmetric(GraphCertError):
    """Input matrix fails the symmetry tolerance (max-abs 1e-10)."""


class KOutOfRange(GraphCertError):
    """Target dimension k outside {1, ..., n-1}."""


class ShapeMismatch(GraphCertError):
    """Operands have incompatible shapes."""


# ---------------------------------------------------------------------------
# concentration / certificates

class BadLevel(GraphCertError):
    """Confidence level alpha outside (0, 1)."""


class NonpositiveGap(GraphCertError):
    """A gap certificate of 0 (or less) cannot produce a radius."""


class NoGapCertificate(GraphCertError):
    """Refusal: no positive spectral-gap certificate is available."""


# ---------------------------------------------------------------------------
# inference

class DuplicateCenters(GraphCertError):
    """Two declared cluster centers coincide."""


class TooManyLabelsForExact(GraphCertError):
    """Exact permutation enumeration is limited to K <= 8 labels."""


class NonpositiveMargin(GraphCertError):
    """A separation margin must be strictly positive."""


class OutsideDomain(GraphCertError):
    """A centrality functional was evaluated outside its certified domain."""

    def __init__(self, rho: float, limit: float):
        self.rho, self.limit = rho, limit
        super().__init__(
            f"spectral radius {rho!r} exceeds the certified domain limit {limit!r}"
        )


class DegenerateTopEigenvalue(GraphCertError):
    """Eigenvector centrality needs a simple top eigenvalue."""


# ---------------------------------------------------------------------------
# downstream

class EmptyGroup(GraphCertError):
    """Both protected groups must be nonempty."""


class InsufficientTolerance(GraphCertError):
    """The parity tolerance is smaller than the score-band slack r/tau."""


# ---------------------------------------------------------------------------
# protocol / simulation

class UnsupportedSpec(GraphCertError):
    """A parametric gap certificate is only computed for SBM specs."""


class TooSmall(GraphCertError):
    """Collision construction needs n >= 2k + 2."""


class NoTiePresent(GraphCertError):
    """The tie counterexample needs at least two admissible top-m sets."""
