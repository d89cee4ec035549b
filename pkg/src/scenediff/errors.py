"""Exception types shared across the toolchain.

All domain failures derive from ScenediffError so the CLI can map them to
exit code 1 with a single machine-readable stderr line.
"""


class ScenediffError(Exception):
    """Base class for all scenediff domain errors."""


class FormatError(ScenediffError):
    """A file does not conform to its binary or text layout."""


class ValidationError(ScenediffError):
    """Data violates a documented invariant (bounds, dimensions, coverage)."""


class LearningError(ScenediffError):
    """A vocabulary cannot be learned from the given training data."""


class RetrievalError(ScenediffError):
    """Localization cannot produce a result (e.g. empty index)."""


class ScoringError(ScenediffError):
    """Change scoring cannot be evaluated (e.g. empty reference pool)."""


class PairingError(ScenediffError):
    """The test pairing protocol leaves no usable reference frames."""


class ConfigurationError(ScenediffError):
    """Run configuration is inconsistent or incomplete."""


class GenerationError(ScenediffError):
    """A synthetic world config cannot be realized."""
