"""Exception hierarchy for the toolkit.

The CLI maps these onto exit codes: input/parse problems exit 2,
data-consistency problems exit 3, bad user arguments exit 4.
"""


class SenseknnError(Exception):
    """Base class for all toolkit errors."""


class InputError(SenseknnError):
    """A referenced input path is missing or unreadable."""


class CorpusParseError(SenseknnError):
    """Malformed corpus XML or answer-key syntax."""


class ConsistencyError(SenseknnError):
    """Ids, counts, or dimensions disagree between inputs."""


class EmbeddingFormatError(SenseknnError):
    """Embedding file framing is broken (magic, truncation, count drift)."""


class VectorValidationError(SenseknnError):
    """A stored vector is unusable (NaN/Inf component, all-zero)."""


class ZeroNormError(SenseknnError):
    """Cosine similarity is undefined for a zero-norm vector."""


class ClassifierError(SenseknnError):
    """Classification cannot produce a prediction."""


class ProjectionError(SenseknnError):
    """t-SNE projection failed (diverged or got unusable input)."""


class EmptySelectionError(SenseknnError):
    """A point selection came back empty; nothing to plot."""


class UserArgumentError(SenseknnError):
    """A command-line argument does not make sense."""
