"""Exception types shared across the package."""


class PromptfillError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(PromptfillError, ValueError):
    """A config value violates its documented bounds."""


class VocabularyError(PromptfillError, ValueError):
    """Text contains a word outside the closed caption grammar."""


class MaskError(PromptfillError, ValueError):
    """A mask violates its invariants (empty, wrong shape, subset violation)."""


class PlacementError(PromptfillError, RuntimeError):
    """Scene generation could not place objects within the retry budget."""


class InvalidRequestError(PromptfillError, ValueError):
    """An inpaint request mixes fields inconsistently with its mode."""


class NonFiniteLossError(PromptfillError, RuntimeError):
    """Training produced a non-finite loss; diagnostic state was dumped."""


class CheckpointError(PromptfillError, RuntimeError):
    """Checkpoint is missing, corrupt, or schema-incompatible."""
