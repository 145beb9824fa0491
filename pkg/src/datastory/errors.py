"""Exception types shared across the pipeline."""


class DataStoryError(Exception):
    """Base class for all pipeline errors."""


class InputError(DataStoryError):
    """Unreadable or malformed user input (tables, narratives, config)."""


class ScopeError(DataStoryError):
    """A fact filter referenced a column the table does not have."""


class GatewayError(DataStoryError):
    """Text-generation or embedding backend failure."""


class GatewayAuthError(GatewayError):
    """Backend rejected the credentials; never retried."""


class FixtureMissError(GatewayError):
    """Fixture backend has no recorded response for a request digest."""

    def __init__(self, digest: str, kind: str):
        super().__init__(f"no recorded {kind} fixture for digest {digest}")
        self.digest = digest
        self.kind = kind


class ClassificationError(DataStoryError):
    """Sentence classification reply could not be parsed."""

    def __init__(self, message: str, raw_reply: str):
        super().__init__(f"{message}: {raw_reply!r}")
        self.raw_reply = raw_reply


class SegmentationError(DataStoryError):
    """Clause segmentation reply does not reconstruct the sentence."""


class ExtractionError(DataStoryError):
    """All extraction sessions failed for a clause."""


class UnresolvedClauseError(DataStoryError):
    """A vague clause could not be resolved against any clear clause."""


class UnmappableFactError(DataStoryError):
    """No chart mapping applies to a fact (e.g. trend without a time axis)."""


class StoryboardError(DataStoryError):
    """Storyboard assembly received inconsistent frames/timing inputs."""
