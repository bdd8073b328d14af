"""Exception types shared across the package."""


class PalmetricError(Exception):
    """Base class for all palmetric errors."""


class PipelineError(PalmetricError):
    """Failure in a named stage of the image-measurement pipeline."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class DesignError(PalmetricError):
    """The observation set does not form the required balanced design."""


class CohortError(PalmetricError):
    """A cohort filter matched no records."""


class CatalogError(PalmetricError):
    """Key-combination catalog is missing an entry or malformed."""


class PairingError(PalmetricError):
    """Manual/automatic measurement records could not be paired."""
