"""Exception types for the extraction adapter."""


class ExtractError(Exception):
    """Base error for the extraction adapter."""


class ExtractionFailure(ExtractError):
    """No usable frames could be produced from the given inputs."""


class ProfileError(ExtractError):
    """An extraction profile is internally inconsistent."""
