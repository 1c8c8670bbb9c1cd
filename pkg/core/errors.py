"""Exception hierarchy shared by all packages."""


class OPSError(Exception):
    pass


class DimensionError(OPSError, ValueError):
    """Two arrays that must share a spatial size do not."""


class ConfigError(OPSError, ValueError):
    """Invalid configuration or input that contradicts it."""


class GenerationError(OPSError):
    pass


class DatasetError(OPSError):
    """Problem reading or validating a dataset; message names the sample or file."""


class KMeansError(OPSError):
    pass


class MetricsError(OPSError, ValueError):
    pass


class ProvenanceError(OPSError):
    """Pseudo labels do not match the checkpoint they claim to come from."""
