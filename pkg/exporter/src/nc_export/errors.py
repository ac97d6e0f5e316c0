class NcExportError(Exception):
    """Base class for exporter errors."""


class CheckpointLoadError(NcExportError):
    pass


class LayerNotFound(NcExportError):
    pass


class AudioDecodeError(NcExportError):
    pass


class NonFiniteValue(NcExportError):
    pass


class MalformedManifest(NcExportError):
    pass


class FixtureTooLarge(NcExportError):
    pass
