"""Exception hierarchy shared by every stage of the synthesis pipeline."""


class CartonSynthError(Exception):
    """Base class for all library errors."""


class ConfigError(CartonSynthError):
    """Invalid synthesis configuration or unusable inputs at startup."""


class AnnotationParseError(CartonSynthError):
    """Malformed skeleton annotation document."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class AnnotationValidationError(CartonSynthError):
    """A record or instance breaks a structural invariant."""

    def __init__(self, message, instance_id=None):
        self.instance_id = instance_id
        if instance_id is not None:
            message = f"instance {instance_id}: {message}"
        super().__init__(message)


class SegmentationError(CartonSynthError):
    pass


class CoverageError(SegmentationError):
    """Extracted loops do not partition the clicked edge set."""


class SurfaceCountError(SegmentationError):
    """An instance yielded no surface or more than three."""


class GeometryError(CartonSynthError):
    pass


class DegenerateEdgeError(GeometryError):
    pass


class DegenerateCornerError(GeometryError):
    pass


class ReconstructionError(GeometryError):
    """No admissible parallelogram could be built for a surface."""

    def __init__(self, message, instance_id=None, surface_index=None):
        self.instance_id = instance_id
        self.surface_index = surface_index
        tags = []
        if instance_id is not None:
            tags.append(f"instance {instance_id}")
        if surface_index is not None:
            tags.append(f"surface {surface_index}")
        if tags:
            message = f"{', '.join(tags)}: {message}"
        super().__init__(message)


class SingularHomographyError(GeometryError):
    pass


class TextureLoadError(CartonSynthError):
    def __init__(self, message, patch_id=None):
        self.patch_id = patch_id
        if patch_id is not None:
            message = f"patch {patch_id}: {message}"
        super().__init__(message)


class SamplingError(CartonSynthError):
    pass


class DimensionMismatchError(CartonSynthError):
    pass
