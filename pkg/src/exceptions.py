"""
Error types shared across the simulator, controllers and experiment runner
"""


class AAECError(Exception):
    """Base class for all benchmark errors"""


class DimensionError(AAECError, ValueError):
    """Image is smaller than an operation requires"""


class RegionError(AAECError, ValueError):
    """Rectangle lies outside the image or leaves too few pixels"""


class ExposureRangeError(AAECError, ValueError):
    """Exposure time outside the camera's [dt_min, dt_max]"""


class ScenarioError(AAECError, ValueError):
    """Unknown lighting scenario label"""


class TrajectoryError(AAECError, ValueError):
    """Invalid trajectory query or unsupported trajectory kind"""


class DegenerateGeometryError(AAECError, ValueError):
    """Point configuration admits no unique solution"""


class DetectionStateError(AAECError, ValueError):
    """Operation requires a successful detection"""


class ConfigError(AAECError, ValueError):
    """Experiment configuration is invalid"""


class RecordFormatError(AAECError, ValueError):
    """A run or summary CSV cannot be parsed"""
