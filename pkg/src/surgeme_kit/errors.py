"""Exception hierarchy shared by all surgeme_kit modules."""


class SurgemeKitError(Exception):
    """Base class for all errors raised by this package."""


class UnknownClassError(SurgemeKitError):
    """A surgeme name does not match any of the seven known classes."""


class FormatError(SurgemeKitError):
    """A data file violates the canonical on-disk format."""


class EmptyFileError(FormatError):
    """A kinematics file contains no data rows."""


class OverlapError(FormatError):
    """Two annotation records overlap beyond the configured tolerance."""


class NotARotationError(SurgemeKitError):
    """A 3x3 orientation block is too far from an orthonormal rotation."""


class ZeroQuaternionError(SurgemeKitError):
    """A quaternion with (near-)zero norm cannot encode an orientation."""


class GripperRangeError(SurgemeKitError):
    """A raw gripper channel lies outside the profile's declared range."""


class TooShortError(SurgemeKitError):
    """A segment has fewer than two frames, so interpolation is undefined."""


class JointsUnavailableError(SurgemeKitError):
    """Joint features requested for frames that carry no joint angles."""


class EmptyDataError(SurgemeKitError):
    """A learner received zero training rows."""


class SingleClassError(SurgemeKitError):
    """SVM training needs at least two distinct classes."""


class DivergedError(SurgemeKitError):
    """MLP training loss became non-finite."""


class DimMismatchError(SurgemeKitError):
    """Prediction input dimension differs from training dimension."""


class IoError(SurgemeKitError):
    """A model container is structurally corrupt (truncated, bad block)."""


class VersionMismatchError(SurgemeKitError):
    """A model file carries an unknown magic or an unsupported version."""


class TooFewPerClassError(SurgemeKitError):
    """Some class has fewer segments than the requested fold count."""


class MissingDomainError(SurgemeKitError):
    """Domain-transfer needs both simulated and real segments."""


class InvalidParamsError(SurgemeKitError):
    """Generator or experiment parameters outside their declared ranges."""


class ConfigError(SurgemeKitError):
    """A config file has unknown keys or inconsistent settings."""
