"""Exception hierarchy shared by every stage of the pipeline."""


class VoiceCloneError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedFormat(VoiceCloneError, ValueError):
    pass


class CorruptHeader(VoiceCloneError, ValueError):
    pass


class EmptyClip(VoiceCloneError, ValueError):
    pass


class SignalTooShort(VoiceCloneError, ValueError):
    pass


class SampleRateMismatch(VoiceCloneError, ValueError):
    pass


class DegenerateFilter(VoiceCloneError, ValueError):
    pass


class ShapeMismatch(VoiceCloneError, ValueError):
    pass


class EmptyInput(VoiceCloneError, ValueError):
    pass


class EmptyVector(VoiceCloneError, ValueError):
    pass


class ConfigError(VoiceCloneError, ValueError):
    pass


class TooManySamples(VoiceCloneError, ValueError):
    pass


class SampleTooShort(VoiceCloneError, ValueError):
    """A cloning sample is shorter than one STFT frame after trimming."""

    def __init__(self, index, length, required, source=None):
        self.index = index
        self.length = length
        self.required = required
        self.source = source
        where = f" ({source})" if source else ""
        super().__init__(
            f"sample {index}{where} has {length} samples after trimming, "
            f"need at least {required}"
        )


class LabelOutOfRange(VoiceCloneError, ValueError):
    pass


class DatasetTooSmall(VoiceCloneError, ValueError):
    pass


class DuplicateSpeaker(VoiceCloneError, ValueError):
    def __init__(self, speaker_id):
        self.speaker_id = speaker_id
        super().__init__(f"speaker {speaker_id!r} is already enrolled")


class ConfigMismatch(VoiceCloneError, ValueError):
    pass


class ZeroVector(VoiceCloneError, ValueError):
    pass


class LengthMismatch(VoiceCloneError, ValueError):
    pass


class EmptyStore(VoiceCloneError, LookupError):
    pass


class AudioFileError(VoiceCloneError):
    """Wraps an error raised while processing a specific input file."""

    def __init__(self, path, cause):
        self.path = str(path)
        self.cause = cause
        super().__init__(f"{path}: {cause}")
