"""Exception hierarchy.

Everything raised on bad input data derives from :class:`NetgramError`; the
CLI maps that base class to exit code 3.
"""


class NetgramError(Exception):
    pass


# alphabet config
class AlphabetError(NetgramError):
    pass


class DuplicateCharacter(AlphabetError):
    pass


class MalformedPredicate(AlphabetError):
    pass


class EmptyAlphabet(AlphabetError):
    pass


# ingestion
class IngestError(NetgramError):
    pass


class MalformedLine(IngestError):
    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class UnknownKind(MalformedLine):
    pass


class NegativeTimestamp(MalformedLine):
    pass


class MissingLabel(IngestError):
    pass


class DuplicateSampleId(IngestError):
    pass


class EmptyCorpus(IngestError):
    pass


# documents / features
class NoSizedEvents(NetgramError):
    pass


class EmptyVocabulary(NetgramError):
    pass


class SpecMismatch(NetgramError):
    pass


class VocabularyMismatch(NetgramError):
    pass


# learning
class TrainingError(NetgramError):
    pass


class SingleClassTraining(TrainingError):
    pass


class NonPositiveC(TrainingError):
    pass


class DimensionMismatch(TrainingError):
    pass


class KTooLarge(TrainingError):
    pass


class EmptyTrainingSet(TrainingError):
    pass


# evaluation / selection / synthesis
class EmptyConfusion(NetgramError):
    pass


class TooFewSamples(NetgramError):
    pass


class SingleClass(NetgramError):
    pass


class TargetTooLarge(NetgramError):
    pass


class BadStrength(NetgramError):
    pass
