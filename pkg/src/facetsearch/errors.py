"""Exception types raised across the package."""


class FacetSearchError(Exception):
    """Base class for all domain errors."""


class DuplicateAsin(FacetSearchError):
    def __init__(self, asin: str):
        super().__init__(f"duplicate asin: {asin!r}")
        self.asin = asin


class MalformedRecord(FacetSearchError):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"malformed record at line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class OutOfRangeRating(FacetSearchError):
    def __init__(self, line_number: int, value: float):
        super().__init__(f"average_rating {value} out of [0, 5] at line {line_number}")
        self.line_number = line_number
        self.value = value


class DimensionMismatch(FacetSearchError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"dimension mismatch: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class NonSquare(FacetSearchError):
    """Score matrix is not square."""


class EmptyTrainingSet(FacetSearchError):
    """No training pairs were supplied."""


class TooFewVectors(FacetSearchError):
    def __init__(self, needed: int, got: int):
        super().__init__(f"need at least {needed} vectors to train, got {got}")
        self.needed = needed
        self.got = got


class DuplicateId(FacetSearchError):
    def __init__(self, id_: int):
        super().__init__(f"duplicate vector id: {id_}")
        self.id = id_


class NprobeOutOfRange(FacetSearchError):
    def __init__(self, nprobe: int, nlist: int):
        super().__init__(f"nprobe {nprobe} outside [1, {nlist}]")
        self.nprobe = nprobe
        self.nlist = nlist


class CorruptFile(FacetSearchError):
    def __init__(self, reason: str):
        super().__init__(f"corrupt file: {reason}")
        self.reason = reason


class VersionMismatch(FacetSearchError):
    def __init__(self, expected: int, got: int, what: str = "format version"):
        super().__init__(f"{what} mismatch: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class InconsistentBounds(FacetSearchError):
    def __init__(self, field: str, lo: float, hi: float):
        super().__init__(f"resolved {field} bounds inconsistent: min {lo} > max {hi}")
        self.field = field
        self.lo = lo
        self.hi = hi


class ParseError(FacetSearchError):
    def __init__(self, position: int, reason: str):
        super().__init__(f"parse error at position {position}: {reason}")
        self.position = position
        self.reason = reason


class MissingAsin(FacetSearchError):
    def __init__(self, asin: str):
        super().__init__(f"judged asin not present in catalog: {asin!r}")
        self.asin = asin


class EmptyRelevantSet(FacetSearchError):
    """recall@k is undefined for an empty relevant set."""
