"""Exception classes. Each carries the CLI exit code for its class."""


class RoadCorpusError(Exception):
    exit_code = 1


class BadInput(RoadCorpusError):
    exit_code = 2


class MalformedXml(BadInput):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class IoFailure(BadInput):
    pass


class EmptyNetwork(RoadCorpusError):
    exit_code = 3


class EmptyExtract(EmptyNetwork):
    pass


class SchemaError(RoadCorpusError):
    exit_code = 4


class UnknownRoad(RoadCorpusError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class DegeneratePair(RoadCorpusError, ValueError):
    pass


class UnsupportedAoi(BadInput):
    pass
