"""Exception hierarchy shared across the package."""


class ChatExtractError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ChatExtractError):
    pass


# schema
class SchemaError(ChatExtractError):
    pass


class MalformedSchema(SchemaError):
    pass


class InvalidSchema(SchemaError):
    def __init__(self, rule: str, detail: str = ""):
        self.rule = rule
        super().__init__(f"{rule}: {detail}" if detail else rule)


class UnresolvedTemplate(SchemaError):
    pass


class UnknownType(ChatExtractError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


# templates
class TemplateError(ChatExtractError):
    pass


class SlotMissing(TemplateError):
    pass


class TaskMismatch(TemplateError):
    pass


# chat client
class ChatError(ChatExtractError):
    pass


class TransportError(ChatError):
    pass


class RateLimited(ChatError):
    pass


class ReplayMiss(ChatError):
    pass


class EmptyReply(ChatError):
    pass


class NetworkForbidden(ChatError):
    pass


class UnsupportedForm(ChatError):
    pass


# parse
class ParseError(ChatExtractError):
    pass


class Unparseable(ParseError):
    pass


class ArityMismatch(ParseError):
    pass


# datasets
class DatasetError(ChatExtractError):
    pass


class MalformedRecord(DatasetError):
    def __init__(self, path, line_no: int, detail: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {detail}")


class UnknownLabel(DatasetError):
    pass


class BadSize(DatasetError, ValueError):
    pass


# eval
class RegimeUnsupported(ChatExtractError):
    pass


class IdMismatch(ChatExtractError):
    pass
