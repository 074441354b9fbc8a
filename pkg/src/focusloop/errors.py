"""Exception types shared across the pipeline."""


class FocusLoopError(Exception):
    """Base class for all package errors."""


class DuplicateStream(FocusLoopError):
    pass


class DescriptorMismatch(FocusLoopError):
    pass


class WindowUnderfull(FocusLoopError):
    pass


class FusionError(FocusLoopError):
    pass


class ModelContractError(FocusLoopError):
    pass


class DegenerateDataset(FocusLoopError):
    pass


class EmptyDataset(FocusLoopError):
    pass


class TemplateError(FocusLoopError):
    pass


class BackendUnavailable(FocusLoopError):
    pass


class ScenarioParseError(FocusLoopError):
    """Scenario file rejected; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ArchiveIntegrityError(FocusLoopError):
    """Session archive rejected; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
