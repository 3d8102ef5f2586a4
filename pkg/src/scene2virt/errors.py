"""Exception hierarchy shared by all modules."""


class Scene2VirtError(Exception):
    """Base class for data errors (CLI exit code 2)."""


class ParseError(Scene2VirtError):
    pass


class SchemaError(Scene2VirtError):
    """Ontology schema is inconsistent (cycle, dangling reference, ...)."""

    def __init__(self, message, identifier=None):
        super().__init__(message)
        self.identifier = identifier


class GraphError(Scene2VirtError):
    """Scene graph invariant violation or bad edit target."""

    def __init__(self, message, identifier=None):
        super().__init__(message)
        self.identifier = identifier


class InferenceError(Scene2VirtError):
    pass


class SelectionError(Scene2VirtError):
    pass


class AnalysisError(Scene2VirtError):
    pass


class SynthesisError(Scene2VirtError):
    pass


class StageError(Scene2VirtError):
    def __init__(self, stage_id, cause):
        super().__init__(f"stage {stage_id!r} failed: {cause}")
        self.stage_id = stage_id
        self.cause = cause


class StoreCorruption(Scene2VirtError):
    pass
