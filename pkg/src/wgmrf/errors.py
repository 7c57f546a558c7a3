"""Exception hierarchy.  Each class carries a stable machine-readable code."""


class WgmrfError(Exception):
    code = "internal"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"error": self.code, "message": str(self)}
        out.update({k: v for k, v in self.details.items() if _jsonable(v)})
        return out


def _jsonable(v):
    return isinstance(v, (str, int, float, bool, list, tuple, dict)) or v is None


class MeshError(WgmrfError):
    code = "mesh_invalid"


class ParseError(MeshError):
    code = "parse_error"


class DisconnectedGraphError(MeshError):
    code = "disconnected_graph"


class IsolatedNodeError(MeshError):
    code = "isolated_node"


class DimensionError(WgmrfError, ValueError):
    code = "dimension_mismatch"


class NotPositiveDefiniteError(WgmrfError):
    code = "not_positive_definite"


class ConvergenceError(WgmrfError):
    code = "no_convergence"


class LineSearchError(WgmrfError):
    code = "line_search_failed"


class DegenerateDirectionError(WgmrfError):
    code = "degenerate_direction"


class BasisError(WgmrfError):
    """Basis construction failed at ``index``; ``partial`` holds the vectors computed so far."""

    code = "basis_failed"


class EmptyWeightsError(WgmrfError):
    code = "empty_weights"


class DegenerateGridError(WgmrfError):
    code = "degenerate_grid"


class InsufficientDataError(WgmrfError):
    code = "insufficient_data"


class AlignmentError(WgmrfError):
    code = "sample_misalignment"


class UndefinedCorrelationError(WgmrfError):
    code = "undefined_correlation"


class ConfigError(WgmrfError):
    code = "config_invalid"
