"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`ScenecfError`
and carries a short ``category`` used by the command line for its messages.
"""


class ScenecfError(Exception):
    category = "error"


class ParseError(ScenecfError, ValueError):
    category = "parse"


class ConsistencyError(ScenecfError, ValueError):
    category = "consistency"


class CapacityError(ScenecfError, ValueError):
    category = "capacity"


class StructureError(ScenecfError, ValueError):
    category = "structure"


class ConnectivityError(ScenecfError, ValueError):
    category = "connectivity"


class ConceptLookupError(ScenecfError, KeyError):
    category = "lookup"

    def __str__(self):
        # KeyError quotes its argument; keep messages readable
        return str(self.args[0]) if self.args else ""


class SizeError(ScenecfError, ValueError):
    category = "size"


class ShapeError(ScenecfError, ValueError):
    category = "shape"


class EligibilityError(ScenecfError, ValueError):
    category = "eligibility"


class DivergenceError(ScenecfError, ValueError):
    category = "divergence"


class CoverageError(ScenecfError, ValueError):
    category = "coverage"
