"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A scenario or training configuration is invalid."""


class DomainError(ValueError):
    """An input falls outside the mathematical domain of an operation."""


class ContractError(ValueError):
    """A caller violated an interface contract (shapes, indices, graph use)."""


class TrainingError(RuntimeError):
    """Training produced a non-finite quantity; carries diagnostics."""


class StatisticsError(ValueError):
    """A statistical routine received degenerate samples."""
