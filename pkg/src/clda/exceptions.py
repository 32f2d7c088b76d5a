class ConfigurationError(ValueError):
    """Invalid model or pipeline parameters."""
