class ValidationError(ValueError):
    """Raised when an input fails a structural or range check.

    The CLI maps this to exit code 1; any other exception maps to 2.
    """
