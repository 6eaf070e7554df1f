from typing import Any, Iterable


def validate_number(x: Any, num_type: type, num_cl: str, name: str = "The parameter"):
    """
    Validates the type and sign class of a numeric parameter.

    Parameters:
    - x (Any): The value to check.
    - num_type (type): The expected numeric type (e.g., int, float). For float, integers are accepted too.
    - num_cl (str): The classification of the number, such as "positive", "non-negative" or "percentage"
      (0 < x <= 100).
    - name (str): The parameter name used in error messages.

    Raises:
    - TypeError: If the parameter is not of the specified numeric type.
    - ValueError: If the parameter does not match the specified classification.
    """
    accepted = (int, float) if num_type is float else (num_type,)
    if isinstance(x, bool) or not isinstance(x, accepted):
        raise TypeError(name + " should be of " + str(num_type) + ", got " + type(x).__name__ + ".")
    if num_cl == "positive" and x <= 0:
        raise ValueError(name + " should be positive, got " + str(x) + ".")
    elif num_cl == "non-negative" and x < 0:
        raise ValueError(name + " should be non-negative, got " + str(x) + ".")
    elif num_cl == "percentage" and not 0 < x <= 100:
        raise ValueError(name + " should lie in (0, 100], got " + str(x) + ".")


def validate_choice(x: Any, choices: Iterable[str], name: str = "The parameter"):
    """
    Checks that a string option is one of the supported values.

    Raises:
    - ValueError: If the option is not supported.
    """
    choices = list(choices)
    if x not in choices:
        raise ValueError(name + " " + repr(x) + " is not implemented, expected one of " + ", ".join(choices) + ".")
