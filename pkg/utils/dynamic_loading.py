"""Resolve classes from "package.module:ClassName" references."""

from __future__ import annotations

import importlib
import importlib.util
from types import ModuleType
from typing import Any


def verify_dynamic_loading_support(module_name: str) -> None:
    """Check that a module is importable without importing it.

    Raises:
        ModuleNotFoundError: If no module spec can be found.
    """
    try:
        module_spec = importlib.util.find_spec(module_name)
    except ModuleNotFoundError:
        module_spec = None
    if module_spec is None:
        raise ModuleNotFoundError(f'No module named "{module_name}" is importable from this environment.')


def split_reference(reference: str) -> tuple[str, str]:
    """Split "package.module:ClassName" into its module and attribute parts.

    Raises:
        ValueError: If the reference lacks exactly one colon or either part is empty.
    """
    if not isinstance(reference, str):
        raise TypeError(f"reference must be a string, got {type(reference).__name__}.")
    module_name, sep, class_name = reference.partition(":")
    if not sep or not module_name or not class_name or ":" in class_name:
        raise ValueError(f'Expected "package.module:ClassName", got "{reference}".')
    return module_name, class_name


def load_class(reference: str, base: type | None = None) -> type:
    """Import the module of `reference` and return the named class.

    Args:
        reference: "package.module:ClassName".
        base: Optional class the result must derive from.

    Raises:
        ModuleNotFoundError: If the module cannot be found.
        AttributeError: If the module has no such attribute.
        TypeError: If the attribute is not a class or not a subclass of `base`.
    """
    module_name, class_name = split_reference(reference)
    verify_dynamic_loading_support(module_name)
    module_obj: ModuleType = importlib.import_module(module_name)
    try:
        klass: Any = getattr(module_obj, class_name)
    except AttributeError:
        raise AttributeError(f"Class '{class_name}' not found in module '{module_name}'.") from None
    if not isinstance(klass, type):
        raise TypeError(f"'{reference}' is not a class.")
    if base is not None and not issubclass(klass, base):
        raise TypeError(f"'{reference}' does not derive from {base.__name__}.")
    return klass
