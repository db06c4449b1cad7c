from fractions import Fraction
from typing import Any, Dict, FrozenSet, Tuple, Union

from pydantic import GetCoreSchemaHandler, GetJsonSchemaHandler
from pydantic_core import core_schema
from typing_extensions import Annotated, TypedDict

# Type aliases
Rational = Fraction
ElementId = int
ElementSet = FrozenSet[ElementId]
Profile = Tuple[ElementSet, ...]
ProfileKey = Tuple[Tuple[ElementId, ...], ...]
Utilities = Tuple[Fraction, ...]
Bids = Tuple[int, ...]
# Monte Carlo models answer with floats, exact models with Fractions
Value = Union[Fraction, float]


def parse_rational(value: Any) -> Fraction:
    """
    Parse a rational from its repository string form.

    Accepts "num/den", plain integers and finite decimal strings, as well as
    int and Fraction instances. Floats are rejected so that no binary rounding
    enters an exact computation.

    Raises:
        ValueError: If the value cannot be read as an exact rational
    """
    if isinstance(value, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational: {value!r}") from exc
    raise ValueError(f"expected a 'num/den' string, got {type(value).__name__}")


def format_rational(value: Fraction) -> str:
    """Serialize a rational as "num/den"."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


class _RationalAnnotation:
    """Pydantic hooks reading and writing rationals as "num/den" strings."""

    @classmethod
    def __get_pydantic_core_schema__(
        cls, source_type: Any, handler: GetCoreSchemaHandler
    ) -> core_schema.CoreSchema:
        return core_schema.no_info_plain_validator_function(
            parse_rational,
            serialization=core_schema.plain_serializer_function_ser_schema(format_rational),
        )

    @classmethod
    def __get_pydantic_json_schema__(
        cls, schema: core_schema.CoreSchema, handler: GetJsonSchemaHandler
    ) -> Dict[str, Any]:
        return {"type": "string", "pattern": r"^-?\d+(/\d+)?$", "examples": ["3/4"]}


RationalField = Annotated[Fraction, _RationalAnnotation]


class StepRecord(TypedDict):
    step_number: int
    item: str
    outcome: Any
    timestamp: str
